#pragma once

// Return-time laws p = (p_1, p_2, ...) of the renewal chain. Each family knows
// its own tails analytically so that truncated computations can account for
// the mass they do not store.

#include <cstddef>
#include <string>
#include <vector>

namespace renewlab {

enum class LawKind { Geometric, ZetaTail, Finite, Custom };

std::string to_string(LawKind kind);

class ReturnLaw {
 public:
  /// p_n = (1 - q) q^{n-1}, 0 < q < 1.
  static ReturnLaw geometric(double q);

  /// p_n = n^{-(degree+2)} (log(n+1))^{log_power} / Z with degree > -1 and
  /// log_power >= 0. Z is obtained from partial sums to 1e7 plus an
  /// Euler-Maclaurin tail and cached process-wide.
  static ReturnLaw zeta_tail(double degree, double log_power = 0.0);

  /// Explicit p_1..p_K summing to 1 within 1e-10; zero beyond K.
  static ReturnLaw finite(std::vector<double> probs);

  /// Explicit normalized prefix with a declared tail exponent s (p_n ~ n^{-s}),
  /// s > 1 or +inf. The declaration drives every finiteness decision.
  static ReturnLaw custom(std::vector<double> probs, double tail_exponent);

  LawKind kind() const noexcept { return kind_; }

  /// p_n for any n >= 1 (0 for n < 1).
  double prob(long long n) const;

  /// d_n = sum_{i>n} p_i for any n >= 0.
  double tail(long long n) const;

  /// e_n = sum_{l>n} d_l; +inf when the mean return time is infinite.
  double second_tail(long long n) const;

  /// m_1 = sum n p_n (= sum_n d_n); +inf for null-recurrent laws.
  double mean() const;

  /// Ergodic degree: +inf for geometric and finite laws.
  double degree() const;

  /// Declared decay exponent s of p_n (+inf for light tails).
  double tail_exponent() const;

  /// Slowly varying factor L(n) with p_n ~ n^{-(d+2)} L(n); for the zeta
  /// family this is (log(n+1))^beta / Z, normalizer included. NaN otherwise.
  double slowly_varying(double n) const;

  /// Estimate of sum_{k>n} k^gamma p_k; +inf when the declared tail makes it
  /// diverge.
  double moment_tail(double gamma, long long n) const;

  double q() const noexcept { return q_; }
  double log_power() const noexcept { return beta_; }
  const std::vector<double>& explicit_probs() const noexcept { return probs_; }

  std::string describe() const;

 private:
  ReturnLaw() = default;

  LawKind kind_ = LawKind::Finite;
  double q_ = 0.0;                // geometric
  double degree_ = 0.0;           // zeta
  double beta_ = 0.0;             // zeta
  double norm_ = 1.0;             // zeta normalizer Z
  double mean_ = 0.0;
  double tail_exponent_ = 0.0;    // custom declaration
  std::vector<double> probs_;     // finite / custom, probs_[n-1] = p_n
  std::vector<double> tails_;     // finite / custom, tails_[n] = d_n
};

/// sum_{n >= a} n^{-sigma} (log(n+1))^beta for sigma > 1: direct summation of
/// `direct_terms` terms followed by an Euler-Maclaurin remainder.
double power_log_tail_sum(double sigma, double beta, long long a, long long direct_terms);

}  // namespace renewlab
