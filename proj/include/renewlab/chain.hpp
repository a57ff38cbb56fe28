#pragma once

// The renewal chain on {1, 2, ...}: row 1 of P is the return law p, row i >= 2
// moves deterministically to i - 1. Stationary law pi_n = pi_1 d_{n-1}.

#include <cstddef>
#include <span>
#include <vector>

#include "renewlab/distribution.hpp"
#include "renewlab/return_law.hpp"
#include "renewlab/series.hpp"

namespace renewlab {

enum class Recurrence { PositiveRecurrent, NullRecurrent };

class RenewalChain {
 public:
  const ReturnLaw& law() const noexcept { return law_; }
  std::size_t truncation() const noexcept { return n_; }

  /// p_0 = 0, p_1..p_N.
  const TruncatedSeries& p() const noexcept { return p_; }
  /// d_0 = 1, d_1..d_N.
  const TruncatedSeries& d() const noexcept { return d_; }

  /// sum_{n>N} p_n (= d_N).
  double p_tail() const noexcept { return d_[n_]; }
  /// sum_{n>N} d_n; +inf for null-recurrent chains.
  double d_tail() const noexcept { return d_tail_; }

  double m1() const noexcept { return m1_; }
  double pi1() const noexcept { return pi1_; }
  /// pi_1..pi_N stored at index 0..N-1 (all zero when null recurrent).
  std::span<const double> pi() const noexcept { return pi_; }
  /// pi_i for any i >= 1, from the law's analytic tail beyond the prefix.
  double pi_at(long long i) const;
  /// sum_{i>N} pi_i = pi_1 (d_N + sum_{k>N} d_k).
  double pi_tail() const noexcept { return pi_tail_; }

  Recurrence classification() const noexcept { return recurrence_; }
  bool positive_recurrent() const noexcept { return recurrence_ == Recurrence::PositiveRecurrent; }
  double ergodic_degree() const noexcept { return law_.degree(); }

 private:
  friend RenewalChain build_chain(ReturnLaw law, std::size_t truncation);
  RenewalChain(ReturnLaw law, std::size_t n) : law_(std::move(law)), n_(n),
      p_(TruncatedSeries::zeros(n)), d_(TruncatedSeries::zeros(n)) {}

  ReturnLaw law_;
  std::size_t n_;
  TruncatedSeries p_;
  TruncatedSeries d_;
  double d_tail_ = 0.0;
  double m1_ = 0.0;
  double pi1_ = 0.0;
  double pi_tail_ = 0.0;
  std::vector<double> pi_;
  Recurrence recurrence_ = Recurrence::PositiveRecurrent;
};

RenewalChain build_chain(ReturnLaw law, std::size_t truncation);

struct FirstPassageLaw {
  std::size_t source;
  std::size_t target;
  TruncatedSeries series;   // f^n_{ij}, n = 0..N
  double missing_mass;      // 1 - sum_n f^n_{ij}
  double tail_estimate;     // sum_{n>N} f^n_{ij}; the full law is proper, so this is the missing mass
};

/// First-passage law from i to j: descent for i > j, series division for j >= i.
/// Throws TruncationTooSmall when more than `tolerance` of the mass is missing.
FirstPassageLaw first_passage(const RenewalChain& chain, std::size_t i, std::size_t j,
                              std::size_t n, double tolerance = 1e-3);

struct MomentValue {
  double value;
  double gamma;
  double tail_estimate;
  bool finite_flag;
};

/// M^{(gamma)}_{ij} = sum_{n<=N} n^gamma f^n_{ij}.
MomentValue moment(const RenewalChain& chain, std::size_t i, std::size_t j, double gamma,
                   std::size_t n, double tolerance = 1e-3);

struct MomentIdentity {
  double lhs;
  double rhs;
  double gap;  // |lhs - rhs| / |rhs|
};

/// Second-moment identity M^{(2)}_{ii} = (pi_1/pi_i)(M^{(2)}_{11} + 2 sum_{n<i} n p_n / pi_i).
MomentIdentity moment_identity_check(const RenewalChain& chain, std::size_t i, std::size_t n);

struct POrder {
  double order;               // inf over reference states
  double order_at_reference;  // at the requested state i
  bool boundary;              // declared tails sit exactly on the finiteness boundary
};

/// P-order of nu from declared tail exponents.
POrder p_order(const RenewalChain& chain, const SignedDistribution& nu, std::size_t i);

struct Lemma1Probe {
  std::vector<double> partial_a;  // A_n = sum_{m<=n} m^{gamma+1} f^m_{ii}
  std::vector<double> partial_b;  // B_n = sum_{l<=n, l!=i} pi_l M^{(gamma)}_{li}
  bool a_finite;
  bool b_finite;
  bool codivergence_flag;
};

Lemma1Probe lemma1_probe(const RenewalChain& chain, double gamma, std::size_t i, std::size_t n);

}  // namespace renewlab
