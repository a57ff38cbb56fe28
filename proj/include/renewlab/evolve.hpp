#pragma once

// Exact evolution nu P^n on the truncated renewal chain, the renewal sequence
// p_11^n, rate curves and log-log fits.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "renewlab/chain.hpp"
#include "renewlab/distribution.hpp"

namespace renewlab {

struct RateCurve {
  std::vector<long long> n_grid;
  std::vector<double> values;
  std::vector<double> tail_bound;  // same length as values; zero when not applicable

  void push(long long n, double value, double bound = 0.0);
  std::size_t size() const noexcept { return values.size(); }
  double at(long long n) const;  // value at grid point n; throws if absent
};

struct RateFit {
  double exponent;
  double intercept;
  long long n_lo;
  long long n_hi;
  double rms_residual;
  std::size_t points;
};

/// Integers rounded from 10^(k / per_decade) within [lo, hi], deduplicated.
std::vector<long long> log_grid(long long lo, long long hi, int per_decade = 20);

/// Row-vector evolution x(t+1) = x(t) P on states 1..N.
///
/// Mass that leaves the prefix through row 1 lands at a known state k > N and
/// re-enters at N after k - N - 1 descents, so the prefix stays exact: the
/// inflow into N at time t is c pi_{N+1+t} + sum_{s<t} x_1(s) p_{N+t-s}.
/// Initial mass beyond N is c * pi plus an `unplaced` amount whose location is
/// unknown; the latter never re-enters and is carried in the tail.
class Evolver {
 public:
  Evolver(const RenewalChain& chain, std::vector<double> prefix, double stationary_scale,
          std::size_t horizon, double unplaced = 0.0);
  Evolver(const RenewalChain& chain, const SignedDistribution& nu, std::size_t horizon);

  void step();
  void advance_to(std::size_t t);

  std::size_t time() const noexcept { return t_; }
  std::span<const double> state() const noexcept { return x_; }  // x_1..x_N at index 0..N-1
  double tail_mass() const noexcept { return tail_; }
  /// Bound on sum_{j>N} |x_j|; equals tail_mass() for nonnegative data.
  double tail_abs() const noexcept { return tail_abs_; }
  double unplaced() const noexcept { return unplaced_; }
  double prefix_mass() const;

  /// sum_{j<=N} |x_j - pi_j| + |tail - pi_tail|.
  double distance() const;
  /// sum_{j<=N} x_j u_j + u_inf * tail, before subtracting any stationary term.
  double pair(const Observable& u) const;

 private:
  const RenewalChain& chain_;
  std::size_t n_;
  std::size_t horizon_;
  std::size_t t_ = 0;
  double scale_;
  double unplaced_;
  double tail_ = 0.0;
  double tail_abs_ = 0.0;
  std::vector<double> x_;
  std::vector<double> history_;    // x_1(s), s < t
  std::vector<double> p_beyond_;   // p_{N+1+k}
  std::vector<double> pi_beyond_;  // pi_{N+1+k}
};

/// One step of nu P; the returned tail mass has no declared profile.
SignedDistribution step(const RenewalChain& chain, const SignedDistribution& nu);

/// e_n = p_11^n for n = 0..n_max by e_n = sum_{k=1}^n p_k e_{n-k}.
RateCurve renewal_sequence(const RenewalChain& chain, std::size_t n_max);

/// ||nu P^n - pi||_1; tail_bound is the mass beyond N, whose per-state
/// placement is aggregated into one cell.
RateCurve distance_curve(const RenewalChain& chain, const SignedDistribution& nu,
                         const std::vector<long long>& n_grid);

/// (nu P^n - pi) . u
RateCurve correlation_curve(const RenewalChain& chain, const SignedDistribution& nu,
                            const Observable& u, const std::vector<long long>& n_grid);

/// m_1^2 (p_11^n - pi_1) / E_n with E_n = sum_{l>n} d_l.
RateCurve lemma2_ratio(const RenewalChain& chain, const std::vector<long long>& n_grid);

/// Least squares of log|a_n| on log n over grid points with n_lo <= n <= n_hi.
RateFit rate_fit(const RateCurve& curve, long long n_lo, long long n_hi);

struct Theorem2Constant {
  RateCurve empirical;  // ((nu P^n - pi) . u) n^d / L(n)
  double predicted;     // (pi . u)(nu . 1) / (d (d+1) m_1)
};

/// L(n) is the slowly varying factor of p_n = n^{-(d+2)} L(n), normalizer included.
Theorem2Constant theorem2_constant(const RenewalChain& chain, const SignedDistribution& nu,
                                   const Observable& u, const std::vector<long long>& n_grid);

/// nu P^n . u / ((nu . 1)(u . v) p_11^n) with v_n = d_{n-1}, null-recurrent chains.
RateCurve null_recurrent_ratio(const RenewalChain& chain, const SignedDistribution& nu,
                               const Observable& u, const std::vector<long long>& n_grid);

struct NonuniformityRow {
  std::size_t state;
  double distance;
};

/// ||delta_i P^n - pi||_1 for each i; delta_i P^n = delta_{i-n} when i > n.
std::vector<NonuniformityRow> nonuniformity_probe(const RenewalChain& chain,
                                                  const std::vector<std::size_t>& states,
                                                  std::size_t n);

/// CSV with header `n,value,tail_bound`.
void write_csv(std::ostream& out, const RateCurve& curve);

}  // namespace renewlab
