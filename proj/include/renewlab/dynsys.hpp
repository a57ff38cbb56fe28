#pragma once

// The piecewise-affine intermittent map coded by the renewal chain, Monte Carlo
// estimators along its orbits, and the locally constant transfer operator.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "renewlab/chain.hpp"
#include "renewlab/distribution.hpp"
#include "renewlab/evolve.hpp"

namespace renewlab {

/// Branch 1 maps [d_1, 1] onto [0, 1]; branch i >= 2 maps [d_i, d_{i-1}) onto
/// [d_{i-1}, d_{i-2}) with slope 1 / alpha_i, alpha_i = p_i / p_{i-1}.
class IntermittentMap {
 public:
  const RenewalChain& chain() const noexcept { return *chain_; }
  /// d_0 = 1 > d_1 > ... > d_K, K = branches().
  const std::vector<double>& breakpoints() const noexcept { return d_; }
  const std::vector<double>& slopes() const noexcept { return alpha_; }  // alpha_0 unused
  std::size_t branches() const noexcept { return d_.size() - 1; }
  /// Deepest partition index whose cell is at least 1e-14 wide.
  std::size_t symbol_cap() const noexcept { return cap_; }

  /// Cell index i with d_i <= x < d_{i-1} (x in [d_1, 1] gives 1); 0 when x < d_K.
  std::size_t encode(double x) const;
  /// Branch i formula at x, without locating x.
  double branch_image(std::size_t i, double x) const;

 private:
  friend IntermittentMap build_map(const RenewalChain& chain);
  const RenewalChain* chain_ = nullptr;
  std::vector<double> d_;
  std::vector<double> alpha_;
  std::size_t cap_ = 0;
};

/// ZeroProbabilityBranch when some p_i = 0 precedes a positive p_j.
IntermittentMap build_map(const RenewalChain& chain);

/// f(x); x = d_i belongs to branch i. Points below the last breakpoint are
/// returned unchanged (they sit at the neutral fixed point to within d_K).
double apply(const IntermittentMap& map, double x);

/// Cells visited by x0, f(x0), ..., f^n(x0). SymbolCapExceeded past the cap.
std::vector<std::size_t> orbit_symbols(const IntermittentMap& map, double x0, std::size_t n);

enum class Sampler {
  FloatOrbit,  // dithered orbit of the map in (cell, relative position) coordinates
  Symbolic,    // chain path with return lengths drawn from p
};

struct McOptions {
  std::uint64_t seed = 1;
  std::size_t burn_in = 10000;
  std::size_t batches = 100;
  std::size_t streams = 1;
  Sampler sampler = Sampler::FloatOrbit;
};

struct McEstimate {
  double mean;
  double std_error;
  std::size_t n_samples;
  std::uint64_t seed;
};

struct McRow {
  long long n;
  McEstimate estimate;
  std::size_t censored;
};

struct OrbitPoint {
  std::size_t cell;
  double x;
};

/// One burnt-in stream (seed options.seed) of the sampler, `length` points.
/// x is rebuilt from the cell and the relative position inside it.
std::vector<OrbitPoint> sample_orbit(const IntermittentMap& map, std::size_t length, const McOptions& options = {});

/// rho(u o f^n . v) - rho(u) rho(v) by time averages; stderr by batch means.
std::vector<McRow> mc_correlation(const IntermittentMap& map, const Observable& u, const Observable& v,
                                  const std::vector<long long>& n_list, std::size_t orbit_length,
                                  const McOptions& options = {});

/// (pi v P^n - (pi . v) pi) . u, computed exactly by evolution.
RateCurve exact_map_correlation(const RenewalChain& chain, const Observable& u, const Observable& v,
                                const std::vector<long long>& n_list);

/// (pi . u_hat)(pi . v_hat) / (d (d+1) m_1), u_hat = u - u_inf: the chain's
/// correlation constant with initial law pi v_hat / (pi . v_hat), scaled by pi . v_hat.
double map_correlation_constant(const RenewalChain& chain, const Observable& u, const Observable& v);

struct KacResult {
  double rho_e;
  double mean_return;
  double product;
  std::size_t excursions;
  std::vector<std::size_t> histogram;  // [k-1] counts return time k for k <= bins; last entry: > bins
  double chi_square;
  double chi_square_quantile;  // 0.999 quantile, df = bins
  std::size_t censored;
};

KacResult kac_check(const IntermittentMap& map, std::size_t orbit_length, const McOptions& options = {},
                    std::size_t bins = 10);

enum class EntranceStarts {
  LongOrbit,    // every point of one stationary orbit is a start
  Independent,  // i.i.d. starts from rho: cell drawn from pi, uniform position inside it
};

struct EntranceTail {
  double a;
  std::vector<McRow> rows;  // n = 1..n_max, estimate of rho{t_a > n}
};

/// t_a(x) = min{n >= 1 : f^n(x) >= a} over rho-distributed starts. Along one
/// orbit, rare deep excursions dominate the tail and its variance; independent
/// starts give binomial errors at every n.
EntranceTail entrance_tail(const IntermittentMap& map, double a, std::size_t n_max, std::size_t samples,
                           const McOptions& options = {}, EntranceStarts starts = EntranceStarts::LongOrbit);

struct SurvivalFit {
  double power_slope;  // slope of log S against log n
  double log_rate;     // slope of log S against n
  std::size_t points;
};

/// Fits over positive survival values with n_lo <= n <= n_hi; NaN slopes with < 2 points.
SurvivalFit fit_survival(const EntranceTail& tail, long long n_lo, long long n_hi);

/// h_i = pi_1 d_{i-1} / p_i for i = 1..N (density of the invariant measure on A_i).
std::vector<double> invariant_density(const RenewalChain& chain);

struct PfResiduals {
  double density;  // max_{j<N} |(h M)_j - h_j|
  double adjoint;  // max_i |(M p)_i - p_i|, row 1 closed with the tail of p
};

/// M(i, j) = (p_i / p_j) P(i, j) on the first n states.
PfResiduals pf_check(const RenewalChain& chain, std::size_t n);

struct FrequencyCell {
  std::size_t i;
  std::size_t j;
  double empirical;
  double exact;
  double std_error;  // binomial, from the exact value
  std::size_t visits;
};

struct OccupationRow {
  std::size_t i;
  McEstimate estimate;
  double exact;
};

struct FrequencyReport {
  std::vector<FrequencyCell> cells;  // i, j <= i_max
  std::vector<OccupationRow> occupation;
  std::size_t censored;
};

FrequencyReport markov_frequency_check(const IntermittentMap& map, std::size_t orbit_length, std::size_t i_max,
                                       const McOptions& options = {});

/// CSV with header `n,mean,stderr,censored`.
void write_csv(std::ostream& out, const std::vector<McRow>& rows);

}  // namespace renewlab
