#include "renewlab/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "renewlab/error.hpp"
#include "renewlab/format.hpp"
#include "renewlab/kahan.hpp"

namespace renewlab {

namespace {

void check_grid(const std::vector<long long>& grid) {
  if (grid.empty()) throw MathError(ErrorCode::InvalidParameter, "empty n grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] < 0) throw MathError(ErrorCode::InvalidParameter, "grid points must be >= 0");
    if (k > 0 && grid[k] <= grid[k - 1]) {
      throw MathError(ErrorCode::InvalidParameter, "grid must be strictly increasing");
    }
  }
}

void check_truncation(const RenewalChain& chain, const SignedDistribution& nu,
                      const std::vector<long long>& grid) {
  check_grid(grid);
  // prefix entries equal to c * pi_j are stationary and place no demand on N
  std::size_t support = nu.support();
  if (nu.stationary_scale() != 0.0) {
    const double c = nu.stationary_scale();
    while (support > 0 && std::abs(nu[support] - c * chain.pi_at(support)) <= 1e-15 * std::abs(c)) --support;
  }
  const auto need = 2 * static_cast<std::size_t>(grid.back()) + support;
  if (chain.truncation() < need) {
    throw MathError(ErrorCode::TruncationTooSmall,
                    "truncation " + std::to_string(chain.truncation()) + " below 2 max(n) + support = " +
                        std::to_string(need));
  }
}

double stationary_pairing(const RenewalChain& chain, const Observable& u) {
  KahanSum acc;
  const auto pi = chain.pi();
  for (std::size_t j = 1; j <= pi.size(); ++j) acc += pi[j - 1] * u(j);
  acc += u.u_inf() * chain.pi_tail();
  return acc.value();
}

// sup_{j>N} |u_j - u_inf| over values stored beyond the truncation.
double beyond_variation(const RenewalChain& chain, const Observable& u) {
  double m = 0.0;
  const auto vals = u.values();
  for (std::size_t j = chain.truncation() + 1; j <= vals.size(); ++j) {
    m = std::max(m, std::abs(vals[j - 1] - u.u_inf()));
  }
  return m;
}

}  // namespace

void RateCurve::push(long long n, double value, double bound) {
  n_grid.push_back(n);
  values.push_back(value);
  tail_bound.push_back(bound);
}

double RateCurve::at(long long n) const {
  auto it = std::lower_bound(n_grid.begin(), n_grid.end(), n);
  if (it == n_grid.end() || *it != n) {
    throw MathError(ErrorCode::InvalidParameter, "n = " + std::to_string(n) + " not on the grid");
  }
  return values[static_cast<std::size_t>(it - n_grid.begin())];
}

std::vector<long long> log_grid(long long lo, long long hi, int per_decade) {
  if (lo < 1 || hi < lo || per_decade < 1) {
    throw MathError(ErrorCode::InvalidParameter, "log grid needs 1 <= lo <= hi and per_decade >= 1");
  }
  std::set<long long> pts{lo, hi};
  const double step = 1.0 / per_decade;
  const double start = std::ceil(std::log10(static_cast<double>(lo)) * per_decade) / per_decade;
  for (double e = start; e <= std::log10(static_cast<double>(hi)) + 1e-12; e += step) {
    const auto n = std::llround(std::pow(10.0, e));
    if (n >= lo && n <= hi) pts.insert(n);
  }
  return {pts.begin(), pts.end()};
}

Evolver::Evolver(const RenewalChain& chain, std::vector<double> prefix, double stationary_scale,
                 std::size_t horizon, double unplaced)
    : chain_(chain),
      n_(chain.truncation()),
      horizon_(horizon),
      scale_(stationary_scale),
      unplaced_(unplaced) {
  if (prefix.size() > n_) {
    throw MathError(ErrorCode::TruncationTooSmall, "initial vector longer than the truncation");
  }
  if (scale_ != 0.0 && !chain.positive_recurrent()) {
    throw MathError(ErrorCode::PreconditionViolated, "no stationary profile on a null-recurrent chain");
  }
  x_.assign(n_, 0.0);
  std::copy(prefix.begin(), prefix.end(), x_.begin());
  const auto pi = chain.pi();
  for (std::size_t j = prefix.size(); j < n_; ++j) x_[j] = scale_ * pi[j];

  const ReturnLaw& law = chain.law();
  p_beyond_.resize(horizon_ + 1);
  for (std::size_t k = 0; k <= horizon_; ++k) p_beyond_[k] = law.prob(static_cast<long long>(n_ + 1 + k));
  if (scale_ != 0.0) {
    // pi_{N+1+k} = pi_1 d_{N+k}, d by backward recursion from d_{N+H}.
    std::vector<double> d(horizon_ + 1);
    d[horizon_] = law.tail(static_cast<long long>(n_ + horizon_));
    for (std::size_t k = horizon_; k > 0; --k) d[k - 1] = d[k] + p_beyond_[k - 1];
    d[0] = chain.d()[n_];
    pi_beyond_.resize(horizon_ + 1);
    for (std::size_t k = 0; k <= horizon_; ++k) pi_beyond_[k] = chain.pi1() * d[k];
  }
  tail_ = unplaced_ + scale_ * chain.pi_tail();
  tail_abs_ = std::abs(unplaced_) + std::abs(scale_) * chain.pi_tail();
  history_.reserve(horizon_);
}

Evolver::Evolver(const RenewalChain& chain, const SignedDistribution& nu, std::size_t horizon)
    : Evolver(chain, std::vector<double>(nu.weights().begin(), nu.weights().end()),
              nu.stationary_scale(), horizon, [&] {
                const double c = nu.stationary_scale();
                if (c == 0.0) return nu.tail_mass();
                KahanSum placed(c * chain.pi_tail());
                const auto pi = chain.pi();
                for (std::size_t j = nu.size(); j < pi.size(); ++j) placed += c * pi[j];
                return nu.tail_mass() - placed.value();
              }()) {}

void Evolver::step() {
  if (t_ >= horizon_) {
    throw MathError(ErrorCode::InvalidParameter, "evolution horizon " + std::to_string(horizon_) + " exceeded");
  }
  KahanSum inflow(scale_ != 0.0 ? scale_ * pi_beyond_[t_] : 0.0);
  KahanSum inflow_abs(scale_ != 0.0 ? std::abs(scale_) * pi_beyond_[t_] : 0.0);
  for (std::size_t s = 0; s < t_; ++s) {
    const double w = history_[s] * p_beyond_[t_ - 1 - s];
    inflow += w;
    inflow_abs += std::abs(w);
  }
  const double in = inflow.value();

  const auto& p = chain_.p();
  const double out1 = x_[0];
  for (std::size_t j = 0; j + 1 < n_; ++j) x_[j] = out1 * p[j + 1] + x_[j + 1];
  x_[n_ - 1] = out1 * p[n_] + in;

  tail_ += out1 * chain_.p_tail() - in;
  tail_abs_ = std::max(0.0, tail_abs_ + std::abs(out1) * chain_.p_tail() - inflow_abs.value());
  history_.push_back(out1);
  ++t_;
}

void Evolver::advance_to(std::size_t t) {
  while (t_ < t) step();
}

double Evolver::prefix_mass() const {
  KahanSum acc;
  for (double x : x_) acc += x;
  return acc.value();
}

double Evolver::distance() const {
  KahanSum acc;
  const auto pi = chain_.pi();
  for (std::size_t j = 0; j < n_; ++j) acc += std::abs(x_[j] - pi[j]);
  acc += std::abs(tail_ - chain_.pi_tail());
  return acc.value();
}

double Evolver::pair(const Observable& u) const {
  KahanSum acc;
  const auto vals = u.values();
  const std::size_t stored = std::min(vals.size(), n_);
  for (std::size_t j = 0; j < stored; ++j) acc += x_[j] * vals[j];
  if (u.u_inf() != 0.0) {
    for (std::size_t j = stored; j < n_; ++j) acc += x_[j] * u.u_inf();
    acc += u.u_inf() * tail_;
  }
  return acc.value();
}

SignedDistribution step(const RenewalChain& chain, const SignedDistribution& nu) {
  Evolver ev(chain, nu, 1);
  ev.step();
  const auto x = ev.state();
  return SignedDistribution(std::vector<double>(x.begin(), x.end()), ev.tail_mass());
}

RateCurve renewal_sequence(const RenewalChain& chain, std::size_t n_max) {
  if (n_max < 1) throw MathError(ErrorCode::InvalidParameter, "n_max must be >= 1");
  std::vector<double> p(n_max + 1, 0.0), e(n_max + 1, 0.0);
  for (std::size_t k = 1; k <= n_max; ++k) {
    p[k] = k <= chain.truncation() ? chain.p()[k] : chain.law().prob(static_cast<long long>(k));
  }
  e[0] = 1.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    KahanSum acc;
    for (std::size_t k = 1; k <= n; ++k) acc += p[k] * e[n - k];
    e[n] = acc.value();
  }
  RateCurve curve;
  for (std::size_t n = 0; n <= n_max; ++n) curve.push(static_cast<long long>(n), e[n]);
  return curve;
}

RateCurve distance_curve(const RenewalChain& chain, const SignedDistribution& nu,
                         const std::vector<long long>& n_grid) {
  check_truncation(chain, nu, n_grid);
  Evolver ev(chain, nu, static_cast<std::size_t>(n_grid.back()));
  RateCurve curve;
  for (long long n : n_grid) {
    ev.advance_to(static_cast<std::size_t>(n));
    curve.push(n, ev.distance(), ev.tail_abs());
  }
  return curve;
}

RateCurve correlation_curve(const RenewalChain& chain, const SignedDistribution& nu,
                            const Observable& u, const std::vector<long long>& n_grid) {
  check_truncation(chain, nu, n_grid);
  const double pi_u = stationary_pairing(chain, u);
  const double var = beyond_variation(chain, u);
  Evolver ev(chain, nu, static_cast<std::size_t>(n_grid.back()));
  RateCurve curve;
  for (long long n : n_grid) {
    ev.advance_to(static_cast<std::size_t>(n));
    curve.push(n, ev.pair(u) - pi_u, var * (ev.tail_abs() + chain.pi_tail()));
  }
  return curve;
}

RateCurve lemma2_ratio(const RenewalChain& chain, const std::vector<long long>& n_grid) {
  const double d = chain.ergodic_degree();
  if (std::isinf(d)) {
    throw MathError(ErrorCode::InfiniteDegree, "sharp ratio needs a finite ergodic degree");
  }
  if (!(d > 0.0)) throw MathError(ErrorCode::DegreeTooSmall, "sharp ratio needs degree > 0");
  check_grid(n_grid);
  const auto e = renewal_sequence(chain, static_cast<std::size_t>(std::max(1LL, n_grid.back())));
  const std::size_t n_trunc = chain.truncation();

  // E_n = sum_{l>n} d_l from the prefix plus the analytic remainder.
  std::vector<double> big_e(n_trunc + 1);
  double acc = chain.d_tail();
  for (std::size_t l = n_trunc + 1; l-- > 0;) {
    big_e[l] = acc;
    acc += chain.d()[l];
  }

  const double m1 = chain.m1();
  RateCurve curve;
  for (long long n : n_grid) {
    const double en = static_cast<std::size_t>(n) <= n_trunc ? big_e[static_cast<std::size_t>(n)]
                                                               : chain.law().second_tail(n);
    curve.push(n, m1 * m1 * (e.values[static_cast<std::size_t>(n)] - chain.pi1()) / en);
  }
  return curve;
}

RateFit rate_fit(const RateCurve& curve, long long n_lo, long long n_hi) {
  KahanSum sx, sy, sxx, sxy;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const long long n = curve.n_grid[k];
    if (n < n_lo || n > n_hi) continue;
    const double a = std::abs(curve.values[k]);
    if (!(a > 0.0) || !std::isfinite(a) || n <= 0) {
      throw MathError(ErrorCode::ZeroValueInWindow, "|a_n| = 0 at n = " + std::to_string(n));
    }
    pts.emplace_back(std::log(static_cast<double>(n)), std::log(a));
  }
  if (pts.size() < 2) throw MathError(ErrorCode::InvalidParameter, "fit window holds fewer than 2 points");
  const double m = static_cast<double>(pts.size());
  for (auto [x, y] : pts) {
    sx += x;
    sy += y;
  }
  const double mx = sx.value() / m, my = sy.value() / m;
  for (auto [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  RateFit fit{};
  fit.exponent = sxy.value() / sxx.value();
  fit.intercept = my - fit.exponent * mx;
  KahanSum rss;
  for (auto [x, y] : pts) {
    const double r = y - (fit.intercept + fit.exponent * x);
    rss += r * r;
  }
  fit.rms_residual = std::sqrt(rss.value() / m);
  fit.n_lo = n_lo;
  fit.n_hi = n_hi;
  fit.points = pts.size();
  return fit;
}

Theorem2Constant theorem2_constant(const RenewalChain& chain, const SignedDistribution& nu,
                                   const Observable& u, const std::vector<long long>& n_grid) {
  if (u.u_inf() != 0.0) {
    throw MathError(ErrorCode::PreconditionViolated, "u must vanish at infinity (u_inf = " +
                                                         format_double(u.u_inf()) + ")");
  }
  if (nu.stationary_scale() != 0.0 || nu.tail_mass() != 0.0) {
    throw MathError(ErrorCode::PreconditionViolated, "nu must be o(pi); give it finite support");
  }
  const double d = chain.ergodic_degree();
  if (std::isinf(d)) throw MathError(ErrorCode::InfiniteDegree, "constant needs a finite ergodic degree");
  if (!(d > 0.0)) throw MathError(ErrorCode::DegreeTooSmall, "constant needs degree > 0");

  Theorem2Constant out;
  const auto corr = correlation_curve(chain, nu, u, n_grid);
  for (std::size_t k = 0; k < corr.size(); ++k) {
    const double n = static_cast<double>(corr.n_grid[k]);
    const double scale = std::pow(n, d) / chain.law().slowly_varying(n);
    out.empirical.push(corr.n_grid[k], corr.values[k] * scale, corr.tail_bound[k] * scale);
  }
  out.predicted = stationary_pairing(chain, u) * nu.total() / (d * (d + 1.0) * chain.m1());
  return out;
}

RateCurve null_recurrent_ratio(const RenewalChain& chain, const SignedDistribution& nu,
                               const Observable& u, const std::vector<long long>& n_grid) {
  if (chain.positive_recurrent()) {
    throw MathError(ErrorCode::NotNullRecurrent, "chain is positive recurrent");
  }
  if (u.u_inf() != 0.0) {
    throw MathError(ErrorCode::DivergentPairing, "u . v diverges: u_inf != 0 and sum d_n = inf");
  }
  if (nu.stationary_scale() != 0.0 || nu.tail_mass() != 0.0) {
    throw MathError(ErrorCode::PreconditionViolated, "nu must have finite support");
  }
  check_truncation(chain, nu, n_grid);

  KahanSum uv;
  const auto vals = u.values();
  for (std::size_t j = 1; j <= vals.size(); ++j) {
    uv += vals[j - 1] * (j - 1 <= chain.truncation() ? chain.d()[j - 1]
                                                     : chain.law().tail(static_cast<long long>(j - 1)));
  }
  const double norm = nu.total() * uv.value();

  const auto horizon = static_cast<std::size_t>(n_grid.back());
  Evolver ev(chain, nu, horizon);
  Evolver renewal(chain, SignedDistribution::point_mass(1), horizon);
  RateCurve curve;
  for (long long n : n_grid) {
    ev.advance_to(static_cast<std::size_t>(n));
    renewal.advance_to(static_cast<std::size_t>(n));
    curve.push(n, ev.pair(u) / (norm * renewal.state()[0]), 0.0);
  }
  return curve;
}

std::vector<NonuniformityRow> nonuniformity_probe(const RenewalChain& chain,
                                                  const std::vector<std::size_t>& states,
                                                  std::size_t n) {
  if (!chain.positive_recurrent()) {
    throw MathError(ErrorCode::PreconditionViolated, "distance to pi needs a positive-recurrent chain");
  }
  std::vector<std::size_t> times;
  for (std::size_t i : states) {
    if (i < 1) throw MathError(ErrorCode::InvalidParameter, "states are numbered from 1");
    if (i <= n) times.push_back(n - i + 1);
  }
  std::sort(times.begin(), times.end());

  std::vector<double> at_time(n + 2, 0.0);
  if (!times.empty()) {
    if (chain.truncation() < 2 * times.back() + 1) {
      throw MathError(ErrorCode::TruncationTooSmall, "truncation below 2 n + 1");
    }
    Evolver ev(chain, SignedDistribution::point_mass(1), times.back());
    for (std::size_t t : times) {
      ev.advance_to(t);
      at_time[t] = ev.distance();
    }
  }

  std::vector<NonuniformityRow> rows;
  for (std::size_t i : states) {
    // delta_i P^n = delta_{i-n} for i > n; otherwise delta_1 P^{n-i+1}.
    const double dist = i > n ? 2.0 * (1.0 - chain.pi_at(static_cast<long long>(i - n))) : at_time[n - i + 1];
    rows.push_back({i, dist});
  }
  return rows;
}

void write_csv(std::ostream& out, const RateCurve& curve) {
  out << "n,value,tail_bound\n";
  for (std::size_t k = 0; k < curve.size(); ++k) {
    out << curve.n_grid[k] << ',' << format_double(curve.values[k]) << ','
        << format_double(curve.tail_bound[k]) << '\n';
  }
}

}  // namespace renewlab
