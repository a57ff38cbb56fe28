#include "renewlab/dynsys.hpp"

#include <algorithm>
#include <array>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "renewlab/error.hpp"
#include "renewlab/format.hpp"
#include "renewlab/kahan.hpp"
#include "renewlab/rng.hpp"

namespace renewlab {

namespace {

constexpr double kMinCellWidth = 1e-14;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Orbit in (cell j, relative position u in [0,1)) coordinates: x = d_j + u (d_{j-1} - d_j).
// Descents keep u; branch 1 sends x to u and re-encodes.
class Orbit {
 public:
  Orbit(const IntermittentMap& map, Sampler sampler, std::uint64_t seed)
      : map_(map), d_(map.breakpoints()), sampler_(sampler), rng_(seed) {
    jump(rng_.uniform());
  }

  void step() {
    if (j_ >= 2) {
      --j_;
      return;
    }
    jump(sampler_ == Sampler::FloatOrbit ? u_ : rng_.uniform());
  }

  void place(std::size_t j, double u) noexcept {
    j_ = j;
    u_ = u;
  }

  std::size_t cell() const noexcept { return j_; }
  double position() const noexcept { return u_; }
  std::size_t censored() const noexcept { return censored_; }

 private:
  void jump(double x) {
    const std::size_t j = map_.encode(x);
    if (sampler_ == Sampler::Symbolic) {
      j_ = j != 0 ? j : beyond(x);
      u_ = rng_.uniform();
      return;
    }
    if (j == 0 || j > map_.symbol_cap()) {
      ++censored_;
      j_ = j != 0 ? j : beyond(x);
      u_ = rng_.uniform();
      return;
    }
    const double w = d_[j - 1] - d_[j];
    double u = (x - d_[j]) / w;
    u += (rng_.uniform() - 0.5) * std::numeric_limits<double>::epsilon() / w;
    if (u < 0.0) u = -u;
    if (u >= 1.0) u = std::nextafter(1.0, 0.0) - (u - 1.0);
    j_ = j;
    u_ = std::clamp(u, 0.0, std::nextafter(1.0, 0.0));
  }

  // smallest j > K with tail(j) <= x
  std::size_t beyond(double x) const {
    const ReturnLaw& law = map_.chain().law();
    long long lo = static_cast<long long>(d_.size()) - 1, hi = 2 * lo + 1;
    x = std::max(x, std::numeric_limits<double>::min());
    while (law.tail(hi) > x && hi < (1LL << 60)) {
      lo = hi;
      hi *= 2;
    }
    while (hi - lo > 1) {
      const long long mid = lo + (hi - lo) / 2;
      (law.tail(mid) > x ? lo : hi) = mid;
    }
    return static_cast<std::size_t>(hi);
  }

  const IntermittentMap& map_;
  const std::vector<double>& d_;
  Sampler sampler_;
  SplitMix64 rng_;
  std::size_t j_ = 1;
  double u_ = 0.0;
  std::size_t censored_ = 0;
};

void check_options(const McOptions& o, std::size_t length) {
  if (o.batches < 2) throw MathError(ErrorCode::InvalidParameter, "at least 2 batches required");
  if (o.streams < 1) throw MathError(ErrorCode::InvalidParameter, "at least 1 stream required");
  if (length / o.streams < 2 * o.batches) {
    throw MathError(ErrorCode::InvalidParameter, "orbit too short for the requested batches");
  }
}

// Runs fn(stream, orbit, steps) for each stream, concurrently; orbits are burnt in.
template <typename Fn>
void for_streams(const IntermittentMap& map, std::size_t length, const McOptions& o, Fn&& fn) {
  auto run = [&](std::size_t s) {
    Orbit orbit(map, o.sampler, o.seed + s);
    for (std::size_t t = 0; t < o.burn_in; ++t) orbit.step();
    const std::size_t steps = length / o.streams + (s + 1 == o.streams ? length % o.streams : 0);
    fn(s, orbit, steps);
  };
  if (o.streams == 1) {
    run(0);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t s = 0; s < o.streams; ++s) pool.emplace_back(run, s);
  for (auto& t : pool) t.join();
}

double sample_sd(const std::vector<double>& xs) {
  KahanSum m;
  for (double x : xs) m += x;
  const double mean = m.value() / static_cast<double>(xs.size());
  KahanSum ss;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss.value() / static_cast<double>(xs.size() - 1));
}

// Weighted merge of per-stream estimates.
McEstimate merge(const std::vector<McEstimate>& parts, std::uint64_t seed) {
  double w = 0.0, m = 0.0, v = 0.0;
  std::size_t n = 0;
  for (const auto& e : parts) {
    const double wi = static_cast<double>(e.n_samples);
    w += wi;
    m += wi * e.mean;
    v += wi * wi * e.std_error * e.std_error;
    n += e.n_samples;
  }
  return {m / w, std::sqrt(v) / w, n, seed};
}

double stationary_pairing(const RenewalChain& chain, const Observable& u, double shift) {
  KahanSum acc;
  const auto pi = chain.pi();
  for (std::size_t j = 1; j <= pi.size(); ++j) acc += pi[j - 1] * (u(j) - shift);
  acc += (u.u_inf() - shift) * chain.pi_tail();
  return acc.value();
}

// Cell drawn from pi by inversion: P(J > j) = pi_1 (d_j + sum_{l>j} d_l).
class StationaryCells {
 public:
  explicit StationaryCells(const RenewalChain& chain) : chain_(chain), upper_(chain.truncation() + 1) {
    // upper_[j] = P(J > j)
    upper_[chain.truncation()] = chain.pi_tail();
    for (std::size_t j = chain.truncation(); j >= 1; --j) upper_[j - 1] = upper_[j] + chain.pi()[j - 1];
  }

  std::size_t draw(double u) const {
    // smallest j with P(J > j) <= u
    const auto it = std::partition_point(upper_.begin(), upper_.end(), [u](double q) { return q > u; });
    if (it != upper_.end()) return static_cast<std::size_t>(it - upper_.begin());
    const ReturnLaw& law = chain_.law();
    auto above = [&](long long j) { return chain_.pi1() * (law.tail(j) + law.second_tail(j)); };
    long long lo = static_cast<long long>(chain_.truncation()), hi = 2 * lo;
    u = std::max(u, std::numeric_limits<double>::min());
    while (above(hi) > u && hi < (1LL << 60)) {
      lo = hi;
      hi *= 2;
    }
    while (hi - lo > 1) {
      const long long mid = lo + (hi - lo) / 2;
      (above(mid) > u ? lo : hi) = mid;
    }
    return static_cast<std::size_t>(hi);
  }

 private:
  const RenewalChain& chain_;
  std::vector<double> upper_;
};

// Independent starts x ~ rho, each followed until entrance or n_max + 1 steps.
// Start draws use stream seed + streams + s; the orbits keep seed + s.
template <typename Hit>
void independent_entrance(const IntermittentMap& map, Hit&& hits, std::size_t n_max, std::size_t samples,
                          const McOptions& o, std::vector<std::vector<McEstimate>>& parts,
                          std::vector<std::size_t>& censored) {
  if (!map.chain().positive_recurrent()) {
    throw MathError(ErrorCode::PreconditionViolated, "no invariant probability on a null-recurrent chain");
  }
  const StationaryCells cells(map.chain());
  const std::size_t B = o.batches;
  McOptions no_burn = o;
  no_burn.burn_in = 0;
  for_streams(map, samples, no_burn, [&](std::size_t s, Orbit& orbit, std::size_t steps) {
    SplitMix64 starts(o.seed + o.streams + s);
    // cnt[b * n_max + n - 1] = #{starts in batch b with t_a > n}
    std::vector<double> cnt(B * n_max, 0.0), len(B, 0.0);
    for (std::size_t i = 0; i < steps; ++i) {
      const std::size_t b = i * B / steps;
      const std::size_t j = cells.draw(starts.uniform());
      orbit.place(j, starts.uniform());
      std::size_t ta = 1;
      for (; ta <= n_max; ++ta) {
        orbit.step();
        if (hits(orbit)) break;
      }
      len[b] += 1.0;
      for (std::size_t n = 1; n < ta; ++n) cnt[b * n_max + n - 1] += 1.0;
    }
    censored[s] = orbit.censored();
    for (std::size_t n = 1; n <= n_max; ++n) {
      std::vector<double> fb(B);
      KahanSum tot;
      for (std::size_t b = 0; b < B; ++b) {
        fb[b] = cnt[b * n_max + n - 1] / len[b];
        tot += cnt[b * n_max + n - 1];
      }
      parts[n - 1][s] = McEstimate{tot.value() / static_cast<double>(steps),
                                   sample_sd(fb) / std::sqrt(static_cast<double>(B)), steps, o.seed + s};
    }
  });
}

}  // namespace

std::size_t IntermittentMap::encode(double x) const {
  const auto it = std::partition_point(d_.begin() + 1, d_.end(), [x](double di) { return di > x; });
  return it == d_.end() ? 0 : static_cast<std::size_t>(it - d_.begin());
}

double IntermittentMap::branch_image(std::size_t i, double x) const {
  if (i < 1 || i > branches()) throw MathError(ErrorCode::InvalidParameter, "no such branch");
  if (i == 1) return (x - d_[1]) / alpha_[1];
  return d_[i - 1] + (x - d_[i]) / alpha_[i];
}

IntermittentMap build_map(const RenewalChain& chain) {
  const auto& p = chain.p();
  const auto& d = chain.d();
  std::size_t last = 0;
  for (std::size_t k = 1; k <= chain.truncation(); ++k) {
    if (p[k] > 0.0) last = k;
  }
  for (std::size_t k = 1; k < last; ++k) {
    if (p[k] <= 0.0) {
      throw MathError(ErrorCode::ZeroProbabilityBranch, "p_" + std::to_string(k) + " = 0 leaves branch " +
                                                            std::to_string(k) + " empty");
    }
  }
  if (last == 0) throw MathError(ErrorCode::ZeroProbabilityBranch, "no positive probabilities");

  IntermittentMap map;
  map.chain_ = &chain;
  map.d_.assign(d.coeffs().begin(), d.coeffs().begin() + static_cast<std::ptrdiff_t>(last) + 1);
  if (last == chain.truncation() && chain.p_tail() == 0.0) map.d_.back() = 0.0;
  map.alpha_.assign(last + 1, 0.0);
  map.alpha_[1] = p[1];
  for (std::size_t k = 2; k <= last; ++k) map.alpha_[k] = p[k] / p[k - 1];
  while (map.cap_ < last && map.d_[map.cap_] - map.d_[map.cap_ + 1] >= kMinCellWidth) ++map.cap_;

  if (std::abs(map.branch_image(1, 1.0) - 1.0) > 1e-12) {
    throw MathError(ErrorCode::PreconditionViolated, "branch 1 does not reach 1");
  }
  for (std::size_t i = 2; i <= map.cap_; ++i) {
    if (std::abs(map.branch_image(i, map.d_[i - 1]) - map.d_[i - 2]) > 1e-12) {
      throw MathError(ErrorCode::PreconditionViolated, "branch " + std::to_string(i) + " endpoint mismatch");
    }
  }
  return map;
}

double apply(const IntermittentMap& map, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw MathError(ErrorCode::OutOfDomain, "x must lie in [0, 1]");
  const std::size_t i = map.encode(x);
  if (i == 0) return x;
  return std::clamp(map.branch_image(i, x), 0.0, 1.0);
}

std::vector<std::size_t> orbit_symbols(const IntermittentMap& map, double x0, std::size_t n) {
  if (!(x0 > 0.0 && x0 <= 1.0)) throw MathError(ErrorCode::OutOfDomain, "x0 must lie in (0, 1]");
  std::vector<std::size_t> out;
  out.reserve(n + 1);
  double x = x0;
  for (std::size_t t = 0; t <= n; ++t) {
    const std::size_t i = map.encode(x);
    if (i == 0 || i > map.symbol_cap()) {
      throw MathError(ErrorCode::SymbolCapExceeded,
                      "orbit reached x = " + format_double(x) + " at step " + std::to_string(t) +
                          ", below the resolvable cell " + std::to_string(map.symbol_cap()));
    }
    out.push_back(i);
    if (t < n) x = std::clamp(map.branch_image(i, x), 0.0, 1.0);
  }
  return out;
}

std::vector<OrbitPoint> sample_orbit(const IntermittentMap& map, std::size_t length, const McOptions& options) {
  Orbit orbit(map, options.sampler, options.seed);
  for (std::size_t t = 0; t < options.burn_in; ++t) orbit.step();
  const auto& d = map.breakpoints();
  const ReturnLaw& law = map.chain().law();
  std::vector<OrbitPoint> out;
  out.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    const std::size_t j = orbit.cell();
    const double lo = j < d.size() ? d[j] : law.tail(static_cast<long long>(j));
    const double hi = j < d.size() ? d[j - 1] : law.tail(static_cast<long long>(j) - 1);
    out.push_back({j, lo + orbit.position() * (hi - lo)});
    orbit.step();
  }
  return out;
}

std::vector<McRow> mc_correlation(const IntermittentMap& map, const Observable& u, const Observable& v,
                                  const std::vector<long long>& n_list, std::size_t orbit_length,
                                  const McOptions& options) {
  check_options(options, orbit_length);
  for (long long n : n_list) {
    if (n < 0) throw MathError(ErrorCode::InvalidParameter, "lags must be >= 0");
  }
  const std::size_t lags = n_list.size();
  const std::size_t max_lag =
      n_list.empty() ? 0 : static_cast<std::size_t>(*std::max_element(n_list.begin(), n_list.end()));
  const std::size_t B = options.batches;

  std::vector<std::vector<McEstimate>> parts(lags, std::vector<McEstimate>(options.streams));
  std::vector<std::size_t> censored(options.streams, 0);

  for_streams(map, orbit_length, options, [&](std::size_t s, Orbit& orbit, std::size_t steps) {
    if (steps <= max_lag + B) throw MathError(ErrorCode::InvalidParameter, "orbit shorter than the largest lag");
    const std::size_t ring = max_lag + 1;
    std::vector<double> vbuf(ring, 0.0);
    // per batch: sums of u_t, v_t over all t; of u_t v_{t-n} and pair counts per lag
    std::vector<double> su(B, 0.0), sv(B, 0.0), len(B, 0.0);
    std::vector<double> suv(lags * B, 0.0), cnt(lags * B, 0.0);
    std::vector<double> acc(lags, 0.0);
    std::vector<double> acc_cnt(lags, 0.0);
    KahanSum bu, bv;
    std::size_t batch = 0, batch_start = 0;
    auto flush = [&](std::size_t t_end) {
      su[batch] = bu.value();
      sv[batch] = bv.value();
      len[batch] = static_cast<double>(t_end - batch_start);
      for (std::size_t k = 0; k < lags; ++k) {
        suv[k * B + batch] = acc[k];
        cnt[k * B + batch] = acc_cnt[k];
        acc[k] = 0.0;
        acc_cnt[k] = 0.0;
      }
      bu = KahanSum();
      bv = KahanSum();
    };
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t b = t * B / steps;
      if (b != batch) {
        flush(t);
        batch = b;
        batch_start = t;
      }
      const std::size_t j = orbit.cell();
      const double ut = u(j), vt = v(j);
      vbuf[t % ring] = vt;
      bu += ut;
      bv += vt;
      for (std::size_t k = 0; k < lags; ++k) {
        const auto n = static_cast<std::size_t>(n_list[k]);
        if (t >= n) {
          acc[k] += ut * vbuf[(t - n) % ring];
          acc_cnt[k] += 1.0;
        }
      }
      orbit.step();
    }
    flush(steps);
    censored[s] = orbit.censored();

    KahanSum tu, tv;
    for (std::size_t b = 0; b < B; ++b) {
      tu += su[b];
      tv += sv[b];
    }
    const double ubar = tu.value() / static_cast<double>(steps);
    const double vbar = tv.value() / static_cast<double>(steps);
    for (std::size_t k = 0; k < lags; ++k) {
      KahanSum tuv, tc;
      for (std::size_t b = 0; b < B; ++b) {
        tuv += suv[k * B + b];
        tc += cnt[k * B + b];
      }
      const double est = tuv.value() / tc.value() - ubar * vbar;
      std::vector<double> cb;
      for (std::size_t b = 0; b < B; ++b) {
        if (cnt[k * B + b] == 0.0) continue;
        cb.push_back(suv[k * B + b] / cnt[k * B + b] - (su[b] / len[b]) * vbar - ubar * (sv[b] / len[b]) +
                     ubar * vbar);
      }
      const double se = cb.size() >= 2 ? sample_sd(cb) / std::sqrt(static_cast<double>(cb.size())) : kNaN;
      parts[k][s] = McEstimate{est, se, static_cast<std::size_t>(tc.value()), options.seed + s};
    }
  });

  std::size_t total_censored = 0;
  for (auto c : censored) total_censored += c;
  std::vector<McRow> rows;
  for (std::size_t k = 0; k < lags; ++k) rows.push_back({n_list[k], merge(parts[k], options.seed), total_censored});
  return rows;
}

RateCurve exact_map_correlation(const RenewalChain& chain, const Observable& u, const Observable& v,
                                const std::vector<long long>& n_list) {
  if (!chain.positive_recurrent()) throw MathError(ErrorCode::PreconditionViolated, "chain is not positive recurrent");
  const std::size_t n = chain.truncation();
  if (v.values().size() > n || u.values().size() > n) {
    throw MathError(ErrorCode::TruncationTooSmall, "observable longer than the truncation");
  }
  for (std::size_t k = 1; k < n_list.size(); ++k) {
    if (n_list[k] <= n_list[k - 1]) throw MathError(ErrorCode::InvalidParameter, "lags must be increasing");
  }
  if (!n_list.empty() && n_list.front() < 0) throw MathError(ErrorCode::InvalidParameter, "lags must be >= 0");

  // With hats the initial vector pi v_hat has finite support and u_hat vanishes past its values.
  std::vector<double> start(v.values().size());
  for (std::size_t j = 1; j <= start.size(); ++j) start[j - 1] = chain.pi()[j - 1] * (v(j) - v.u_inf());
  std::vector<double> uh(u.values().size());
  for (std::size_t j = 1; j <= uh.size(); ++j) uh[j - 1] = u(j) - u.u_inf();
  const Observable u_hat(uh, 0.0);
  const double base = stationary_pairing(chain, u, u.u_inf()) * stationary_pairing(chain, v, v.u_inf());

  RateCurve curve;
  if (n_list.empty()) return curve;
  Evolver ev(chain, start, 0.0, static_cast<std::size_t>(n_list.back()));
  for (long long m : n_list) {
    ev.advance_to(static_cast<std::size_t>(m));
    curve.push(m, ev.pair(u_hat) - base, 0.0);
  }
  return curve;
}

double map_correlation_constant(const RenewalChain& chain, const Observable& u, const Observable& v) {
  const double d = chain.ergodic_degree();
  if (!std::isfinite(d)) throw MathError(ErrorCode::InfiniteDegree, "ergodic degree is infinite");
  if (d <= 0.0) throw MathError(ErrorCode::DegreeTooSmall, "ergodic degree must be positive");
  return stationary_pairing(chain, u, u.u_inf()) * stationary_pairing(chain, v, v.u_inf()) /
         (d * (d + 1.0) * chain.m1());
}

KacResult kac_check(const IntermittentMap& map, std::size_t orbit_length, const McOptions& options,
                    std::size_t bins) {
  check_options(options, orbit_length);
  if (bins < 1) throw MathError(ErrorCode::InvalidParameter, "at least one bin required");
  struct Part {
    std::size_t visits = 0, excursions = 0, total_return = 0, censored = 0;
    std::vector<std::size_t> hist;
  };
  std::vector<Part> parts(options.streams);
  for_streams(map, orbit_length, options, [&](std::size_t s, Orbit& orbit, std::size_t steps) {
    Part& part = parts[s];
    part.hist.assign(bins + 1, 0);
    long long last = -1;
    for (std::size_t t = 0; t < steps; ++t) {
      if (orbit.cell() == 1) {
        ++part.visits;
        if (last >= 0) {
          const auto r = static_cast<std::size_t>(static_cast<long long>(t) - last);
          ++part.excursions;
          part.total_return += r;
          ++part.hist[std::min(r, bins + 1) - 1];
        }
        last = static_cast<long long>(t);
      }
      orbit.step();
    }
    part.censored = orbit.censored();
  });

  KacResult out{};
  out.histogram.assign(bins + 1, 0);
  std::size_t visits = 0, total_return = 0;
  for (const auto& part : parts) {
    visits += part.visits;
    out.excursions += part.excursions;
    total_return += part.total_return;
    out.censored += part.censored;
    for (std::size_t k = 0; k <= bins; ++k) out.histogram[k] += part.hist[k];
  }
  out.rho_e = static_cast<double>(visits) / static_cast<double>(orbit_length);
  out.mean_return =
      out.excursions ? static_cast<double>(total_return) / static_cast<double>(out.excursions) : kNaN;
  out.product = out.rho_e * out.mean_return;

  const auto& p = map.chain().p();
  const double total = static_cast<double>(out.excursions);
  KahanSum chi;
  for (std::size_t k = 0; k <= bins; ++k) {
    const double prob = k < bins ? (k + 1 <= map.chain().truncation() ? p[k + 1] : map.chain().law().prob(k + 1))
                                 : map.chain().law().tail(static_cast<long long>(bins));
    const double expected = total * prob;
    if (expected > 0.0) {
      const double diff = static_cast<double>(out.histogram[k]) - expected;
      chi += diff * diff / expected;
    } else if (out.histogram[k] > 0) {
      chi += std::numeric_limits<double>::infinity();
    }
  }
  out.chi_square = chi.value();
  out.chi_square_quantile =
      boost::math::quantile(boost::math::chi_squared_distribution<double>(static_cast<double>(bins)), 0.999);
  return out;
}

EntranceTail entrance_tail(const IntermittentMap& map, double a, std::size_t n_max, std::size_t samples,
                           const McOptions& options, EntranceStarts starts) {
  if (!(a > 0.0 && a < 1.0)) throw MathError(ErrorCode::OutOfDomain, "a must lie in (0, 1)");
  if (n_max < 1) throw MathError(ErrorCode::InvalidParameter, "n_max must be >= 1");
  check_options(options, samples);
  const auto& d = map.breakpoints();
  // x >= a iff cell < k, or cell == k with relative position >= theta
  const std::size_t k = map.encode(a);
  const double theta = k == 0 ? 0.0 : (a - d[k]) / (d[k - 1] - d[k]);
  auto hits = [&](const Orbit& o) {
    const std::size_t j = o.cell();
    if (k == 0) return j <= map.branches();
    return j < k || (j == k && o.position() >= theta);
  };
  const std::size_t B = options.batches;
  const std::size_t W = n_max + 2;

  std::vector<std::vector<McEstimate>> parts(n_max, std::vector<McEstimate>(options.streams));
  std::vector<std::size_t> censored(options.streams, 0);
  if (starts == EntranceStarts::Independent) {
    independent_entrance(map, hits, n_max, samples, options, parts, censored);
  } else {
  for_streams(map, samples, options, [&](std::size_t s, Orbit& orbit, std::size_t steps) {
    // Between consecutive hits at times prev < h, start times t in [prev, h) have
    // t_a = h - t. The survival count #{t : t_a > n} is accumulated per batch as
    // c(n) = A(n) + n C(n) through difference arrays over n = 1..n_max.
    std::vector<double> dA(B * W, 0.0), dC(B * W, 0.0), len(B, 0.0);
    auto add = [&](std::size_t b, std::size_t lo_n, std::size_t hi_n, double c0, double c1) {
      if (lo_n > hi_n || lo_n > n_max) return;
      hi_n = std::min(hi_n, n_max);
      dA[b * W + lo_n] += c0;
      dA[b * W + hi_n + 1] -= c0;
      dC[b * W + lo_n] += c1;
      dC[b * W + hi_n + 1] -= c1;
    };
    // values v = h - t for t in [prev, e) run over [h - e + 1, h - prev]
    auto gap = [&](std::size_t prev, std::size_t e, std::size_t h) {
      const std::size_t b = prev * B / steps;
      const std::size_t lo = h - e + 1, hi = h - prev;
      len[b] += static_cast<double>(e - prev);
      add(b, 1, lo - 1, static_cast<double>(hi - lo + 1), 0.0);  // n < lo: every v exceeds n
      add(b, std::max<std::size_t>(lo, 1), hi - 1, static_cast<double>(hi), -1.0);  // lo <= n < hi: hi - n
    };
    std::size_t prev = 0;
    std::size_t t = 1;
    orbit.step();
    for (; prev < steps; ++t) {
      if (t >= steps + n_max + 1) {
        gap(prev, steps, t);  // lower bound on the entrance time; exceeds n_max for all t in range
        break;
      }
      if (hits(orbit)) {
        gap(prev, std::min(t, steps), t);
        prev = t;
      }
      orbit.step();
    }
    censored[s] = orbit.censored();

    for (std::size_t b = 0; b < B; ++b) {
      double acc_a = 0.0, acc_c = 0.0;
      for (std::size_t n = 1; n <= n_max; ++n) {
        acc_a += dA[b * W + n];
        acc_c += dC[b * W + n];
        dA[b * W + n] = acc_a + static_cast<double>(n) * acc_c;  // now the count c(n)
      }
    }
    for (std::size_t n = 1; n <= n_max; ++n) {
      std::vector<double> fb;
      KahanSum tot;
      for (std::size_t b = 0; b < B; ++b) {
        tot += dA[b * W + n];
        if (len[b] > 0.0) fb.push_back(dA[b * W + n] / len[b]);
      }
      const double se = fb.size() >= 2 ? sample_sd(fb) / std::sqrt(static_cast<double>(fb.size())) : kNaN;
      parts[n - 1][s] = McEstimate{tot.value() / static_cast<double>(steps), se, steps, options.seed + s};
    }
  });
  }

  std::size_t total_censored = 0;
  for (auto c : censored) total_censored += c;
  EntranceTail out{a, {}};
  for (std::size_t n = 1; n <= n_max; ++n) {
    out.rows.push_back({static_cast<long long>(n), merge(parts[n - 1], options.seed), total_censored});
  }
  return out;
}

SurvivalFit fit_survival(const EntranceTail& tail, long long n_lo, long long n_hi) {
  KahanSum sx, sl, sy;
  std::vector<std::array<double, 3>> pts;  // log n, n, log S
  for (const auto& row : tail.rows) {
    if (row.n < n_lo || row.n > n_hi || !(row.estimate.mean > 0.0)) continue;
    pts.push_back({std::log(static_cast<double>(row.n)), static_cast<double>(row.n), std::log(row.estimate.mean)});
  }
  SurvivalFit fit{kNaN, kNaN, pts.size()};
  if (pts.size() < 2) return fit;
  auto slope = [&](int col) {
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
      mx += p[col];
      my += p[2];
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : pts) {
      sxy += (p[col] - mx) * (p[2] - my);
      sxx += (p[col] - mx) * (p[col] - mx);
    }
    return sxy / sxx;
  };
  fit.power_slope = slope(0);
  fit.log_rate = slope(1);
  return fit;
}

std::vector<double> invariant_density(const RenewalChain& chain) {
  if (!chain.positive_recurrent()) throw MathError(ErrorCode::PreconditionViolated, "chain is not positive recurrent");
  const auto& p = chain.p();
  const auto& d = chain.d();
  std::vector<double> h;
  for (std::size_t i = 1; i <= chain.truncation() && p[i] > 0.0; ++i) h.push_back(chain.pi1() * d[i - 1] / p[i]);
  return h;
}

PfResiduals pf_check(const RenewalChain& chain, std::size_t n) {
  const auto h = invariant_density(chain);
  if (n < 2 || n > h.size()) throw MathError(ErrorCode::TruncationTooSmall, "need 2 <= n <= support of the density");
  const auto& p = chain.p();
  PfResiduals r{0.0, 0.0};
  // (h M)_j = h_1 M(1, j) + h_{j+1} M(j+1, j) = h_1 p_1 + h_{j+1} p_{j+1} / p_j
  for (std::size_t j = 1; j < n; ++j) {
    const double hm = h[0] * p[1] + h[j] * p[j + 1] / p[j];
    r.density = std::max(r.density, std::abs(hm - h[j - 1]));
  }
  // (M p)_1 = p_1 sum_j p_j, (M p)_i = (p_i / p_{i-1}) p_{i-1}
  KahanSum mass(chain.law().tail(static_cast<long long>(n)));
  for (std::size_t j = 1; j <= n; ++j) mass += p[j];
  r.adjoint = std::abs(p[1] * mass.value() - p[1]);
  for (std::size_t i = 2; i <= n; ++i) r.adjoint = std::max(r.adjoint, std::abs(p[i] / p[i - 1] * p[i - 1] - p[i]));
  return r;
}

FrequencyReport markov_frequency_check(const IntermittentMap& map, std::size_t orbit_length, std::size_t i_max,
                                       const McOptions& options) {
  check_options(options, orbit_length);
  if (i_max < 1) throw MathError(ErrorCode::InvalidParameter, "i_max must be >= 1");
  const std::size_t B = options.batches;
  struct Part {
    std::vector<std::size_t> trans;  // (i-1) * i_max + (j-1)
    std::vector<std::size_t> visits;
    std::vector<double> occ;  // b * i_max + (i-1)
    std::vector<double> len;
    std::size_t steps = 0, censored = 0;
  };
  std::vector<Part> parts(options.streams);
  for_streams(map, orbit_length, options, [&](std::size_t s, Orbit& orbit, std::size_t steps) {
    Part& part = parts[s];
    part.trans.assign(i_max * i_max, 0);
    part.visits.assign(i_max, 0);
    part.occ.assign(B * i_max, 0.0);
    part.len.assign(B, 0.0);
    part.steps = steps;
    std::size_t prev = orbit.cell();
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t b = t * B / steps;
      part.len[b] += 1.0;
      if (prev <= i_max) part.occ[b * i_max + prev - 1] += 1.0;
      orbit.step();
      const std::size_t next = orbit.cell();
      if (prev <= i_max) {
        ++part.visits[prev - 1];
        if (next <= i_max) ++part.trans[(prev - 1) * i_max + next - 1];
      }
      prev = next;
    }
    part.censored = orbit.censored();
  });

  FrequencyReport rep{};
  std::vector<std::size_t> trans(i_max * i_max, 0), visits(i_max, 0);
  for (const auto& part : parts) {
    for (std::size_t k = 0; k < trans.size(); ++k) trans[k] += part.trans[k];
    for (std::size_t k = 0; k < i_max; ++k) visits[k] += part.visits[k];
    rep.censored += part.censored;
  }
  const auto& chain = map.chain();
  for (std::size_t i = 1; i <= i_max; ++i) {
    for (std::size_t j = 1; j <= i_max; ++j) {
      const double exact = i == 1 ? chain.law().prob(static_cast<long long>(j)) : (j + 1 == i ? 1.0 : 0.0);
      const double nv = static_cast<double>(visits[i - 1]);
      FrequencyCell c{i, j, nv > 0 ? static_cast<double>(trans[(i - 1) * i_max + j - 1]) / nv : kNaN, exact,
                      nv > 0 ? std::sqrt(exact * (1.0 - exact) / nv) : kNaN, visits[i - 1]};
      rep.cells.push_back(c);
    }
  }
  for (std::size_t i = 1; i <= i_max; ++i) {
    std::vector<McEstimate> est;
    for (std::size_t s = 0; s < parts.size(); ++s) {
      const Part& part = parts[s];
      std::vector<double> fb(B);
      KahanSum tot;
      for (std::size_t b = 0; b < B; ++b) {
        fb[b] = part.occ[b * i_max + i - 1] / part.len[b];
        tot += part.occ[b * i_max + i - 1];
      }
      est.push_back({tot.value() / static_cast<double>(part.steps),
                     sample_sd(fb) / std::sqrt(static_cast<double>(B)), part.steps, options.seed + s});
    }
    rep.occupation.push_back({i, merge(est, options.seed), chain.pi_at(static_cast<long long>(i))});
  }
  return rep;
}

void write_csv(std::ostream& out, const std::vector<McRow>& rows) {
  out << "n,mean,stderr,censored\n";
  for (const auto& r : rows) {
    out << r.n << ',' << format_double(r.estimate.mean) << ',' << format_double(r.estimate.std_error) << ','
        << r.censored << '\n';
  }
}

}  // namespace renewlab
