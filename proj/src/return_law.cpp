#include "renewlab/return_law.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <utility>

#include "renewlab/error.hpp"
#include "renewlab/format.hpp"
#include "renewlab/kahan.hpp"

namespace renewlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr long long kNormalizerTerms = 10'000'000;
constexpr long long kTailTerms = 20'000;

double power_log(double x, double sigma, double beta) {
  const double base = std::pow(x, -sigma);
  return beta == 0.0 ? base : base * std::pow(std::log(x + 1.0), beta);
}

// int_K^inf x^{-sigma} (log(x+1))^beta dx
double power_log_integral(double sigma, double beta, double k) {
  if (beta == 0.0) return std::pow(k, 1.0 - sigma) / (sigma - 1.0);
  boost::math::quadrature::exp_sinh<double> integrator;
  auto f = [&](double x) { return power_log(x, sigma, beta); };
  return integrator.integrate(f, k, kInf);
}

struct ZetaConstants {
  double z0;  // sum n^{-s} L
  double z1;  // sum n^{1-s} L, +inf when divergent
};

ZetaConstants zeta_constants(double s, double beta) {
  static std::mutex mutex;
  static std::map<std::pair<double, double>, ZetaConstants> cache;
  const auto key = std::make_pair(s, beta);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  ZetaConstants c{power_log_tail_sum(s, beta, 1, kNormalizerTerms), kInf};
  if (s - 1.0 > 1.0) c.z1 = power_log_tail_sum(s - 1.0, beta, 1, kNormalizerTerms);
  std::lock_guard lock(mutex);
  cache.emplace(key, c);
  return c;
}

bool periodic(const std::vector<double>& probs) {
  long long g = 0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    if (probs[n] > 0.0) g = std::gcd(g, static_cast<long long>(n + 1));
  }
  return g != 1;
}

void validate_explicit(const std::vector<double>& probs) {
  if (probs.empty()) throw MathError(ErrorCode::InvalidParameter, "empty probability vector");
  KahanSum total;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw MathError(ErrorCode::InvalidParameter, "probabilities must be finite and >= 0");
    }
    total += p;
  }
  if (std::abs(total.value() - 1.0) > 1e-10) {
    throw MathError(ErrorCode::NotNormalized, "sum p_n = " + format_double(total.value()));
  }
  if (periodic(probs)) {
    throw MathError(ErrorCode::PeriodicSupport, "gcd of the support exceeds 1");
  }
}

}  // namespace

std::string to_string(LawKind kind) {
  switch (kind) {
    case LawKind::Geometric: return "geometric";
    case LawKind::ZetaTail: return "zeta";
    case LawKind::Finite: return "finite";
    case LawKind::Custom: return "custom";
  }
  return "unknown";
}

double power_log_tail_sum(double sigma, double beta, long long a, long long direct_terms) {
  if (!(sigma > 1.0)) throw MathError(ErrorCode::BadExponent, "sum needs sigma > 1");
  if (a < 1) throw MathError(ErrorCode::InvalidParameter, "sum must start at n >= 1");
  const long long k = a + std::max(direct_terms, 0LL);

  // Euler-Maclaurin remainder from K on: int + f/2 - f'/12 + f'''/720.
  const double kd = static_cast<double>(k);
  const double fk = power_log(kd, sigma, beta);
  double log_deriv = -sigma / kd;
  if (beta != 0.0) log_deriv += beta / ((kd + 1.0) * std::log(kd + 1.0));
  const double f1 = fk * log_deriv;
  const double f3 = -fk * sigma * (sigma + 1.0) * (sigma + 2.0) / (kd * kd * kd);
  double acc = power_log_integral(sigma, beta, kd) + 0.5 * fk - f1 / 12.0 + f3 / 720.0;

  KahanSum sum(acc);
  for (long long n = k - 1; n >= a; --n) sum += power_log(static_cast<double>(n), sigma, beta);
  return sum.value();
}

ReturnLaw ReturnLaw::geometric(double q) {
  if (!(q > 0.0 && q < 1.0)) throw MathError(ErrorCode::InvalidParameter, "q must lie in (0,1)");
  ReturnLaw law;
  law.kind_ = LawKind::Geometric;
  law.q_ = q;
  law.mean_ = 1.0 / (1.0 - q);
  return law;
}

ReturnLaw ReturnLaw::zeta_tail(double degree, double log_power) {
  if (!(std::isfinite(degree) && degree > -1.0)) {
    throw MathError(ErrorCode::InvalidParameter, "zeta degree must be finite and > -1");
  }
  if (!(std::isfinite(log_power) && log_power >= 0.0)) {
    throw MathError(ErrorCode::InvalidParameter, "log_power must be finite and >= 0");
  }
  ReturnLaw law;
  law.kind_ = LawKind::ZetaTail;
  law.degree_ = degree;
  law.beta_ = log_power;
  const auto c = zeta_constants(degree + 2.0, log_power);
  law.norm_ = c.z0;
  law.mean_ = std::isfinite(c.z1) ? c.z1 / c.z0 : kInf;
  return law;
}

ReturnLaw ReturnLaw::finite(std::vector<double> probs) {
  validate_explicit(probs);
  ReturnLaw law;
  law.kind_ = LawKind::Finite;
  law.probs_ = std::move(probs);
  law.tails_.assign(law.probs_.size() + 1, 0.0);
  for (std::size_t n = law.probs_.size(); n-- > 1;) law.tails_[n] = law.tails_[n + 1] + law.probs_[n];
  law.tails_[0] = 1.0;
  KahanSum m;
  for (double d : law.tails_) m += d;
  law.mean_ = m.value();
  return law;
}

ReturnLaw ReturnLaw::custom(std::vector<double> probs, double tail_exponent) {
  if (!(tail_exponent > 1.0)) {
    throw MathError(ErrorCode::InvalidParameter, "declared tail exponent must exceed 1");
  }
  ReturnLaw law = finite(std::move(probs));
  law.kind_ = LawKind::Custom;
  law.tail_exponent_ = tail_exponent;
  if (tail_exponent <= 2.0) law.mean_ = kInf;
  return law;
}

double ReturnLaw::prob(long long n) const {
  if (n < 1) return 0.0;
  switch (kind_) {
    case LawKind::Geometric:
      return (1.0 - q_) * std::pow(q_, static_cast<double>(n - 1));
    case LawKind::ZetaTail:
      return power_log(static_cast<double>(n), degree_ + 2.0, beta_) / norm_;
    case LawKind::Finite:
    case LawKind::Custom:
      return static_cast<std::size_t>(n) <= probs_.size() ? probs_[n - 1] : 0.0;
  }
  return 0.0;
}

double ReturnLaw::tail(long long n) const {
  if (n <= 0) return 1.0;
  switch (kind_) {
    case LawKind::Geometric:
      return std::pow(q_, static_cast<double>(n));
    case LawKind::ZetaTail:
      return power_log_tail_sum(degree_ + 2.0, beta_, n + 1, kTailTerms) / norm_;
    case LawKind::Finite:
    case LawKind::Custom:
      return static_cast<std::size_t>(n) < tails_.size() ? tails_[n] : 0.0;
  }
  return 0.0;
}

double ReturnLaw::second_tail(long long n) const {
  if (!std::isfinite(mean_)) return kInf;
  if (n < 0) n = 0;
  switch (kind_) {
    case LawKind::Geometric:
      return std::pow(q_, static_cast<double>(n + 1)) / (1.0 - q_);
    case LawKind::ZetaTail: {
      // sum_{i>n} (i - n - 1) p_i
      const double s = degree_ + 2.0;
      const double t1 = power_log_tail_sum(s - 1.0, beta_, n + 1, kTailTerms);
      const double t0 = power_log_tail_sum(s, beta_, n + 1, kTailTerms);
      return (t1 - static_cast<double>(n + 1) * t0) / norm_;
    }
    case LawKind::Finite:
    case LawKind::Custom: {
      double acc = 0.0;
      for (std::size_t l = tails_.size(); l-- > static_cast<std::size_t>(n) + 1;) acc += tails_[l];
      return acc;
    }
  }
  return 0.0;
}

double ReturnLaw::mean() const { return mean_; }

double ReturnLaw::degree() const {
  switch (kind_) {
    case LawKind::ZetaTail: return degree_;
    case LawKind::Custom: return tail_exponent_ - 2.0;
    default: return kInf;
  }
}

double ReturnLaw::tail_exponent() const {
  switch (kind_) {
    case LawKind::ZetaTail: return degree_ + 2.0;
    case LawKind::Custom: return tail_exponent_;
    default: return kInf;
  }
}

double ReturnLaw::slowly_varying(double n) const {
  if (kind_ != LawKind::ZetaTail) return std::numeric_limits<double>::quiet_NaN();
  return (beta_ == 0.0 ? 1.0 : std::pow(std::log(n + 1.0), beta_)) / norm_;
}

double ReturnLaw::moment_tail(double gamma, long long n) const {
  if (n < 0) n = 0;
  if (gamma >= tail_exponent() - 1.0) return kInf;
  switch (kind_) {
    case LawKind::Geometric: {
      KahanSum acc;
      const double peak = gamma / -std::log(q_);
      for (long long k = n + 1; k < n + 100'000'000LL; ++k) {
        const double term = std::pow(static_cast<double>(k), gamma) * prob(k);
        acc += term;
        if (static_cast<double>(k) > peak && term <= 1e-18 * acc.value()) break;
        if (term == 0.0 && static_cast<double>(k) > peak) break;
      }
      return acc.value();
    }
    case LawKind::ZetaTail:
      return power_log_tail_sum(degree_ + 2.0 - gamma, beta_, n + 1, kTailTerms) / norm_;
    case LawKind::Finite:
    case LawKind::Custom: {
      KahanSum acc;
      for (std::size_t k = static_cast<std::size_t>(n) + 1; k <= probs_.size(); ++k) {
        acc += std::pow(static_cast<double>(k), gamma) * probs_[k - 1];
      }
      return acc.value();
    }
  }
  return 0.0;
}

std::string ReturnLaw::describe() const {
  switch (kind_) {
    case LawKind::Geometric:
      return "geometric(q=" + format_double(q_) + ")";
    case LawKind::ZetaTail:
      return "zeta(degree=" + format_double(degree_) + ", log_power=" + format_double(beta_) + ")";
    case LawKind::Finite:
      return "finite(support=" + std::to_string(probs_.size()) + ")";
    case LawKind::Custom:
      return "custom(prefix=" + std::to_string(probs_.size()) +
             ", tail_exponent=" + format_double(tail_exponent_) + ")";
  }
  return "unknown";
}

}  // namespace renewlab
