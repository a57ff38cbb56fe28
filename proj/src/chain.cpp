#include "renewlab/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "renewlab/error.hpp"
#include "renewlab/format.hpp"
#include "renewlab/kahan.hpp"

namespace renewlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double power(double n, double gamma) { return gamma == 0.0 ? 1.0 : std::pow(n, gamma); }

}  // namespace

RenewalChain build_chain(ReturnLaw law, std::size_t truncation) {
  if (truncation < 1) throw MathError(ErrorCode::InvalidParameter, "truncation must be >= 1");
  const std::size_t n = truncation;

  std::vector<double> p(n + 1, 0.0), d(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) p[k] = law.prob(static_cast<long long>(k));
  d[n] = law.tail(static_cast<long long>(n));
  for (std::size_t k = n; k >= 2; --k) d[k - 1] = d[k] + p[k];
  d[0] = 1.0;

  RenewalChain chain(std::move(law), n);
  chain.p_ = TruncatedSeries(std::move(p));
  chain.d_ = TruncatedSeries(std::move(d));
  chain.m1_ = chain.law_.mean();
  chain.d_tail_ = chain.law_.second_tail(static_cast<long long>(n));
  chain.pi_.assign(n, 0.0);
  if (std::isfinite(chain.m1_)) {
    chain.recurrence_ = Recurrence::PositiveRecurrent;
    chain.pi1_ = 1.0 / chain.m1_;
    for (std::size_t k = 1; k <= n; ++k) chain.pi_[k - 1] = chain.pi1_ * chain.d_[k - 1];
    chain.pi_tail_ = chain.pi1_ * (chain.d_[n] + chain.d_tail_);
  } else {
    chain.recurrence_ = Recurrence::NullRecurrent;
  }
  return chain;
}

double RenewalChain::pi_at(long long i) const {
  if (i < 1 || !positive_recurrent()) return 0.0;
  if (static_cast<std::size_t>(i) <= n_) return pi_[i - 1];
  return pi1_ * law_.tail(i - 1);
}

FirstPassageLaw first_passage(const RenewalChain& chain, std::size_t i, std::size_t j,
                              std::size_t n, double tolerance) {
  if (i < 1 || j < 1) throw MathError(ErrorCode::InvalidParameter, "states are numbered from 1");
  const ReturnLaw& law = chain.law();

  FirstPassageLaw out{i, j, TruncatedSeries::zeros(n), 0.0, 0.0};
  if (i > j) {
    std::vector<double> f(n + 1, 0.0);
    if (i - j <= n) f[i - j] = 1.0;
    out.series = TruncatedSeries(std::move(f));
    out.missing_mass = i - j <= n ? 0.0 : 1.0;
  } else {
    // F_ij(z) = z^{i-j} P_j(z) / (1 - sum_{0<k<j} p_k z^k), P_j(z) = sum_{k>=j} p_k z^k.
    std::vector<double> num(n + 1, 0.0), den(n + 1, 0.0);
    for (std::size_t m = i; m <= n; ++m) num[m] = law.prob(static_cast<long long>(m + j - i));
    den[0] = 1.0;
    for (std::size_t k = 1; k < j && k <= n; ++k) den[k] = -law.prob(static_cast<long long>(k));
    out.series = divide(TruncatedSeries(std::move(num)), TruncatedSeries(std::move(den)));
    KahanSum total;
    for (double f : out.series.coeffs()) total += f;
    out.missing_mass = 1.0 - total.value();
  }
  out.tail_estimate = std::max(out.missing_mass, 0.0);
  if (out.missing_mass > tolerance) {
    throw MathError(ErrorCode::TruncationTooSmall,
                    "first passage " + std::to_string(i) + "->" + std::to_string(j) +
                        " misses mass " + format_double(out.missing_mass) + " at N=" +
                        std::to_string(n));
  }
  return out;
}

MomentValue moment(const RenewalChain& chain, std::size_t i, std::size_t j, double gamma,
                   std::size_t n, double tolerance) {
  if (!(gamma >= 0.0)) throw MathError(ErrorCode::BadExponent, "moment order must be >= 0");
  const auto fp = first_passage(chain, i, j, n, tolerance);
  KahanSum acc;
  for (std::size_t k = 1; k <= n; ++k) acc += power(static_cast<double>(k), gamma) * fp.series[k];

  MomentValue out{acc.value(), gamma, 0.0, true};
  if (i <= j) {
    const ReturnLaw& law = chain.law();
    out.finite_flag = gamma < law.degree() + 1.0;
    const double jump = law.moment_tail(gamma, static_cast<long long>(n + j - i)) /
                        law.tail(static_cast<long long>(j) - 1);
    out.tail_estimate = out.finite_flag
                            ? std::max(power(static_cast<double>(n), gamma) * fp.tail_estimate, jump)
                            : kInf;
  }
  return out;
}

MomentIdentity moment_identity_check(const RenewalChain& chain, std::size_t i, std::size_t n) {
  if (!(chain.ergodic_degree() > 1.0)) {
    throw MathError(ErrorCode::DegreeTooSmall, "second moments need ergodic degree > 1");
  }
  if (i < 1) throw MathError(ErrorCode::InvalidParameter, "states are numbered from 1");
  if (!(chain.pi_at(static_cast<long long>(i)) > 0.0)) {
    throw MathError(ErrorCode::PreconditionViolated, "state " + std::to_string(i) + " is transient");
  }
  const double lhs = moment(chain, i, i, 2.0, n).value;
  const double m11 = moment(chain, 1, 1, 2.0, n).value;
  const double pi_i = chain.pi_at(static_cast<long long>(i));
  KahanSum head;
  for (std::size_t k = 1; k < i; ++k) head += static_cast<double>(k) * chain.law().prob(static_cast<long long>(k));
  const double rhs = (chain.pi1() / pi_i) * (m11 + 2.0 * head.value() / pi_i);
  return {lhs, rhs, std::abs(lhs - rhs) / std::abs(rhs)};
}

POrder p_order(const RenewalChain& chain, const SignedDistribution& nu, std::size_t i) {
  if (std::abs(nu.total() - 1.0) > 1e-10) {
    throw MathError(ErrorCode::NotNormalized, "P-order needs a signed distribution");
  }
  if (i < 1) throw MathError(ErrorCode::InvalidParameter, "states are numbered from 1");
  const double d = chain.ergodic_degree();
  const double s = chain.law().tail_exponent();
  const bool stationary_tail = nu.stationary_scale() != 0.0;

  // Passage moments from l < i are finite iff gamma < d + 1; from l > i they are
  // (l - i)^gamma. The declared decay of |nu_l| bounds the sum over far states.
  const double own = nu.tail_exponent() - 1.0;
  bool mass_below = false;
  for (std::size_t l = 1; l < i && l <= nu.size(); ++l) mass_below |= nu[l] != 0.0;
  mass_below |= stationary_tail && i > nu.size() + 1;
  const bool any_mass = nu.support() > 0 || stationary_tail;

  POrder out{};
  out.order_at_reference = std::max(0.0, std::min(mass_below ? d + 1.0 : kInf, own));
  out.order = std::max(0.0, std::min(any_mass ? d + 1.0 : kInf, own));
  const bool log_factor = chain.law().kind() == LawKind::ZetaTail && chain.law().log_power() > 0.0;
  out.boundary = std::isfinite(out.order) && (log_factor || (std::isfinite(s) && own == d + 1.0));
  return out;
}

Lemma1Probe lemma1_probe(const RenewalChain& chain, double gamma, std::size_t i, std::size_t n) {
  if (!chain.positive_recurrent()) {
    throw MathError(ErrorCode::PreconditionViolated, "codivergence probe needs a positive-recurrent chain");
  }
  if (!(gamma >= 0.0)) throw MathError(ErrorCode::BadExponent, "gamma must be >= 0");
  if (i < 1) throw MathError(ErrorCode::InvalidParameter, "states are numbered from 1");

  Lemma1Probe out;
  const auto fii = first_passage(chain, i, i, n, 1.0);
  out.partial_a.resize(n);
  KahanSum a;
  for (std::size_t m = 1; m <= n; ++m) {
    a += power(static_cast<double>(m), gamma + 1.0) * fii.series[m];
    out.partial_a[m - 1] = a.value();
  }

  out.partial_b.resize(n);
  KahanSum b;
  for (std::size_t l = 1; l <= n; ++l) {
    if (l < i) {
      b += chain.pi_at(static_cast<long long>(l)) * moment(chain, l, i, gamma, n, 1.0).value;
    } else if (l > i) {
      b += chain.pi_at(static_cast<long long>(l)) * power(static_cast<double>(l - i), gamma);
    }
    out.partial_b[l - 1] = b.value();
  }

  const double d = chain.ergodic_degree();
  out.a_finite = gamma < d;
  out.b_finite = gamma < d && (i == 1 || gamma < d + 1.0);
  out.codivergence_flag = out.a_finite == out.b_finite;
  return out;
}

}  // namespace renewlab
