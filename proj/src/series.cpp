#include "renewlab/series.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "renewlab/error.hpp"
#include "renewlab/format.hpp"
#include "renewlab/kahan.hpp"

namespace renewlab {

TruncatedSeries::TruncatedSeries(std::vector<double> coeffs, std::optional<double> tail_hint)
    : coeffs_(std::move(coeffs)), tail_hint_(tail_hint) {
  if (coeffs_.empty()) {
    throw MathError(ErrorCode::InvalidSeries, "series needs at least one coefficient");
  }
  for (std::size_t n = 0; n < coeffs_.size(); ++n) {
    if (!std::isfinite(coeffs_[n])) {
      throw MathError(ErrorCode::InvalidSeries, "non-finite coefficient at n=" + std::to_string(n));
    }
  }
}

TruncatedSeries TruncatedSeries::zeros(std::size_t order) {
  return TruncatedSeries(std::vector<double>(order + 1, 0.0));
}

TruncatedSeries TruncatedSeries::unit(std::size_t order) {
  std::vector<double> c(order + 1, 0.0);
  c[0] = 1.0;
  return TruncatedSeries(std::move(c));
}

TruncatedSeries TruncatedSeries::truncated(std::size_t order) const {
  if (order > this->order()) {
    throw MathError(ErrorCode::InvalidSeries, "cannot extend a truncated series");
  }
  return TruncatedSeries(std::vector<double>(coeffs_.begin(), coeffs_.begin() + order + 1),
                         tail_hint_);
}

TruncatedSeries convolve(const TruncatedSeries& a, const TruncatedSeries& b) {
  const std::size_t order = std::min(a.order(), b.order());
  std::vector<double> out(order + 1);
  for (std::size_t n = 0; n <= order; ++n) {
    KahanSum acc;
    for (std::size_t k = 0; k <= n; ++k) acc += a[k] * b[n - k];
    out[n] = acc.value();
  }
  return TruncatedSeries(std::move(out));
}

TruncatedSeries reciprocal(const TruncatedSeries& d, double leading_floor) {
  if (!(std::abs(d[0]) >= leading_floor)) {
    throw MathError(ErrorCode::ZeroLeadingCoefficient,
                    "|d_0| = " + format_double(std::abs(d[0])) + " below floor");
  }
  const std::size_t order = d.order();
  std::vector<double> c(order + 1);
  const double inv = 1.0 / d[0];
  c[0] = inv;
  for (std::size_t n = 1; n <= order; ++n) {
    KahanSum acc;
    for (std::size_t k = 1; k <= n; ++k) acc += d[k] * c[n - k];
    c[n] = -inv * acc.value();
  }
  return TruncatedSeries(std::move(c));
}

TruncatedSeries divide(const TruncatedSeries& e, const TruncatedSeries& d, double leading_floor) {
  if (!(std::abs(d[0]) >= leading_floor)) {
    throw MathError(ErrorCode::ZeroLeadingCoefficient,
                    "|d_0| = " + format_double(std::abs(d[0])) + " below floor");
  }
  const std::size_t order = std::min(e.order(), d.order());
  std::size_t degree = order;
  while (degree > 0 && d[degree] == 0.0) --degree;

  // Long division h_n = (e_n - sum_{k=1}^{n} d_k h_{n-k}) / d_0, skipping the
  // zero coefficients of a polynomial divisor.
  std::vector<double> h(order + 1);
  const double inv = 1.0 / d[0];
  for (std::size_t n = 0; n <= order; ++n) {
    KahanSum acc(e[n]);
    const std::size_t kmax = std::min(n, degree);
    for (std::size_t k = 1; k <= kmax; ++k) acc += -d[k] * h[n - k];
    h[n] = inv * acc.value();
  }
  return TruncatedSeries(std::move(h));
}

TruncatedSeries tail_transform(const TruncatedSeries& a, std::optional<double> analytic_tail) {
  for (std::size_t n = 0; n <= a.order(); ++n) {
    if (a[n] < 0.0) {
      throw MathError(ErrorCode::NegativeCoefficient, "a_" + std::to_string(n) + " < 0");
    }
  }
  const double tail = analytic_tail.value_or(0.0);
  if (tail < 0.0) throw MathError(ErrorCode::NegativeCoefficient, "analytic tail < 0");

  // Backward accumulation adds small terms first and is exactly monotone for
  // nonnegative input, so the result is nonincreasing in n.
  std::vector<double> out(a.size());
  double acc = tail;
  for (std::size_t n = a.order() + 1; n-- > 0;) {
    out[n] = acc;
    acc += a[n];
  }
  return TruncatedSeries(std::move(out));
}

TruncatedSeries partial_sums(const TruncatedSeries& c) {
  std::vector<double> out(c.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < c.size(); ++n) {
    acc += c[n];
    out[n] = acc;
  }
  return TruncatedSeries(std::move(out));
}

std::complex<double> evaluate(const TruncatedSeries& a, std::complex<double> z) {
  if (std::abs(z) > 1.0 + 1e-9) {
    throw MathError(ErrorCode::OutOfDomain, "|z| = " + format_double(std::abs(z)) + " > 1");
  }
  std::complex<double> acc = 0.0;
  for (std::size_t n = a.size(); n-- > 0;) acc = acc * z + a[n];
  return acc;
}

bool kaluza_check(const TruncatedSeries& p) {
  const std::size_t order = p.order();
  for (std::size_t n = 1; n <= order; ++n) {
    if (!(p[n] > 0.0)) {
      throw MathError(ErrorCode::NonPositiveCoefficient, "p_" + std::to_string(n) + " <= 0");
    }
  }
  auto at = [&](std::size_t n) { return n == 0 ? 1.0 : p[n]; };
  for (std::size_t n = 1; n < order; ++n) {
    if (p[n + 1] > p[n]) return false;
    if (!(at(n) * at(n) > at(n + 1) * at(n - 1))) return false;
  }
  return true;
}

ConvolutionPowerProbe convpower_probe(double gamma, long long n) {
  if (!(gamma > 1.0)) throw MathError(ErrorCode::BadExponent, "gamma must exceed 1");
  if (n < 2) throw MathError(ErrorCode::InvalidParameter, "n must be at least 2");

  const double e = 1.0 - gamma;
  KahanSum acc;
  for (long long k = 1; k < n; ++k) {
    acc += std::pow(static_cast<double>(k), e) * std::pow(static_cast<double>(n - k), e);
  }
  const double value = acc.value();
  const double nn = static_cast<double>(n);

  ConvolutionPowerProbe probe{value, ConvolutionRegime::PowerOneMinusGamma, 0.0};
  double rate;
  if (gamma < 2.0) {
    probe.regime = ConvolutionRegime::PowerThreeMinusTwoGamma;
    rate = std::pow(nn, 3.0 - 2.0 * gamma);
  } else if (gamma == 2.0) {
    probe.regime = ConvolutionRegime::LogOverN;
    rate = std::log(nn) / nn;
  } else {
    rate = std::pow(nn, 1.0 - gamma);
  }
  probe.scaled = value / rate;
  return probe;
}

double min_modulus_on_circle(const TruncatedSeries& a, std::size_t samples) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(s) / static_cast<double>(samples);
    best = std::min(best, std::abs(evaluate(a, std::polar(1.0, theta))));
  }
  return best;
}

void write_csv(std::ostream& out, const TruncatedSeries& a) {
  out << "n,coeff\n";
  for (std::size_t n = 0; n < a.size(); ++n) out << n << ',' << format_double(a[n]) << '\n';
}

TruncatedSeries read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "n,coeff") {
    throw MathError(ErrorCode::InvalidSeries, "missing `n,coeff` header");
  }
  std::vector<double> coeffs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw MathError(ErrorCode::InvalidSeries, "malformed row: " + line);
    }
    std::size_t idx = 0;
    double value = 0.0;
    try {
      idx = std::stoul(line.substr(0, comma));
      value = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw MathError(ErrorCode::InvalidSeries, "malformed row: " + line);
    }
    if (idx != coeffs.size()) {
      throw MathError(ErrorCode::InvalidSeries, "rows must be consecutive from n=0");
    }
    coeffs.push_back(value);
  }
  return TruncatedSeries(std::move(coeffs));
}

}  // namespace renewlab
