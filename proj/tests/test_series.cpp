#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "renewlab/error.hpp"
#include "renewlab/series.hpp"

using namespace renewlab;

namespace {

TruncatedSeries S(std::vector<double> c) { return TruncatedSeries(std::move(c)); }

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

std::vector<double> random_coeffs(std::mt19937_64& rng, std::size_t n, double lead_min) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> c(n);
  for (std::size_t k = 0; k < n; ++k) c[k] = u(rng) / (1.0 + static_cast<double>(k * k));
  c[0] = (c[0] >= 0 ? 1.0 : -1.0) * (lead_min + std::abs(c[0]));
  return c;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const MathError& e) {
    return e.code();
  }
  FAIL("expected MathError");
  return ErrorCode::InvalidParameter;
}

}  // namespace

TEST_CASE("series rejects empty and non-finite input") {
  CHECK(code_of([] { S({}); }) == ErrorCode::InvalidSeries);
  CHECK(code_of([] { S({1.0, NAN}); }) == ErrorCode::InvalidSeries);
  CHECK(code_of([] { S({INFINITY}); }) == ErrorCode::InvalidSeries);
  CHECK(S({1, 2, 3}).order() == 2);
}

TEST_CASE("convolve examples") {
  auto a = convolve(S({1, 0, 0}), S({3, 2, 1}));
  CHECK(a.order() == 2);
  CHECK(a[0] == 3);
  CHECK(a[1] == 2);
  CHECK(a[2] == 1);

  auto b = convolve(S({1, 1}), S({1, 1}));
  CHECK(b.order() == 1);
  CHECK(b[0] == 1);
  CHECK(b[1] == 2);

  // p = (1/2, 1/2): renewal recursion by hand gives e = (1, 1/2, 3/4).
  auto f = S({0, 0.5, 0.5});
  auto e = S({1, 0.5, 0.75});
  CHECK(convolve(f, e)[2] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("convolve truncates to the shorter operand") {
  CHECK(convolve(S({1, 2, 3, 4}), S({1, 1})).order() == 1);
}

TEST_CASE("reciprocal examples") {
  auto c = reciprocal(S({1, -0.5, 0, 0, 0, 0}));
  for (std::size_t n = 0; n <= 5; ++n) CHECK(c[n] == doctest::Approx(std::ldexp(1.0, -static_cast<int>(n))));

  auto alt = reciprocal(S({1, 1, 0, 0, 0}));
  for (std::size_t n = 0; n <= 4; ++n) CHECK(alt[n] == (n % 2 ? -1.0 : 1.0));

  // D for p = (1/2, 1/2) is d = (1, 1/2): c_n = (-1/2)^n, partial sums -> 2/3.
  std::vector<double> d(60, 0.0);
  d[0] = 1.0;
  d[1] = 0.5;
  auto r = reciprocal(S(d));
  for (std::size_t n = 0; n < 10; ++n) CHECK(r[n] == doctest::Approx(std::pow(-0.5, n)));
  CHECK(partial_sums(r)[59] == doctest::Approx(1.0 / 1.5).epsilon(1e-14));
}

TEST_CASE("reciprocal floor") {
  CHECK(code_of([] { reciprocal(S({0.0, 1.0})); }) == ErrorCode::ZeroLeadingCoefficient);
  CHECK(code_of([] { reciprocal(S({1e-301, 1.0})); }) == ErrorCode::ZeroLeadingCoefficient);
  CHECK(code_of([] { reciprocal(S({1e-5, 1.0}), 1e-3); }) == ErrorCode::ZeroLeadingCoefficient);
  CHECK_NOTHROW(reciprocal(S({1e-299, 0.0})));
}

TEST_CASE("divide examples") {
  auto d = S({2, 0.3, -0.1, 0.05});
  auto one = divide(d, d);
  CHECK(one[0] == 1.0);
  for (std::size_t n = 1; n <= 3; ++n) CHECK(one[n] == 0.0);

  std::vector<double> g(30);
  for (std::size_t n = 0; n < 30; ++n) g[n] = std::ldexp(1.0, -static_cast<int>(n));
  auto h = divide(S(g), S(g));
  CHECK(h[0] == 1.0);
  for (std::size_t n = 1; n < 30; ++n) CHECK(std::abs(h[n]) < 1e-15);

  auto q = divide(S({1, 1, 0, 0, 0, 0}), S({1, -0.5, 0, 0, 0, 0}));
  CHECK(q[0] == 1.0);
  for (std::size_t n = 1; n <= 5; ++n) CHECK(q[n] == doctest::Approx(3.0 * std::ldexp(1.0, -static_cast<int>(n))));

  CHECK(code_of([] { divide(S({1, 1}), S({0, 1})); }) == ErrorCode::ZeroLeadingCoefficient);
}

TEST_CASE("tail_transform examples") {
  // Return laws are stored with p_0 = 0; d_n = sum_{i>n} p_i.
  auto d = tail_transform(S({0, 1, 0, 0}));
  CHECK(d[0] == 1.0);
  CHECK(d[1] == 0.0);

  auto d2 = tail_transform(S({0, 0.5, 0.3, 0.2}));
  CHECK(d2[0] == doctest::Approx(1.0));
  CHECK(d2[1] == doctest::Approx(0.5));
  CHECK(d2[2] == doctest::Approx(0.2));
  CHECK(d2[3] == 0.0);

  std::vector<double> p(40, 0.0);
  for (std::size_t n = 1; n < 40; ++n) p[n] = std::ldexp(1.0, -static_cast<int>(n));
  auto dg = tail_transform(S(p), std::ldexp(1.0, -39));
  for (std::size_t n = 0; n < 40; ++n) CHECK(dg[n] == doctest::Approx(std::ldexp(1.0, -static_cast<int>(n))));

  CHECK(code_of([] { tail_transform(S({0.1, -0.2})); }) == ErrorCode::NegativeCoefficient);
}

TEST_CASE("partial_sums examples") {
  auto s = partial_sums(S({1, 0, 0}));
  CHECK(s[0] == 1);
  CHECK(s[1] == 1);
  CHECK(s[2] == 1);

  std::vector<double> c(80);
  for (std::size_t n = 0; n < 80; ++n) c[n] = std::pow(-0.5, n);
  CHECK(partial_sums(S(c))[79] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  // Geometric chain: D(z) = 1/(1 - z/2); partial sums of 1/D are (1, 1/2, 1/2, ...).
  std::vector<double> dg(50);
  for (std::size_t n = 0; n < 50; ++n) dg[n] = std::ldexp(1.0, -static_cast<int>(n));
  auto e = partial_sums(reciprocal(S(dg)));
  CHECK(e[0] == 1.0);
  for (std::size_t n = 1; n < 50; ++n) CHECK(e[n] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("partial_sums differences recover the input exactly") {
  std::mt19937_64 rng(7);
  auto c = S(random_coeffs(rng, 200, 0.1));
  auto s = partial_sums(c);
  CHECK(s[0] == c[0]);
  // s_n - s_{n-1} reproduces c_n up to the rounding of the running sum.
  for (std::size_t n = 1; n < 200; ++n) CHECK(std::abs((s[n] - s[n - 1]) - c[n]) <= 4e-16 * std::abs(s[n]) + 1e-300);
}

TEST_CASE("evaluate examples") {
  auto a = S({0.25, 3, -2});
  CHECK(evaluate(a, 0.0) == std::complex<double>(0.25, 0));

  // Geometric chain: d_n = 2^{-n}, so (1-z)P_11(z) = 1/D(z) = 1 - z/2.
  std::vector<double> dg(4000);
  for (std::size_t n = 0; n < dg.size(); ++n) dg[n] = std::pow(0.5, n);
  auto dz = evaluate(S(dg), 0.99);
  CHECK(std::abs(dz.real() - 1.0 / (1.0 - 0.495)) < 1e-12);
  CHECK(1.0 / dz.real() == doctest::Approx(0.505));

  CHECK(evaluate(S({1, 0.5}), 1.0).real() == 1.5);
  CHECK(code_of([] { evaluate(S({1}), {1.1, 0.0}); }) == ErrorCode::OutOfDomain);
  CHECK_NOTHROW(evaluate(S({1}), {1.0 + 5e-10, 0.0}));
}

TEST_CASE("kaluza examples") {
  std::vector<double> g(30, 0.0), z(200, 0.0);
  for (std::size_t n = 1; n < g.size(); ++n) g[n] = std::ldexp(1.0, -static_cast<int>(n));
  for (std::size_t n = 1; n < z.size(); ++n) z[n] = std::pow(static_cast<double>(n), -3.0);
  CHECK_FALSE(kaluza_check(S(g)));
  // (n^2 - 1)^3 < n^6, so n^{-6} < (n+1)^{-3} (n-1)^{-3}: power laws are log-convex.
  CHECK_FALSE(kaluza_check(S(z)));
  // p_n = c 2^{-n} / n! has p_{n+1}/p_n = 1/(2(n+1)) strictly decreasing.
  std::vector<double> poisson(25, 0.0);
  double term = 1.0, total = 0.0;
  for (std::size_t n = 1; n < poisson.size(); ++n) total += (poisson[n] = term *= 0.5 / n);
  for (auto& x : poisson) x /= total;
  CHECK(kaluza_check(S(poisson)));
  CHECK_FALSE(kaluza_check(S({0, 0.5, 0.5})));
  CHECK(code_of([] { kaluza_check(S({0, 0.5, 0.0})); }) == ErrorCode::NonPositiveCoefficient);
}

TEST_CASE("convpower_probe regimes") {
  for (double gamma : {1.5, 2.0, 3.0}) {
    double lo = INFINITY, hi = 0;
    for (int e = 10; e <= 14; ++e) {
      auto probe = convpower_probe(gamma, 1LL << e);
      lo = std::min(lo, probe.scaled);
      hi = std::max(hi, probe.scaled);
    }
    CHECK(hi / lo < 2.0);
    CHECK(lo > 0.0);
  }
  CHECK(convpower_probe(1.5, 100).regime == ConvolutionRegime::PowerThreeMinusTwoGamma);
  CHECK(convpower_probe(2.0, 100).regime == ConvolutionRegime::LogOverN);
  CHECK(convpower_probe(3.0, 100).regime == ConvolutionRegime::PowerOneMinusGamma);
  // gamma = 3, n = 4: 1*1/9 + 1/4*1/4 + 1/9*1 = 0.284722...
  CHECK(convpower_probe(3.0, 4).value == doctest::Approx(2.0 / 9.0 + 1.0 / 16.0));
  CHECK(code_of([] { convpower_probe(1.0, 10); }) == ErrorCode::BadExponent);
  CHECK(code_of([] { convpower_probe(2.0, 1); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("property: convolve is commutative and associative") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = S(random_coeffs(rng, 60, 0.1));
    auto b = S(random_coeffs(rng, 50, 0.1));
    auto c = S(random_coeffs(rng, 70, 0.1));
    auto ab = convolve(a, b), ba = convolve(b, a);
    auto abc = convolve(ab, c), a_bc = convolve(a, convolve(b, c));
    for (std::size_t n = 0; n <= ab.order(); ++n) CHECK(rel_err(ab[n], ba[n]) < 1e-12);
    for (std::size_t n = 0; n <= abc.order(); ++n) CHECK(rel_err(abc[n], a_bc[n]) < 1e-12);
  }
}

TEST_CASE("property: reciprocal inverts convolution and itself") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto d = S(random_coeffs(rng, 120, 0.5));
    auto c = reciprocal(d);
    auto one = convolve(d, c);
    CHECK(one[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t n = 1; n <= one.order(); ++n) CHECK(std::abs(one[n]) < 1e-12);
    auto back = reciprocal(c);
    for (std::size_t n = 0; n <= d.order(); ++n) CHECK(rel_err(back[n], d[n]) < 1e-10);
  }
}

TEST_CASE("property: divide agrees with convolve(e, reciprocal(d))") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto e = S(random_coeffs(rng, 100, 0.1));
    auto d = S(random_coeffs(rng, 100, 0.5));
    auto h = divide(e, d);
    auto h2 = convolve(e, reciprocal(d));
    for (std::size_t n = 0; n <= h.order(); ++n) CHECK(rel_err(h[n], h2[n]) < 1e-12);
    auto back = convolve(d, h);
    for (std::size_t n = 0; n <= back.order(); ++n) CHECK(rel_err(back[n], e[n]) < 1e-12);
  }
}

TEST_CASE("property: tail_transform is nonincreasing and dominated by its head") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(300);
    for (auto& x : a) x = u(rng) * (u(rng) < 0.2 ? 0.0 : 1.0) * 1e-3;
    auto t = tail_transform(S(a), u(rng) * 1e-6);
    for (std::size_t n = 1; n <= t.order(); ++n) {
      CHECK(t[n] <= t[n - 1]);
      CHECK(t[n] <= t[0]);
    }
  }
}

TEST_CASE("decay preservation of the reciprocal for power-law coefficients") {
  for (double gamma : {2.0, 3.0}) {
    const std::size_t n = 10000;
    std::vector<double> d(n + 1);
    d[0] = 1.0;
    for (std::size_t k = 1; k <= n; ++k) d[k] = std::pow(static_cast<double>(k), -gamma);
    auto ds = S(d);
    CHECK(min_modulus_on_circle(ds.truncated(2000), 1024) > 0.05);
    auto c = reciprocal(ds);
    // least squares of log|c_k| on log k over a log-spaced grid in [1e3, 1e4]
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (double x = 3.0; x <= 4.0 + 1e-12; x += 0.05) {
      const auto k = static_cast<std::size_t>(std::llround(std::pow(10.0, x)));
      const double lx = std::log(static_cast<double>(k)), ly = std::log(std::abs(c[k]));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++m;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    CHECK(std::abs(slope + gamma) < 0.3);
  }
}

TEST_CASE("csv round trip") {
  auto a = S({1.0, -0.1, 1.0 / 3.0, 1e-300});
  std::stringstream ss;
  write_csv(ss, a);
  CHECK(ss.str().rfind("n,coeff\n", 0) == 0);
  auto b = read_csv(ss);
  REQUIRE(b.size() == a.size());
  for (std::size_t n = 0; n < a.size(); ++n) CHECK(b[n] == a[n]);

  std::stringstream bad("n,value\n0,1\n");
  CHECK(code_of([&] { read_csv(bad); }) == ErrorCode::InvalidSeries);
  std::stringstream gap("n,coeff\n0,1\n2,1\n");
  CHECK(code_of([&] { read_csv(gap); }) == ErrorCode::InvalidSeries);
}
