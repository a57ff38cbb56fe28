#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "renewlab/error.hpp"
#include "renewlab/evolve.hpp"
#include "renewlab/spectral.hpp"

using namespace renewlab;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const MathError& e) {
    return e.code();
  }
  FAIL("expected MathError");
  return ErrorCode::InvalidParameter;
}

// max |(I - zQ)(I - L_z) - (I - zP)| over the leading (N-1) block, from operator entries
double naive_residual(const RenewalChain& c, cplx z, std::size_t n) {
  TruncatedOperator q(c, OperatorKind::Q, n), l(c, OperatorKind::L, n, z), p(c, OperatorKind::P, n);
  auto id = [](std::size_t i, std::size_t j) { return cplx(i == j ? 1.0 : 0.0); };
  double worst = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 1; j < n; ++j) {
      cplx s = 0.0;
      for (std::size_t k = 1; k <= n; ++k) s += (id(i, k) - z * q(i, k)) * (id(k, j) - l(k, j));
      worst = std::max(worst, std::abs(s - (id(i, j) - z * p(i, j))));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("operator sections") {
  auto z = build_chain(ReturnLaw::zeta_tail(1.0), 300);
  TruncatedOperator p(z, OperatorKind::P, 300);
  CHECK(std::abs(p.row_sum(1) - (1.0 - z.p_tail())) < 1e-15);
  for (std::size_t i = 2; i <= 300; ++i) CHECK(p.row_sum(i) == cplx(1.0));
  CHECK(p(1, 7) == cplx(z.p()[7]));
  CHECK(p(5, 4) == cplx(1.0));
  CHECK(p(5, 5) == cplx(0.0));
  TruncatedOperator q(z, OperatorKind::Q, 300);
  CHECK(q(1, 1) == cplx(0.0));
  CHECK(q(3, 2) == cplx(1.0));
  TruncatedOperator l(z, OperatorKind::L, 300, cplx(0.0, 0.5));
  CHECK(std::abs(l(3, 2) - z.p()[2] * std::pow(cplx(0.0, 0.5), 3)) < 1e-16);

  auto g = build_chain(ReturnLaw::geometric(0.5), 200);
  CHECK(std::abs(TruncatedOperator(g, OperatorKind::L, 200, 0.5).lambda_z() - 1.0 / 3.0) < 1e-15);

  std::vector<cplx> pi(z.pi().begin(), z.pi().end());
  auto next = p.row_action(pi);
  for (std::size_t j = 0; j + 1 < 300; ++j) CHECK(std::abs(next[j] - pi[j]) < 1e-12);
}

TEST_CASE("factorization residual") {
  auto g = build_chain(ReturnLaw::geometric(0.5), 200);
  auto z1 = build_chain(ReturnLaw::zeta_tail(1.0), 200);
  CHECK(factorization_residual(z1, 0.0, 200) == 0.0);
  for (const auto* c : {&g, &z1}) {
    for (cplx z : {cplx(0.5), cplx(-0.3, 0.4), cplx(0.0, 1.0)}) {
      const double r = factorization_residual(*c, z, 200);
      CHECK(r < 1e-12);
      CHECK(naive_residual(*c, z, 60) < 1e-12);
    }
  }

  // same prefix, larger truncation: identical section
  auto big = build_chain(ReturnLaw::zeta_tail(1.0), 1500);
  CHECK(factorization_residual(big, cplx(-0.3, 0.4), 200) == factorization_residual(z1, cplx(-0.3, 0.4), 200));
  // entrywise path beyond the dense limit
  CHECK(factorization_residual(big, cplx(-0.3, 0.4), 1200) < 1e-12);

  CHECK(code_of([&] { factorization_residual(g, 1.5, 100); }) == ErrorCode::OutOfDomain);
  CHECK(code_of([&] { factorization_residual(g, 0.5, 300); }) == ErrorCode::TruncationTooSmall);
}

TEST_CASE("eigen_from_gf examples") {
  auto z1 = build_chain(ReturnLaw::zeta_tail(1.0), 400);
  auto one = eigen_from_gf(z1, 1.0, 400);
  for (std::size_t k = 1; k <= 400; ++k) CHECK(std::abs(one.x[k - 1] - z1.d()[k - 1]) < 1e-14);
  CHECK(one.residual < 1e-10);

  auto g = build_chain(ReturnLaw::geometric(0.5), 400);
  auto half = eigen_from_gf(g, 0.5, 400);
  CHECK(std::abs(half.x[1]) < 1e-14);
  CHECK(std::abs(half.x[2] + 0.25) < 1e-14);
  for (std::size_t k = 1; k <= 60; ++k) {
    const double n = static_cast<double>(k);
    CHECK(std::abs(half.x[k - 1] - (2.0 - n) * std::pow(2.0, -(n - 1))) < 1e-15);
  }
  CHECK(half.residual < 1e-10);

  auto zero = eigen_from_gf(g, 0.0, 50);
  CHECK(zero.x[0] == cplx(1.0));
  for (std::size_t k = 2; k <= 50; ++k) CHECK(zero.x[k - 1] == cplx(-g.p()[k - 1]));
}

TEST_CASE("unit-circle partial norms grow") {
  auto z1 = build_chain(ReturnLaw::zeta_tail(1.0), 800);
  double prev = 0.0;
  for (std::size_t n : {100, 200, 400, 800}) {
    auto probe = eigen_from_gf(z1, cplx(0.0, 1.0), n);
    CHECK(probe.l1_partial_norm > 1.5 * prev);
    CHECK(std::isinf(probe.tail_note));
    prev = probe.l1_partial_norm;
  }
}

TEST_CASE("property: truncation error shrinks as N doubles inside the disk") {
  auto z1 = build_chain(ReturnLaw::zeta_tail(1.0), 4000);
  for (cplx lambda : {cplx(0.9), cplx(-0.5, 0.5), cplx(0.0, 0.9), cplx(0.3)}) {
    auto full = eigen_from_gf(z1, lambda, 4000);
    double prev = INFINITY;
    for (std::size_t n : {100, 200, 400}) {
      auto probe = eigen_from_gf(z1, lambda, n);
      CHECK(probe.residual < 1e-12);
      double beyond = 0.0;
      for (std::size_t k = n; k < 4000; ++k) beyond += std::abs(full.x[k]);
      CHECK(beyond <= probe.tail_note);
      const double total = probe.residual + probe.tail_note;
      CHECK(total < prev);
      prev = total;
    }
  }
}

TEST_CASE("disk scan and csv") {
  auto g = build_chain(ReturnLaw::geometric(0.5), 100);
  std::vector<cplx> grid;
  for (int k = 0; k < 9; ++k) grid.emplace_back(0.1 * k, 0.05 * k);
  auto scan = disk_scan(g, grid, 100);
  REQUIRE(scan.size() == grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    auto single = eigen_from_gf(g, grid[k], 100);
    CHECK(scan[k].lambda == grid[k]);
    CHECK(scan[k].l1_partial_norm == single.l1_partial_norm);
  }
  std::ostringstream os;
  write_scan_csv(os, {scan[0]});
  CHECK(os.str().rfind("re_lambda,im_lambda,residual,l1_partial_norm\n0,0,", 0) == 0);
}

TEST_CASE("gf_evaluate examples") {
  auto g = build_chain(ReturnLaw::geometric(0.5), 200);
  CHECK(gf_evaluate(g, 1, 1, 0.0).p_ij == cplx(1.0));
  CHECK(std::abs(gf_evaluate(g, 1, 1, 0.5).p_ij - 1.5) < 1e-14);
  CHECK(code_of([&] { gf_evaluate(g, 1, 1, 1.0); }) == ErrorCode::SingularPoint);
  CHECK(code_of([&] { gf_evaluate(g, 1, 1, 1.2); }) == ErrorCode::OutOfDomain);

  auto rad = radial_probe(g, 1, {0.9, 0.99, 0.999});
  CHECK(rad[1].value == doctest::Approx(0.505).epsilon(1e-13));
  CHECK(std::abs(rad[2].value - 0.5) < std::abs(rad[1].value - 0.5));

  auto z1 = build_chain(ReturnLaw::zeta_tail(1.0), 100000);
  auto near = radial_probe(z1, 1, {0.99, 0.9999});
  CHECK(std::abs(near[1].value - z1.pi1()) < std::abs(near[0].value - z1.pi1()));
  CHECK(near[1].value == doctest::Approx(z1.pi1()).epsilon(1e-3));
  auto near3 = radial_probe(z1, 3, {0.9999});
  CHECK(near3[0].value == doctest::Approx(z1.pi()[2]).epsilon(1e-3));
}

TEST_CASE("gf_evaluate agrees with power series of P^n and first passage") {
  auto z1 = build_chain(ReturnLaw::zeta_tail(1.0), 400);
  const double z = 0.5;
  for (std::size_t i : {1, 2, 4}) {
    Evolver ev(z1, SignedDistribution::point_mass(i), 120);
    std::vector<double> acc(6, 0.0);
    double zn = 1.0;
    for (std::size_t n = 0; n <= 120; ++n) {
      ev.advance_to(n);
      for (std::size_t j = 1; j <= 5; ++j) acc[j] += ev.state()[j - 1] * zn;
      zn *= z;
    }
    for (std::size_t j = 1; j <= 5; ++j) {
      auto v = gf_evaluate(z1, i, j, z);
      CHECK(std::abs(v.p_ij - acc[j]) < 1e-13);
      auto fp = first_passage(z1, i, j, 120, 1.0);
      CHECK(std::abs(v.f_ij - evaluate(fp.series, cplx(z))) < 1e-13);
      CHECK(v.identity_gap < 1e-14);
    }
  }
  auto v = gf_evaluate(z1, 3, 2, cplx(0.0, -1.0));
  CHECK(v.f_ij == cplx(0.0, -1.0));
}
