#include "renewlab/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "renewlab/error.hpp"
#include "renewlab/format.hpp"
#include "renewlab/kahan.hpp"

namespace renewlab {

namespace {

constexpr std::size_t kDenseLimit = 1000;

void require_section(const RenewalChain& chain, std::size_t n) {
  if (n < 2) throw MathError(ErrorCode::InvalidParameter, "section dimension must be >= 2");
  if (n > chain.truncation()) {
    throw MathError(ErrorCode::TruncationTooSmall, "section " + std::to_string(n) + " exceeds truncation " +
                                                       std::to_string(chain.truncation()));
  }
}

std::vector<cplx> powers(cplx z, std::size_t n) {
  std::vector<cplx> zp(n + 1);
  zp[0] = 1.0;
  for (std::size_t k = 1; k <= n; ++k) zp[k] = zp[k - 1] * z;
  return zp;
}

void require_disk(cplx z) {
  if (std::abs(z) > 1.0 + 1e-15) {
    throw MathError(ErrorCode::OutOfDomain, "|z| = " + format_double(std::abs(z)) + " > 1");
  }
}

}  // namespace

TruncatedOperator::TruncatedOperator(const RenewalChain& chain, OperatorKind kind, std::size_t dimension,
                                     cplx z)
    : chain_(chain), kind_(kind), n_(dimension), z_(z) {
  if (n_ < 1 || n_ > chain.truncation()) {
    throw MathError(ErrorCode::TruncationTooSmall, "operator dimension outside 1..truncation");
  }
}

cplx TruncatedOperator::operator()(std::size_t i, std::size_t j) const {
  if (i < 1 || j < 1 || i > n_ || j > n_) throw MathError(ErrorCode::InvalidParameter, "index out of range");
  switch (kind_) {
    case OperatorKind::P: return i == 1 ? cplx(chain_.p()[j]) : cplx(j + 1 == i ? 1.0 : 0.0);
    case OperatorKind::Q: return j + 1 == i ? 1.0 : 0.0;
    case OperatorKind::L: return chain_.p()[j] * std::pow(z_, static_cast<int>(i));
  }
  return 0.0;
}

std::vector<cplx> TruncatedOperator::row_action(const std::vector<cplx>& x) const {
  if (x.size() != n_) throw MathError(ErrorCode::InvalidParameter, "vector length must equal the dimension");
  const auto& p = chain_.p();
  std::vector<cplx> y(n_, 0.0);
  switch (kind_) {
    case OperatorKind::P:
      for (std::size_t j = 1; j <= n_; ++j) y[j - 1] = x[0] * p[j] + (j < n_ ? x[j] : 0.0);
      break;
    case OperatorKind::Q:
      for (std::size_t j = 1; j < n_; ++j) y[j - 1] = x[j];
      break;
    case OperatorKind::L: {
      KahanSum<cplx> s;
      cplx zi = 1.0;
      for (std::size_t i = 1; i <= n_; ++i) s += x[i - 1] * (zi *= z_);
      for (std::size_t j = 1; j <= n_; ++j) y[j - 1] = p[j] * s.value();
      break;
    }
  }
  return y;
}

cplx TruncatedOperator::row_sum(std::size_t i) const {
  if (i < 1 || i > n_) throw MathError(ErrorCode::InvalidParameter, "index out of range");
  KahanSum<double> mass;
  for (std::size_t j = 1; j <= n_; ++j) mass += chain_.p()[j];
  switch (kind_) {
    case OperatorKind::P: return i == 1 ? mass.value() : 1.0;
    case OperatorKind::Q: return i == 1 ? 0.0 : 1.0;
    case OperatorKind::L: return mass.value() * std::pow(z_, static_cast<int>(i));
  }
  return 0.0;
}

cplx TruncatedOperator::lambda_z() const {
  KahanSum<cplx> s;
  cplx zj = 1.0;
  for (std::size_t j = 1; j <= n_; ++j) s += chain_.p()[j] * (zj *= z_);
  return s.value();
}

double factorization_residual(const RenewalChain& chain, cplx z, std::size_t n) {
  require_section(chain, n);
  require_disk(z);
  const auto& p = chain.p();
  const auto zp = powers(z, n);
  double worst = 0.0;

  if (n <= kDenseLimit) {
    using Mat = Eigen::MatrixXcd;
    const auto N = static_cast<Eigen::Index>(n);
    Mat a = Mat::Identity(N, N), b = Mat::Identity(N, N), c = Mat::Identity(N, N);
    for (Eigen::Index i = 1; i < N; ++i) a(i, i - 1) -= z;
    for (Eigen::Index i = 0; i < N; ++i) {
      for (Eigen::Index j = 0; j < N; ++j) b(i, j) -= p[j + 1] * zp[i + 1];
    }
    for (Eigen::Index j = 0; j < N; ++j) c(0, j) -= z * p[j + 1];
    for (Eigen::Index i = 1; i < N; ++i) c(i, i - 1) -= z;
    const Mat diff = (a * b - c).topLeftCorner(N - 1, N - 1);
    worst = diff.cwiseAbs().maxCoeff();
  } else {
    // (A B)(i, j) = B(i, j) - z B(i-1, j) with B = I - L_z
    auto b = [&](std::size_t i, std::size_t j) { return cplx(i == j ? 1.0 : 0.0) - p[j] * zp[i]; };
    for (std::size_t i = 1; i < n; ++i) {
      for (std::size_t j = 1; j < n; ++j) {
        cplx lhs = b(i, j);
        if (i >= 2) lhs -= z * b(i - 1, j);
        cplx rhs = cplx(i == j ? 1.0 : 0.0);
        if (i == 1) rhs -= z * p[j];
        if (j + 1 == i) rhs -= z;
        worst = std::max(worst, std::abs(lhs - rhs));
      }
    }
  }
  return worst;
}

SpectralProbe eigen_from_gf(const RenewalChain& chain, cplx lambda, std::size_t n) {
  require_section(chain, n);
  const auto& p = chain.p();
  SpectralProbe probe{lambda, std::vector<cplx>(n), 0.0, 0.0, 0.0};
  auto& x = probe.x;
  x[0] = 1.0;
  for (std::size_t k = 1; k < n; ++k) x[k] = lambda * x[k - 1] - p[k];

  const auto xp = TruncatedOperator(chain, OperatorKind::P, n).row_action(x);
  KahanSum<double> res, norm;
  for (std::size_t j = 0; j + 1 < n; ++j) res += std::abs(lambda * x[j] - xp[j]);
  for (const auto& v : x) norm += std::abs(v);
  probe.residual = res.value();
  probe.l1_partial_norm = norm.value();

  const double r = std::abs(lambda);
  if (r >= 1.0) {
    probe.tail_note = std::numeric_limits<double>::infinity();
  } else {
    // sum_{n>N} |x_n| <= [ |lambda|^N + sum_{k<=N} p_k |lambda|^{N-k} + d_N ] / (1 - |lambda|)
    KahanSum<double> s;
    double rk = 1.0;
    for (std::size_t k = n; k >= 1; --k) {
      s += p[k] * rk;
      rk *= r;
    }
    s += rk + chain.d()[n];
    probe.tail_note = s.value() / (1.0 - r);
  }
  return probe;
}

std::vector<SpectralProbe> disk_scan(const RenewalChain& chain, const std::vector<cplx>& lambdas,
                                     std::size_t n) {
  require_section(chain, n);
  std::vector<SpectralProbe> out(lambdas.size());
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(lambdas.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t k = w; k < lambdas.size(); k += workers) out[k] = eigen_from_gf(chain, lambdas[k], n);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

void write_scan_csv(std::ostream& out, const std::vector<SpectralProbe>& probes) {
  out << "re_lambda,im_lambda,residual,l1_partial_norm\n";
  for (const auto& pr : probes) {
    out << format_double(pr.lambda.real()) << ',' << format_double(pr.lambda.imag()) << ','
        << format_double(pr.residual) << ',' << format_double(pr.l1_partial_norm) << '\n';
  }
}

GfValue gf_evaluate(const RenewalChain& chain, std::size_t i, std::size_t j, cplx z) {
  const std::size_t n = chain.truncation();
  if (i < 1 || j < 1) throw MathError(ErrorCode::InvalidParameter, "states are numbered from 1");
  if (i > n || j > n) throw MathError(ErrorCode::TruncationTooSmall, "state beyond the truncation");
  if (z == cplx(1.0)) throw MathError(ErrorCode::SingularPoint, "P_ij(z) has a pole at z = 1");
  require_disk(z);
  const auto& p = chain.p();
  const auto zp = powers(z, n + 1);

  // shifted(j, s) = sum_{m >= j} p_m z^{m - j + s}
  auto shifted = [&](std::size_t from, std::size_t s) {
    KahanSum<cplx> acc;
    for (std::size_t m = from; m <= n; ++m) acc += p[m] * zp[m - from + s];
    return acc.value();
  };
  auto head = [&](std::size_t upto) {  // 1 - sum_{0<m<upto} p_m z^m
    KahanSum<cplx> acc(1.0);
    for (std::size_t m = 1; m < upto; ++m) acc += -p[m] * zp[m];
    return acc.value();
  };

  const cplx p11 = 1.0 / head(n + 1);
  auto p1 = [&](std::size_t col) { return col == 1 ? p11 : shifted(col, 1) * p11; };
  auto pgf = [&](std::size_t row, std::size_t col) -> cplx {
    if (row == 1) return p1(col);
    if (col == 1) return zp[row - 1] * p11;
    if (col >= row) return (row == col ? 1.0 : 0.0) + zp[row - 1] * p1(col);
    return zp[row - col] + zp[row - 1] * p1(col);
  };

  GfValue v{};
  v.p_ij = pgf(i, j);
  v.f_ij = i > j ? zp[i - j] : shifted(j, i) / head(j);
  const cplx pjj = pgf(j, j);
  v.identity_gap = std::abs(v.p_ij - v.f_ij * pjj - (i == j ? 1.0 : 0.0));
  v.tail_bound = std::pow(std::abs(z), static_cast<double>(n + 1)) * chain.d()[n];
  const double scale = 1.0 + std::abs(v.p_ij) + std::abs(v.f_ij) * std::abs(pjj);
  if (!(v.identity_gap <= 1e-9 * scale)) {
    throw MathError(ErrorCode::PreconditionViolated,
                    "P_ij = F_ij P_jj + delta_ij fails by " + format_double(v.identity_gap));
  }
  return v;
}

std::vector<RadialPoint> radial_probe(const RenewalChain& chain, std::size_t i, const std::vector<double>& radii) {
  const std::size_t n = chain.truncation();
  if (i < 1 || i > n) throw MathError(ErrorCode::InvalidParameter, "state outside 1..truncation");
  const auto& p = chain.p();
  const auto& d = chain.d();
  std::vector<RadialPoint> out;
  for (double r : radii) {
    if (!(r >= 0.0 && r < 1.0)) throw MathError(ErrorCode::OutOfDomain, "radius must lie in [0, 1)");
    // (1 - r) P_ii(r) = (1 - r) [i > 1] + r^{i-1} A_i(r) / D(r), A_i(r) = sum_{m>=i} p_m r^{m-i+1}
    KahanSum<double> dr, ai;
    double rk = 1.0;
    for (std::size_t m = 0; m <= n; ++m) {
      dr += d[m] * rk;
      rk *= r;
    }
    if (i == 1) {
      out.push_back({r, 1.0 / dr.value()});
      continue;
    }
    rk = r;
    for (std::size_t m = i; m <= n; ++m) {
      ai += p[m] * rk;
      rk *= r;
    }
    out.push_back({r, (1.0 - r) + std::pow(r, static_cast<double>(i - 1)) * ai.value() / dr.value()});
  }
  return out;
}

}  // namespace renewlab
