#pragma once

// Finite sections of P, Q and L_z, the factorization (I - zQ)(I - L_z) = I - zP,
// eigenvector candidates from generating functions, and P_ij(z), F_ij(z).

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "renewlab/chain.hpp"

namespace renewlab {

using cplx = std::complex<double>;

enum class OperatorKind { P, Q, L };

/// N x N section of P, Q (subdiagonal shift) or L_z(i, j) = p_j z^i.
/// Row action: (x T)_j = sum_i x_i t_ij.
class TruncatedOperator {
 public:
  TruncatedOperator(const RenewalChain& chain, OperatorKind kind, std::size_t dimension, cplx z = 0.0);

  OperatorKind kind() const noexcept { return kind_; }
  std::size_t dimension() const noexcept { return n_; }
  cplx z() const noexcept { return z_; }
  cplx operator()(std::size_t i, std::size_t j) const;  // 1-based
  /// x T, x of length N; structured, never materializes the matrix.
  std::vector<cplx> row_action(const std::vector<cplx>& x) const;
  cplx row_sum(std::size_t i) const;
  /// lambda_z = p . 1_z = sum_j p_j z^j over the section.
  cplx lambda_z() const;

 private:
  const RenewalChain& chain_;
  OperatorKind kind_;
  std::size_t n_;
  cplx z_;
};

/// Largest entry of (I - zQ)(I - L_z) - (I - zP) over rows and columns 1..N-1.
/// Dense up to N = 1000, entrywise beyond.
double factorization_residual(const RenewalChain& chain, cplx z, std::size_t n);

struct SpectralProbe {
  cplx lambda;
  std::vector<cplx> x;     // x_1..x_N, x_1 = 1
  double residual;         // ||lambda x - x P||_1 over columns 1..N-1
  double tail_note;        // bound on sum_{n>N} |x_n|; +inf when |lambda| >= 1
  double l1_partial_norm;  // sum_{n<=N} |x_n|
};

/// Coefficients of X(w) = w (1 - w) D(w) / (1 - lambda w):
/// x_n = lambda^{n-1} - sum_{k<n} p_k lambda^{n-1-k}.
SpectralProbe eigen_from_gf(const RenewalChain& chain, cplx lambda, std::size_t n);

/// Probes over a lambda grid, run concurrently; output order follows the input.
std::vector<SpectralProbe> disk_scan(const RenewalChain& chain, const std::vector<cplx>& lambdas,
                                     std::size_t n);

/// Header `re_lambda,im_lambda,residual,l1_partial_norm`.
void write_scan_csv(std::ostream& out, const std::vector<SpectralProbe>& probes);

struct GfValue {
  cplx p_ij;
  cplx f_ij;
  double identity_gap;  // |P_ij - F_ij P_jj - delta_ij|
  double tail_bound;    // neglected mass of p beyond the truncation, times |z|^{N+1}
};

/// P_ij(z) and F_ij(z) from the first-row closed forms. SingularPoint at z = 1,
/// OutOfDomain for |z| > 1.
GfValue gf_evaluate(const RenewalChain& chain, std::size_t i, std::size_t j, cplx z);

struct RadialPoint {
  double r;
  double value;  // (1 - r) P_ii(r)
};

/// (1 - r) P_ii(r) for r increasing to 1; the limit is pi_i.
std::vector<RadialPoint> radial_probe(const RenewalChain& chain, std::size_t i,
                                      const std::vector<double>& radii);

}  // namespace renewlab
