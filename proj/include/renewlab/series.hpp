#pragma once

// Truncated real power series c_0 + c_1 z + ... + c_N z^N and the
// coefficient-level operations on them. Every result is valid exactly on its
// stored prefix; nothing is implicitly zero-extended past the shorter operand.

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace renewlab {

class TruncatedSeries {
 public:
  /// Throws InvalidSeries for an empty or non-finite coefficient vector.
  explicit TruncatedSeries(std::vector<double> coeffs,
                           std::optional<double> tail_hint = std::nullopt);

  static TruncatedSeries zeros(std::size_t order);
  static TruncatedSeries unit(std::size_t order);  // (1, 0, ..., 0)

  std::size_t order() const noexcept { return coeffs_.size() - 1; }
  std::size_t size() const noexcept { return coeffs_.size(); }
  double operator[](std::size_t n) const { return coeffs_[n]; }
  std::span<const double> coeffs() const noexcept { return coeffs_; }

  /// Declared asymptotic exponent of |c_n|; diagnostics only.
  std::optional<double> tail_hint() const noexcept { return tail_hint_; }

  /// Copy truncated to order `order` (must not exceed the current order).
  TruncatedSeries truncated(std::size_t order) const;

 private:
  std::vector<double> coeffs_;
  std::optional<double> tail_hint_;
};

inline constexpr double kDefaultLeadingFloor = 1e-300;

/// Cauchy product on the shared prefix, compensated summation.
TruncatedSeries convolve(const TruncatedSeries& a, const TruncatedSeries& b);

/// Coefficients of 1/D by the direct triangular recursion.
TruncatedSeries reciprocal(const TruncatedSeries& d, double leading_floor = kDefaultLeadingFloor);

/// Coefficients of E/D by long division. Cost is O(N * deg D) where deg D is
/// the last nonzero stored coefficient of d. Agrees with
/// convolve(e, reciprocal(d)) to rounding.
TruncatedSeries divide(const TruncatedSeries& e, const TruncatedSeries& d,
                       double leading_floor = kDefaultLeadingFloor);

/// result_n = sum_{n<k<=N} a_k + analytic_tail, where analytic_tail is the
/// caller's value of sum_{k>N} a_k. Requires nonnegative coefficients.
TruncatedSeries tail_transform(const TruncatedSeries& a,
                               std::optional<double> analytic_tail = std::nullopt);

/// s_n = sum_{k<=n} c_k.
TruncatedSeries partial_sums(const TruncatedSeries& c);

/// Horner evaluation of the stored prefix; |z| must not exceed 1 + 1e-9.
std::complex<double> evaluate(const TruncatedSeries& a, std::complex<double> z);

/// Kaluza property on a return-law series p (coefficient n holds p_n; the
/// n = 0 slot is ignored and taken as p_0 = 1): p_n^2 > p_{n+1} p_{n-1}
/// strictly for 1 <= n < N, and p_1 >= p_2 >= ... >= p_N.
bool kaluza_check(const TruncatedSeries& p);

enum class ConvolutionRegime {
  PowerThreeMinusTwoGamma,  // 1 < gamma < 2: O(n^{3 - 2 gamma})
  LogOverN,                 // gamma == 2:    O(log n / n)
  PowerOneMinusGamma,       // gamma > 2:     O(n^{1 - gamma})
};

struct ConvolutionPowerProbe {
  double value;             // sum_{k=1}^{n-1} k^{1-g} (n-k)^{1-g}
  ConvolutionRegime regime;
  double scaled;            // value divided by the regime's rate at n
};

ConvolutionPowerProbe convpower_probe(double gamma, long long n);

/// Minimum of |A(e^{i theta})| over `samples` equally spaced angles. A
/// heuristic check that the prefix polynomial has no zero on the unit circle;
/// it is not a certificate for the infinite series.
double min_modulus_on_circle(const TruncatedSeries& a, std::size_t samples = 4096);

/// CSV with header `n,coeff`, one coefficient per line, 17 significant digits.
void write_csv(std::ostream& out, const TruncatedSeries& a);
TruncatedSeries read_csv(std::istream& in);

}  // namespace renewlab
