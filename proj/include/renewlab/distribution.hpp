#pragma once

// Signed row vectors (initial laws) and bounded column vectors (observables)
// on the truncated state space {1..N}.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace renewlab {

class RenewalChain;

class SignedDistribution {
 public:
  /// weights[k] is nu_{k+1}; tail_mass is the mass beyond the prefix. With a
  /// nonzero stationary_scale c, the states past the prefix carry c * pi_j
  /// (tail_mass then includes c * sum of those pi_j); any
  /// remaining tail mass has no declared placement. Total must be 1 within 1e-10.
  SignedDistribution(std::vector<double> weights, double tail_mass = 0.0,
                     double stationary_scale = 0.0,
                     double tail_exponent = std::numeric_limits<double>::infinity());

  static SignedDistribution point_mass(std::size_t state);
  static SignedDistribution stationary(const RenewalChain& chain);

  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t state) const;  // nu_state, 1-based, 0 beyond prefix
  double tail_mass() const noexcept { return tail_mass_; }
  double stationary_scale() const noexcept { return stationary_scale_; }
  double total() const noexcept { return total_; }
  /// Declared decay exponent of |nu_l| (+inf for finite support or light tails).
  double tail_exponent() const noexcept { return tail_exponent_; }
  /// Largest state carrying prefix mass (0 if none).
  std::size_t support() const noexcept;

 private:
  std::vector<double> weights_;
  double tail_mass_;
  double stationary_scale_;
  double tail_exponent_;
  double total_;
};

class Observable {
 public:
  /// values[k] is u_{k+1}; u_j = u_inf for j beyond the stored values.
  explicit Observable(std::vector<double> values, double u_inf = 0.0);

  static Observable indicator(std::size_t state);
  static Observable constant(double c);

  double operator()(std::size_t state) const;  // 1-based
  std::span<const double> values() const noexcept { return values_; }
  double u_inf() const noexcept { return u_inf_; }
  double sup_norm() const noexcept;

 private:
  std::vector<double> values_;
  double u_inf_;
};

}  // namespace renewlab
