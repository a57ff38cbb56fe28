#include "renewlab/distribution.hpp"

#include <algorithm>
#include <cmath>

#include "renewlab/chain.hpp"
#include "renewlab/error.hpp"
#include "renewlab/format.hpp"
#include "renewlab/kahan.hpp"

namespace renewlab {

SignedDistribution::SignedDistribution(std::vector<double> weights, double tail_mass,
                                       double stationary_scale, double tail_exponent)
    : weights_(std::move(weights)),
      tail_mass_(tail_mass),
      stationary_scale_(stationary_scale),
      tail_exponent_(tail_exponent) {
  KahanSum total;
  for (double w : weights_) {
    if (!std::isfinite(w)) throw MathError(ErrorCode::InvalidParameter, "non-finite weight");
    total += w;
  }
  total += tail_mass_;
  total_ = total.value();
  if (std::abs(total_ - 1.0) > 1e-10) {
    throw MathError(ErrorCode::NotNormalized, "signed distribution total = " + format_double(total_));
  }
}

SignedDistribution SignedDistribution::point_mass(std::size_t state) {
  if (state < 1) throw MathError(ErrorCode::InvalidParameter, "states are numbered from 1");
  std::vector<double> w(state, 0.0);
  w[state - 1] = 1.0;
  return SignedDistribution(std::move(w));
}

SignedDistribution SignedDistribution::stationary(const RenewalChain& chain) {
  if (!chain.positive_recurrent()) {
    throw MathError(ErrorCode::PreconditionViolated, "null-recurrent chain has no stationary law");
  }
  const auto pi = chain.pi();
  return SignedDistribution(std::vector<double>(pi.begin(), pi.end()), chain.pi_tail(), 1.0,
                            chain.law().tail_exponent() - 1.0);
}

double SignedDistribution::operator[](std::size_t state) const {
  return state >= 1 && state <= weights_.size() ? weights_[state - 1] : 0.0;
}

std::size_t SignedDistribution::support() const noexcept {
  for (std::size_t k = weights_.size(); k > 0; --k) {
    if (weights_[k - 1] != 0.0) return k;
  }
  return 0;
}

Observable::Observable(std::vector<double> values, double u_inf)
    : values_(std::move(values)), u_inf_(u_inf) {
  if (!std::isfinite(u_inf_)) throw MathError(ErrorCode::InvalidParameter, "u_inf must be finite");
  for (double u : values_) {
    if (!std::isfinite(u)) throw MathError(ErrorCode::InvalidParameter, "observable must be bounded");
  }
}

Observable Observable::indicator(std::size_t state) {
  if (state < 1) throw MathError(ErrorCode::InvalidParameter, "states are numbered from 1");
  std::vector<double> v(state, 0.0);
  v[state - 1] = 1.0;
  return Observable(std::move(v), 0.0);
}

Observable Observable::constant(double c) { return Observable({}, c); }

double Observable::operator()(std::size_t state) const {
  return state >= 1 && state <= values_.size() ? values_[state - 1] : u_inf_;
}

double Observable::sup_norm() const noexcept {
  double m = std::abs(u_inf_);
  for (double u : values_) m = std::max(m, std::abs(u));
  return m;
}

}  // namespace renewlab
