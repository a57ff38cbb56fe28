#pragma once

#include <cmath>
#include <complex>
#include <type_traits>

namespace renewlab {

/// Compensated accumulator (Neumaier's variant of Kahan summation).
template <typename T = double>
class KahanSum {
 public:
  KahanSum() = default;
  explicit KahanSum(T init) : sum_(init) {}

  void add(T x) {
    if constexpr (std::is_floating_point_v<T>) {
      add_real(sum_, comp_, x);
    } else {
      auto re = sum_.real(), im = sum_.imag();
      auto cre = comp_.real(), cim = comp_.imag();
      add_real(re, cre, x.real());
      add_real(im, cim, x.imag());
      sum_ = T(re, im);
      comp_ = T(cre, cim);
    }
  }

  KahanSum& operator+=(T x) {
    add(x);
    return *this;
  }

  T value() const { return sum_ + comp_; }

 private:
  template <typename R>
  static void add_real(R& sum, R& comp, R x) {
    const R t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }

  T sum_{};
  T comp_{};
};

}  // namespace renewlab
