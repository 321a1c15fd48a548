#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace mse::spectral {

using Complex = std::complex<double>;

// Coefficients c_m = (1/n) sum_j f_j exp(-2 pi i j m / n), m = 0..n/2.
std::vector<Complex> forward(std::span<const double> f);

// Inverse of forward for a real signal of length n.
std::vector<double> inverse(std::span<const Complex> c, std::size_t n);

// Signed wavenumber 2 pi m / period.
inline double wavenumber(double m, double period) {
  return 2.0 * 3.14159265358979323846 * m / period;
}

// Spectral derivative of a periodic sample vector. The Nyquist mode is
// dropped for odd orders.
std::vector<double> derivative(std::span<const double> f, double period, int order);

bool is_power_of_two(std::size_t n);

// Trigonometric interpolant of uniform samples on [0, period).
class TrigInterpolant {
 public:
  TrigInterpolant() = default;
  TrigInterpolant(std::span<const double> samples, double period);

  double operator()(double x, int order = 0) const;
  // Value and first two derivatives in one pass.
  void eval3(double x, double& f, double& df, double& d2f) const;

  double period() const { return period_; }
  std::size_t size() const { return n_; }
  const std::vector<Complex>& coefficients() const { return c_; }

 private:
  std::vector<Complex> c_;
  std::size_t n_ = 0;
  double period_ = 1.0;
};

}  // namespace mse::spectral
