#include "mse/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace mse::spectral {

namespace {

struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Plans are created once per size and reused through the new-array
// execute interface, which is thread safe.
const PlanPair& plans_for(std::size_t n) {
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> in(n);
  std::vector<fftw_complex> out(n / 2 + 1);
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  PlanPair p;
  p.r2c = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(), flags);
  p.c2r = fftw_plan_dft_c2r_1d(static_cast<int>(n), out.data(), in.data(), flags | FFTW_DESTROY_INPUT);
  return cache.emplace(n, p).first->second;
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<Complex> forward(std::span<const double> f) {
  const std::size_t n = f.size();
  if (n < 2) throw std::invalid_argument("spectral::forward: need at least 2 samples");
  const PlanPair& p = plans_for(n);
  std::vector<double> in(f.begin(), f.end());
  std::vector<Complex> out(n / 2 + 1);
  fftw_execute_dft_r2c(p.r2c, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& c : out) c *= scale;
  return out;
}

std::vector<double> inverse(std::span<const Complex> c, std::size_t n) {
  if (c.size() != n / 2 + 1) throw std::invalid_argument("spectral::inverse: size mismatch");
  const PlanPair& p = plans_for(n);
  std::vector<Complex> in(c.begin(), c.end());
  std::vector<double> out(n);
  fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(in.data()), out.data());
  return out;
}

std::vector<double> derivative(std::span<const double> f, double period, int order) {
  const std::size_t n = f.size();
  auto c = forward(f);
  const std::size_t half = n / 2;
  for (std::size_t m = 0; m <= half; ++m) {
    const Complex ik(0.0, wavenumber(static_cast<double>(m), period));
    Complex factor(1.0, 0.0);
    for (int q = 0; q < order; ++q) factor *= ik;
    c[m] *= factor;
  }
  if (n % 2 == 0 && order % 2 == 1) c[half] = 0.0;
  return inverse(c, n);
}

TrigInterpolant::TrigInterpolant(std::span<const double> samples, double period)
    : c_(forward(samples)), n_(samples.size()), period_(period) {}

double TrigInterpolant::operator()(double x, int order) const {
  const std::size_t half = n_ / 2;
  const double k1 = wavenumber(1.0, period_);
  const Complex step = std::polar(1.0, k1 * x);
  Complex e(1.0, 0.0);
  double acc = order == 0 ? c_[0].real() : 0.0;
  for (std::size_t m = 1; m <= half; ++m) {
    e *= step;
    if (m % 64 == 0) e = std::polar(1.0, k1 * static_cast<double>(m) * x);
    const double k = k1 * static_cast<double>(m);
    Complex factor(1.0, 0.0);
    for (int q = 0; q < order; ++q) factor *= Complex(0.0, k);
    const Complex term = c_[m] * e * factor;
    if (n_ % 2 == 0 && m == half) {
      if (order % 2 == 1) continue;
      acc += term.real();
    } else {
      acc += 2.0 * term.real();
    }
  }
  return acc;
}

void TrigInterpolant::eval3(double x, double& f, double& df, double& d2f) const {
  const std::size_t half = n_ / 2;
  const double k1 = wavenumber(1.0, period_);
  const Complex step = std::polar(1.0, k1 * x);
  Complex e(1.0, 0.0);
  f = c_[0].real();
  df = 0.0;
  d2f = 0.0;
  for (std::size_t m = 1; m <= half; ++m) {
    e *= step;
    if (m % 64 == 0) e = std::polar(1.0, k1 * static_cast<double>(m) * x);
    const double k = k1 * static_cast<double>(m);
    const Complex t = c_[m] * e;
    if (n_ % 2 == 0 && m == half) {
      f += t.real();
      d2f -= k * k * t.real();
    } else {
      f += 2.0 * t.real();
      df -= 2.0 * k * t.imag();
      d2f -= 2.0 * k * k * t.real();
    }
  }
}

}  // namespace mse::spectral
