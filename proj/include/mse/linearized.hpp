#pragma once

#include <complex>
#include <span>
#include <vector>

#include "mse/curve.hpp"
#include "mse/diagnostics.hpp"

namespace mse::linearized {

inline double sharp_C1() { return 1.0 / (4.0 * (std::numbers::sqrt2 + 1.0)); }

// Fourier series h(x) = sum_{m != 0} hhat_m exp(i k_m x) with hhat_{-m} = conj(hhat_m).
struct SpectralState {
  double period = 2.0 * std::numbers::pi;
  // coeffs[m-1] = hhat_m for m = 1..M; the zero mode is identically 0.
  std::vector<std::complex<double>> coeffs;

  static SpectralState from_modes(double period, std::span<const curve::Mode> modes);
  static SpectralState from_graph(const curve::PeriodicGraph& g);
  double wavenumber(std::size_t m) const;
  // Slowest nonzero wavenumber.
  double k_min() const;
  std::vector<double> heights(std::size_t n) const;
};

SpectralState evolve_exact(const SpectralState& s, double t);

struct LinearQuantities {
  double E = 0.0;
  double D = 0.0;
  double H = 0.0;
};
LinearQuantities linear_quantities(const SpectralState& s);

// Closed-form time derivatives of H, E, D along the linear flow.
LinearQuantities linear_rates(const SpectralState& s);

struct LinearSample {
  double t;
  LinearQuantities q;
};

struct LinearChainReport {
  std::vector<LinearSample> samples;
  LinearQuantities initial;
  double H0 = 0.0;
  double identity_residual = 0.0;
  bool identity_ok = true;
  double hed_worst = 0.0;
  bool hed_ok = true;
  bool D_monotone = true;
  bool decay_E_ok = true;
  bool decay_D_ok = true;
  double sup_tE = 0.0;
  double sup_tE_time = 0.0;
  double sup_t2D = 0.0;
  double sup_t2D_time = 0.0;
  double C1 = sharp_C1();
  bool pass() const { return identity_ok && hed_ok && D_monotone && decay_E_ok && decay_D_ok; }
};

std::vector<double> log_times(const SpectralState& s, std::size_t count = 1000);
LinearChainReport linear_chain_check(const SpectralState& s0, std::span<const double> times);

// Prepends the t = 0 row when the sampled times start later.
std::vector<diagnostics::DiagnosticsRecord> to_records(const LinearChainReport& rep, double alpha);

}  // namespace mse::linearized
