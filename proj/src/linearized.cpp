#include "mse/linearized.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mse/errors.hpp"
#include "mse/spectral.hpp"

namespace mse::linearized {

namespace {

constexpr double kSlack = 1e-12;

// Golden-section maximisation of f over [lo, hi] in log time.
template <class F>
std::pair<double, double> refine_max(F f, double lo, double hi) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(lo), b = std::log(hi);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(std::exp(c)), fd = f(std::exp(d));
  for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(std::exp(d));
    }
  }
  const double t = std::exp(0.5 * (a + b));
  return {t, f(t)};
}

}  // namespace

SpectralState SpectralState::from_modes(double period, std::span<const curve::Mode> modes) {
  SpectralState s;
  s.period = period;
  int mmax = 0;
  for (const auto& md : modes) {
    if (md.m < 1) throw DomainError("mode index must be positive");
    mmax = std::max(mmax, md.m);
  }
  s.coeffs.assign(static_cast<std::size_t>(mmax), 0.0);
  for (const auto& md : modes)
    s.coeffs[static_cast<std::size_t>(md.m - 1)] += md.amplitude * std::polar(1.0, md.phase) / std::complex<double>(0.0, 2.0);
  return s;
}

SpectralState SpectralState::from_graph(const curve::PeriodicGraph& g) {
  SpectralState s;
  s.period = g.period();
  const auto c = spectral::forward(g.heights());
  const std::size_t half = g.size() / 2;
  s.coeffs.assign(c.begin() + 1, c.end());
  s.coeffs[half - 1] = 0.5 * c[half].real();
  return s;
}

double SpectralState::wavenumber(std::size_t m) const { return spectral::wavenumber(static_cast<double>(m), period); }

double SpectralState::k_min() const {
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    if (coeffs[i] != 0.0) return wavenumber(i + 1);
  return wavenumber(1);
}

std::vector<double> SpectralState::heights(std::size_t n) const {
  std::vector<double> h(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = period * static_cast<double>(j) / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      if (coeffs[i] == 0.0) continue;
      acc += 2.0 * (coeffs[i] * std::polar(1.0, wavenumber(i + 1) * x)).real();
    }
    h[j] = acc;
  }
  return h;
}

SpectralState evolve_exact(const SpectralState& s, double t) {
  if (!(t >= 0.0)) throw DomainError("evolve_exact needs t >= 0");
  SpectralState out = s;
  for (std::size_t i = 0; i < out.coeffs.size(); ++i) {
    const double k = s.wavenumber(i + 1);
    out.coeffs[i] *= std::exp(-2.0 * k * k * k * t);
  }
  return out;
}

LinearQuantities linear_quantities(const SpectralState& s) {
  LinearQuantities q;
  for (std::size_t i = 0; i < s.coeffs.size(); ++i) {
    const double k = s.wavenumber(i + 1);
    const double a2 = std::norm(s.coeffs[i]);
    q.E += k * k * a2;
    q.D += 4.0 * std::pow(k, 5) * a2;
    q.H += a2 / k;
  }
  q.E *= s.period;
  q.D *= s.period;
  q.H *= s.period;
  return q;
}

LinearQuantities linear_rates(const SpectralState& s) {
  LinearQuantities r;
  for (std::size_t i = 0; i < s.coeffs.size(); ++i) {
    const double k = s.wavenumber(i + 1);
    const double a2 = std::norm(s.coeffs[i]);
    const double decay = -4.0 * k * k * k;
    r.E += decay * k * k * a2;
    r.D += decay * 4.0 * std::pow(k, 5) * a2;
    r.H += decay * a2 / k;
  }
  r.E *= s.period;
  r.D *= s.period;
  r.H *= s.period;
  return r;
}

std::vector<double> log_times(const SpectralState& s, std::size_t count) {
  const double k = s.k_min();
  const double lo = 1e-3 / (k * k * k), hi = 1e3 / (k * k * k);
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i)
    t[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(count - 1));
  return t;
}

LinearChainReport linear_chain_check(const SpectralState& s0, std::span<const double> times) {
  LinearChainReport rep;
  const LinearQuantities q0 = linear_quantities(s0);
  if (!(q0.H > 0.0)) throw DomainError("linear chain check needs a nonzero state");
  rep.H0 = q0.H;
  rep.initial = q0;
  std::size_t imax_e = 0, imax_d = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const auto st = evolve_exact(s0, t);
    const auto q = linear_quantities(st);
    const auto r = linear_rates(st);
    rep.samples.push_back({t, q});
    const double resid = std::abs(0.5 * r.H + 2.0 * q.E) / std::max(q.E, std::numeric_limits<double>::min());
    rep.identity_residual = std::max(rep.identity_residual, std::isnormal(q.E) ? resid : 0.0);
    // Subnormal tails carry too few digits for the ratio tests.
    const bool resolved = std::isnormal(q.E) && std::isnormal(q.H) && std::isnormal(q.D);
    const double half_hd = 0.5 * std::sqrt(q.H) * std::sqrt(q.D);
    if (resolved) rep.hed_worst = std::max(rep.hed_worst, q.E / half_hd);
    if (resolved && q.E > half_hd * (1.0 + kSlack)) rep.hed_ok = false;
    if (i > 0 && q.D > rep.samples[i - 1].q.D * (1.0 + kSlack)) rep.D_monotone = false;
    const double te = t * q.E / q0.H, t2d = t * t * q.D / q0.H;
    if (te > rep.sup_tE) {
      rep.sup_tE = te;
      imax_e = i;
    }
    if (t2d > rep.sup_t2D) {
      rep.sup_t2D = t2d;
      imax_d = i;
    }
  }
  rep.identity_ok = rep.identity_residual <= kSlack;
  auto te_of = [&](double t) { return t * linear_quantities(evolve_exact(s0, t)).E / q0.H; };
  auto td_of = [&](double t) { return t * t * linear_quantities(evolve_exact(s0, t)).D / q0.H; };
  rep.sup_tE_time = times.empty() ? 0.0 : times[imax_e];
  rep.sup_t2D_time = times.empty() ? 0.0 : times[imax_d];
  if (times.size() >= 3) {
    const std::size_t lo_e = imax_e == 0 ? 0 : imax_e - 1, hi_e = std::min(imax_e + 1, times.size() - 1);
    const auto [te_t, te_v] = refine_max(te_of, times[lo_e], times[hi_e]);
    if (te_v > rep.sup_tE) {
      rep.sup_tE = te_v;
      rep.sup_tE_time = te_t;
    }
    const std::size_t lo_d = imax_d == 0 ? 0 : imax_d - 1, hi_d = std::min(imax_d + 1, times.size() - 1);
    const auto [td_t, td_v] = refine_max(td_of, times[lo_d], times[hi_d]);
    if (td_v > rep.sup_t2D) {
      rep.sup_t2D = td_v;
      rep.sup_t2D_time = td_t;
    }
  }
  rep.decay_E_ok = rep.sup_tE <= rep.C1 * (1.0 + kSlack);
  rep.decay_D_ok = rep.sup_t2D <= 0.5 * (1.0 + kSlack);
  return rep;
}

std::vector<diagnostics::DiagnosticsRecord> to_records(const LinearChainReport& rep, double alpha) {
  std::vector<diagnostics::DiagnosticsRecord> out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<LinearSample> samples;
  if (rep.samples.empty() || rep.samples.front().t > 0.0) samples.push_back({0.0, rep.initial});
  samples.insert(samples.end(), rep.samples.begin(), rep.samples.end());
  for (const auto& s : samples) {
    diagnostics::DiagnosticsRecord r;
    r.t = s.t;
    r.E = s.q.E;
    r.Ebar = 2.0 * s.q.E;
    r.D = s.q.D;
    r.H = s.q.H;
    r.eps = diagnostics::epsilon(s.q.E, s.q.D);
    r.F = diagnostics::auxiliary_F(s.t, s.q.H, s.q.E, s.q.D, alpha);
    r.b_sup = nan;
    r.bmo = nan;
    const double hd = std::sqrt(s.q.H) * std::sqrt(s.q.D);
    r.hed_ratio = hd > 0.0 ? s.q.E / hd : 0.0;
    r.residual_edi = nan;
    out.push_back(r);
  }
  return out;
}

}  // namespace mse::linearized
