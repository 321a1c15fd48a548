#include "mse/curve.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mse/errors.hpp"
#include "mse/kernels.hpp"
#include "mse/spectral.hpp"

namespace mse::curve {

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Arc length map s(x) = g0 x + P(x) with P periodic, P(0) = 0.
struct ArcMap {
  std::vector<spectral::Complex> cg;
  double g0 = 1.0;
  double period = 1.0;
  std::size_t n = 0;

  explicit ArcMap(const PeriodicGraph& g) : period(g.period()), n(g.size()) {
    auto hp = spectral::derivative(g.heights(), period, 1);
    std::vector<double> gs(n);
    for (std::size_t j = 0; j < n; ++j) gs[j] = std::sqrt(1.0 + hp[j] * hp[j]);
    cg = spectral::forward(gs);
    g0 = cg[0].real();
  }

  double arclength() const { return g0 * period; }

  void eval(double x, double& s, double& ds) const {
    const double k1 = spectral::wavenumber(1.0, period);
    const spectral::Complex step = std::polar(1.0, k1 * x);
    spectral::Complex e(1.0, 0.0);
    s = g0 * x;
    ds = g0;
    for (std::size_t m = 1; m < n / 2; ++m) {
      e *= step;
      if (m % 64 == 0) e = std::polar(1.0, k1 * static_cast<double>(m) * x);
      const double k = k1 * static_cast<double>(m);
      const spectral::Complex t = cg[m] * (e - 1.0);
      s += 2.0 * (t / spectral::Complex(0.0, k)).real();
      ds += 2.0 * (cg[m] * e).real();
    }
  }
};

template <class Fn>
void for_each_image_in_ball(const SampledCurve& c, Point center, double r, Fn&& fn) {
  const std::size_t n = c.size();
  const int reach = c.periodic ? static_cast<int>(std::ceil(r / c.period)) + 1 : 0;
  for (std::size_t j = 0; j < n; ++j) {
    for (int p = -reach; p <= reach; ++p) {
      const double dx = c.z[j].x + p * c.period - center.x;
      const double dy = c.z[j].y - center.y;
      if (dx * dx + dy * dy < r * r) fn(j);
    }
  }
}

}  // namespace

PeriodicGraph::PeriodicGraph(double period, std::vector<double> heights, double slope_margin)
    : period_(period), h_(std::move(heights)), margin_(slope_margin) {
  if (!(period_ > 0.0) || !std::isfinite(period_)) throw DomainError("graph period must be positive");
  if (h_.size() < 16 || !spectral::is_power_of_two(h_.size()))
    throw DomainError("graph sample count must be a power of two >= 16");
  if (!(margin_ > 0.0 && margin_ < kPi / 2)) throw DomainError("slope margin must lie in (0, pi/2)");
  double sum = 0.0;
  for (double v : h_) {
    if (!std::isfinite(v)) throw DomainError("graph heights must be finite");
    sum += v;
  }
  const double mean = sum / static_cast<double>(h_.size());
  if (std::abs(mean) > 1e-12 * std::max(max_abs(h_), 1.0)) {
    std::ostringstream os;
    os << "graph mean height " << mean << " is not zero";
    throw NeutralityError(os.str());
  }
  const double slope = max_slope();
  if (!(slope < slope_limit())) {
    std::ostringstream os;
    os << "left graph regime: slope " << slope << " exceeds " << slope_limit();
    throw GraphRegimeError(os.str());
  }
}

PeriodicGraph PeriodicGraph::from_modes(double period, std::size_t n, std::span<const Mode> modes,
                                        double slope_margin) {
  std::vector<double> h(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = period * static_cast<double>(j) / static_cast<double>(n);
    for (const Mode& md : modes) h[j] += md.amplitude * std::sin(spectral::wavenumber(md.m, period) * x + md.phase);
  }
  double mean = 0.0;
  for (double v : h) mean += v;
  mean /= static_cast<double>(n);
  for (double& v : h) v -= mean;
  return PeriodicGraph(period, std::move(h), slope_margin);
}

PeriodicGraph PeriodicGraph::flat(double period, std::size_t n) {
  return PeriodicGraph(period, std::vector<double>(n, 0.0));
}

double PeriodicGraph::max_slope() const {
  const std::size_t n = h_.size();
  const double dx = period_ / static_cast<double>(n);
  double m = 0.0;
  for (std::size_t j = 0; j < n; ++j) m = std::max(m, std::abs(h_[(j + 1) % n] - h_[j]) / dx);
  return m;
}

double PeriodicGraph::slope_limit() const { return std::tan(kPi / 2 - margin_); }

double SampledCurve::b_sup() const {
  double m = 0.0;
  for (double v : b) m = std::max(m, std::abs(v));
  return m;
}

double curvature_from_graph(double hp, double hpp) {
  const double q = 1.0 + hp * hp;
  return -hpp / (q * std::sqrt(q));
}

SampledCurve graph_to_curve(const PeriodicGraph& g) {
  const std::size_t n = g.size();
  const double L = g.period();
  const ArcMap arc(g);
  const spectral::TrigInterpolant hi(g.heights(), L);
  const double lambda = arc.arclength();

  SampledCurve c;
  c.periodic = true;
  c.period = L;
  c.arclength = lambda;
  c.s.resize(n);
  c.z.resize(n);
  c.b.resize(n);
  c.kappa.resize(n);
  c.normal.resize(n);
  c.w.assign(n, lambda / static_cast<double>(n));

  for (std::size_t j = 0; j < n; ++j) {
    const double sj = lambda * static_cast<double>(j) / static_cast<double>(n);
    double x = sj / arc.g0;
    for (int it = 0; it < 50; ++it) {
      double s = 0.0, ds = 1.0;
      arc.eval(x, s, ds);
      const double dx = (s - sj) / ds;
      x -= dx;
      if (std::abs(dx) <= 1e-15 * L) break;
    }
    double h = 0.0, hp = 0.0, hpp = 0.0;
    hi.eval3(x, h, hp, hpp);
    c.s[j] = sj;
    c.z[j] = {x, h};
    c.b[j] = std::atan(hp);
    c.kappa[j] = curvature_from_graph(hp, hpp);
    c.normal[j] = {std::sin(c.b[j]), -std::cos(c.b[j])};
  }
  return c;
}

std::vector<double> arclength_at_nodes(const PeriodicGraph& g) {
  const std::size_t n = g.size();
  const ArcMap arc(g);
  std::vector<spectral::Complex> p(n / 2 + 1, 0.0);
  for (std::size_t m = 1; m < n / 2; ++m)
    p[m] = arc.cg[m] / spectral::Complex(0.0, spectral::wavenumber(static_cast<double>(m), g.period()));
  auto periodic_part = spectral::inverse(p, n);
  const double p0 = periodic_part[0];
  std::vector<double> s(n);
  for (std::size_t j = 0; j < n; ++j) s[j] = arc.g0 * g.abscissa(j) + periodic_part[j] - p0;
  return s;
}

PeriodicGraph curve_to_graph(const SampledCurve& c, std::size_t n, double slope_margin) {
  if (!c.periodic) throw DomainError("curve_to_graph needs a periodic curve");
  const std::size_t m = c.size();
  const double L = c.period;
  const double lambda = c.arclength;
  std::vector<double> p(m), h(m);
  for (std::size_t j = 0; j < m; ++j) {
    p[j] = c.z[j].x - c.s[j] * L / lambda;
    h[j] = c.z[j].y;
  }
  const spectral::TrigInterpolant pi(p, lambda);
  const spectral::TrigInterpolant hi(h, lambda);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = L * static_cast<double>(i) / static_cast<double>(n);
    double s = xi * lambda / L;
    for (int it = 0; it < 50; ++it) {
      double f = 0.0, df = 0.0, d2 = 0.0;
      pi.eval3(s, f, df, d2);
      const double ds = (s * L / lambda + f - xi) / (L / lambda + df);
      s -= ds;
      if (std::abs(ds) <= 1e-15 * lambda) break;
    }
    out[i] = hi(s);
  }
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(n);
  for (double& v : out) v -= mean;
  return PeriodicGraph(L, std::move(out), slope_margin);
}

double excess_energy(const SampledCurve& c) {
  double e = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double sh = std::sin(0.5 * c.b[j]);
    e += c.w[j] * (2.0 * sh * sh);
  }
  return e;
}

double nonoriented_excess(const SampledCurve& c) {
  double e = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double sh = std::sin(0.5 * c.b[j]);
    const double ch = std::cos(0.5 * c.b[j]);
    e += (c.w[j] * (2.0 * sh * sh)) * (2.0 * ch * ch);
  }
  return e;
}

double angle_constant(double b_sup) {
  if (b_sup == 0.0) return 2.0;
  const double sh = std::sin(0.5 * b_sup);
  return b_sup * b_sup / (2.0 * sh * sh);
}

AngleBoundReport angle_bound_check(const SampledCurve& c, double E, double rel_slack) {
  const double bs = c.b_sup();
  if (!(bs < 2.0 * kPi)) throw DomainError("angle bound needs |b| < 2 pi");
  AngleBoundReport r;
  for (std::size_t j = 0; j < c.size(); ++j) r.b_l2_sq += c.w[j] * c.b[j] * c.b[j];
  r.c_b = angle_constant(bs);
  r.bound = r.c_b * E;
  r.ratio = r.bound > 0.0 ? r.b_l2_sq / r.bound : 0.0;
  r.holds = r.b_l2_sq <= r.bound * (1.0 + rel_slack);
  return r;
}

OscillationEstimate bmo_normal(const SampledCurve& c) {
  const auto radii = kernels::dyadic_radii(c);
  const auto scan = kernels::normal_oscillation(c, radii, kernels::Exec::parallel);
  OscillationEstimate est;
  est.skipped_windows = scan.skipped;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (scan.per_radius[k] > est.value) {
      est.value = scan.per_radius[k];
      est.worst_radius = radii[k];
      est.worst_node = scan.worst_node[k];
    }
  }
  return est;
}

namespace {

template <class Integrand>
TiltResult cylinder_sum(const SampledCurve& c, std::size_t y, double r, Point e, Integrand f) {
  if (!(r > 0.0)) throw DomainError("tilt radius must be positive");
  if (y >= c.size()) throw DomainError("tilt centre index out of range");
  const double en = std::hypot(e.x, e.y);
  e = {e.x / en, e.y / en};
  const Point centre = c.z[y];
  TiltResult res;
  const int reach = c.periodic ? static_cast<int>(std::ceil(r / c.period)) + 1 : 0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    for (int p = -reach; p <= reach; ++p) {
      const double dx = c.z[j].x + p * c.period - centre.x;
      const double dy = c.z[j].y - centre.y;
      const double along = dx * e.x + dy * e.y;
      const double px = dx - along * e.x, py = dy - along * e.y;
      if (std::abs(along) < r && std::hypot(px, py) < r) {
        res.value += c.w[j] * f(c.normal[j], e);
        ++res.nodes;
      }
    }
  }
  res.value /= r;
  res.empty = res.nodes == 0;
  res.degenerate = res.nodes < 4;
  return res;
}

}  // namespace

TiltResult tilt_excess(const SampledCurve& c, std::size_t y, double r, Point e) {
  return cylinder_sum(c, y, r, e, [](Point nu, Point en) {
    const double dx = nu.x - en.x, dy = nu.y - en.y;
    return 0.5 * (dx * dx + dy * dy);
  });
}

TiltResult nonoriented_tilt_excess(const SampledCurve& c, std::size_t y, double r, Point e) {
  return cylinder_sum(c, y, r, e, [](Point nu, Point en) {
    const double d = nu.x * en.x + nu.y * en.y;
    return 1.0 - d * d;
  });
}

double ball_length(const SampledCurve& c, Point center, double r) {
  const std::size_t n = c.size();
  const std::size_t segments = c.periodic ? n : n - 1;
  const int reach = c.periodic ? static_cast<int>(std::ceil(r / c.period)) + 1 : 0;
  double total = 0.0;
  for (std::size_t j = 0; j < segments; ++j) {
    const std::size_t k = (j + 1) % n;
    const double wrap = (c.periodic && k == 0) ? c.period : 0.0;
    for (int p = -reach; p <= reach; ++p) {
      const double ax = c.z[j].x + p * c.period - center.x;
      const double ay = c.z[j].y - center.y;
      const double bx = c.z[k].x + wrap + p * c.period - center.x;
      const double by = c.z[k].y - center.y;
      const double dx = bx - ax, dy = by - ay;
      const double qa = dx * dx + dy * dy;
      const double qb = 2.0 * (ax * dx + ay * dy);
      const double qc = ax * ax + ay * ay - r * r;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (qa == 0.0 || disc <= 0.0) continue;
      const double sq = std::sqrt(disc);
      const double t1 = std::max(0.0, (-qb - sq) / (2.0 * qa));
      const double t2 = std::min(1.0, (-qb + sq) / (2.0 * qa));
      if (t2 > t1) total += (t2 - t1) * std::sqrt(qa);
    }
  }
  return total;
}

namespace {

// Density deviation over balls that stay clear of the ends of an open curve.
double density_deviation(const SampledCurve& c, const std::vector<double>& radii) {
  double worst = 0.0;
  const std::size_t n = c.size();
  for (double r : radii) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!c.periodic) {
        const Point a = c.z.front(), b = c.z.back();
        if (std::hypot(a.x - c.z[i].x, a.y - c.z[i].y) <= r ||
            std::hypot(b.x - c.z[i].x, b.y - c.z[i].y) <= r)
          continue;
      }
      worst = std::max(worst, std::abs(ball_length(c, c.z[i], r) / (2.0 * r) - 1.0));
    }
  }
  return worst;
}

}  // namespace

AllardReport allard_graph_check(const SampledCurve& c, double E, double D, const AllardThresholds& eta) {
  AllardReport rep;
  if (!(D > 0.0)) {
    rep.flat_shortcut = true;
    rep.is_graph = true;
    return rep;
  }
  const double R = std::cbrt(E / D);
  rep.R = R;
  rep.density_dev = density_deviation(c, {R});
  double kfull = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) kfull += c.w[j] * c.kappa[j] * c.kappa[j];
  rep.curvature_full = std::sqrt(R) * std::sqrt(kfull);
  for (std::size_t i = 0; i < c.size(); ++i) {
    rep.tilt_bar = std::max(rep.tilt_bar, nonoriented_tilt_excess(c, i, R, {0.0, -1.0}).value);
    double k2 = 0.0;
    for_each_image_in_ball(c, c.z[i], R, [&](std::size_t j) { k2 += c.w[j] * c.kappa[j] * c.kappa[j]; });
    rep.curvature = std::max(rep.curvature, std::sqrt(R) * std::sqrt(k2));
  }
  rep.is_graph = rep.density_dev < eta.density && rep.tilt_bar < eta.tilt && rep.curvature < eta.curvature;
  return rep;
}

FlatnessReport flatness_report(const SampledCurve& c, double E, double D, const AllardThresholds& eta) {
  FlatnessReport rep;
  const auto radii = kernels::dyadic_radii(c);
  const auto scan = kernels::normal_oscillation(c, radii, kernels::Exec::parallel);
  for (double v : scan.per_radius) rep.bmo_normal = std::max(rep.bmo_normal, v);
  rep.skipped_windows = scan.skipped;
  rep.b_sup = c.b_sup();
  rep.radii = radii;
  for (double r : radii) {
    double worst = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto t = tilt_excess(c, i, r, {0.0, -1.0});
      if (t.degenerate) {
        ++rep.skipped_windows;
        continue;
      }
      worst = std::max(worst, t.value);
    }
    rep.tilt.push_back(worst);
  }
  std::vector<double> dens_radii;
  for (double r : radii)
    if (r >= 4.0 * c.arclength / static_cast<double>(c.size())) dens_radii.push_back(r);
  rep.density_dev = density_deviation(c, dens_radii);
  rep.allard = allard_graph_check(c, E, D, eta);
  return rep;
}

double spiral_eps_limit() { return 1.0 / (3.0 * std::log(1.5)); }

SampledCurve spiral_fixture(double eps, double window, std::size_t n) {
  if (!(eps > 0.0 && eps < spiral_eps_limit())) throw DomainError("spiral eps outside (0, 1/(3 log 1.5))");
  if (!(window > 0.0) || n < 4) throw DomainError("spiral window must be positive with at least 4 nodes");
  SampledCurve c;
  c.periodic = false;
  c.period = 0.0;
  c.arclength = window;
  const double h = window / static_cast<double>(n);
  const std::complex<double> denom(1.0, eps);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = -0.5 * window + (static_cast<double>(j) + 0.5) * h;
    const double as = std::abs(s);
    const double b = eps * std::log(as);
    const std::complex<double> z = std::copysign(1.0, s) * as * std::polar(1.0, b) / denom;
    c.s.push_back(s);
    c.z.push_back({z.real(), z.imag()});
    c.b.push_back(b);
    c.kappa.push_back(-eps / s);
    c.normal.push_back({std::sin(b), -std::cos(b)});
    c.w.push_back(h);
  }
  return c;
}

void write_snapshot(std::ostream& os, const SampledCurve& c, double t) {
  os << std::setprecision(17);
  os << "# L=" << c.period << " n=" << c.size() << " t=" << t << "\n";
  for (std::size_t j = 0; j < c.size(); ++j)
    os << c.s[j] << ' ' << c.z[j].x << ' ' << c.z[j].y << ' ' << c.b[j] << ' ' << c.kappa[j] << ' ' << c.w[j]
       << "\n";
}

SampledCurve read_snapshot(std::istream& is, double* t) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw DomainError("snapshot header missing");
  double L = 0.0, time = 0.0;
  std::size_t n = 0;
  if (std::sscanf(line.c_str(), "# L=%lf n=%zu t=%lf", &L, &n, &time) != 3)
    throw DomainError("snapshot header malformed");
  SampledCurve c;
  c.period = L;
  c.periodic = L > 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double s, x, y, b, k, w;
    if (!(is >> s >> x >> y >> b >> k >> w)) throw DomainError("snapshot truncated");
    c.s.push_back(s);
    c.z.push_back({x, y});
    c.b.push_back(b);
    c.kappa.push_back(k);
    c.normal.push_back({std::sin(b), -std::cos(b)});
    c.w.push_back(w);
    c.arclength += w;
  }
  if (t) *t = time;
  return c;
}

}  // namespace mse::curve
