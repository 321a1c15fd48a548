#include "mse/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mse/errors.hpp"

namespace mse::kernels {

namespace {

constexpr double kPi = std::numbers::pi;

// cosh(a dy) - cos(a dx) without cancellation near the origin.
inline double kernel_denominator(double a, double dx, double dy) {
  const double sh = std::sinh(0.5 * a * dy);
  const double sn = std::sin(0.5 * a * dx);
  return 2.0 * (sh * sh + sn * sn);
}

inline double periodic_green(double a, double dx, double dy) {
  return -std::log(kernel_denominator(a, dx, dy)) / (4.0 * kPi);
}

void require_periodic(const curve::SampledCurve& c) {
  if (!c.periodic || !(c.period > 0.0)) throw AssemblyError("boundary operators need a periodic curve");
  if (c.size() % 2 != 0) throw AssemblyError("boundary operators need an even node count");
}

struct SingleLayerRow {
  const curve::SampledCurve& c;
  const std::vector<double>& kress;
  double a, lambda, h, diag;

  double entry(std::size_t i, std::size_t j) const {
    const std::size_t n = c.size();
    const std::size_t k = i >= j ? i - j : i + n - j;
    double rem;
    if (i == j) {
      rem = diag;
    } else {
      const double dx = c.z[i].x - c.z[j].x;
      const double dy = c.z[i].y - c.z[j].y;
      const double sn = std::sin(kPi * (c.s[i] - c.s[j]) / lambda);
      rem = periodic_green(a, dx, dy) + std::log(4.0 * sn * sn) / (4.0 * kPi);
    }
    return -lambda / (8.0 * kPi * kPi) * kress[k] + h * rem;
  }
};

SingleLayerRow make_single_layer(const curve::SampledCurve& c, const std::vector<double>& kress) {
  const double L = c.period;
  const double lambda = c.arclength;
  return {c, kress, 2.0 * kPi / L, lambda, lambda / static_cast<double>(c.size()),
          -std::log(lambda * lambda / (2.0 * L * L)) / (4.0 * kPi)};
}

void normal_gradient_row(const curve::SampledCurve& c, double a, std::size_t i, Eigen::MatrixXd& out) {
  const std::size_t n = c.size();
  const Point nu = c.normal[i];
  for (std::size_t j = 0; j < n; ++j) {
    if (i == j) {
      out(i, j) = c.w[i] * c.kappa[i] / (4.0 * kPi);
      continue;
    }
    const double dx = c.z[i].x - c.z[j].x;
    const double dy = c.z[i].y - c.z[j].y;
    const double den = kernel_denominator(a, dx, dy);
    const double gx = -a * std::sin(a * dx) / (4.0 * kPi * den);
    const double gy = -a * std::sinh(a * dy) / (4.0 * kPi * den);
    out(i, j) = c.w[j] * (nu.x * gx + nu.y * gy);
  }
}

// Oscillation of the normal around node i for every radius.
void oscillation_at(const curve::SampledCurve& c, const std::vector<double>& radii, std::size_t i,
                    double* osc, std::size_t& skipped, std::vector<std::pair<double, std::size_t>>& members) {
  const std::size_t n = c.size();
  const double rmax = radii.empty() ? 0.0 : radii.back();
  const int reach = c.periodic ? static_cast<int>(std::ceil(rmax / c.period)) + 1 : 0;
  members.clear();
  for (std::size_t j = 0; j < n; ++j) {
    for (int p = -reach; p <= reach; ++p) {
      const double dx = c.z[j].x + p * c.period - c.z[i].x;
      const double dy = c.z[j].y - c.z[i].y;
      const double d = std::hypot(dx, dy);
      if (d < rmax) members.emplace_back(d, j);
    }
  }
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double r = radii[k];
    double sw = 0.0, mx = 0.0, my = 0.0;
    std::size_t count = 0;
    for (const auto& [d, j] : members) {
      if (d >= r) continue;
      sw += c.w[j];
      mx += c.w[j] * c.normal[j].x;
      my += c.w[j] * c.normal[j].y;
      ++count;
    }
    if (count < 4) {
      osc[k] = 0.0;
      ++skipped;
      continue;
    }
    mx /= sw;
    my /= sw;
    double var = 0.0;
    for (const auto& [d, j] : members) {
      if (d >= r) continue;
      const double ex = c.normal[j].x - mx, ey = c.normal[j].y - my;
      var += c.w[j] * (ex * ex + ey * ey);
    }
    osc[k] = std::sqrt(var / sw);
  }
}

}  // namespace

std::vector<double> kress_weights(std::size_t n) {
  const std::size_t m = n / 2;
  std::vector<double> r(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t p = 1; p < m; ++p) acc += std::cos(static_cast<double>(p) * t) / static_cast<double>(p);
    const double md = static_cast<double>(m);
    r[k] = -2.0 * kPi / md * acc - kPi / (md * md) * ((k % 2 == 0) ? 1.0 : -1.0);
  }
  return r;
}

void single_layer(const curve::SampledCurve& c, Eigen::MatrixXd& out, Exec exec) {
  require_periodic(c);
  const std::size_t n = c.size();
  const auto kress = kress_weights(n);
  const SingleLayerRow row = make_single_layer(c, kress);
  out.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const auto ni = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out(i, j) = row.entry(i, j);
    return;
  }
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < ni; ++i)
    for (std::ptrdiff_t j = i; j < ni; ++j) out(i, j) = row.entry(i, j);
  for (std::ptrdiff_t i = 0; i < ni; ++i)
    for (std::ptrdiff_t j = 0; j < i; ++j) out(i, j) = out(j, i);
}

void normal_gradient(const curve::SampledCurve& c, Eigen::MatrixXd& out, Exec exec) {
  require_periodic(c);
  const std::size_t n = c.size();
  const double a = 2.0 * kPi / c.period;
  out.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) normal_gradient_row(c, a, i, out);
    return;
  }
  const auto ni = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < ni; ++i) normal_gradient_row(c, a, static_cast<std::size_t>(i), out);
}

OscillationScan normal_oscillation(const curve::SampledCurve& c, const std::vector<double>& radii, Exec exec) {
  const std::size_t n = c.size();
  const std::size_t nr = radii.size();
  std::vector<double> osc(n * nr, 0.0);
  std::vector<std::size_t> skipped(n, 0);
  if (exec == Exec::serial) {
    std::vector<std::pair<double, std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) oscillation_at(c, radii, i, osc.data() + i * nr, skipped[i], members);
  } else {
    const auto ni = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
    {
      std::vector<std::pair<double, std::size_t>> members;
#pragma omp for schedule(dynamic, 4)
      for (std::ptrdiff_t i = 0; i < ni; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        oscillation_at(c, radii, iu, osc.data() + iu * nr, skipped[iu], members);
      }
    }
  }
  OscillationScan scan;
  scan.per_radius.assign(nr, 0.0);
  scan.worst_node.assign(nr, 0);
  for (std::size_t i = 0; i < n; ++i) {
    scan.skipped += skipped[i];
    for (std::size_t k = 0; k < nr; ++k) {
      if (osc[i * nr + k] > scan.per_radius[k]) {
        scan.per_radius[k] = osc[i * nr + k];
        scan.worst_node[k] = i;
      }
    }
  }
  return scan;
}

std::vector<double> dyadic_radii(const curve::SampledCurve& c) {
  std::vector<double> r;
  const double base = c.arclength / static_cast<double>(c.size());
  for (double x = base; x <= 0.5 * c.arclength * (1.0 + 1e-12); x *= 2.0) r.push_back(x);
  return r;
}

}  // namespace mse::kernels
