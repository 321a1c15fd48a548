#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mse {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

namespace curve {

inline constexpr double kDefaultSlopeMargin = 0.2;

// One Fourier mode a*sin(2 pi m x / L + phase).
struct Mode {
  int m = 1;
  double amplitude = 0.0;
  double phase = 0.0;
};

class PeriodicGraph {
 public:
  PeriodicGraph(double period, std::vector<double> heights,
                double slope_margin = kDefaultSlopeMargin);

  static PeriodicGraph from_modes(double period, std::size_t n, std::span<const Mode> modes,
                                  double slope_margin = kDefaultSlopeMargin);
  static PeriodicGraph flat(double period, std::size_t n);

  double period() const { return period_; }
  std::size_t size() const { return h_.size(); }
  const std::vector<double>& heights() const { return h_; }
  double abscissa(std::size_t j) const { return period_ * static_cast<double>(j) / static_cast<double>(h_.size()); }
  double slope_margin() const { return margin_; }
  // Largest finite-difference slope.
  double max_slope() const;
  // Slope bound tan(pi/2 - margin).
  double slope_limit() const;

 private:
  double period_;
  std::vector<double> h_;
  double margin_;
};

struct SampledCurve {
  std::vector<double> s;
  std::vector<Point> z;
  std::vector<double> b;
  std::vector<double> kappa;
  std::vector<Point> normal;
  std::vector<double> w;
  double arclength = 0.0;
  // Horizontal period L; zero for open fixtures.
  double period = 0.0;
  bool periodic = true;

  std::size_t size() const { return s.size(); }
  double b_sup() const;
};

SampledCurve graph_to_curve(const PeriodicGraph& g);
// Arc length s(x_j) at the graph abscissae.
std::vector<double> arclength_at_nodes(const PeriodicGraph& g);
PeriodicGraph curve_to_graph(const SampledCurve& c, std::size_t n,
                             double slope_margin = kDefaultSlopeMargin);

// kappa = -h''/(1+h'^2)^{3/2}; positive at crests.
double curvature_from_graph(double hp, double hpp);

double excess_energy(const SampledCurve& c);
double nonoriented_excess(const SampledCurve& c);

double angle_constant(double b_sup);

struct AngleBoundReport {
  double b_l2_sq = 0.0;
  double c_b = 2.0;
  double bound = 0.0;
  double ratio = 0.0;
  bool holds = true;
};
AngleBoundReport angle_bound_check(const SampledCurve& c, double E, double rel_slack = 1e-6);

struct OscillationEstimate {
  double value = 0.0;
  std::size_t skipped_windows = 0;
  double worst_radius = 0.0;
  std::size_t worst_node = 0;
};
OscillationEstimate bmo_normal(const SampledCurve& c);

struct TiltResult {
  double value = 0.0;
  std::size_t nodes = 0;
  bool empty = false;
  // Fewer than four nodes in the window.
  bool degenerate = false;
};
TiltResult tilt_excess(const SampledCurve& c, std::size_t y, double r, Point e);
// Non-oriented variant r^{-1} sum w (1 - (nu.e)^2) over the cylinder.
TiltResult nonoriented_tilt_excess(const SampledCurve& c, std::size_t y, double r, Point e);

// Length of the polyline through the nodes inside the disc B(center, r).
double ball_length(const SampledCurve& c, Point center, double r);

struct AllardThresholds {
  double density = 0.1;
  double tilt = 0.1;
  double curvature = 0.1;
};

struct AllardReport {
  double R = 0.0;
  double density_dev = 0.0;
  double tilt_bar = 0.0;
  double curvature = 0.0;
  double curvature_full = 0.0;
  bool flat_shortcut = false;
  bool is_graph = false;
};
AllardReport allard_graph_check(const SampledCurve& c, double E, double D,
                                const AllardThresholds& eta = {});

struct FlatnessReport {
  double bmo_normal = 0.0;
  double b_sup = 0.0;
  std::vector<double> radii;
  std::vector<double> tilt;
  double density_dev = 0.0;
  std::size_t skipped_windows = 0;
  AllardReport allard;
};
FlatnessReport flatness_report(const SampledCurve& c, double E, double D,
                               const AllardThresholds& eta = {});

double spiral_eps_limit();
SampledCurve spiral_fixture(double eps, double window, std::size_t n);

void write_snapshot(std::ostream& os, const SampledCurve& c, double t);
SampledCurve read_snapshot(std::istream& is, double* t = nullptr);

}  // namespace curve
}  // namespace mse
