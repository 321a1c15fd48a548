#include "mse/diagnostics.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "mse/errors.hpp"
#include "mse/io.hpp"

namespace mse::diagnostics {

namespace {

double relative_margin(double bound, double value) {
  if (bound > 0.0) return (bound - value) / bound;
  return value <= 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
}

Eigen::VectorXd kappa_of(const curve::SampledCurve& c) {
  return Eigen::Map<const Eigen::VectorXd>(c.kappa.data(), static_cast<Eigen::Index>(c.size()));
}

}  // namespace

double epsilon(double E, double D) { return std::pow(std::max(E * E * D, 0.0), 1.0 / 6.0); }

double dissipation(const curve::SampledCurve& c, const potentials::OperatorSet& ops) {
  const Eigen::VectorXd k = kappa_of(c);
  return potentials::inner(c, k, potentials::apply_N(ops, k));
}

double dissipation_spectral(const curve::SampledCurve& c, const potentials::OperatorSet& ops) {
  const double v = potentials::fractional_norm(ops, kappa_of(c), 0.5);
  return v * v;
}

Eigen::VectorXd distance_field(const curve::SampledCurve& c) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(c.size()));
  for (std::size_t j = 0; j < c.size(); ++j) w(static_cast<Eigen::Index>(j)) = c.normal[j].y * c.z[j].y;
  return w;
}

namespace {

Eigen::VectorXd checked_distance_field(const curve::SampledCurve& c) {
  const Eigen::VectorXd w = distance_field(c);
  const double norm = potentials::l2_norm(c, w);
  const double mean = potentials::integral(c, w);
  if (std::abs(mean) > 1e-8 * norm * std::sqrt(c.arclength)) {
    std::ostringstream os;
    os << "neutrality lost: integral of nu_2 z_2 is " << mean;
    throw NeutralityError(os.str());
  }
  return w;
}

}  // namespace

double squared_distance(const curve::SampledCurve& c, const potentials::OperatorSet& ops) {
  const Eigen::VectorXd w = checked_distance_field(c);
  return potentials::inner(c, w, ops.single_layer() * w);
}

double squared_distance_spectral(const curve::SampledCurve& c, const potentials::OperatorSet& ops) {
  const Eigen::VectorXd w = potentials::remove_mean(c, checked_distance_field(c));
  const double v = potentials::fractional_norm(ops, w, -0.5);
  return v * v;
}

HedReport hed_check(double E, double Ebar, double H, double D, double b_sup, double C_cfg) {
  if (!std::isfinite(H) || !std::isfinite(D)) throw DomainError("hed_check needs finite H and D");
  HedReport r;
  r.sqrt_hd = std::sqrt(std::max(H * D, 0.0));
  r.ratio = r.sqrt_hd > 0.0 ? E / r.sqrt_hd : 0.0;
  r.ebar_margin = relative_margin(r.sqrt_hd, Ebar);
  r.ebar_ok = Ebar <= r.sqrt_hd;
  r.angle_applicable = b_sup < std::numbers::pi;
  if (r.angle_applicable) {
    const double bound = r.sqrt_hd / (1.0 + std::cos(b_sup));
    r.angle_margin = relative_margin(bound, E);
    r.angle_ok = E <= bound;
  }
  const double eps = epsilon(E, D);
  const double refined = (0.5 + C_cfg * eps * eps) * r.sqrt_hd;
  r.refined_margin = relative_margin(refined, E);
  r.refined_ok = E <= refined;
  return r;
}

CurvatureBoundReport curvature_bound_report(const curve::SampledCurve& c, const potentials::OperatorSet& ops,
                                            double E, double D) {
  if (!(c.b_sup() < 2.0 * std::numbers::pi)) throw DomainError("curvature bounds need |b| < 2 pi");
  CurvatureBoundReport r;
  const Eigen::VectorXd k = potentials::remove_mean(c, kappa_of(c));
  const double orders[4] = {-1.0, -0.5, 0.0, 0.5};
  r.reference[0] = std::sqrt(E);
  r.reference[1] = std::pow(E * E * D, 1.0 / 6.0);
  r.reference[2] = std::pow(E * D * D, 1.0 / 6.0);
  r.reference[3] = std::sqrt(D);
  for (int i = 0; i < 4; ++i) {
    r.norm[i] = potentials::fractional_norm(ops, k, orders[i]);
    r.ratio[i] = r.reference[i] > 0.0 ? r.norm[i] / r.reference[i] : 0.0;
  }
  r.identity_ok = r.reference[3] == 0.0 ? r.norm[3] == 0.0 : std::abs(r.ratio[3] - 1.0) <= 1e-9;
  return r;
}

FlatnessControlReport flatness_control_check(double bmo, double b_sup, double eps) {
  FlatnessControlReport r;
  if (eps > 0.0) {
    r.bmo_ratio = bmo / eps;
    r.b_ratio = b_sup / eps;
    return r;
  }
  if (bmo != 0.0 || b_sup != 0.0) {
    r.flagged = true;
    r.bmo_ratio = bmo != 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    r.b_ratio = b_sup != 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return r;
}

double auxiliary_F(double t, double H, double E, double D, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("auxiliary function needs alpha > 0");
  return H / (2.0 * alpha) + t * alpha * E + 0.5 * t * t * alpha * D;
}

DiagnosticsRecord evaluate(const curve::SampledCurve& c, const potentials::OperatorSet& ops, double t,
                           const EvaluateOptions& opt) {
  DiagnosticsRecord r;
  r.t = t;
  r.E = curve::excess_energy(c);
  r.Ebar = curve::nonoriented_excess(c);
  r.D = std::max(dissipation(c, ops), 0.0);
  r.H = std::max(squared_distance(c, ops), 0.0);
  r.eps = epsilon(r.E, r.D);
  r.F = auxiliary_F(t, r.H, r.E, r.D, opt.alpha);
  r.b_sup = c.b_sup();
  r.bmo = opt.bmo ? curve::bmo_normal(c).value : std::numeric_limits<double>::quiet_NaN();
  const double hd = std::sqrt(r.H) * std::sqrt(r.D);
  r.hed_ratio = hd > 0.0 ? r.E / hd : 0.0;
  r.residual_edi = std::numeric_limits<double>::quiet_NaN();
  return r;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{"t",   "E",     "Ebar", "D",   "H",        "eps",
                                             "F",   "b_sup", "bmo",  "hed_ratio", "residual_edi"};
  return cols;
}

void write_csv_header(std::ostream& os, bool model_column) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  if (model_column) os << ",model";
  os << "\n";
}

void write_csv_row(std::ostream& os, const DiagnosticsRecord& r, const std::string& model) {
  const double v[] = {r.t, r.E, r.Ebar, r.D, r.H, r.eps, r.F, r.b_sup, r.bmo, r.hed_ratio, r.residual_edi};
  for (std::size_t i = 0; i < std::size(v); ++i) os << (i ? "," : "") << io::format_number(v[i]);
  if (!model.empty()) os << "," << model;
  os << "\n";
}

std::vector<DiagnosticsRecord> read_csv(std::istream& is, std::string* model) {
  std::string line;
  if (!std::getline(is, line)) throw TraceError("empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto& cols = csv_columns();
  const bool has_model = header.size() == cols.size() + 1 && header.back() == "model";
  if (header.size() != cols.size() + (has_model ? 1 : 0) ||
      !std::equal(cols.begin(), cols.end(), header.begin()))
    throw TraceError("trace header does not match the diagnostics schema");
  std::vector<DiagnosticsRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    std::string tag;
    while (std::getline(ss, cell, ',')) {
      if (has_model && v.size() == cols.size()) {
        tag = cell;
        continue;
      }
      char* end = nullptr;
      const double x = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw TraceError("trace line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      v.push_back(x);
    }
    if (v.size() != cols.size()) throw TraceError("trace line " + std::to_string(lineno) + ": wrong column count");
    if (model) *model = tag;
    out.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]});
  }
  return out;
}

}  // namespace mse::diagnostics
