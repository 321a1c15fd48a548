#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <numbers>
#include <string>
#include <vector>

#include "mse/curve.hpp"
#include "mse/potentials.hpp"

namespace mse::diagnostics {

struct DiagnosticsRecord {
  double t = 0.0;
  double E = 0.0;
  double Ebar = 0.0;
  double D = 0.0;
  double H = 0.0;
  double eps = 0.0;
  double F = 0.0;
  double b_sup = 0.0;
  double bmo = 0.0;
  double hed_ratio = 0.0;
  double residual_edi = 0.0;
};

double epsilon(double E, double D);

double dissipation(const curve::SampledCurve& c, const potentials::OperatorSet& ops);
// Same quantity through the fractional power; needs the spectrum.
double dissipation_spectral(const curve::SampledCurve& c, const potentials::OperatorSet& ops);

// W = nu_2 z_2.
Eigen::VectorXd distance_field(const curve::SampledCurve& c);
double squared_distance(const curve::SampledCurve& c, const potentials::OperatorSet& ops);
double squared_distance_spectral(const curve::SampledCurve& c, const potentials::OperatorSet& ops);

struct HedReport {
  double ratio = 0.0;
  double sqrt_hd = 0.0;
  bool ebar_ok = true;
  double ebar_margin = 0.0;
  bool angle_applicable = true;
  bool angle_ok = true;
  double angle_margin = 0.0;
  bool refined_ok = true;
  double refined_margin = 0.0;
};
// Margins are (bound - value) / bound; zero bounds give zero margins.
HedReport hed_check(double E, double Ebar, double H, double D, double b_sup, double C_cfg = 10.0);

struct CurvatureBoundReport {
  // (||kappa||_s, comparison quantity, ratio) for s = -1, -1/2, 0, 1/2.
  double norm[4] = {0, 0, 0, 0};
  double reference[4] = {0, 0, 0, 0};
  double ratio[4] = {0, 0, 0, 0};
  bool identity_ok = true;
};
CurvatureBoundReport curvature_bound_report(const curve::SampledCurve& c, const potentials::OperatorSet& ops,
                                            double E, double D);

struct FlatnessControlReport {
  double bmo_ratio = 0.0;
  double b_ratio = 0.0;
  bool flagged = false;
};
FlatnessControlReport flatness_control_check(double bmo, double b_sup, double eps);

double auxiliary_F(double t, double H, double E, double D, double alpha);

struct EvaluateOptions {
  double alpha = std::numbers::sqrt2;
  bool bmo = true;
};
DiagnosticsRecord evaluate(const curve::SampledCurve& c, const potentials::OperatorSet& ops, double t,
                           const EvaluateOptions& opt = {});

const std::vector<std::string>& csv_columns();
void write_csv_header(std::ostream& os, bool model_column = false);
void write_csv_row(std::ostream& os, const DiagnosticsRecord& r, const std::string& model = "");
// Reads the diagnostics schema; an optional trailing model column is accepted.
std::vector<DiagnosticsRecord> read_csv(std::istream& is, std::string* model = nullptr);

}  // namespace mse::diagnostics
