#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mse/diagnostics.hpp"

namespace mse::hedcore {

struct Sample {
  double t = 0.0;
  double H = 0.0;
  double E = 0.0;
  double D = 0.0;
  double eps = std::numeric_limits<double>::quiet_NaN();
};

struct GradientFlowTrace {
  std::vector<Sample> samples;
  std::string provenance;

  // Throws TraceError unless t starts at 0, increases strictly and H, E, D >= 0.
  void validate(std::size_t min_samples = 1) const;
  static GradientFlowTrace from_records(std::span<const diagnostics::DiagnosticsRecord> records,
                                        std::string provenance);
};

struct CheckResult {
  std::string check;
  bool pass = true;
  bool skipped = false;
  // Reported but excluded from RateCertificate::pass().
  bool report_only = false;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_t = std::numeric_limits<double>::quiet_NaN();
  std::string detail;
};

struct RateCertificate {
  std::string provenance;
  double C = 1.0;
  double Cp = 1.0;
  double C1 = 0.25;
  double C2 = 1.0;
  std::vector<CheckResult> checks;

  bool pass() const;
  const CheckResult* find(const std::string& name) const;
};

struct Tolerances {
  // Relative slack on every inequality.
  double rel = 1e-9;
  // Safety factor on trapezoid truncation estimates.
  double fd_safety = 2.0;
};

double corollary_C1(double C, double Cp);
double corollary_C2(double C);

RateCertificate brezis_check(const GradientFlowTrace& tr, const Tolerances& tol = {});
RateCertificate corollary_check(const GradientFlowTrace& tr, double C, double Cp, const Tolerances& tol = {});

struct TheoremOptions {
  double C_cfg = 10.0;
  // Decay sups are taken over t >= t_from; negative selects T_*.
  double t_from = 0.0;
  Tolerances tol;
};

struct TheoremSplit {
  double alpha = 0.0;
  double F0 = 0.0;
  double T_star = 0.0;
  bool applicable = false;
};
TheoremSplit theorem_split(double H0, double eps0, double C_cfg);

RateCertificate theorem_rate_check(const GradientFlowTrace& tr, double eps0, const TheoremOptions& opt = {});

GradientFlowTrace toy_convex_flow(double x0, double y0, double y_star, std::span<const double> t_grid);

nlohmann::json to_json(const RateCertificate& cert);

}  // namespace mse::hedcore
