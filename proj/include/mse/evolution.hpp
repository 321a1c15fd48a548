#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mse/curve.hpp"
#include "mse/diagnostics.hpp"
#include "mse/kernels.hpp"
#include "mse/potentials.hpp"

namespace mse::evolution {

struct StepperConfig {
  double dt_init = 1e-3;
  double dt_min = 1e-12;
  double dt_max = 1e-1;
  // Per-step bound on |E(t+dt) - E(t) + trapezoid(D)| relative to E(t).
  double tol_edi = 1e-6;
  double t_end = 1.0;
  // Probe every this many accepted steps; 0 disables probes.
  std::size_t probe_every = 0;
  std::size_t max_steps = 1000000;
  bool adaptive = true;
  // Initial eps above this is rejected.
  double eps_admissible = 1.0;
  double alpha = std::numbers::sqrt2;
  bool bmo = false;
  double monotone_rel = 1e-9;
  double convexity_tol = 1e-8;
  // Test hook: V = kappa_sign * N(kappa).
  double kappa_sign = 1.0;
  kernels::Exec exec = kernels::Exec::parallel;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct FlowState {
  double t = 0.0;
  curve::PeriodicGraph graph;
  potentials::OperatorSet ops;
  Eigen::VectorXd V;
  double E = 0.0;
  double D = 0.0;

  static FlowState make(curve::PeriodicGraph g, double t, const StepperConfig& cfg = {}, bool ksharp = false);
  const curve::SampledCurve& curve() const { return ops.curve(); }
};

// V = N(kappa) on the arc-length nodes, mean removed.
Eigen::VectorXd normal_velocity(const potentials::OperatorSet& ops, double kappa_sign = 1.0);
Eigen::VectorXd normal_velocity(const FlowState& st);

// h_t = -V sqrt(1 + h'^2) at the graph abscissae.
std::vector<double> graph_rate(const FlowState& st);

struct StepOutcome {
  std::optional<FlowState> state;
  double dt = 0.0;
  // |E1 - E0 + dt (D0 + D1)/2|.
  double residual = 0.0;
  double mean_drift = 0.0;
  // Set when a stage left the graph regime.
  std::string failure;
};

// One exponential Runge-Kutta step of size dt; never throws for regime loss.
StepOutcome try_step(const FlowState& st, double dt, const StepperConfig& cfg);

struct HessianTerms {
  double gradient = 0.0;
  double curvature = 0.0;
  double coupling = 0.0;
  double rhs() const { return gradient - curvature - coupling; }
};
// Integrand terms |d_tau W|^2, kappa^2 W^2, M(V) W^2; needs K# assembled.
HessianTerms hessian_terms(const FlowState& st, const Eigen::VectorXd& W);

struct ProbeSample {
  std::size_t record = 0;
  double t = 0.0;
  HessianTerms velocity;
  HessianTerms distance;
};

struct MonitorEvent {
  double t = 0.0;
  std::string kind;
  std::string detail;
};

struct FlowTrace {
  std::vector<diagnostics::DiagnosticsRecord> records;
  std::vector<ProbeSample> probes;
  std::vector<MonitorEvent> events;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  StepperConfig config;
  bool aborted = false;
  std::string abort_reason;
  double max_mean_drift = 0.0;
  // |E(t) - E(0) + int D| at the end against the summed per-step allowance.
  double cumulative_edi = 0.0;
  double edi_budget = 0.0;
  std::optional<curve::PeriodicGraph> final_graph;
};

struct RunHooks {
  std::function<void(const FlowState&, std::size_t record)> on_record;
};

diagnostics::DiagnosticsRecord record_of(const FlowState& st, const StepperConfig& cfg);

// Aborts are reported in the trace; only invalid configs and initial data throw.
FlowTrace run(const curve::PeriodicGraph& h0, const StepperConfig& cfg, const RunHooks& hooks = {});

// Three-point derivative of column f at interior record i on a nonuniform grid.
double centered_rate(const std::vector<diagnostics::DiagnosticsRecord>& r, std::size_t i,
                     double diagnostics::DiagnosticsRecord::*f);

struct HessianCheck {
  double t = 0.0;
  double lhs = std::numeric_limits<double>::quiet_NaN();
  double rhs = 0.0;
  double mismatch = std::numeric_limits<double>::quiet_NaN();
  bool inconclusive = false;
};
struct HessianReport {
  std::vector<HessianCheck> velocity;
  std::vector<HessianCheck> distance;
  double worst_velocity = 0.0;
  double worst_distance = 0.0;
};
// Compares -1/2 dD/dt with RHS(V) and -1/2 dH/dt with RHS(nu_2 z_2).
HessianReport hessian_probe(const FlowTrace& tr);

struct DtHRow {
  double t = 0.0;
  double ratio = 0.0;
};
struct DtHReport {
  std::vector<DtHRow> rows;
  double sup_ratio = 0.0;
  double sup_H_ratio = 0.0;
};
DtHReport dtH_probe(const FlowTrace& tr);

struct DissipationRow {
  double t = 0.0;
  double decay = 0.0;
  double gradient = 0.0;
  double ratio = 0.0;
};
struct DissipationReport {
  std::vector<DissipationRow> rows;
  double min_ratio = std::numeric_limits<double>::infinity();
  double alpha = 0.5;
  bool pass = true;
};
DissipationReport dissipation_monotonicity_probe(const FlowTrace& tr, double alpha = 0.5);

}  // namespace mse::evolution
