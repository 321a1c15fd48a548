#include "mse/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mse/errors.hpp"
#include "mse/spectral.hpp"

namespace mse::evolution {

namespace {

using spectral::Complex;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

double phi1(double z) {
  if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0;
  return std::expm1(z) / z;
}

double phi2(double z) {
  if (std::abs(z) < 1e-2)
    return 1.0 / 2.0 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0 + z * z * z * z / 720.0 +
           z * z * z * z * z / 5040.0;
  return (std::expm1(z) - z) / (z * z);
}

// Linear symbol -2|k|^3 of the flat-line flow.
std::vector<double> flat_symbol(std::size_t n, double L) {
  std::vector<double> s(n / 2 + 1);
  for (std::size_t m = 0; m < s.size(); ++m) {
    const double k = spectral::wavenumber(static_cast<double>(m), L);
    s[m] = -2.0 * k * k * k;
  }
  return s;
}

// Nonlinear remainder of the rate in Fourier space.
std::vector<Complex> remainder(const FlowState& st, const std::vector<Complex>& hhat, const std::vector<double>& sym) {
  auto r = spectral::forward(graph_rate(st));
  for (std::size_t m = 0; m < r.size(); ++m) r[m] -= sym[m] * hhat[m];
  return r;
}

curve::PeriodicGraph graph_from(const std::vector<Complex>& hhat, std::size_t n, double L, double margin,
                                double& drift) {
  auto h = spectral::inverse(hhat, n);
  double mean = 0.0;
  for (double v : h) mean += v;
  mean /= static_cast<double>(n);
  for (double& v : h) v -= mean;
  drift = std::abs(mean);
  return curve::PeriodicGraph(L, std::move(h), margin);
}

}  // namespace

void StepperConfig::validate() const {
  auto need = [](bool ok, const char* field, const std::string& what) {
    if (!ok) throw ConfigError(field, what);
  };
  need(dt_min > 0.0, "dt_min", "must be positive");
  need(dt_init >= dt_min, "dt_init", "must be at least dt_min");
  need(dt_max >= dt_init, "dt_max", "must be at least dt_init");
  need(tol_edi > 0.0, "tol_edi", "must be positive");
  need(t_end > 0.0 && std::isfinite(t_end), "t_end", "must be positive and finite");
  need(max_steps > 0, "max_steps", "must be positive");
  need(eps_admissible > 0.0, "eps_admissible", "must be positive");
  need(alpha > 0.0, "alpha", "must be positive");
  need(kappa_sign == 1.0 || kappa_sign == -1.0, "kappa_sign", "must be +1 or -1");
}

FlowState FlowState::make(curve::PeriodicGraph g, double t, const StepperConfig& cfg, bool ksharp) {
  auto c = curve::graph_to_curve(g);
  potentials::AssemblyOptions opt;
  opt.spectrum = false;
  opt.ksharp = ksharp;
  opt.exec = cfg.exec;
  auto ops = potentials::OperatorSet::assemble(c, opt);
  Eigen::VectorXd V = normal_velocity(ops, cfg.kappa_sign);
  const double E = curve::excess_energy(ops.curve());
  const Eigen::Map<const Eigen::VectorXd> kappa(ops.curve().kappa.data(), static_cast<Eigen::Index>(c.size()));
  const double D = std::max(cfg.kappa_sign * potentials::inner(ops.curve(), kappa, V), 0.0);
  return FlowState{t, std::move(g), std::move(ops), std::move(V), E, D};
}

Eigen::VectorXd normal_velocity(const potentials::OperatorSet& ops, double kappa_sign) {
  const auto& c = ops.curve();
  const Eigen::Map<const Eigen::VectorXd> kappa(c.kappa.data(), static_cast<Eigen::Index>(c.size()));
  return potentials::remove_mean(c, kappa_sign * potentials::apply_N(ops, kappa));
}

Eigen::VectorXd normal_velocity(const FlowState& st) { return st.V; }

std::vector<double> graph_rate(const FlowState& st) {
  const auto& c = st.curve();
  const std::vector<double> v(st.V.data(), st.V.data() + st.V.size());
  const spectral::TrigInterpolant vi(v, c.arclength);
  const auto s = curve::arclength_at_nodes(st.graph);
  const auto hp = spectral::derivative(st.graph.heights(), st.graph.period(), 1);
  std::vector<double> rate(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) rate[i] = -vi(s[i]) * std::sqrt(1.0 + hp[i] * hp[i]);
  return rate;
}

StepOutcome try_step(const FlowState& st, double dt, const StepperConfig& cfg) {
  StepOutcome out;
  out.dt = dt;
  const std::size_t n = st.graph.size();
  const double L = st.graph.period();
  const double margin = st.graph.slope_margin();
  const auto sym = flat_symbol(n, L);
  const auto h0 = spectral::forward(st.graph.heights());
  try {
    const auto r0 = remainder(st, h0, sym);
    std::vector<Complex> a(h0.size());
    for (std::size_t m = 0; m < a.size(); ++m) {
      const double z = sym[m] * dt;
      a[m] = std::exp(z) * h0[m] + dt * phi1(z) * r0[m];
    }
    double drift_a = 0.0;
    const FlowState sa = FlowState::make(graph_from(a, n, L, margin, drift_a), st.t + dt, cfg);
    const auto ra = remainder(sa, spectral::forward(sa.graph.heights()), sym);
    std::vector<Complex> h1(a);
    for (std::size_t m = 0; m < h1.size(); ++m) h1[m] += dt * phi2(sym[m] * dt) * (ra[m] - r0[m]);
    double drift = 0.0;
    out.state = FlowState::make(graph_from(h1, n, L, margin, drift), st.t + dt, cfg);
    out.mean_drift = std::max(drift, drift_a);
    out.residual = std::abs(out.state->E - st.E + 0.5 * dt * (st.D + out.state->D));
  } catch (const GraphRegimeError& e) {
    out.state.reset();
    out.failure = std::string("left graph regime: ") + e.what();
  } catch (const FlatnessError& e) {
    out.state.reset();
    out.failure = std::string("left graph regime: ") + e.what();
  }
  return out;
}

HessianTerms hessian_terms(const FlowState& st, const Eigen::VectorXd& W) {
  if (!st.ops.has_ksharp()) throw DomainError("hessian terms need K# assembled");
  const auto& c = st.curve();
  const Eigen::Map<const Eigen::VectorXd> kappa(c.kappa.data(), static_cast<Eigen::Index>(c.size()));
  const Eigen::VectorXd W2 = W.cwiseProduct(W);
  HessianTerms h;
  const double g = potentials::tangential_derivative_norm(c, W);
  h.gradient = g * g;
  h.curvature = potentials::integral(c, kappa.cwiseProduct(kappa).cwiseProduct(W2));
  const Eigen::VectorXd MV = potentials::apply_M(st.ops, potentials::remove_mean(c, st.V));
  h.coupling = potentials::integral(c, MV.cwiseProduct(W2));
  return h;
}

diagnostics::DiagnosticsRecord record_of(const FlowState& st, const StepperConfig& cfg) {
  const auto& c = st.curve();
  diagnostics::DiagnosticsRecord r;
  r.t = st.t;
  r.E = st.E;
  r.Ebar = curve::nonoriented_excess(c);
  r.D = st.D;
  r.H = std::max(diagnostics::squared_distance(c, st.ops), 0.0);
  r.eps = diagnostics::epsilon(r.E, r.D);
  r.F = diagnostics::auxiliary_F(r.t, r.H, r.E, r.D, cfg.alpha);
  r.b_sup = c.b_sup();
  r.bmo = cfg.bmo ? curve::bmo_normal(c).value : kNaN;
  const double hd = std::sqrt(r.H) * std::sqrt(r.D);
  r.hed_ratio = hd > 0.0 ? r.E / hd : 0.0;
  r.residual_edi = kNaN;
  return r;
}

namespace {

class Monitor {
 public:
  Monitor(FlowTrace& tr, const StepperConfig& cfg, double L) : tr_(tr), cfg_(cfg), L_(L) {}

  void check(std::size_t i, double drift) {
    const auto& r = tr_.records;
    if (drift > 1e-10 * L_) emit(r[i].t, "volume_drift", "mean correction " + fmt(drift));
    if (i == 0) return;
    const auto& a = r[i - 1];
    const auto& b = r[i];
    const double E0 = r[0].E, D0 = r[0].D;
    if (b.E > a.E + cfg_.monotone_rel * std::max(a.E, E0))
      emit(b.t, "E_increase", "E rose from " + fmt(a.E) + " to " + fmt(b.E));
    if (b.D > a.D + cfg_.monotone_rel * std::max(a.D, D0))
      emit(b.t, "D_increase", "D rose from " + fmt(a.D) + " to " + fmt(b.D));
    if (b.eps > a.eps * (1.0 + cfg_.monotone_rel) + 1e-300)
      emit(b.t, "eps_increase", "eps rose from " + fmt(a.eps) + " to " + fmt(b.eps));
    if (i >= 2) {
      const auto& p = r[i - 2];
      const double lam = (a.t - p.t) / (b.t - p.t);
      const double chord = (1.0 - lam) * p.E + lam * b.E;
      if (a.E - chord > cfg_.convexity_tol * E0)
        emit(a.t, "E_nonconvex", "E exceeds its chord by " + fmt(a.E - chord));
    }
  }

 private:
  void emit(double t, const std::string& kind, const std::string& detail) { tr_.events.push_back({t, kind, detail}); }
  FlowTrace& tr_;
  const StepperConfig& cfg_;
  double L_;
};

void add_probe(FlowTrace& tr, const FlowState& st, const StepperConfig& cfg) {
  const FlowState full = FlowState::make(st.graph, st.t, cfg, true);
  ProbeSample p;
  p.record = tr.records.size() - 1;
  p.t = st.t;
  p.velocity = hessian_terms(full, full.V);
  p.distance = hessian_terms(full, diagnostics::distance_field(full.curve()));
  tr.probes.push_back(p);
}

}  // namespace

FlowTrace run(const curve::PeriodicGraph& h0, const StepperConfig& cfg, const RunHooks& hooks) {
  cfg.validate();
  FlowTrace tr;
  tr.config = cfg;
  FlowState st = FlowState::make(h0, 0.0, cfg);
  const double eps0 = diagnostics::epsilon(st.E, st.D);
  if (!(eps0 <= cfg.eps_admissible))
    throw DomainError("initial eps " + fmt(eps0) + " exceeds eps_admissible " + fmt(cfg.eps_admissible));
  Monitor mon(tr, cfg, h0.period());

  auto accept = [&](const FlowState& s, double drift) {
    tr.records.push_back(record_of(s, cfg));
    mon.check(tr.records.size() - 1, drift);
    if (cfg.probe_every > 0 && tr.accepted % cfg.probe_every == 0) add_probe(tr, s, cfg);
    if (hooks.on_record) hooks.on_record(s, tr.records.size() - 1);
  };
  accept(st, 0.0);

  const double E0 = st.E;
  double integral_D = 0.0;
  double dt = cfg.dt_init;
  while (st.t < cfg.t_end * (1.0 - 1e-14)) {
    if (tr.accepted >= cfg.max_steps) {
      tr.aborted = true;
      tr.abort_reason = "step limit reached at t = " + fmt(st.t);
      break;
    }
    const double remaining = cfg.t_end - st.t;
    const double h = std::min(dt, remaining);
    StepOutcome o = try_step(st, h, cfg);
    const double allowed = cfg.tol_edi * st.E;
    const bool ok = o.state && (!cfg.adaptive || o.residual <= allowed);
    if (!ok) {
      ++tr.rejected;
      if (!cfg.adaptive || h * 0.5 < cfg.dt_min) {
        tr.aborted = true;
        tr.abort_reason = !o.failure.empty() ? o.failure
                                             : "step size underflow at t = " + fmt(st.t) + " (residual " +
                                                   fmt(o.residual) + ", allowed " + fmt(allowed) + ")";
        break;
      }
      dt = 0.5 * h;
      continue;
    }
    integral_D += 0.5 * h * (st.D + o.state->D);
    tr.edi_budget += allowed;
    tr.max_mean_drift = std::max(tr.max_mean_drift, o.mean_drift);
    const double rel = st.E > 0.0 ? o.residual / st.E : 0.0;
    st = std::move(*o.state);
    ++tr.accepted;
    accept(st, o.mean_drift);
    tr.records.back().residual_edi = rel;
    if (cfg.adaptive) {
      double grow = 2.0;
      if (o.residual > 0.0) grow = std::clamp(0.9 * std::cbrt(allowed / o.residual), 0.5, 2.0);
      // Clipping at t_end must not shrink the next proposal.
      dt = std::min(cfg.dt_max, std::max(h, dt) * grow);
    }
  }
  tr.cumulative_edi = std::abs(st.E - E0 + integral_D);
  if (!tr.aborted && tr.cumulative_edi > tr.edi_budget && tr.cumulative_edi > 1e-15 * std::max(E0, 1e-300))
    tr.events.push_back({st.t, "edi_budget", "cumulative residual " + fmt(tr.cumulative_edi) + " exceeds " +
                                                 fmt(tr.edi_budget)});
  tr.final_graph = st.graph;
  return tr;
}

double centered_rate(const std::vector<diagnostics::DiagnosticsRecord>& r, std::size_t i,
                     double diagnostics::DiagnosticsRecord::*f) {
  if (i == 0 || i + 1 >= r.size()) throw DomainError("centered rate needs an interior record");
  const double h1 = r[i].t - r[i - 1].t, h2 = r[i + 1].t - r[i].t;
  const double a = -h2 / (h1 * (h1 + h2)), b = (h2 - h1) / (h1 * h2), c = h1 / (h2 * (h1 + h2));
  return a * (r[i - 1].*f) + b * (r[i].*f) + c * (r[i + 1].*f);
}

namespace {

HessianCheck compare(const FlowTrace& tr, const ProbeSample& p, double diagnostics::DiagnosticsRecord::*f,
                     const HessianTerms& terms) {
  HessianCheck c;
  c.t = p.t;
  c.rhs = terms.rhs();
  if (p.record == 0 || p.record + 1 >= tr.records.size()) {
    c.inconclusive = true;
    return c;
  }
  c.lhs = -0.5 * centered_rate(tr.records, p.record, f);
  const double scale = std::max({std::abs(c.rhs), terms.gradient, 1e-300});
  c.mismatch = std::abs(c.lhs - c.rhs) / scale;
  if (terms.gradient == 0.0 && c.lhs == 0.0) c.mismatch = 0.0;
  return c;
}

}  // namespace

HessianReport hessian_probe(const FlowTrace& tr) {
  HessianReport rep;
  for (const auto& p : tr.probes) {
    rep.velocity.push_back(compare(tr, p, &diagnostics::DiagnosticsRecord::D, p.velocity));
    rep.distance.push_back(compare(tr, p, &diagnostics::DiagnosticsRecord::H, p.distance));
    if (!rep.velocity.back().inconclusive) rep.worst_velocity = std::max(rep.worst_velocity, rep.velocity.back().mismatch);
    if (!rep.distance.back().inconclusive) rep.worst_distance = std::max(rep.worst_distance, rep.distance.back().mismatch);
  }
  return rep;
}

DtHReport dtH_probe(const FlowTrace& tr) {
  if (tr.records.size() < 3) throw TraceError("dtH probe needs at least three records");
  DtHReport rep;
  const auto& r = tr.records;
  const double H0 = r[0].H;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (H0 > 0.0) rep.sup_H_ratio = std::max(rep.sup_H_ratio, r[i].H / H0);
  for (std::size_t i = 1; i + 1 < r.size(); ++i) {
    const double den = std::pow(r[i].H, 0.4) * std::pow(r[i].E, 13.0 / 15.0) * std::pow(r[i].D, 11.0 / 15.0);
    if (!(den > 0.0)) continue;
    const double num = 0.5 * centered_rate(r, i, &diagnostics::DiagnosticsRecord::H) + 2.0 * r[i].E;
    rep.rows.push_back({r[i].t, num / den});
    rep.sup_ratio = std::max(rep.sup_ratio, num / den);
  }
  return rep;
}

DissipationReport dissipation_monotonicity_probe(const FlowTrace& tr, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  DissipationReport rep;
  rep.alpha = alpha;
  for (const auto& p : tr.probes) {
    if (p.record == 0 || p.record + 1 >= tr.records.size()) continue;
    DissipationRow row;
    row.t = p.t;
    row.decay = -centered_rate(tr.records, p.record, &diagnostics::DiagnosticsRecord::D);
    row.gradient = p.velocity.gradient;
    if (row.gradient > 0.0) {
      row.ratio = row.decay / row.gradient;
      rep.min_ratio = std::min(rep.min_ratio, row.ratio);
      if (row.ratio < 1.0 - alpha) rep.pass = false;
    } else if (row.decay < 0.0) {
      rep.pass = false;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace mse::evolution
