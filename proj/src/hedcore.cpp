#include "mse/hedcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mse/errors.hpp"

namespace mse::hedcore {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double scale_of(double v) { return v > 0.0 ? v : 1.0; }

struct Tracker {
  CheckResult res;
  explicit Tracker(std::string name) { res.check = std::move(name); }

  void add(double margin, double t, const std::string& where = {}) {
    if (margin < res.worst_margin) {
      res.worst_margin = margin;
      res.worst_t = t;
    }
    if (margin < 0.0 && res.pass) {
      res.pass = false;
      if (!where.empty()) res.detail = "first violation " + where;
    }
  }
  CheckResult done() {
    if (!std::isfinite(res.worst_margin)) res.worst_margin = 0.0;
    return res;
  }
};

std::string interval(double a, double b) {
  std::ostringstream os;
  os.precision(10);
  os << "in [" << a << ", " << b << "]";
  return os.str();
}

std::string at(double t) {
  std::ostringstream os;
  os.precision(10);
  os << "at t = " << t;
  return os.str();
}

// Second divided difference magnitude near interval [i, i+1].
double second_derivative_bound(const std::vector<Sample>& s, std::size_t i, double Sample::*f) {
  const std::size_t n = s.size();
  auto dd2 = [&](std::size_t k) {
    const double h1 = s[k].t - s[k - 1].t, h2 = s[k + 1].t - s[k].t;
    const double d1 = (s[k].*f - s[k - 1].*f) / h1, d2 = (s[k + 1].*f - s[k].*f) / h2;
    return std::abs(2.0 * (d2 - d1) / (h1 + h2));
  };
  if (n < 3) return 0.0;
  double m = 0.0;
  for (std::size_t k : {i, i + 1}) {
    const std::size_t kk = std::clamp<std::size_t>(k, 1, n - 2);
    m = std::max(m, dd2(kk));
  }
  return m;
}

CheckResult energy_identity(const GradientFlowTrace& tr, const Tolerances& tol) {
  Tracker tk("energy_identity");
  const auto& s = tr.samples;
  const double E0 = scale_of(s[0].E);
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double dt = s[i + 1].t - s[i].t;
    const double r = s[i + 1].E - s[i].E + 0.5 * dt * (s[i].D + s[i + 1].D);
    const double slack = tol.fd_safety * dt * dt * dt / 12.0 * second_derivative_bound(s, i, &Sample::D) + tol.rel * E0;
    tk.add((slack - std::abs(r)) / E0, s[i + 1].t, interval(s[i].t, s[i + 1].t));
  }
  return tk.done();
}

CheckResult h_monotone(const GradientFlowTrace& tr, double c2, const Tolerances& tol) {
  Tracker tk("H_monotone_modulo");
  const auto& s = tr.samples;
  const double H0 = scale_of(s[0].H);
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double dt = s[i + 1].t - s[i].t;
    const double q = 0.5 * (s[i + 1].H - s[i].H) + c2 * 0.5 * dt * (s[i].E + s[i + 1].E);
    const double slack =
        tol.fd_safety * c2 * dt * dt * dt / 12.0 * second_derivative_bound(s, i, &Sample::E) + tol.rel * H0;
    tk.add((slack - q) / H0, s[i + 1].t, interval(s[i].t, s[i + 1].t));
  }
  return tk.done();
}

CheckResult d_monotone(const GradientFlowTrace& tr, const Tolerances& tol) {
  Tracker tk("D_monotone");
  const auto& s = tr.samples;
  const double D0 = scale_of(s[0].D);
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    tk.add((tol.rel * D0 - (s[i + 1].D - s[i].D)) / D0, s[i + 1].t, interval(s[i].t, s[i + 1].t));
  return tk.done();
}

CheckResult interpolation(const GradientFlowTrace& tr, double Cp, const Tolerances& tol) {
  Tracker tk("interpolation");
  const auto& s = tr.samples;
  const double E0 = scale_of(s[0].E);
  for (const auto& x : s) tk.add((std::sqrt(x.H * x.D) / Cp + tol.rel * E0 - x.E) / E0, x.t, at(x.t));
  return tk.done();
}

// Generic pointwise bound value(x) <= bound(x) with relative slack on `scale`.
template <class V, class B>
CheckResult pointwise(const std::string& name, const GradientFlowTrace& tr, double scale, double t_from,
                      const Tolerances& tol, V value, B bound, std::string* sup_note = nullptr) {
  Tracker tk(name);
  double sup = 0.0, sup_t = kNaN;
  for (const auto& x : tr.samples) {
    if (x.t < t_from) continue;
    const double v = value(x), b = bound(x);
    if (v / scale > sup) {
      sup = v / scale;
      sup_t = x.t;
    }
    tk.add((b - v) / scale + tol.rel, x.t, at(x.t));
  }
  if (sup_note) {
    std::ostringstream os;
    os.precision(12);
    os << "sup " << sup << " at t = " << sup_t;
    *sup_note = os.str();
  }
  return tk.done();
}

void annotate(CheckResult& r, const std::string& note) {
  if (note.empty()) return;
  r.detail = r.detail.empty() ? note : r.detail + "; " + note;
}

RateCertificate corollary_impl(const GradientFlowTrace& tr, double C, double Cp, const Tolerances& tol) {
  tr.validate(3);
  if (!(C >= 1.0 && Cp >= 1.0)) throw DomainError("corollary constants must satisfy C, C' >= 1");
  RateCertificate cert;
  cert.provenance = tr.provenance;
  cert.C = C;
  cert.Cp = Cp;
  cert.C1 = corollary_C1(C, Cp);
  cert.C2 = corollary_C2(C);
  const double H0 = scale_of(tr.samples[0].H);
  cert.checks.push_back(energy_identity(tr, tol));
  cert.checks.push_back(h_monotone(tr, C * C, tol));
  cert.checks.push_back(d_monotone(tr, tol));
  cert.checks.push_back(interpolation(tr, Cp, tol));
  std::string note;
  const double c1 = cert.C1, c2 = cert.C2;
  auto e = pointwise("decay_E", tr, H0, 0.0, tol, [](const Sample& x) { return x.t * x.E; },
                     [&](const Sample&) { return c1 * H0; }, &note);
  annotate(e, note);
  cert.checks.push_back(e);
  auto d = pointwise("decay_D", tr, H0, 0.0, tol, [](const Sample& x) { return x.t * x.t * x.D; },
                     [&](const Sample&) { return c2 * H0; }, &note);
  annotate(d, note);
  cert.checks.push_back(d);
  return cert;
}

}  // namespace

void GradientFlowTrace::validate(std::size_t min_samples) const {
  if (samples.size() < min_samples)
    throw TraceError("trace needs at least " + std::to_string(min_samples) + " samples");
  if (samples.empty() || samples.front().t != 0.0) throw TraceError("trace must start at t = 0");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!(s.H >= 0.0 && s.E >= 0.0 && s.D >= 0.0)) throw TraceError("trace has negative or missing H, E or D");
    if (i > 0 && !(s.t > samples[i - 1].t)) throw TraceError("trace times must increase strictly");
  }
}

GradientFlowTrace GradientFlowTrace::from_records(std::span<const diagnostics::DiagnosticsRecord> records,
                                                  std::string provenance) {
  GradientFlowTrace tr;
  tr.provenance = std::move(provenance);
  for (const auto& r : records) tr.samples.push_back({r.t, r.H, r.E, r.D, r.eps});
  return tr;
}

bool RateCertificate::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass || c.skipped || c.report_only; });
}

const CheckResult* RateCertificate::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.check == name) return &c;
  return nullptr;
}

double corollary_C1(double C, double Cp) { return 1.0 / (2.0 * C * (C + Cp)); }
double corollary_C2(double C) { return 1.0 / (C * C); }

RateCertificate brezis_check(const GradientFlowTrace& tr, const Tolerances& tol) {
  RateCertificate cert = corollary_impl(tr, 1.0, 1.0, tol);
  const double H0 = tr.samples[0].H, E0 = tr.samples[0].E, D0 = tr.samples[0].D;
  const double sH = scale_of(H0), sE = scale_of(E0), sD = scale_of(D0);
  cert.checks.push_back(pointwise("H_bound", tr, sH, 0.0, tol, [](const Sample& x) { return x.H; },
                                  [&](const Sample&) { return H0; }));
  cert.checks.push_back(pointwise("E_bound", tr, sE, 0.0, tol, [](const Sample& x) { return x.E; },
                                  [&](const Sample&) { return E0; }));
  cert.checks.push_back(pointwise("D_bound", tr, sD, 0.0, tol, [](const Sample& x) { return x.D; },
                                  [&](const Sample&) { return D0; }));
  cert.checks.push_back(pointwise("decay_D_energy", tr, sE, 0.0, tol, [](const Sample& x) { return x.t * x.D; },
                                  [&](const Sample&) { return E0; }));
  return cert;
}

RateCertificate corollary_check(const GradientFlowTrace& tr, double C, double Cp, const Tolerances& tol) {
  return corollary_impl(tr, C, Cp, tol);
}

TheoremSplit theorem_split(double H0, double eps0, double C_cfg) {
  TheoremSplit s;
  if (!(eps0 > 0.0 && eps0 < 1.0)) return s;
  const double l = std::log(eps0);
  const double a2 = 2.0 - C_cfg * eps0 * eps0 * l * l;
  if (!(a2 > 0.0)) return s;
  s.alpha = std::sqrt(a2);
  s.F0 = H0 / (2.0 * s.alpha);
  s.T_star = std::pow(s.F0, 0.75) / std::pow(eps0, 1.5);
  s.applicable = true;
  return s;
}

RateCertificate theorem_rate_check(const GradientFlowTrace& tr, double eps0, const TheoremOptions& opt) {
  tr.validate(3);
  RateCertificate cert;
  cert.provenance = tr.provenance;
  cert.C = std::numbers::sqrt2;
  cert.Cp = 2.0;
  cert.C1 = corollary_C1(cert.C, cert.Cp);
  cert.C2 = 0.5;
  const auto& tol = opt.tol;
  const double C = opt.C_cfg;
  const double H0 = tr.samples[0].H;
  const double sH = scale_of(H0);
  const double slack = C * eps0 * eps0;
  const TheoremSplit split = theorem_split(H0, eps0, C);
  const double t_from = opt.t_from >= 0.0 ? opt.t_from : (split.applicable ? split.T_star : 0.0);
  const double c1 = cert.C1;
  std::string note;

  auto e = pointwise("decay_E", tr, sH, t_from, tol, [](const Sample& x) { return x.t * x.E; },
                     [&](const Sample&) { return (c1 + slack) * H0; }, &note);
  annotate(e, note);
  cert.checks.push_back(e);
  auto d = pointwise("decay_D", tr, sH, t_from, tol, [](const Sample& x) { return x.t * x.t * x.D; },
                     [&](const Sample&) { return (0.5 + slack) * H0; }, &note);
  annotate(d, note);
  cert.checks.push_back(d);
  auto h = pointwise("H_bound", tr, sH, 0.0, tol, [](const Sample& x) { return x.H; },
                     [&](const Sample&) { return (1.0 + slack) * H0; }, &note);
  annotate(h, note);
  cert.checks.push_back(h);
  cert.checks.push_back(d_monotone(tr, tol));

  const bool have_eps = std::all_of(tr.samples.begin(), tr.samples.end(), [](const Sample& x) { return std::isfinite(x.eps); });
  if (have_eps) {
    Tracker tk("eps_monotone");
    const auto& s = tr.samples;
    const double e0 = scale_of(s[0].eps);
    for (std::size_t i = 0; i + 1 < s.size(); ++i)
      tk.add((tol.rel * e0 - (s[i + 1].eps - s[i].eps)) / e0, s[i + 1].t, interval(s[i].t, s[i + 1].t));
    cert.checks.push_back(tk.done());
  } else {
    CheckResult r;
    r.check = "eps_monotone";
    r.skipped = true;
    r.detail = "trace carries no eps";
    cert.checks.push_back(r);
  }

  for (const bool late : {false, true}) {
    CheckResult r;
    r.check = late ? "F_split_late" : "F_split_early";
    r.report_only = true;
    if (!split.applicable) {
      r.skipped = true;
      r.detail = "alpha^2 = 2 - C eps0^2 log^2 eps0 is not positive";
      cert.checks.push_back(r);
      continue;
    }
    Tracker tk(r.check);
    tk.res.report_only = true;
    const double bound = (1.0 + slack) * split.F0;
    for (const auto& x : tr.samples) {
      if ((x.t >= split.T_star) != late) continue;
      const double F = diagnostics::auxiliary_F(x.t, x.H, x.E, x.D, split.alpha);
      tk.add((bound - F) / scale_of(split.F0) + tol.rel, x.t, at(x.t));
    }
    auto res = tk.done();
    std::ostringstream os;
    os.precision(10);
    os << "T_* = " << split.T_star << ", alpha = " << split.alpha;
    annotate(res, os.str());
    cert.checks.push_back(res);
  }
  return cert;
}

GradientFlowTrace toy_convex_flow(double x0, double y0, double y_star, std::span<const double> t_grid) {
  GradientFlowTrace tr;
  tr.provenance = "toy";
  const double offset = (y0 - y_star) * (y0 - y_star);
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    if (i == 0 ? t != 0.0 : !(t > t_grid[i - 1])) throw TraceError("toy flow grid must increase from 0");
    const double decay = std::exp(-2.0 * t);
    tr.samples.push_back({t, x0 * x0 * decay + offset, 0.5 * x0 * x0 * decay, x0 * x0 * decay, kNaN});
  }
  return tr;
}

nlohmann::json to_json(const RateCertificate& cert) {
  nlohmann::json j;
  j["provenance"] = cert.provenance;
  j["constants"] = {{"C", cert.C}, {"C_prime", cert.Cp}, {"C1", cert.C1}, {"C2", cert.C2}};
  j["pass"] = cert.pass();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : cert.checks) {
    nlohmann::json e;
    e["check"] = c.check;
    e["pass"] = c.pass;
    e["skipped"] = c.skipped;
    e["report_only"] = c.report_only;
    e["worst_margin"] = std::isfinite(c.worst_margin) ? nlohmann::json(c.worst_margin) : nlohmann::json();
    e["worst_t"] = std::isfinite(c.worst_t) ? nlohmann::json(c.worst_t) : nlohmann::json();
    e["detail"] = c.detail;
    j["checks"].push_back(e);
  }
  return j;
}

}  // namespace mse::hedcore
