#include "mse/selftest.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "mse/cli.hpp"
#include "mse/diagnostics.hpp"
#include "mse/errors.hpp"
#include "mse/evolution.hpp"
#include "mse/hedcore.hpp"
#include "mse/io.hpp"
#include "mse/linearized.hpp"
#include "mse/potentials.hpp"
#include "mse/spectral.hpp"

namespace fs = std::filesystem;

namespace mse::selftest {

namespace {

constexpr double kPi = std::numbers::pi;

std::string num(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

// Runs body, stamps the elapsed time and applies the runtime budget.
template <class F>
CriterionResult timed(int id, std::string name, double budget, const SuiteOptions& opt, F body) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  r.budget_seconds = budget;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.measured = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (opt.enforce_runtime && r.seconds > budget) {
    r.pass = false;
    r.measured += " (over time budget)";
  }
  return r;
}

// Pristine runs need a few thousand steps at most; a reversed flow crawls under EDI acceptance.
evolution::StepperConfig base_stepper(const SuiteOptions& opt, std::size_t max_steps = 5000) {
  evolution::StepperConfig cfg;
  cfg.kappa_sign = opt.kappa_sign;
  cfg.max_steps = max_steps;
  return cfg;
}

std::vector<curve::SampledCurve> test_curves(std::size_t n) {
  std::vector<curve::SampledCurve> out;
  out.push_back(curve::graph_to_curve(curve::PeriodicGraph::flat(2 * kPi, n)));
  std::vector<curve::Mode> one{{1, 0.2, 0.3}};
  out.push_back(curve::graph_to_curve(curve::PeriodicGraph::from_modes(2 * kPi, n, one)));
  std::vector<curve::Mode> three{{3, 0.05, 1.1}};
  out.push_back(curve::graph_to_curve(curve::PeriodicGraph::from_modes(2 * kPi, n, three)));
  out.push_back(curve::graph_to_curve(cli::multimode_graph(2 * kPi, n, 6, 0.15, 7)));
  return out;
}

}  // namespace

CriterionResult flat_spectrum(const SuiteOptions& opt) {
  return timed(1, "flat-line DtN spectrum", 10.0, opt, [](CriterionResult& r) {
    r.tolerance = "<= 1e-8, |m| <= 64, n = 256";
    const std::size_t n = 256;
    const double L = 2 * kPi;
    const auto ops = potentials::OperatorSet::assemble(curve::graph_to_curve(curve::PeriodicGraph::flat(L, n)));
    const auto& lam = ops.eigenvalues();
    double worst = 0.0;
    for (int m = 1; m <= 64; ++m) {
      const double ref = 2.0 * spectral::wavenumber(m, L);
      worst = std::max({worst, std::abs(lam(2 * m - 1) / ref - 1.0), std::abs(lam(2 * m) / ref - 1.0)});
    }
    r.measured = "max rel err " + num(worst, 3);
    r.pass = worst <= 1e-8;
  });
}

CriterionResult linear_sharp_constants(const SuiteOptions& opt) {
  return timed(2, "linearized sharp constants", 1.0, opt, [](CriterionResult& r) {
    r.tolerance = "+-1e-9; tE <= C1 H0, t^2 D <= H0/2";
    std::vector<curve::Mode> modes{{1, 1e-3, 0.0}};
    const auto s0 = linearized::SpectralState::from_modes(2 * kPi, modes);
    const auto rep = linearized::linear_chain_check(s0, linearized::log_times(s0, 1000));
    const double target = 1.0 / (4.0 * std::exp(1.0));
    const double dev = std::abs(rep.sup_tE - target);
    r.measured = "sup tE/H0 - 1/(4e) = " + num(rep.sup_tE - target, 3) + ", sup t^2D/H0 = " + num(rep.sup_t2D, 8);
    r.pass = dev <= 1e-9 && rep.decay_E_ok && rep.decay_D_ok;
  });
}

CriterionResult hed_saturation(const SuiteOptions& opt) {
  return timed(3, "single-mode HED saturation", 1.0, opt, [](CriterionResult& r) {
    r.tolerance = "<= 1e-12";
    double worst = 0.0;
    std::size_t used = 0;
    for (int m : {1, 2, 5}) {
      std::vector<curve::Mode> modes{{m, 1e-3, 0.4}};
      const auto s0 = linearized::SpectralState::from_modes(2 * kPi, modes);
      const auto rep = linearized::linear_chain_check(s0, linearized::log_times(s0, 1000));
      for (const auto& s : rep.samples) {
        const auto& q = s.q;
        if (!std::isnormal(q.E) || !std::isnormal(q.H) || !std::isnormal(q.D)) continue;
        worst = std::max(worst, std::abs(q.E / (std::sqrt(q.H) * std::sqrt(q.D)) - 0.5));
        ++used;
      }
    }
    r.measured = "max |ratio - 1/2| " + num(worst, 3) + " over " + std::to_string(used) + " samples";
    r.pass = used > 0 && worst <= 1e-12;
  });
}

CriterionResult nonlinear_linear_consistency(const SuiteOptions& opt) {
  return timed(4, "nonlinear-linear consistency", 300.0, opt, [&](CriterionResult& r) {
    r.tolerance = ">= 1.9";
    const std::vector<double> amps{4e-4, 8e-4, 1.6e-3, 3.2e-3};
    std::vector<double> err;
    for (double a : amps) {
      std::vector<curve::Mode> modes{{1, a, 0.0}};
      auto cfg = base_stepper(opt);
      cfg.t_end = 0.5;
      const auto tr = evolution::run(curve::PeriodicGraph::from_modes(2 * kPi, opt.n, modes), cfg);
      if (tr.aborted) {
        r.measured = "a = " + num(a) + ": " + tr.abort_reason;
        return;
      }
      const auto exact =
          linearized::evolve_exact(linearized::SpectralState::from_modes(2 * kPi, modes), 0.5).heights(opt.n);
      const auto& h = tr.final_graph->heights();
      double num2 = 0.0, den = 0.0;
      for (std::size_t j = 0; j < h.size(); ++j) {
        num2 += (h[j] - exact[j]) * (h[j] - exact[j]);
        den += exact[j] * exact[j];
      }
      err.push_back(std::sqrt(num2 / den));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < amps.size(); ++i) {
      mx += std::log(amps[i]) / amps.size();
      my += std::log(err[i]) / amps.size();
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < amps.size(); ++i) {
      sxy += (std::log(amps[i]) - mx) * (std::log(err[i]) - my);
      sxx += (std::log(amps[i]) - mx) * (std::log(amps[i]) - mx);
    }
    const double order = sxy / sxx;
    r.measured = "fitted order " + num(order, 4) + ", err/a^2 at a = 4e-4: " + num(err[0] / (amps[0] * amps[0]), 3);
    r.pass = order >= 1.9;
  });
}

CriterionResult static_hed(const SuiteOptions& opt) {
  return timed(5, "static HED inequality", 300.0, opt, [&](CriterionResult& r) {
    r.tolerance = ">= -1e-8, eps <= 0.2";
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> count(2, 8);
    std::uniform_real_distribution<double> target(0.02, 0.2);
    double worst_ebar = 1e300, worst_angle = 1e300, worst_eps = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto g = cli::multimode_graph(2 * kPi, opt.n, count(rng), target(rng), 1000 + trial);
      const auto c = curve::graph_to_curve(g);
      const auto ops = potentials::OperatorSet::assemble(c, {.spectrum = false});
      const auto rec = diagnostics::evaluate(c, ops, 0.0, {.bmo = false});
      const auto hed = diagnostics::hed_check(rec.E, rec.Ebar, rec.H, rec.D, rec.b_sup);
      worst_ebar = std::min(worst_ebar, hed.ebar_margin);
      worst_angle = std::min(worst_angle, hed.angle_margin);
      worst_eps = std::max(worst_eps, rec.eps);
    }
    r.measured = "min margins " + num(worst_ebar, 3) + ", " + num(worst_angle, 3) + "; max eps " + num(worst_eps, 4);
    r.pass = worst_ebar >= -1e-8 && worst_angle >= -1e-8 && worst_eps <= 0.2 * (1 + 1e-9);
  });
}

CriterionResult dynamic_monitors(const SuiteOptions& opt) {
  return timed(6, "dynamic regime monitors", 1800.0, opt, [&](CriterionResult& r) {
    r.tolerance = "no events, H <= 1.1 H0, C1 + eps0^2, 1/2 + eps0^2";
    const double eps0 = 0.1;
    auto cfg = base_stepper(opt, 20000);
    cfg.t_end = 10.0;
    const auto tr = evolution::run(cli::multimode_graph(2 * kPi, opt.n, 8, eps0, 1), cfg);
    std::size_t bad_events = 0;
    for (const auto& e : tr.events)
      if (e.kind == "D_increase" || e.kind == "eps_increase" || e.kind == "E_nonconvex" || e.kind == "E_increase") ++bad_events;
    const auto gt = hedcore::GradientFlowTrace::from_records(tr.records, "nonlinear");
    hedcore::TheoremOptions to;
    to.C_cfg = 1.0;
    to.t_from = -1.0;
    const auto cert = hedcore::theorem_rate_check(gt, tr.records.front().eps, to);
    const double H0 = tr.records.front().H;
    const auto split = hedcore::theorem_split(H0, tr.records.front().eps, 1.0);
    double supH = 0.0, supE = 0.0, supD = 0.0;
    for (const auto& x : tr.records) {
      supH = std::max(supH, x.H / H0);
      if (x.t < split.T_star) continue;
      supE = std::max(supE, x.t * x.E / H0);
      supD = std::max(supD, x.t * x.t * x.D / H0);
    }
    const double C1 = linearized::sharp_C1();
    const double e2 = eps0 * eps0;
    r.measured = std::to_string(bad_events) + " events, sup H/H0 " + num(supH, 5) + ", sup tE/H0 " + num(supE, 4) +
                 ", sup t^2D/H0 " + num(supD, 4) + ", T_* " + num(split.T_star, 3);
    if (tr.aborted) r.measured += ", aborted: " + tr.abort_reason;
    r.pass = !tr.aborted && bad_events == 0 && supH <= 1.1 && supE <= C1 + e2 && supD <= 0.5 + e2 && cert.pass();
  });
}

CriterionResult hessian_formula(const SuiteOptions& opt) {
  return timed(7, "Hessian-formula probe", 600.0, opt, [&](CriterionResult& r) {
    r.tolerance = "< 5%, decreasing";
    std::vector<double> worst;
    for (const auto& [dt, every] : {std::pair{1e-3, std::size_t{5}}, std::pair{5e-4, std::size_t{10}}}) {
      auto cfg = base_stepper(opt);
      cfg.adaptive = false;
      cfg.dt_init = dt;
      cfg.dt_max = dt;
      cfg.t_end = 0.05;
      cfg.probe_every = every;
      std::vector<curve::Mode> modes{{1, 1e-3, 0.3}};
      const auto tr = evolution::run(curve::PeriodicGraph::from_modes(2 * kPi, opt.n, modes), cfg);
      if (tr.aborted) throw StepError(tr.abort_reason);
      worst.push_back(evolution::hessian_probe(tr).worst_velocity);
    }
    r.measured = "mismatch " + num(worst[0], 3) + " (dt 1e-3), " + num(worst[1], 3) + " (dt 5e-4)";
    r.pass = worst[0] < 0.05 && worst[1] < 0.05 && worst[1] < worst[0];
  });
}

CriterionResult toy_brezis(const SuiteOptions& opt) {
  return timed(8, "Brezis chain on the toy flow", 1.0, opt, [](CriterionResult& r) {
    r.tolerance = ">= 0";
    std::vector<double> grid{0.0};
    for (int i = 0; i < 1000; ++i) grid.push_back(1e-3 * std::pow(1e7, i / 999.0));
    double worst = 1e300;
    bool pass = true;
    for (const auto& [x0, y0, ys] : {std::tuple{1.0, 0.0, 0.0}, std::tuple{0.7, 0.5, 0.1}, std::tuple{2.0, -1.0, 0.3}}) {
      const auto cert = hedcore::brezis_check(hedcore::toy_convex_flow(x0, y0, ys, grid));
      pass = pass && cert.pass();
      for (const auto& c : cert.checks)
        if (!c.skipped && !c.report_only) worst = std::min(worst, c.worst_margin);
    }
    r.measured = "min margin " + num(worst, 3) + " (includes 1e-9 rounding slack)";
    r.pass = pass && worst >= 0.0;
  });
}

CriterionResult interpolation_suite(const SuiteOptions& opt) {
  return timed(9, "interpolation inequalities", 600.0, opt, [&](CriterionResult& r) {
    r.tolerance = "0 failures";
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    std::size_t failures = 0, fields = 0;
    const double tol = 1.0 + 1e-12;
    for (const auto& c : test_curves(opt.n)) {
      const auto ops = potentials::OperatorSet::assemble(c);
      for (int trial = 0; trial < 1000; ++trial) {
        Eigen::VectorXd f(static_cast<Eigen::Index>(c.size()));
        for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = nd(rng);
        f = potentials::remove_mean(c, f);
        const double m1 = potentials::fractional_norm(ops, f, -1.0);
        const double mh = potentials::fractional_norm(ops, f, -0.5);
        const double z = potentials::fractional_norm(ops, f, 0.0);
        const double h = potentials::fractional_norm(ops, f, 0.5);
        const double o = potentials::fractional_norm(ops, f, 1.0);
        const bool ok = h <= std::cbrt(mh) * std::pow(o, 2.0 / 3.0) * tol &&
                        z <= std::pow(mh, 2.0 / 3.0) * std::cbrt(o) * tol &&
                        mh <= std::pow(m1, 2.0 / 3.0) * std::cbrt(h) * tol;
        failures += ok ? 0 : 1;
        ++fields;
      }
    }
    r.measured = std::to_string(failures) + " failures in " + std::to_string(fields) + " fields";
    r.pass = failures == 0;
  });
}

CriterionResult determinism(const SuiteOptions& opt) {
  return timed(10, "determinism", 600.0, opt, [&](CriterionResult& r) {
    r.tolerance = "byte-identical";
    cli::RunConfig cfg;
    cfg.mode = "evolve";
    cfg.n = opt.n;
    cfg.init.random_modes = 4;
    cfg.init.eps0 = 0.05;
    cfg.stepper = base_stepper(opt);
    cfg.stepper.t_end = 0.2;
    cfg.stepper.probe_every = 5;
    std::vector<std::string> hashes;
    std::ostringstream sink;
    for (const char* run : {"run_a", "run_b"}) {
      cfg.out_dir = (fs::path(opt.scratch_dir) / run).string();
      (void)cli::cmd_evolve(cfg, sink);
      hashes.push_back(io::read_file((fs::path(cfg.out_dir) / "trace.csv").string()));
    }
    const bool same = hashes[0] == hashes[1];
    r.measured = same ? "trace.csv identical (fnv1a " + io::hex64(io::fnv1a(hashes[0])) + ")" : "trace.csv differs";
    r.pass = same;
  });
}

std::vector<CriterionResult> run_all(const SuiteOptions& opt, std::ostream* progress) {
  using Fn = CriterionResult (*)(const SuiteOptions&);
  const Fn all[] = {flat_spectrum, linear_sharp_constants, hed_saturation, nonlinear_linear_consistency, static_hed,
                    dynamic_monitors, hessian_formula, toy_brezis, interpolation_suite, determinism};
  std::vector<CriterionResult> out;
  for (Fn f : all) {
    out.push_back(f(opt));
    if (progress) *progress << format_line(out.back()) << std::endl;
  }
  return out;
}

std::string format_line(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << r.id << "] " << std::left << std::setw(32) << r.name
     << " " << r.measured << " | tol " << r.tolerance << " | " << std::fixed << std::setprecision(2) << r.seconds
     << " s";
  return os.str();
}

nlohmann::json to_json(const std::vector<CriterionResult>& results) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results)
    j.push_back({{"id", r.id},
                 {"name", r.name},
                 {"pass", r.pass},
                 {"measured", r.measured},
                 {"tolerance", r.tolerance},
                 {"budget_seconds", r.budget_seconds}});
  return j;
}

}  // namespace mse::selftest
