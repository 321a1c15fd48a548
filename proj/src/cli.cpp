#include "mse/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "mse/diagnostics.hpp"
#include "mse/errors.hpp"
#include "mse/hedcore.hpp"
#include "mse/io.hpp"
#include "mse/linearized.hpp"
#include "mse/potentials.hpp"
#include "mse/selftest.hpp"
#include "mse/spectral.hpp"

#ifndef MSE_VERSION
#define MSE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace mse::cli {

const char* code_version() { return MSE_VERSION; }

namespace {

std::string join_path(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : ".") + p;
  return s;
}

// Every key in `given` must exist in `schema`; arrays and leaf values are not descended.
void check_known(const json& given, const json& schema, std::vector<std::string>& path) {
  if (!given.is_object()) throw ConfigError(path.empty() ? "config" : join_path(path), "expected an object");
  for (auto it = given.begin(); it != given.end(); ++it) {
    path.push_back(it.key());
    if (!schema.contains(it.key())) throw ConfigError(join_path(path), "unknown key");
    const json& sub = schema.at(it.key());
    if (sub.is_object()) check_known(it.value(), sub, path);
    path.pop_back();
  }
}

template <class T>
T read(const json& j, const std::string& field, const char* expected) {
  const auto ptr = json::json_pointer("/" + [&] {
    std::string p = field;
    std::replace(p.begin(), p.end(), '.', '/');
    return p;
  }());
  if (!j.contains(ptr)) throw ConfigError(field, "missing");
  const json& v = j.at(ptr);
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(field, std::string("expected ") + expected);
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field, std::string("expected ") + expected);
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(field, std::string("expected ") + expected);
      if (std::is_unsigned_v<T> && v.get<long long>() < 0) throw ConfigError(field, "must be nonnegative");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field, std::string("expected ") + expected);
    }
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(field, std::string("expected ") + expected);
  }
}

void write_text(const fs::path& p, const std::string& s) { io::write_file(p.string(), s); }

struct Manifest {
  json body;
  std::vector<fs::path> files;
};

void finish_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg, Manifest& m) {
  m.body["schema_version"] = kSchemaVersion;
  m.body["command"] = command;
  m.body["code_version"] = code_version();
  m.body["config"] = cfg.to_json();
  json files = json::array();
  for (const auto& f : m.files) {
    const std::string content = io::read_file(f.string());
    files.push_back({{"path", fs::relative(f, dir).generic_string()},
                     {"fnv1a", io::hex64(io::fnv1a(content))},
                     {"bytes", content.size()}});
  }
  m.body["files"] = files;
  write_text(dir / "manifest.json", m.body.dump(2) + "\n");
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("out_dir", "cannot create '" + dir + "': " + ec.message());
  return fs::path(dir);
}

std::string write_trace(const fs::path& p, const std::vector<diagnostics::DiagnosticsRecord>& rec,
                        const std::string& model) {
  std::ostringstream os;
  diagnostics::write_csv_header(os, true);
  for (const auto& r : rec) diagnostics::write_csv_row(os, r, model);
  write_text(p, os.str());
  return p.string();
}

bool wants(const CertifyConfig& c, const std::string& name) {
  return std::find(c.checks.begin(), c.checks.end(), name) != c.checks.end();
}

struct CertificateBundle {
  json j = json::object();
  bool pass = true;
};

CertificateBundle certify_trace(const hedcore::GradientFlowTrace& tr, const CertifyConfig& c, std::ostream& log) {
  CertificateBundle b;
  auto add = [&](const std::string& name, const hedcore::RateCertificate& cert) {
    b.j[name] = hedcore::to_json(cert);
    b.pass = b.pass && cert.pass();
    log << "  " << std::left << std::setw(10) << name << (cert.pass() ? "pass" : "FAIL") << "\n";
    for (const auto& ch : cert.checks)
      if (!ch.pass && !ch.skipped && !ch.report_only) log << "    " << ch.check << ": " << ch.detail << "\n";
  };
  if (wants(c, "brezis")) add("brezis", hedcore::brezis_check(tr));
  if (wants(c, "corollary")) add("corollary", hedcore::corollary_check(tr, c.C, c.C_prime));
  if (wants(c, "theorem")) {
    const bool have_eps = std::all_of(tr.samples.begin(), tr.samples.end(),
                                      [](const hedcore::Sample& s) { return std::isfinite(s.eps); });
    if (have_eps) {
      hedcore::TheoremOptions opt;
      opt.C_cfg = c.C_cfg;
      opt.t_from = c.t_from;
      add("theorem", hedcore::theorem_rate_check(tr, tr.samples.front().eps, opt));
    } else {
      b.j["theorem"] = {{"skipped", true}, {"detail", "trace carries no eps"}};
      log << "  theorem   skipped (no eps)\n";
    }
  }
  return b;
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace

nlohmann::json default_config_json() { return RunConfig{}.to_json(); }

nlohmann::json RunConfig::to_json() const {
  json modes = json::array();
  for (const auto& m : init.modes) modes.push_back({{"m", m.m}, {"amplitude", m.amplitude}, {"phase", m.phase}});
  const auto& s = stepper;
  return json{
      {"mode", mode},
      {"n", n},
      {"period", period},
      {"linear_samples", linear_samples},
      {"out_dir", out_dir},
      {"snapshot_every", snapshot_every},
      {"seed", seed},
      {"init", {{"modes", modes}, {"random_modes", init.random_modes}, {"eps0", init.eps0}, {"file", init.file}}},
      {"stepper",
       {{"dt_init", s.dt_init},
        {"dt_min", s.dt_min},
        {"dt_max", s.dt_max},
        {"tol_edi", s.tol_edi},
        {"t_end", s.t_end},
        {"probe_every", s.probe_every},
        {"max_steps", s.max_steps},
        {"adaptive", s.adaptive},
        {"eps_admissible", s.eps_admissible},
        {"alpha", s.alpha},
        {"bmo", s.bmo},
        {"monotone_rel", s.monotone_rel},
        {"convexity_tol", s.convexity_tol},
        {"kappa_sign", s.kappa_sign},
        {"exec", s.exec == kernels::Exec::serial ? "serial" : "parallel"}}},
      {"certify",
       {{"trace", certify.trace},
        {"checks", certify.checks},
        {"C", certify.C},
        {"C_prime", certify.C_prime},
        {"C_cfg", certify.C_cfg},
        {"t_from", certify.t_from},
        {"alpha", certify.alpha}}},
      {"sweep", {{"kind", sweep.kind}, {"amplitudes", sweep.amplitudes}, {"resolutions", sweep.resolutions}, {"t", sweep.t}}},
  };
}

RunConfig RunConfig::from_json(const nlohmann::json& given) {
  const json schema = default_config_json();
  std::vector<std::string> path;
  check_known(given, schema, path);
  json j = schema;
  j.merge_patch(given);

  RunConfig c;
  c.mode = read<std::string>(j, "mode", "a string");
  c.n = read<std::size_t>(j, "n", "an integer");
  c.period = read<double>(j, "period", "a number");
  c.linear_samples = read<std::size_t>(j, "linear_samples", "an integer");
  c.out_dir = read<std::string>(j, "out_dir", "a string");
  c.snapshot_every = read<std::size_t>(j, "snapshot_every", "an integer");
  c.seed = read<std::uint64_t>(j, "seed", "an integer");

  const json& modes = j.at("init").at("modes");
  if (!modes.is_array()) throw ConfigError("init.modes", "expected an array");
  c.init.modes.clear();
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::string f = "init.modes." + std::to_string(i);
    const json& m = modes[i];
    if (!m.is_object()) throw ConfigError(f, "expected an object with m, amplitude, phase");
    for (auto it = m.begin(); it != m.end(); ++it)
      if (it.key() != "m" && it.key() != "amplitude" && it.key() != "phase") throw ConfigError(f + "." + it.key(), "unknown key");
    json wrapped = {{"x", m}};
    curve::Mode md;
    md.m = read<int>(wrapped, "x.m", "an integer");
    md.amplitude = read<double>(wrapped, "x.amplitude", "a number");
    md.phase = m.contains("phase") ? read<double>(wrapped, "x.phase", "a number") : 0.0;
    c.init.modes.push_back(md);
  }
  c.init.random_modes = read<int>(j, "init.random_modes", "an integer");
  c.init.eps0 = read<double>(j, "init.eps0", "a number");
  c.init.file = read<std::string>(j, "init.file", "a string");

  auto& s = c.stepper;
  s.dt_init = read<double>(j, "stepper.dt_init", "a number");
  s.dt_min = read<double>(j, "stepper.dt_min", "a number");
  s.dt_max = read<double>(j, "stepper.dt_max", "a number");
  s.tol_edi = read<double>(j, "stepper.tol_edi", "a number");
  s.t_end = read<double>(j, "stepper.t_end", "a number");
  s.probe_every = read<std::size_t>(j, "stepper.probe_every", "an integer");
  s.max_steps = read<std::size_t>(j, "stepper.max_steps", "an integer");
  s.adaptive = read<bool>(j, "stepper.adaptive", "a boolean");
  s.eps_admissible = read<double>(j, "stepper.eps_admissible", "a number");
  s.alpha = read<double>(j, "stepper.alpha", "a number");
  s.bmo = read<bool>(j, "stepper.bmo", "a boolean");
  s.monotone_rel = read<double>(j, "stepper.monotone_rel", "a number");
  s.convexity_tol = read<double>(j, "stepper.convexity_tol", "a number");
  s.kappa_sign = read<double>(j, "stepper.kappa_sign", "a number");
  const std::string exec = read<std::string>(j, "stepper.exec", "a string");
  if (exec != "serial" && exec != "parallel") throw ConfigError("stepper.exec", "must be 'serial' or 'parallel'");
  s.exec = exec == "serial" ? kernels::Exec::serial : kernels::Exec::parallel;

  c.certify.trace = read<std::string>(j, "certify.trace", "a string");
  try {
    c.certify.checks = j.at("certify").at("checks").get<std::vector<std::string>>();
  } catch (const json::exception&) {
    throw ConfigError("certify.checks", "expected an array of strings");
  }
  c.certify.C = read<double>(j, "certify.C", "a number");
  c.certify.C_prime = read<double>(j, "certify.C_prime", "a number");
  c.certify.C_cfg = read<double>(j, "certify.C_cfg", "a number");
  c.certify.t_from = read<double>(j, "certify.t_from", "a number");
  c.certify.alpha = read<double>(j, "certify.alpha", "a number");

  c.sweep.kind = read<std::string>(j, "sweep.kind", "a string");
  try {
    c.sweep.amplitudes = j.at("sweep").at("amplitudes").get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError("sweep.amplitudes", "expected an array of numbers");
  }
  try {
    c.sweep.resolutions = j.at("sweep").at("resolutions").get<std::vector<std::size_t>>();
  } catch (const json::exception&) {
    throw ConfigError("sweep.resolutions", "expected an array of integers");
  }
  c.sweep.t = read<double>(j, "sweep.t", "a number");
  c.validate();
  return c;
}

void RunConfig::apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  std::string ptr = "/" + key;
  std::replace(ptr.begin(), ptr.end(), '.', '/');
  const json schema = default_config_json();
  json::json_pointer p;
  try {
    p = json::json_pointer(ptr);
  } catch (const json::exception&) {
    throw ConfigError(key, "malformed key");
  }
  if (!schema.contains(p)) throw ConfigError(key, "unknown key");
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  j[p] = value;
}

void RunConfig::validate() const {
  static const std::vector<std::string> modes{"linear", "evolve", "certify", "sweep", "selftest"};
  if (std::find(modes.begin(), modes.end(), mode) == modes.end())
    throw ConfigError("mode", "must be one of linear, evolve, certify, sweep, selftest");
  if (n < 16 || !spectral::is_power_of_two(n)) throw ConfigError("n", "must be a power of two >= 16");
  if (!(period > 0.0) || !std::isfinite(period)) throw ConfigError("period", "must be positive");
  if (linear_samples < 3) throw ConfigError("linear_samples", "must be at least 3");
  for (std::size_t i = 0; i < init.modes.size(); ++i) {
    const auto& m = init.modes[i];
    const std::string f = "init.modes." + std::to_string(i);
    if (m.m < 1) throw ConfigError(f + ".m", "must be positive");
    if (static_cast<std::size_t>(m.m) >= n / 2) throw ConfigError(f + ".m", "must be below n/2");
    if (!std::isfinite(m.amplitude)) throw ConfigError(f + ".amplitude", "must be finite");
  }
  if (init.random_modes < 0) throw ConfigError("init.random_modes", "must be nonnegative");
  if (init.random_modes > 0) {
    if (static_cast<std::size_t>(init.random_modes) >= n / 2) throw ConfigError("init.random_modes", "must be below n/2");
    if (!(init.eps0 > 0.0 && init.eps0 < 1.0)) throw ConfigError("init.eps0", "must lie in (0, 1)");
  }
  try {
    stepper.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("stepper." + e.field, std::string(e.what()).substr(e.field.size() + 2));
  }
  static const std::vector<std::string> checks{"brezis", "corollary", "theorem"};
  if (certify.checks.empty()) throw ConfigError("certify.checks", "must name at least one check");
  for (const auto& c : certify.checks)
    if (std::find(checks.begin(), checks.end(), c) == checks.end())
      throw ConfigError("certify.checks", "unknown check '" + c + "'");
  if (!(certify.C >= 1.0)) throw ConfigError("certify.C", "must be >= 1");
  if (!(certify.C_prime >= 1.0)) throw ConfigError("certify.C_prime", "must be >= 1");
  if (!(certify.C_cfg > 0.0)) throw ConfigError("certify.C_cfg", "must be positive");
  if (!(certify.alpha > 0.0)) throw ConfigError("certify.alpha", "must be positive");
  if (mode == "certify" && certify.trace.empty()) throw ConfigError("certify.trace", "needs a trace file");
  if (sweep.kind != "amplitude" && sweep.kind != "resolution")
    throw ConfigError("sweep.kind", "must be 'amplitude' or 'resolution'");
  if (mode == "sweep") {
    if (sweep.kind == "amplitude" && sweep.amplitudes.empty()) throw ConfigError("sweep.amplitudes", "empty sweep grid");
    if (sweep.kind == "resolution" && sweep.resolutions.empty())
      throw ConfigError("sweep.resolutions", "empty sweep grid");
    for (double a : sweep.amplitudes)
      if (!(a > 0.0)) throw ConfigError("sweep.amplitudes", "amplitudes must be positive");
    for (std::size_t r : sweep.resolutions)
      if (r < 16 || !spectral::is_power_of_two(r)) throw ConfigError("sweep.resolutions", "must be powers of two >= 16");
    if (!(sweep.t > 0.0)) throw ConfigError("sweep.t", "must be positive");
  }
  if (out_dir.empty()) throw ConfigError("out_dir", "must not be empty");
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::string text;
    try {
      text = io::read_file(path);
    } catch (const std::exception& e) {
      throw ConfigError("config", e.what());
    }
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("config", std::string("malformed JSON: ") + e.what());
    }
    std::vector<std::string> p;
    check_known(j, default_config_json(), p);
  }
  json full = default_config_json();
  full.merge_patch(j);
  for (const auto& o : overrides) RunConfig::apply_override(full, o);
  return RunConfig::from_json(full);
}

curve::PeriodicGraph multimode_graph(double period, std::size_t n, int count, double eps0, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<curve::Mode> base;
  for (int m = 1; m <= count; ++m) base.push_back({m, 1.0 / m, phase(rng)});
  auto build = [&](double s) {
    auto modes = base;
    for (auto& md : modes) md.amplitude *= s;
    return curve::PeriodicGraph::from_modes(period, n, modes);
  };
  auto eps_of = [&](double s) {
    const auto st = evolution::FlowState::make(build(s), 0.0);
    return diagnostics::epsilon(st.E, st.D);
  };
  // eps is homogeneous of degree one in the amplitude at leading order.
  double s = 0.01 * period / (2.0 * std::numbers::pi);
  for (int it = 0; it < 40; ++it) {
    const double e = eps_of(s);
    if (!(e > 0.0)) throw DomainError("multimode data has zero eps");
    if (std::abs(e / eps0 - 1.0) < 1e-13) break;
    s *= eps0 / e;
  }
  return build(s);
}

curve::PeriodicGraph initial_graph(const RunConfig& cfg) {
  if (!cfg.init.file.empty()) {
    std::ifstream in(cfg.init.file);
    if (!in) throw ConfigError("init.file", "cannot open '" + cfg.init.file + "'");
    const auto c = curve::read_snapshot(in);
    return curve::curve_to_graph(c, cfg.n);
  }
  if (cfg.init.random_modes > 0)
    return multimode_graph(cfg.period, cfg.n, cfg.init.random_modes, cfg.init.eps0, cfg.seed);
  return curve::PeriodicGraph::from_modes(cfg.period, cfg.n, cfg.init.modes);
}

int cmd_linear(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = prepare_dir(cfg.out_dir);
  const auto s0 = cfg.init.random_modes > 0 || !cfg.init.file.empty()
                      ? linearized::SpectralState::from_graph(initial_graph(cfg))
                      : linearized::SpectralState::from_modes(cfg.period, cfg.init.modes);
  const auto rep = linearized::linear_chain_check(s0, linearized::log_times(s0, cfg.linear_samples));
  const auto rec = linearized::to_records(rep, cfg.certify.alpha);
  Manifest m;
  m.files.push_back(write_trace(dir / "trace.csv", rec, "linear"));

  log << "linear chain: sup tE/H0 = " << std::setprecision(12) << rep.sup_tE << " (1/(4e) = " << 1.0 / (4.0 * std::exp(1.0))
      << ", C1 = " << rep.C1 << "), sup t^2 D/H0 = " << rep.sup_t2D << "\n";
  auto tr = hedcore::GradientFlowTrace::from_records(rec, "linear");
  const auto bundle = certify_trace(tr, cfg.certify, log);
  json cert = {{"linear_chain",
                {{"pass", rep.pass()},
                 {"sup_tE_over_H0", rep.sup_tE},
                 {"sup_tE_time", rep.sup_tE_time},
                 {"sup_t2D_over_H0", rep.sup_t2D},
                 {"sup_t2D_time", rep.sup_t2D_time},
                 {"C1", rep.C1},
                 {"one_over_4e", 1.0 / (4.0 * std::exp(1.0))},
                 {"identity_residual", rep.identity_residual},
                 {"hed_worst", rep.hed_worst},
                 {"D_monotone", rep.D_monotone}}},
               {"certificates", bundle.j}};
  write_text(dir / "certificate.json", cert.dump(2) + "\n");
  m.files.push_back(dir / "certificate.json");
  const bool pass = rep.pass() && bundle.pass;
  m.body["pass"] = pass;
  finish_manifest(dir, "linear", cfg, m);
  log << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitPass : kExitFail;
}

int cmd_evolve(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = prepare_dir(cfg.out_dir);
  Manifest m;
  std::optional<curve::PeriodicGraph> g;
  try {
    g = initial_graph(cfg);
  } catch (const GraphRegimeError& e) {
    m.body["aborted"] = true;
    m.body["abort_reason"] = e.what();
    m.body["pass"] = false;
    finish_manifest(dir, "evolve", cfg, m);
    log << "aborted: " << e.what() << "\n";
    return kExitFail;
  }
  m.body["curve_hash"] = io::hex64(io::graph_hash(*g));

  evolution::RunHooks hooks;
  if (cfg.snapshot_every > 0) {
    fs::create_directories(dir / "snapshots");
    hooks.on_record = [&](const evolution::FlowState& st, std::size_t i) {
      if (i % cfg.snapshot_every != 0) return;
      std::ostringstream name;
      name << "snap_" << std::setw(6) << std::setfill('0') << i << ".txt";
      const fs::path p = dir / "snapshots" / name.str();
      std::ostringstream os;
      curve::write_snapshot(os, st.curve(), st.t);
      write_text(p, os.str());
      m.files.push_back(p);
    };
  }
  const auto tr = evolution::run(*g, cfg.stepper, hooks);
  m.files.insert(m.files.begin(), write_trace(dir / "trace.csv", tr.records, "nonlinear"));

  json probes = json::object();
  if (tr.records.size() >= 3) {
    const auto dth = evolution::dtH_probe(tr);
    probes["dtH"] = {{"sup_ratio", dth.sup_ratio}, {"sup_H_over_H0", dth.sup_H_ratio}, {"rows", dth.rows.size()}};
  }
  if (!tr.probes.empty()) {
    const auto hp = evolution::hessian_probe(tr);
    json rows = json::array();
    for (std::size_t i = 0; i < hp.velocity.size(); ++i) {
      const auto& v = hp.velocity[i];
      const auto& w = hp.distance[i];
      rows.push_back({{"t", v.t},
                      {"inconclusive", v.inconclusive},
                      {"velocity_lhs", v.inconclusive ? json() : json(v.lhs)},
                      {"velocity_rhs", v.rhs},
                      {"velocity_mismatch", v.inconclusive ? json() : json(v.mismatch)},
                      {"distance_lhs", w.inconclusive ? json() : json(w.lhs)},
                      {"distance_rhs", w.rhs},
                      {"distance_mismatch", w.inconclusive ? json() : json(w.mismatch)}});
    }
    probes["hessian"] = {{"worst_velocity_mismatch", hp.worst_velocity},
                         {"worst_distance_mismatch", hp.worst_distance},
                         {"rows", rows}};
    const auto dp = evolution::dissipation_monotonicity_probe(tr);
    probes["dissipation"] = {{"alpha", dp.alpha},
                             {"min_ratio", std::isfinite(dp.min_ratio) ? json(dp.min_ratio) : json()},
                             {"pass", dp.pass}};
  }
  write_text(dir / "probes.json", probes.dump(2) + "\n");
  m.files.insert(m.files.begin() + 1, dir / "probes.json");

  json events = json::array();
  for (const auto& e : tr.events) events.push_back({{"t", e.t}, {"kind", e.kind}, {"detail", e.detail}});
  m.body["events"] = events;
  m.body["aborted"] = tr.aborted;
  m.body["abort_reason"] = tr.abort_reason;
  m.body["steps"] = {{"accepted", tr.accepted}, {"rejected", tr.rejected}};
  m.body["max_mean_drift"] = tr.max_mean_drift;
  m.body["cumulative_edi"] = tr.cumulative_edi;
  m.body["edi_budget"] = tr.edi_budget;
  const bool pass = !tr.aborted && tr.events.empty();
  m.body["pass"] = pass;
  finish_manifest(dir, "evolve", cfg, m);

  log << "evolve: " << tr.accepted << " steps accepted, " << tr.rejected << " rejected, " << tr.events.size()
      << " monitor events\n";
  for (const auto& e : tr.events) log << "  event t=" << e.t << " " << e.kind << ": " << e.detail << "\n";
  if (tr.aborted) log << "aborted: " << tr.abort_reason << "\n";
  log << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitPass : kExitFail;
}

int cmd_certify(const RunConfig& cfg, std::ostream& log) {
  std::ifstream in(cfg.certify.trace);
  if (!in) throw ConfigError("certify.trace", "cannot open '" + cfg.certify.trace + "'");
  std::string model;
  std::vector<diagnostics::DiagnosticsRecord> rec;
  try {
    rec = diagnostics::read_csv(in, &model);
  } catch (const TraceError& e) {
    throw ConfigError("certify.trace", e.what());
  }
  auto tr = hedcore::GradientFlowTrace::from_records(rec, model.empty() ? cfg.certify.trace : model);
  try {
    tr.validate(3);
  } catch (const TraceError& e) {
    throw ConfigError("certify.trace", e.what());
  }
  const fs::path dir = prepare_dir(cfg.out_dir);
  log << "certify " << cfg.certify.trace << " (" << rec.size() << " samples)\n";
  const auto bundle = certify_trace(tr, cfg.certify, log);
  Manifest m;
  write_text(dir / "certificate.json", json{{"certificates", bundle.j}}.dump(2) + "\n");
  m.files.push_back(dir / "certificate.json");
  m.body["trace_fnv1a"] = io::hex64(io::fnv1a(io::read_file(cfg.certify.trace)));
  m.body["pass"] = bundle.pass;
  finish_manifest(dir, "certify", cfg, m);
  log << (bundle.pass ? "PASS" : "FAIL") << "\n";
  return bundle.pass ? kExitPass : kExitFail;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log, std::size_t jobs) {
  const fs::path dir = prepare_dir(cfg.out_dir);
  const bool amp = cfg.sweep.kind == "amplitude";
  const std::size_t cells = amp ? cfg.sweep.amplitudes.size() : cfg.sweep.resolutions.size();
  if (cells == 0) throw ConfigError(amp ? "sweep.amplitudes" : "sweep.resolutions", "empty sweep grid");

  struct Cell {
    double error = std::numeric_limits<double>::quiet_NaN();
    double hed_margin = std::numeric_limits<double>::quiet_NaN();
    double edi_ratio = std::numeric_limits<double>::quiet_NaN();
    std::size_t steps = 0;
    std::string failure;
  };
  std::vector<Cell> out(cells);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < cells; i = next++) {
      Cell& c = out[i];
      try {
        if (amp) {
          const double a = cfg.sweep.amplitudes[i];
          std::vector<curve::Mode> modes{{1, a, 0.0}};
          auto st = cfg.stepper;
          st.t_end = cfg.sweep.t;
          const auto tr = evolution::run(curve::PeriodicGraph::from_modes(cfg.period, cfg.n, modes), st);
          if (tr.aborted) throw StepError(tr.abort_reason);
          const auto exact = linearized::evolve_exact(linearized::SpectralState::from_modes(cfg.period, modes), cfg.sweep.t)
                                 .heights(cfg.n);
          const auto& h = tr.final_graph->heights();
          double num = 0.0, den = 0.0;
          for (std::size_t k = 0; k < h.size(); ++k) {
            num += (h[k] - exact[k]) * (h[k] - exact[k]);
            den += exact[k] * exact[k];
          }
          c.error = std::sqrt(num / den);
          const auto& r = tr.records.back();
          c.hed_margin = diagnostics::hed_check(r.E, r.Ebar, r.H, r.D, r.b_sup).ebar_margin;
          c.edi_ratio = tr.edi_budget > 0.0 ? tr.cumulative_edi / tr.edi_budget : 0.0;
          c.steps = tr.accepted;
        } else {
          const std::size_t n = cfg.sweep.resolutions[i];
          const auto curve = curve::graph_to_curve(curve::PeriodicGraph::flat(cfg.period, n));
          const auto ops = potentials::OperatorSet::assemble(curve);
          const auto& lam = ops.eigenvalues();
          double worst = 0.0;
          for (std::size_t m = 1; m <= n / 4; ++m) {
            const double ref = 2.0 * spectral::wavenumber(static_cast<double>(m), cfg.period);
            for (Eigen::Index idx : {static_cast<Eigen::Index>(2 * m - 1), static_cast<Eigen::Index>(2 * m)})
              worst = std::max(worst, std::abs(lam(idx) / ref - 1.0));
          }
          c.error = worst;
        }
      } catch (const std::exception& e) {
        c.failure = e.what();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, cells));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::ostringstream os;
  bool any_error = false;
  double order = std::numeric_limits<double>::quiet_NaN();
  if (amp) {
    os << "amplitude,n,error,error_over_a2,local_order,hed_margin,edi_ratio,steps,status\n";
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < cells; ++i) {
      const auto& c = out[i];
      const double a = cfg.sweep.amplitudes[i];
      double local = std::numeric_limits<double>::quiet_NaN();
      if (i > 0 && c.failure.empty() && out[i - 1].failure.empty())
        local = std::log(c.error / out[i - 1].error) / std::log(a / cfg.sweep.amplitudes[i - 1]);
      os << io::format_number(a) << "," << cfg.n << "," << io::format_number(c.error) << ","
         << io::format_number(c.error / (a * a)) << "," << io::format_number(local) << ","
         << io::format_number(c.hed_margin) << "," << io::format_number(c.edi_ratio) << "," << c.steps << ","
         << (c.failure.empty() ? "ok" : "error: " + c.failure) << "\n";
      if (c.failure.empty() && c.error > 0.0) {
        xs.push_back(a);
        ys.push_back(c.error);
      }
      any_error = any_error || !c.failure.empty();
    }
    if (xs.size() >= 2) order = fitted_slope(xs, ys);
    os << "fit,,,," << io::format_number(order) << ",,,,\n";
    log << "sweep: fitted nonlinear-vs-linear order " << order << "\n";
  } else {
    os << "n,max_rel_eigen_error,status\n";
    for (std::size_t i = 0; i < cells; ++i) {
      os << cfg.sweep.resolutions[i] << "," << io::format_number(out[i].error) << ","
         << (out[i].failure.empty() ? "ok" : "error: " + out[i].failure) << "\n";
      any_error = any_error || !out[i].failure.empty();
      log << "  n = " << cfg.sweep.resolutions[i] << ": max relative eigenvalue error " << out[i].error << "\n";
    }
  }
  Manifest m;
  write_text(dir / "sweep_summary.csv", os.str());
  m.files.push_back(dir / "sweep_summary.csv");
  const bool pass = !any_error && (!amp || order >= 1.9);
  m.body["pass"] = pass;
  m.body["cells"] = cells;
  finish_manifest(dir, "sweep", cfg, m);
  log << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitPass : kExitFail;
}

int cmd_selftest(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = prepare_dir(cfg.out_dir);
  selftest::SuiteOptions opt;
  opt.n = cfg.n;
  opt.kappa_sign = cfg.stepper.kappa_sign;
  opt.scratch_dir = (dir / "selftest_scratch").string();
  const auto results = selftest::run_all(opt, &log);
  Manifest m;
  write_text(dir / "selftest.json", selftest::to_json(results).dump(2) + "\n");
  m.files.push_back(dir / "selftest.json");
  const bool pass = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.pass; });
  m.body["pass"] = pass;
  finish_manifest(dir, "selftest", cfg, m);
  return pass ? kExitPass : kExitFail;
}

int dispatch(const RunConfig& cfg, std::ostream& log, std::size_t jobs) {
  try {
    cfg.validate();
    if (cfg.mode == "linear") return cmd_linear(cfg, log);
    if (cfg.mode == "evolve") return cmd_evolve(cfg, log);
    if (cfg.mode == "certify") return cmd_certify(cfg, log);
    if (cfg.mode == "sweep") return cmd_sweep(cfg, log, jobs);
    return cmd_selftest(cfg, log);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitFail;
  }
}

}  // namespace mse::cli
