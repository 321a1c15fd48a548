#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mse/cli.hpp"
#include "mse/diagnostics.hpp"
#include "mse/errors.hpp"
#include "mse/hedcore.hpp"
#include "mse/io.hpp"

using namespace mse;
using namespace mse::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "mse_cli_test" / name;
  fs::remove_all(p);
  return p;
}

std::string field_of(auto f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field;
  }
  return "";
}

RunConfig quiet(const std::string& mode, const fs::path& dir) {
  RunConfig c;
  c.mode = mode;
  c.out_dir = dir.string();
  return c;
}

void write_toy_csv(const fs::path& p, bool break_D) {
  std::vector<double> grid{0.0};
  for (int i = 0; i < 200; ++i) grid.push_back(1e-2 * std::pow(1e5, i / 199.0));
  const auto tr = hedcore::toy_convex_flow(1.0, 0.5, 0.0, grid);
  std::ostringstream os;
  diagnostics::write_csv_header(os, true);
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    const auto& s = tr.samples[i];
    diagnostics::DiagnosticsRecord r;
    r.t = s.t;
    r.E = s.E;
    r.D = break_D && i == 100 ? 10.0 * s.D : s.D;
    r.H = s.H;
    r.eps = s.eps;
    diagnostics::write_csv_row(os, r, "toy");
  }
  fs::create_directories(p.parent_path());
  io::write_file(p.string(), os.str());
}

}  // namespace

TEST_CASE("defaults round-trip through JSON") {
  const json d = default_config_json();
  CHECK(RunConfig::from_json(d).to_json() == d);
  CHECK(d.at("mode") == "linear");
  CHECK(RunConfig::from_json(json::object()).n == 128);
}

TEST_CASE("strict parsing names the offending field") {
  CHECK(field_of([] { (void)RunConfig::from_json({{"stepper", {{"bogus", 1}}}}); }) == "stepper.bogus");
  CHECK(field_of([] { (void)RunConfig::from_json({{"n", "many"}}); }) == "n");
  CHECK(field_of([] { (void)RunConfig::from_json({{"n", 100}}); }) == "n");
  CHECK(field_of([] { (void)RunConfig::from_json({{"stepper", {{"t_end", -1.0}}}}); }) == "stepper.t_end");
  CHECK(field_of([] { (void)RunConfig::from_json({{"stepper", {{"exec", "gpu"}}}}); }) == "stepper.exec");
  CHECK(field_of([] { (void)RunConfig::from_json({{"init", {{"modes", {{{"m", 0}, {"amplitude", 1e-3}}}}}}}); }) ==
        "init.modes.0.m");
  CHECK(field_of([] { (void)RunConfig::from_json({{"certify", {{"checks", {"brezis", "magic"}}}}}); }) ==
        "certify.checks");
  CHECK(field_of([] { (void)RunConfig::from_json({{"mode", "certify"}}); }) == "certify.trace");
}

TEST_CASE("overrides parse JSON values and fall back to strings") {
  json j = default_config_json();
  RunConfig::apply_override(j, "stepper.t_end=2.5");
  RunConfig::apply_override(j, "mode=evolve");
  RunConfig::apply_override(j, "sweep.amplitudes=[1e-3,2e-3]");
  RunConfig::apply_override(j, "stepper.adaptive=false");
  const auto c = RunConfig::from_json(j);
  CHECK(c.stepper.t_end == 2.5);
  CHECK(c.mode == "evolve");
  CHECK(c.sweep.amplitudes == std::vector<double>{1e-3, 2e-3});
  CHECK_FALSE(c.stepper.adaptive);
  CHECK(field_of([&] { RunConfig::apply_override(j, "nothing"); }) == "nothing");
  CHECK(field_of([&] { RunConfig::apply_override(j, "stepper.nope=1"); }) == "stepper.nope");
}

TEST_CASE("file then overrides") {
  const auto dir = scratch("load");
  fs::create_directories(dir);
  io::write_file((dir / "c.json").string(), R"({"stepper": {"t_end": 2.0, "tol_edi": 1e-7}, "n": 64})");
  const auto c = load_config((dir / "c.json").string(), {"stepper.t_end=3"});
  CHECK(c.stepper.t_end == 3.0);
  CHECK(c.stepper.tol_edi == 1e-7);
  CHECK(c.n == 64);
  io::write_file((dir / "bad.json").string(), "{ not json");
  CHECK(field_of([&] { (void)load_config((dir / "bad.json").string(), {}); }) == "config");
  CHECK(field_of([&] { (void)load_config((dir / "missing.json").string(), {}); }) == "config");
}

TEST_CASE("config errors exit with 2") {
  std::ostringstream log;
  auto c = quiet("sweep", scratch("exit2"));
  c.sweep.amplitudes.clear();
  CHECK(dispatch(c, log) == kExitConfig);
  auto d = quiet("certify", scratch("exit2b"));
  d.certify.trace = (scratch("exit2b") / "absent.csv").string();
  CHECK(dispatch(d, log) == kExitConfig);
  CHECK(log.str().find("certify.trace") != std::string::npos);
}

TEST_CASE("multimode initial data hits the requested eps") {
  for (double eps0 : {0.05, 0.1}) {
    const auto g = multimode_graph(2 * std::numbers::pi, 64, 5, eps0, 3);
    const auto st = evolution::FlowState::make(g, 0.0);
    CHECK(diagnostics::epsilon(st.E, st.D) == doctest::Approx(eps0).epsilon(1e-10));
  }
  const auto a = multimode_graph(2 * std::numbers::pi, 64, 5, 0.1, 3);
  const auto b = multimode_graph(2 * std::numbers::pi, 64, 5, 0.1, 3);
  const auto c = multimode_graph(2 * std::numbers::pi, 64, 5, 0.1, 4);
  CHECK(a.heights() == b.heights());
  CHECK(a.heights() != c.heights());
}

TEST_CASE("linear command writes a hashed manifest") {
  const auto dir = scratch("linear") / "nested";
  std::ostringstream log;
  auto c = quiet("linear", dir);
  c.linear_samples = 200;
  REQUIRE(dispatch(c, log) == kExitPass);
  const auto m = json::parse(io::read_file((dir / "manifest.json").string()));
  CHECK(m.at("schema_version") == kSchemaVersion);
  CHECK(m.at("pass") == true);
  REQUIRE(m.at("files").size() == 2);
  for (const auto& f : m.at("files")) {
    const auto content = io::read_file((dir / f.at("path").get<std::string>()).string());
    CHECK(f.at("fnv1a") == io::hex64(io::fnv1a(content)));
  }
  CHECK(m.dump().find("time") == std::string::npos);
}

TEST_CASE("certify accepts the toy trace and rejects a broken one") {
  const auto dir = scratch("certify");
  std::ostringstream log;
  write_toy_csv(dir / "toy.csv", false);
  write_toy_csv(dir / "broken.csv", true);
  auto c = quiet("certify", dir / "out");
  c.certify.trace = (dir / "toy.csv").string();
  c.certify.C = 1.0;
  c.certify.C_prime = 1.0;
  CHECK(dispatch(c, log) == kExitPass);
  const auto cert = json::parse(io::read_file((dir / "out" / "certificate.json").string()));
  CHECK(cert.at("certificates").at("theorem").at("skipped") == true);
  c.certify.trace = (dir / "broken.csv").string();
  CHECK(dispatch(c, log) == kExitFail);
}

TEST_CASE("certify round-trips a linear trace") {
  const auto dir = scratch("certify_linear");
  std::ostringstream log;
  auto lin = quiet("linear", dir / "lin");
  lin.linear_samples = 300;
  REQUIRE(dispatch(lin, log) == kExitPass);
  auto c = quiet("certify", dir / "cert");
  c.certify.trace = (dir / "lin" / "trace.csv").string();
  CHECK(dispatch(c, log) == kExitPass);
}

TEST_CASE("evolve reports initial data outside the graph regime") {
  const auto dir = scratch("regime");
  std::ostringstream log;
  auto c = quiet("evolve", dir);
  c.n = 64;
  c.init.modes = {{4, 1.5, 0.0}};
  CHECK(dispatch(c, log) == kExitFail);
  const auto m = json::parse(io::read_file((dir / "manifest.json").string()));
  CHECK(m.at("abort_reason").get<std::string>().find("left graph regime") != std::string::npos);
}

TEST_CASE("evolve is byte-for-byte reproducible") {
  std::ostringstream log;
  std::vector<std::string> traces, manifests;
  for (int run = 0; run < 2; ++run) {
    auto c = quiet("evolve", scratch("det"));
    c.n = 64;
    c.init.random_modes = 3;
    c.init.eps0 = 0.05;
    c.stepper.t_end = 0.1;
    c.stepper.probe_every = 4;
    c.snapshot_every = 10;
    REQUIRE(dispatch(c, log) == kExitPass);
    traces.push_back(io::read_file(c.out_dir + "/trace.csv"));
    manifests.push_back(io::read_file(c.out_dir + "/manifest.json"));
  }
  CHECK(traces[0] == traces[1]);
  CHECK(manifests[0] == manifests[1]);
}

TEST_CASE("sweep output does not depend on the worker count") {
  std::ostringstream log;
  std::vector<std::string> out;
  for (std::size_t jobs : {1, 3}) {
    auto c = quiet("sweep", scratch("sweep_" + std::to_string(jobs)));
    c.n = 64;
    c.sweep.amplitudes = {5e-4, 1e-3, 2e-3};
    c.sweep.t = 0.2;
    REQUIRE(dispatch(c, log, jobs) == kExitPass);
    out.push_back(io::read_file(c.out_dir + "/sweep_summary.csv"));
  }
  CHECK(out[0] == out[1]);
}
