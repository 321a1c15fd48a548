#pragma once

#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "mse/curve.hpp"
#include "mse/evolution.hpp"

namespace mse::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;

const char* code_version();

struct InitialData {
  std::vector<curve::Mode> modes{{1, 1e-3, 0.0}};
  // When positive: modes 1..random_modes, amplitude ~ 1/m, random phases, scaled to eps0.
  int random_modes = 0;
  double eps0 = 0.1;
  // Snapshot file; overrides modes.
  std::string file;
};

struct CertifyConfig {
  std::string trace;
  std::vector<std::string> checks{"brezis", "corollary", "theorem"};
  double C = std::numbers::sqrt2;
  double C_prime = 2.0;
  double C_cfg = 10.0;
  // Negative starts the theorem decay window at T_*.
  double t_from = 0.0;
  double alpha = std::numbers::sqrt2;
};

struct SweepConfig {
  // "amplitude" or "resolution".
  std::string kind = "amplitude";
  std::vector<double> amplitudes{4e-4, 8e-4, 1.6e-3, 3.2e-3};
  std::vector<std::size_t> resolutions{64, 128, 256, 512};
  double t = 0.5;
};

struct RunConfig {
  std::string mode = "linear";
  std::size_t n = 128;
  double period = 2.0 * std::numbers::pi;
  InitialData init;
  evolution::StepperConfig stepper;
  CertifyConfig certify;
  SweepConfig sweep;
  std::size_t linear_samples = 1000;
  std::string out_dir = "out";
  std::size_t snapshot_every = 0;
  std::uint64_t seed = 1;

  // Unknown keys and wrong types raise ConfigError naming the field.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  // key is a dotted path such as "stepper.t_end"; value is parsed as JSON, else taken as a string.
  static void apply_override(nlohmann::json& j, const std::string& assignment);
  // Cross-field checks; ConfigError names the field.
  void validate() const;
};

nlohmann::json default_config_json();
// Defaults, then the file (if any), then overrides.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

// Modes 1..count with amplitudes ~ 1/m and uniform random phases, rescaled so that eps = eps0.
curve::PeriodicGraph multimode_graph(double period, std::size_t n, int count, double eps0, std::uint64_t seed);
curve::PeriodicGraph initial_graph(const RunConfig& cfg);

int cmd_linear(const RunConfig& cfg, std::ostream& log);
int cmd_evolve(const RunConfig& cfg, std::ostream& log);
int cmd_certify(const RunConfig& cfg, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, std::ostream& log, std::size_t jobs = 1);
int cmd_selftest(const RunConfig& cfg, std::ostream& log);

// Dispatches on cfg.mode; maps ConfigError to exit code 2.
int dispatch(const RunConfig& cfg, std::ostream& log, std::size_t jobs = 1);

}  // namespace mse::cli
