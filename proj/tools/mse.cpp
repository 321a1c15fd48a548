#include <CLI11.hpp>

#include <iostream>
#include <thread>

#include "mse/cli.hpp"
#include "mse/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mullins-Sekerka graph flow: linear chain, nonlinear evolution, rate certificates"};
  app.set_version_flag("--version", mse::cli::code_version());
  std::string config, out;
  std::vector<std::string> overrides;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  bool print_defaults = false;
  app.add_option("--config", config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a dotted config key, e.g. --set stepper.t_end=2");
  app.add_option("--out", out, "Output directory (overrides out_dir)");
  app.add_option("--jobs", jobs, "Worker threads for sweep cells")->check(CLI::PositiveNumber);
  app.add_flag("--print-defaults", print_defaults, "Print the default configuration and exit");

  std::string mode, trace;
  for (const char* name : {"linear", "evolve", "certify", "sweep", "selftest"}) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
    sub->callback([&mode, name] { mode = name; });
    if (std::string(name) == "certify") sub->add_option("trace", trace, "Trace CSV to certify");
  }
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mse::cli::kExitConfig;
  }
  if (print_defaults) {
    std::cout << mse::cli::default_config_json().dump(2) << "\n";
    return mse::cli::kExitPass;
  }
  if (!mode.empty()) overrides.push_back("mode=" + mode);
  if (!trace.empty()) overrides.push_back("certify.trace=" + nlohmann::json(trace).dump());
  if (!out.empty()) overrides.push_back("out_dir=" + nlohmann::json(out).dump());
  try {
    const auto cfg = mse::cli::load_config(config, overrides);
    return mse::cli::dispatch(cfg, std::cout, jobs);
  } catch (const mse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return mse::cli::kExitConfig;
  }
}
