#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace mse::selftest {

struct SuiteOptions {
  std::size_t n = 256;
  // Test hook forwarded to the nonlinear stepper.
  double kappa_sign = 1.0;
  std::string scratch_dir = "selftest_scratch";
  bool enforce_runtime = true;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string measured;
  std::string tolerance;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

CriterionResult flat_spectrum(const SuiteOptions& opt);
CriterionResult linear_sharp_constants(const SuiteOptions& opt);
CriterionResult hed_saturation(const SuiteOptions& opt);
CriterionResult nonlinear_linear_consistency(const SuiteOptions& opt);
CriterionResult static_hed(const SuiteOptions& opt);
CriterionResult dynamic_monitors(const SuiteOptions& opt);
CriterionResult hessian_formula(const SuiteOptions& opt);
CriterionResult toy_brezis(const SuiteOptions& opt);
CriterionResult interpolation_suite(const SuiteOptions& opt);
CriterionResult determinism(const SuiteOptions& opt);

std::vector<CriterionResult> run_all(const SuiteOptions& opt, std::ostream* progress = nullptr);
std::string format_line(const CriterionResult& r);
nlohmann::json to_json(const std::vector<CriterionResult>& results);

}  // namespace mse::selftest
