#include <filesystem>
#include <iostream>

#include "mse/selftest.hpp"

int main(int argc, char** argv) {
  mse::selftest::SuiteOptions opt;
  opt.n = 256;
  opt.scratch_dir = (std::filesystem::temp_directory_path() / "mse_acceptance").string();
  if (argc > 1) opt.n = std::stoul(argv[1]);
  std::cout << "acceptance suite, n = " << opt.n << "\n";
  const auto results = mse::selftest::run_all(opt, &std::cout);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.pass ? 0 : 1;
  std::cout << (results.size() - failed) << "/" << results.size() << " criteria pass\n";
  return failed == 0 ? 0 : 1;
}
