#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mse/errors.hpp"
#include "mse/hedcore.hpp"
#include "mse/linearized.hpp"

using namespace mse;
using namespace mse::hedcore;

namespace {
constexpr double kPi = std::numbers::pi;

std::vector<double> grid(double t_end, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = t_end * static_cast<double>(i) / static_cast<double>(n - 1);
  return t;
}

GradientFlowTrace linear_trace(std::span<const curve::Mode> modes, std::size_t count = 400) {
  auto s = linearized::SpectralState::from_modes(2 * kPi, modes);
  auto times = linearized::log_times(s, count);
  auto rep = linearized::linear_chain_check(s, times);
  auto rec = linearized::to_records(rep, std::numbers::sqrt2);
  return GradientFlowTrace::from_records(rec, "linear");
}

GradientFlowTrace single_mode_trace() {
  std::vector<curve::Mode> modes{{1, 0.01, 0.0}};
  return linear_trace(modes);
}
}  // namespace

TEST_CASE("corollary constants") {
  CHECK(std::abs(corollary_C1(std::numbers::sqrt2, 2.0) - 1.0 / (4 * (std::numbers::sqrt2 + 1))) < 1e-15);
  CHECK(corollary_C1(1.0, 1.0) == 0.25);
  CHECK(corollary_C2(std::numbers::sqrt2) == doctest::Approx(0.5));
  CHECK(std::abs(corollary_C1(std::numbers::sqrt2, 2.0) - linearized::sharp_C1()) < 1e-15);
}

TEST_CASE("toy flow closed form") {
  auto t = grid(5.0, 101);
  auto tr = toy_convex_flow(1.0, 0.3, 0.3, t);
  CHECK(tr.samples[0].H == 1.0);
  CHECK(tr.samples[0].E == 0.5);
  CHECK(tr.samples[0].D == 1.0);
  for (const auto& s : tr.samples) {
    CHECK(s.H == doctest::Approx(std::exp(-2 * s.t)));
    CHECK(s.E == doctest::Approx(0.5 * std::exp(-2 * s.t)));
    CHECK(s.D == doctest::Approx(std::exp(-2 * s.t)));
  }
  auto off = toy_convex_flow(1.0, 1.0, 0.0, grid(20.0, 201));
  CHECK(off.samples.back().H == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(off.samples.back().E < 1e-15);
  CHECK_THROWS_AS(toy_convex_flow(1.0, 0.0, 0.0, std::vector<double>{0.1, 0.2}), TraceError);
}

TEST_CASE("toy flow passes the Brezis chain with closed-form margins") {
  for (double offset : {0.0, 1.0}) {
    auto tr = toy_convex_flow(1.0, offset, 0.0, grid(8.0, 801));
    auto cert = brezis_check(tr);
    CHECK(cert.pass());
    const double H0 = 1.0 + offset * offset;
    // sup tE = 1/(4e) at t = 1/2; bound H0/4.
    const auto* e = cert.find("decay_E");
    REQUIRE(e);
    CHECK(e->worst_margin == doctest::Approx(0.25 - 1 / (4 * std::exp(1.0)) / H0).epsilon(1e-4));
    // sup t^2 D = e^{-2} at t = 1; bound H0.
    const auto* d = cert.find("decay_D");
    REQUIRE(d);
    CHECK(d->worst_margin == doctest::Approx(1.0 - std::exp(-2.0) / H0).epsilon(1e-4));
    // sup t D = 1/(2e) at t = 1/2; bound E0 = 1/2.
    const auto* de = cert.find("decay_D_energy");
    REQUIRE(de);
    CHECK(de->worst_margin == doctest::Approx((0.5 - 1 / (2 * std::exp(1.0))) / 0.5).epsilon(1e-4));
    for (const auto& c : cert.checks) CHECK(c.worst_margin >= 0.0);
  }
}

TEST_CASE("toy flow skips the theorem check") {
  auto tr = toy_convex_flow(1.0, 0.0, 0.0, grid(4.0, 101));
  auto cert = theorem_rate_check(tr, NAN);
  const auto* e = cert.find("eps_monotone");
  REQUIRE(e);
  CHECK(e->skipped);
  CHECK(cert.find("F_split_early")->skipped);
}

TEST_CASE("equilibrium trace passes trivially") {
  GradientFlowTrace tr;
  for (int i = 0; i < 10; ++i) tr.samples.push_back({0.5 * i, 2.0, 0.0, 0.0, 0.0});
  CHECK(brezis_check(tr).pass());
  CHECK(corollary_check(tr, 3.0, 2.0).pass());
}

TEST_CASE("trace validation") {
  GradientFlowTrace tr;
  tr.samples = {{0.0, 1, 1, 1}, {1.0, 1, 1, 1}};
  CHECK_THROWS_AS(brezis_check(tr), TraceError);
  tr.samples.push_back({0.5, 1, 1, 1});
  CHECK_THROWS_AS(brezis_check(tr), TraceError);
  tr.samples.back().t = 2.0;
  tr.samples[1].E = -1.0;
  CHECK_THROWS_AS(brezis_check(tr), TraceError);
  tr.samples[1].E = 1.0;
  tr.samples[0].t = 0.1;
  CHECK_THROWS_AS(brezis_check(tr), TraceError);
  CHECK_THROWS_AS(corollary_check(toy_convex_flow(1, 0, 0, grid(1, 5)), 0.5, 1.0), DomainError);
}

TEST_CASE("linear single mode") {
  auto tr = single_mode_trace();
  auto b = brezis_check(tr);
  CHECK(b.pass());
  auto c = corollary_check(tr, std::numbers::sqrt2, 2.0);
  CHECK(c.pass());
  CHECK(c.C1 == doctest::Approx(0.1035534).epsilon(1e-6));
  // Equality in the strengthened H hypothesis, up to trapezoid error.
  CHECK(c.find("H_monotone_modulo")->worst_margin < 1e-6);
  CHECK(c.find("interpolation")->worst_margin < 1e-9);

  auto th = theorem_rate_check(tr, 1e-6);
  CHECK(th.pass());
  const auto* e = th.find("decay_E");
  CHECK(e->worst_margin == doctest::Approx(linearized::sharp_C1() - 1 / (4 * std::exp(1.0))).epsilon(1e-3));
}

TEST_CASE("linear two-mode trace") {
  std::vector<curve::Mode> modes{{1, 0.01, 0.0}, {2, 0.01, 1.0}};
  auto tr = linear_trace(modes);
  CHECK(brezis_check(tr).pass());
  CHECK(corollary_check(tr, std::numbers::sqrt2, 2.0).pass());
  CHECK(theorem_rate_check(tr, tr.samples[0].eps).pass());
}

TEST_CASE("synthetic D violation names the interval") {
  auto tr = toy_convex_flow(1.0, 0.0, 0.0, grid(2.0, 21));
  tr.samples[7].D *= 1.5;
  for (auto& s : tr.samples) s.eps = std::pow(s.E * s.E * s.D, 1.0 / 6.0);
  auto cert = theorem_rate_check(tr, tr.samples[0].eps);
  const auto* d = cert.find("D_monotone");
  REQUIRE(d);
  CHECK_FALSE(d->pass);
  CHECK(d->detail.find("[0.6, 0.7]") != std::string::npos);
  CHECK_FALSE(cert.pass());
  CHECK_FALSE(brezis_check(tr).pass());
}

TEST_CASE("corollary with unit constants matches brezis") {
  auto tr = single_mode_trace();
  auto a = corollary_check(tr, 1.0, 1.0);
  auto b = brezis_check(tr);
  for (const auto& c : a.checks) {
    const auto* o = b.find(c.check);
    REQUIRE(o);
    CHECK(o->pass == c.pass);
    CHECK(o->worst_margin == c.worst_margin);
  }
}

TEST_CASE("loosening slack never flips pass to fail") {
  std::vector<GradientFlowTrace> traces{single_mode_trace(), toy_convex_flow(1.0, 0.5, 0.0, grid(3.0, 61))};
  auto broken = toy_convex_flow(1.0, 0.0, 0.0, grid(2.0, 21));
  broken.samples[4].E *= 1.01;
  traces.push_back(broken);
  for (const auto& tr : traces) {
    bool prev_pass = false;
    for (double rel : {0.0, 1e-12, 1e-9, 1e-6, 1e-3, 1e-1}) {
      Tolerances tol;
      tol.rel = rel;
      auto cert = brezis_check(tr, tol);
      if (prev_pass) CHECK(cert.pass());
      prev_pass = cert.pass();
    }
  }
}

TEST_CASE("theorem split") {
  auto s = theorem_split(2.0, 0.1, 10.0);
  CHECK(s.applicable);
  const double l = std::log(0.1);
  CHECK(s.alpha == doctest::Approx(std::sqrt(2 - 10 * 0.01 * l * l)));
  CHECK(s.F0 == doctest::Approx(1.0 / s.alpha));
  CHECK(s.T_star == doctest::Approx(std::pow(s.F0, 0.75) / std::pow(0.1, 1.5)));
  CHECK_FALSE(theorem_split(1.0, std::exp(-1.0), 20.0).applicable);
}

TEST_CASE("certificate json") {
  auto cert = brezis_check(toy_convex_flow(1.0, 0.0, 0.0, grid(1.0, 11)));
  auto j = to_json(cert);
  CHECK(j["pass"] == true);
  REQUIRE(j["checks"].is_array());
  for (const auto& c : j["checks"]) {
    CHECK(c.contains("check"));
    CHECK(c.contains("pass"));
    CHECK(c.contains("worst_margin"));
    CHECK(c.contains("worst_t"));
  }
  CHECK(j["constants"]["C1"] == 0.25);
}
