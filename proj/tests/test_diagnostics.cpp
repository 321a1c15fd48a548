#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mse/curve.hpp"
#include "mse/diagnostics.hpp"
#include "mse/errors.hpp"
#include "mse/potentials.hpp"

using namespace mse;
using namespace mse::diagnostics;

namespace {
constexpr double kPi = std::numbers::pi;

struct Snapshot {
  curve::SampledCurve c;
  potentials::OperatorSet ops;
};

Snapshot mode_snapshot(double a, int m = 1, std::size_t n = 128, double L = 2 * kPi, double phase = 0.3) {
  std::vector<curve::Mode> modes{{m, a, phase}};
  auto c = curve::graph_to_curve(curve::PeriodicGraph::from_modes(L, n, modes));
  auto ops = potentials::OperatorSet::assemble(c);
  return {std::move(c), std::move(ops)};
}

Snapshot random_snapshot(std::uint64_t seed, double scale, std::size_t n = 128) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<curve::Mode> modes;
  for (int m = 1; m <= 6; ++m) modes.push_back({m, scale * u(rng) / m, 2 * kPi * u(rng)});
  auto c = curve::graph_to_curve(curve::PeriodicGraph::from_modes(2 * kPi, n, modes));
  auto ops = potentials::OperatorSet::assemble(c);
  return {std::move(c), std::move(ops)};
}
}  // namespace

TEST_CASE("flat line has vanishing diagnostics") {
  auto c = curve::graph_to_curve(curve::PeriodicGraph::flat(2 * kPi, 64));
  auto ops = potentials::OperatorSet::assemble(c);
  auto r = evaluate(c, ops, 0.0);
  CHECK(r.E == 0.0);
  CHECK(r.Ebar == 0.0);
  CHECK(std::abs(r.D) < 1e-28);
  CHECK(r.H == 0.0);
  CHECK(r.eps < 1e-9);
  CHECK(r.hed_ratio == 0.0);
  auto h = hed_check(r.E, r.Ebar, r.H, r.D, r.b_sup);
  CHECK(h.ebar_ok);
  CHECK(h.angle_ok);
  CHECK(h.refined_ok);
  auto cb = curvature_bound_report(c, ops, r.E, r.D);
  for (int i = 0; i < 4; ++i) CHECK(cb.ratio[i] == 0.0);
  auto fc = flatness_control_check(0.0, 0.0, 0.0);
  CHECK(fc.bmo_ratio == 0.0);
  CHECK(fc.b_ratio == 0.0);
  CHECK_FALSE(fc.flagged);
}

TEST_CASE("single mode dissipation and squared distance") {
  for (int k : {1, 3}) {
    const double a = 0.01, L = 2 * kPi;
    auto s = mode_snapshot(a, k);
    const double D = dissipation(s.c, s.ops);
    const double H = squared_distance(s.c, s.ops);
    const double D_lin = a * a * std::pow(k, 5) * L;
    const double H_lin = a * a * L / (4.0 * k);
    CHECK(std::abs(D / D_lin - 1) < 10 * a * a * k * k);
    CHECK(std::abs(H / H_lin - 1) < 10 * a * a * k * k);
    CHECK(std::abs(dissipation_spectral(s.c, s.ops) / D - 1) < 1e-9);
    CHECK(std::abs(squared_distance_spectral(s.c, s.ops) / H - 1) < 1e-9);
  }
}

TEST_CASE("squared distance is quadratic at leading order") {
  const double a = 0.005;
  const double H1 = squared_distance(mode_snapshot(a).c, mode_snapshot(a).ops);
  auto s2 = mode_snapshot(2 * a);
  const double H2 = squared_distance(s2.c, s2.ops);
  CHECK(std::abs(H2 / H1 - 4.0) < 4.0 * 10 * 4 * a * a);
}

TEST_CASE("broken neutrality surfaces in H") {
  auto s = mode_snapshot(0.05);
  auto shifted = s.c;
  for (auto& p : shifted.z) p.y += 0.1;
  CHECK_THROWS_AS(squared_distance(shifted, s.ops), NeutralityError);
}

TEST_CASE("eps is scale invariant") {
  std::vector<curve::Mode> modes{{1, 0.05, 0.2}, {2, 0.02, 1.1}, {3, 0.01, 2.5}};
  auto eps_at = [&](double lambda) {
    std::vector<curve::Mode> scaled = modes;
    for (auto& m : scaled) m.amplitude *= lambda;
    auto c = curve::graph_to_curve(curve::PeriodicGraph::from_modes(2 * kPi * lambda, 128, scaled));
    auto ops = potentials::OperatorSet::assemble(c);
    return evaluate(c, ops, 0.0).eps;
  };
  const double e1 = eps_at(1.0);
  CHECK(e1 > 0.0);
  for (double lambda : {0.5, 2.0}) CHECK(std::abs(eps_at(lambda) / e1 - 1) < 1e-6);
}

TEST_CASE("stored eps is recomputable") {
  auto s = random_snapshot(7, 0.1);
  auto r = evaluate(s.c, s.ops, 0.0);
  CHECK(r.eps == epsilon(r.E, r.D));
  CHECK(r.E >= 0.0);
  CHECK(r.Ebar >= 0.0);
  CHECK(r.D >= 0.0);
  CHECK(r.H >= 0.0);
}

TEST_CASE("single-mode HED ratio tends to one half quadratically") {
  std::vector<double> dev;
  for (double a : {0.04, 0.02, 0.01, 0.005}) {
    auto s = mode_snapshot(a);
    auto r = evaluate(s.c, s.ops, 0.0, {.bmo = false});
    dev.push_back(std::abs(r.hed_ratio - 0.5));
  }
  for (std::size_t i = 0; i + 1 < dev.size(); ++i) {
    CHECK(dev[i + 1] < dev[i]);
    CHECK(dev[i] / dev[i + 1] > 3.5);
  }
  CHECK(dev.back() < 1e-4);
}

TEST_CASE("Ebar bounded by sqrt(HD) on random small graphs") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    auto s = random_snapshot(seed, 0.05 + 0.02 * static_cast<double>(seed));
    auto r = evaluate(s.c, s.ops, 0.0, {.bmo = false});
    auto h = hed_check(r.E, r.Ebar, r.H, r.D, r.b_sup);
    CHECK(h.ebar_ok);
    CHECK(h.ebar_margin >= 0.0);
    CHECK(h.angle_ok);
    CHECK(r.Ebar <= 2 * r.E);
  }
}

TEST_CASE("hed_check margins") {
  auto h = hed_check(0.5, 1.0, 1.0, 1.0, 0.0, 0.0);
  CHECK(h.sqrt_hd == doctest::Approx(1.0));
  CHECK(h.ratio == doctest::Approx(0.5));
  CHECK(h.ebar_margin == doctest::Approx(0.0));
  CHECK(h.angle_margin == doctest::Approx(0.0));
  CHECK(h.refined_ok);
  auto bad = hed_check(1.0, 2.0, 1.0, 1.0, 0.0, 0.0);
  CHECK_FALSE(bad.ebar_ok);
  CHECK_FALSE(bad.refined_ok);
  CHECK(bad.ebar_margin < 0.0);
  CHECK_FALSE(hed_check(0.1, 0.1, 1.0, 1.0, 4.0).angle_applicable);
  CHECK_THROWS_AS(hed_check(0.1, 0.1, NAN, 1.0, 0.0), DomainError);
}

TEST_CASE("curvature bound report") {
  auto s = mode_snapshot(0.01);
  auto r = evaluate(s.c, s.ops, 0.0, {.bmo = false});
  auto cb = curvature_bound_report(s.c, s.ops, r.E, r.D);
  CHECK(cb.identity_ok);
  CHECK(cb.ratio[3] == doctest::Approx(1.0).epsilon(1e-9));
  for (int i = 0; i < 4; ++i) CHECK(std::isfinite(cb.ratio[i]));

  double worst[3] = {0, 0, 0};
  for (double a : {0.005, 0.01, 0.02, 0.04, 0.08, 0.16}) {
    auto t = mode_snapshot(a);
    auto q = evaluate(t.c, t.ops, 0.0, {.bmo = false});
    auto b = curvature_bound_report(t.c, t.ops, q.E, q.D);
    CHECK(b.identity_ok);
    for (int i = 0; i < 3; ++i) worst[i] = std::max(worst[i], b.ratio[i]);
  }
  for (double w : worst) CHECK(w < 5.0);
}

TEST_CASE("flatness control ratios stay bounded") {
  double worst_bmo = 0.0, worst_b = 0.0;
  for (double a : {0.005, 0.01, 0.02, 0.04}) {
    auto s = mode_snapshot(a);
    auto r = evaluate(s.c, s.ops, 0.0);
    CHECK(r.bmo <= 2 * r.b_sup * (1 + r.b_sup));
    auto fc = flatness_control_check(r.bmo, r.b_sup, r.eps);
    CHECK_FALSE(fc.flagged);
    worst_bmo = std::max(worst_bmo, fc.bmo_ratio);
    worst_b = std::max(worst_b, fc.b_ratio);
  }
  CHECK(worst_bmo < 10.0);
  CHECK(worst_b < 10.0);
  CHECK(flatness_control_check(0.1, 0.0, 0.0).flagged);
}

TEST_CASE("auxiliary function") {
  CHECK(auxiliary_F(0.0, 3.0, 1.0, 1.0, 2.0) == doctest::Approx(0.75));
  CHECK(auxiliary_F(2.0, 3.0, 1.0, 5.0, 1.0) == doctest::Approx(0.5 * 3 + 2 * 1 + 0.5 * 4 * 5));
  CHECK_THROWS_AS(auxiliary_F(0.0, 1.0, 1.0, 1.0, 0.0), DomainError);

  // Single mode k = 1, |hhat|^2 = 1/4: H = L/4, E = L/4, D = L, all decaying like exp(-4t).
  const double L = 2 * kPi;
  double prev = INFINITY;
  for (int i = 0; i <= 400; ++i) {
    const double t = 0.01 * i, d = std::exp(-4 * t);
    const double F = auxiliary_F(t, L / 4 * d, L / 4 * d, L * d, std::numbers::sqrt2);
    CHECK(F <= prev);
    prev = F;
  }
}

TEST_CASE("csv round trip") {
  auto s = random_snapshot(3, 0.1);
  auto r = evaluate(s.c, s.ops, 0.25);
  r.residual_edi = 1.5e-7;
  DiagnosticsRecord flat;
  flat.b_sup = NAN;
  std::stringstream ss;
  write_csv_header(ss, true);
  write_csv_row(ss, r, "nonlinear");
  write_csv_row(ss, flat, "nonlinear");
  std::string model;
  auto back = read_csv(ss, &model);
  REQUIRE(back.size() == 2);
  CHECK(model == "nonlinear");
  CHECK(back[0].t == r.t);
  CHECK(back[0].E == r.E);
  CHECK(back[0].D == r.D);
  CHECK(back[0].H == r.H);
  CHECK(back[0].eps == r.eps);
  CHECK(back[0].bmo == r.bmo);
  CHECK(back[0].residual_edi == r.residual_edi);
  CHECK(std::isnan(back[1].b_sup));

  std::stringstream plain;
  write_csv_header(plain);
  write_csv_row(plain, r);
  CHECK(read_csv(plain).size() == 1);

  std::stringstream bad("t,E,D\n0,1,2\n");
  CHECK_THROWS_AS(read_csv(bad), TraceError);
  std::stringstream garbage;
  write_csv_header(garbage);
  garbage << "0,1,2,x,4,5,6,7,8,9,10\n";
  CHECK_THROWS_AS(read_csv(garbage), TraceError);
}
