#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "mse/curve.hpp"
#include "mse/errors.hpp"
#include "mse/potentials.hpp"

using namespace mse;
using namespace mse::potentials;

namespace {
constexpr double kPi = std::numbers::pi;

curve::SampledCurve mode_curve(double a, int m = 1, std::size_t n = 128, double L = 2 * kPi) {
  std::vector<curve::Mode> modes{{m, a, 0.3}};
  return curve::graph_to_curve(curve::PeriodicGraph::from_modes(L, n, modes));
}

curve::SampledCurve multimode_curve(std::uint64_t seed, double scale, std::size_t n = 128) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<curve::Mode> modes;
  for (int m = 1; m <= 6; ++m) modes.push_back({m, scale * u(rng) / m, 2 * kPi * u(rng)});
  return curve::graph_to_curve(curve::PeriodicGraph::from_modes(2 * kPi, n, modes));
}

Eigen::VectorXd on_nodes(const curve::SampledCurve& c, auto f) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(c.size()));
  for (std::size_t j = 0; j < c.size(); ++j) v(static_cast<Eigen::Index>(j)) = f(c.z[j].x);
  return v;
}

Eigen::VectorXd random_field(std::mt19937_64& rng, const curve::SampledCurve& c) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd v(static_cast<Eigen::Index>(c.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = nd(rng);
  return remove_mean(c, v);
}
}  // namespace

TEST_CASE("flat-line DtN spectrum") {
  for (double L : {2 * kPi, 3.0}) {
    auto c = curve::graph_to_curve(curve::PeriodicGraph::flat(L, 128));
    auto ops = OperatorSet::assemble(c);
    const auto& lam = ops.eigenvalues();
    CHECK(std::abs(lam(0)) < 1e-10);
    CHECK(ops.zero_mode() == 0);
    for (int m = 1; m <= 32; ++m) {
      const double ref = 2 * 2 * kPi * m / L;
      CHECK(std::abs(lam(2 * m - 1) / ref - 1) < 1e-8);
      CHECK(std::abs(lam(2 * m) / ref - 1) < 1e-8);
    }
    CHECK(ops.asymmetry() < 1e-10);
  }
}

TEST_CASE("flat-line action of S, N and K#") {
  const double L = 2 * kPi;
  auto c = curve::graph_to_curve(curve::PeriodicGraph::flat(L, 128));
  auto ops = OperatorSet::assemble(c);
  for (int k : {1, 3, 10}) {
    auto cosk = on_nodes(c, [k](double x) { return std::cos(k * x); });
    auto sink = on_nodes(c, [k](double x) { return std::sin(k * x); });
    CHECK((apply_S(ops, cosk) - cosk / (2.0 * k)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((apply_N(ops, sink) - 2.0 * k * sink).cwiseAbs().maxCoeff() < 1e-10 * k);
    CHECK(std::abs(fractional_norm(ops, sink, 0.5) - std::sqrt(2.0 * k) * std::sqrt(L / 2)) < 1e-10);
    CHECK(std::abs(fractional_norm(ops, sink, -1.0) - std::sqrt(L / 2) / (2.0 * k)) < 1e-12);
    CHECK(std::abs(tangential_derivative_norm(c, sink) - k * std::sqrt(L / 2)) < 1e-11);
    CHECK(std::abs(tangential_derivative_norm(c, sink) - 0.5 * l2_norm(c, apply_N(ops, sink))) < 1e-9);
    CHECK(apply_M(ops, cosk).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(ops.ksharp().cwiseAbs().maxCoeff() == 0.0);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(128);
  CHECK(apply_N(ops, one).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(tangential_derivative_norm(c, one) < 1e-14);
  CHECK(apply_S(ops, Eigen::VectorXd::Zero(128)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("operator properties on curved interfaces") {
  std::mt19937_64 rng(3);
  for (auto c : {mode_curve(0.2, 1), mode_curve(0.05, 3), multimode_curve(9, 0.3)}) {
    auto ops = OperatorSet::assemble(c);
    const auto& lam = ops.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      if (i != ops.zero_mode()) CHECK(lam(i) > 0.0);
    CHECK(ops.asymmetry() < 1e-6);
    for (int trial = 0; trial < 20; ++trial) {
      auto f = random_field(rng, c);
      auto g = random_field(rng, c);
      auto Nf = apply_N(ops, f), Ng = apply_N(ops, g);
      const double scale = l2_norm(c, Nf) * l2_norm(c, g);
      CHECK(std::abs(inner(c, Nf, g) - inner(c, f, Ng)) < 1e-6 * scale);
      CHECK(inner(c, f, Nf) > 0.0);
      CHECK(inner(c, f, apply_S(ops, f)) > 0.0);
      CHECK(is_mean_zero(c, Nf, 1e-9));
      const double half = fractional_norm(ops, f, 0.5);
      CHECK(std::abs(half * half - inner(c, f, Nf)) < 1e-10 * half * half);
      CHECK(std::abs(fractional_norm(ops, f, 0.0) - l2_norm(c, f)) < 1e-10 * l2_norm(c, f));
      Eigen::VectorXd raw = f.array() + 0.7;
      auto r = apply_S(ops, apply_N(ops, raw));
      Eigen::VectorXd resid = r - raw;
      resid.array() -= resid.mean();
      CHECK(l2_norm(c, resid) <= 1e-9 * l2_norm(c, raw));
      CHECK((apply_N(ops, raw) - Nf).cwiseAbs().maxCoeff() < 1e-9 * Nf.cwiseAbs().maxCoeff());
      const double mfg = inner(c, apply_M(ops, f), g);
      const double fmg = inner(c, f, apply_M_adjoint(ops, g));
      CHECK(std::abs(mfg - fmg) < 1e-12 * (1 + std::abs(mfg)));
    }
  }
}

TEST_CASE("interpolation inequalities on random fields") {
  std::mt19937_64 rng(17);
  for (auto c : {curve::graph_to_curve(curve::PeriodicGraph::flat(2 * kPi, 64)), mode_curve(0.3, 2, 64),
                 multimode_curve(21, 0.4, 64)}) {
    auto ops = OperatorSet::assemble(c);
    for (int trial = 0; trial < 200; ++trial) {
      auto f = random_field(rng, c);
      const double m1 = fractional_norm(ops, f, -1.0), mh = fractional_norm(ops, f, -0.5);
      const double z = fractional_norm(ops, f, 0.0), h = fractional_norm(ops, f, 0.5);
      const double o = fractional_norm(ops, f, 1.0);
      const double tol = 1 + 1e-12;
      CHECK(h <= std::cbrt(mh) * std::pow(o, 2.0 / 3.0) * tol);
      CHECK(z <= std::pow(mh, 2.0 / 3.0) * std::cbrt(o) * tol);
      CHECK(mh <= std::pow(m1, 2.0 / 3.0) * std::cbrt(h) * tol);
      CHECK(h * h <= z * o * tol);
      CHECK(z * z <= mh * h * tol);
    }
  }
}

TEST_CASE("L-infinity interpolation for smooth periodic fields") {
  auto c = mode_curve(0.2, 1, 128);
  for (int k = 1; k <= 5; ++k) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(c.size()));
    for (std::size_t j = 0; j < c.size(); ++j)
      g(static_cast<Eigen::Index>(j)) = std::sin(2 * kPi * k * c.s[j] / c.arclength) + 0.3 * std::cos(2 * kPi * c.s[j] / c.arclength);
    const double linf = g.cwiseAbs().maxCoeff();
    CHECK(linf * linf <= 2 * l2_norm(c, g) * tangential_derivative_norm(c, g));
  }
}

TEST_CASE("K# is small and shrinks with amplitude") {
  double prev = 1e300;
  for (double a : {0.2, 0.1, 0.05, 0.025}) {
    auto ops = OperatorSet::assemble(mode_curve(a, 1, 128), {.spectrum = false});
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ops.ksharp());
    const double norm = svd.singularValues()(0);
    CHECK(norm < prev);
    CHECK(norm < a);
    prev = norm;
  }
}

TEST_CASE("K# diagonal carries the curvature limit") {
  auto c = mode_curve(0.1, 1, 128);
  auto ops = OperatorSet::assemble(c, {.spectrum = false});
  for (std::size_t j = 0; j < c.size(); j += 11) {
    const auto i = static_cast<Eigen::Index>(j);
    CHECK(ops.ksharp()(i, i) == doctest::Approx(c.w[j] * c.kappa[j] / (4 * kPi)));
    // Neighbouring entries approach the same limit per unit weight.
    const auto ip = (i + 1) % static_cast<Eigen::Index>(c.size());
    CHECK(std::abs(ops.ksharp()(i, ip) / c.w[j] - ops.ksharp()(i, i) / c.w[j]) < 1e-2);
  }
}

TEST_CASE("serial and parallel assembly agree") {
  auto c = multimode_curve(4, 0.3, 64);
  Eigen::MatrixXd a, b;
  kernels::single_layer(c, a, kernels::Exec::serial);
  kernels::single_layer(c, b, kernels::Exec::parallel);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-15);
  kernels::normal_gradient(c, a, kernels::Exec::serial);
  kernels::normal_gradient(c, b, kernels::Exec::parallel);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  auto radii = kernels::dyadic_radii(c);
  auto s1 = kernels::normal_oscillation(c, radii, kernels::Exec::serial);
  auto s2 = kernels::normal_oscillation(c, radii, kernels::Exec::parallel);
  CHECK(s1.per_radius == s2.per_radius);
  CHECK(s1.skipped == s2.skipped);
}

TEST_CASE("error signalling") {
  auto c = mode_curve(0.1, 1, 64);
  auto ops = OperatorSet::assemble(c);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(64);
  CHECK_THROWS_AS(apply_S(ops, one), NeutralityError);
  CHECK_THROWS_AS(apply_M(ops, one), NeutralityError);
  CHECK_THROWS_AS(fractional_norm(ops, one, -0.5), DomainError);
  CHECK_NOTHROW(fractional_norm(ops, one, 0.5));
  CHECK_THROWS_AS(fractional_norm(ops, one, 1.5), DomainError);
  CHECK_THROWS_AS(OperatorSet::assemble(curve::spiral_fixture(0.8, 1.0, 64)), FlatnessError);
  CHECK_THROWS_AS(OperatorSet::assemble(c, {.condition_limit = 1.0}), AssemblyError);
  auto no_spec = OperatorSet::assemble(c, {.spectrum = false});
  CHECK_THROWS_AS(no_spec.eigenvalues(), AssemblyError);
}

TEST_CASE("operator dump") {
  auto c = mode_curve(0.1, 1, 16);
  auto ops = OperatorSet::assemble(c);
  auto stem = (std::filesystem::temp_directory_path() / "mse_dump_test").string();
  dump(ops, stem);
  CHECK(std::filesystem::file_size(stem + ".bin") == 2 * 16 * 16 * sizeof(double));
  std::filesystem::remove(stem + ".bin");
  std::filesystem::remove(stem + ".json");
}
