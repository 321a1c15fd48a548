#include "mse/potentials.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mse/errors.hpp"
#include "mse/io.hpp"
#include "mse/spectral.hpp"

namespace mse::potentials {

namespace {

Eigen::VectorXd weights_of(const curve::SampledCurve& c) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(c.size()));
  for (std::size_t j = 0; j < c.size(); ++j) w(static_cast<Eigen::Index>(j)) = c.w[j];
  return w;
}

void require_mean_zero(const curve::SampledCurve& c, const Eigen::VectorXd& f, const char* what) {
  if (!is_mean_zero(c, f)) {
    std::ostringstream os;
    os << what << ": density has nonzero mean " << integral(c, f);
    throw NeutralityError(os.str());
  }
}

}  // namespace

OperatorSet OperatorSet::assemble(const curve::SampledCurve& c, const AssemblyOptions& opt) {
  if (!(c.b_sup() < opt.admissible_angle)) {
    std::ostringstream os;
    os << "curve not admissible: |b|_inf = " << c.b_sup() << " >= " << opt.admissible_angle;
    throw FlatnessError(os.str());
  }
  OperatorSet ops;
  ops.curve_ = std::make_shared<const curve::SampledCurve>(c);
  ops.w_ = weights_of(c);
  kernels::single_layer(c, ops.S_, opt.exec);
  if (opt.ksharp) kernels::normal_gradient(c, ops.K_, opt.exec);

  const Eigen::Index n = ops.S_.rows();
  const double wbar = ops.w_.mean();
  Eigen::MatrixXd bordered = Eigen::MatrixXd::Zero(n + 1, n + 1);
  bordered.topLeftCorner(n, n) = ops.S_;
  bordered.topRightCorner(n, 1).setConstant(-1.0);
  bordered.bottomLeftCorner(1, n) = (ops.w_ / wbar).transpose();
  ops.lu_.compute(bordered);
  const double rcond = ops.lu_.rcond();
  ops.condition_ = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(ops.condition_ <= opt.condition_limit)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (ops.S_ + ops.S_.transpose()), Eigen::EigenvaluesOnly);
    std::ostringstream os;
    os << "single layer ill-conditioned (condition " << ops.condition_ << "), smallest eigenvalue "
       << es.eigenvalues().cwiseAbs().minCoeff();
    throw AssemblyError(os.str());
  }

  if (opt.spectrum) {
    const Eigen::MatrixXd A = ops.dtn_matrix();
    const Eigen::VectorXd winv = ops.w_.cwiseInverse();
    const Eigen::MatrixXd Asym = 0.5 * (A + winv.asDiagonal() * A.transpose() * ops.w_.asDiagonal());
    ops.asymmetry_ = (A - Asym).norm() / std::max(A.norm(), 1e-300);
    const Eigen::VectorXd sq = ops.w_.cwiseSqrt();
    const Eigen::VectorXd isq = sq.cwiseInverse();
    Eigen::MatrixXd B = sq.asDiagonal() * Asym * isq.asDiagonal();
    B = 0.5 * (B + B.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
    if (es.info() != Eigen::Success) throw AssemblyError("DtN eigendecomposition failed");
    ops.lambda_ = es.eigenvalues();
    ops.U_ = isq.asDiagonal() * es.eigenvectors();
    const double top = ops.lambda_.cwiseAbs().maxCoeff();
    Eigen::Index zeros = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (ops.lambda_(i) < -1e-8 * top) {
        std::ostringstream os;
        os << "DtN map has negative eigenvalue " << ops.lambda_(i);
        throw AssemblyError(os.str());
      }
      if (std::abs(ops.lambda_(i)) <= 1e-8 * top) ++zeros;
    }
    if (zeros != 1) {
      std::ostringstream os;
      os << "DtN map has " << zeros << " numerically zero eigenvalues, expected 1";
      throw AssemblyError(os.str());
    }
    ops.lambda_.cwiseAbs().minCoeff(&ops.zero_mode_);
  }
  return ops;
}

const Eigen::MatrixXd& OperatorSet::ksharp() const {
  if (!has_ksharp()) throw AssemblyError("K# was not assembled");
  return K_;
}

const Eigen::VectorXd& OperatorSet::eigenvalues() const {
  if (!has_spectrum()) throw AssemblyError("spectrum was not computed");
  return lambda_;
}

const Eigen::MatrixXd& OperatorSet::eigenvectors() const {
  if (!has_spectrum()) throw AssemblyError("spectrum was not computed");
  return U_;
}

Eigen::MatrixXd OperatorSet::dtn_matrix() const {
  const Eigen::Index n = S_.rows();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 1, n);
  rhs.topRows(n).setIdentity();
  return lu_.solve(rhs).topRows(n);
}

Eigen::VectorXd OperatorSet::solve_dtn(const Eigen::VectorXd& g) const {
  const Eigen::Index n = S_.rows();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs.head(n) = g;
  return lu_.solve(rhs).head(n);
}

double integral(const curve::SampledCurve& c, const Eigen::VectorXd& f) {
  double acc = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) acc += c.w[j] * f(static_cast<Eigen::Index>(j));
  return acc;
}

double inner(const curve::SampledCurve& c, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  double acc = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    acc += c.w[j] * f(i) * g(i);
  }
  return acc;
}

double l2_norm(const curve::SampledCurve& c, const Eigen::VectorXd& f) { return std::sqrt(inner(c, f, f)); }

bool is_mean_zero(const curve::SampledCurve& c, const Eigen::VectorXd& f, double rel_tol) {
  double scale = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) scale += c.w[j] * std::abs(f(static_cast<Eigen::Index>(j)));
  return std::abs(integral(c, f)) <= rel_tol * scale;
}

Eigen::VectorXd remove_mean(const curve::SampledCurve& c, const Eigen::VectorXd& f) {
  double total = 0.0;
  for (double w : c.w) total += w;
  return f.array() - integral(c, f) / total;
}

Eigen::VectorXd apply_S(const OperatorSet& ops, const Eigen::VectorXd& f) {
  require_mean_zero(ops.curve(), f, "apply_S");
  return ops.single_layer() * f;
}

Eigen::VectorXd apply_N(const OperatorSet& ops, const Eigen::VectorXd& g) { return ops.solve_dtn(g); }

Eigen::VectorXd apply_Ksharp(const OperatorSet& ops, const Eigen::VectorXd& f) {
  require_mean_zero(ops.curve(), f, "apply_Ksharp");
  return ops.ksharp() * f;
}

Eigen::VectorXd apply_M(const OperatorSet& ops, const Eigen::VectorXd& f) {
  require_mean_zero(ops.curve(), f, "apply_M");
  return -(ops.ksharp() * f);
}

Eigen::VectorXd apply_M_adjoint(const OperatorSet& ops, const Eigen::VectorXd& g) {
  const Eigen::VectorXd& w = ops.weights();
  return -(w.cwiseInverse().asDiagonal() * (ops.ksharp().transpose() * (w.asDiagonal() * g)));
}

double fractional_norm(const OperatorSet& ops, const Eigen::VectorXd& g, double s) {
  if (!(s >= -1.0 && s <= 1.0)) throw DomainError("fractional order must lie in [-1, 1]");
  if (s < 0.0 && !is_mean_zero(ops.curve(), g)) throw DomainError("negative-order norm needs a mean-zero field");
  const Eigen::MatrixXd& U = ops.eigenvectors();
  const Eigen::VectorXd& lam = ops.eigenvalues();
  const Eigen::VectorXd coeff = U.transpose() * (ops.weights().asDiagonal() * g);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (i == ops.zero_mode()) continue;
    acc += std::pow(lam(i), 2.0 * s) * coeff(i) * coeff(i);
  }
  return std::sqrt(acc);
}

Eigen::VectorXd tangential_derivative(const curve::SampledCurve& c, const Eigen::VectorXd& g) {
  if (!c.periodic) throw DomainError("tangential derivative needs a periodic curve");
  std::vector<double> v(g.data(), g.data() + g.size());
  auto d = spectral::derivative(v, c.arclength, 1);
  return Eigen::Map<Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
}

double tangential_derivative_norm(const curve::SampledCurve& c, const Eigen::VectorXd& g) {
  return l2_norm(c, tangential_derivative(c, g));
}

void dump(const OperatorSet& ops, const std::string& stem) {
  const Eigen::Index n = static_cast<Eigen::Index>(ops.size());
  std::ofstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw Error("cannot write " + stem + ".bin");
  auto write_rows = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = m(i, j);
        bin.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
  };
  write_rows(ops.single_layer());
  std::vector<std::string> blocks{"S"};
  if (ops.has_ksharp()) {
    write_rows(ops.ksharp());
    blocks.push_back("Ksharp");
  }
  nlohmann::json side;
  side["rows"] = n;
  side["cols"] = n;
  side["dtype"] = "float64";
  side["order"] = "row-major";
  side["blocks"] = blocks;
  side["curve_hash"] = io::hex64(io::curve_hash(ops.curve()));
  io::write_file(stem + ".json", side.dump(2) + "\n");
}

}  // namespace mse::potentials
