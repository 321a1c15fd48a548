#pragma once

#include <Eigen/Dense>

#include <memory>
#include <numbers>
#include <string>

#include "mse/curve.hpp"
#include "mse/kernels.hpp"

namespace mse::potentials {

struct AssemblyOptions {
  bool spectrum = true;
  bool ksharp = true;
  double condition_limit = 1e12;
  double admissible_angle = std::numbers::pi / 2;
  kernels::Exec exec = kernels::Exec::parallel;
};

class OperatorSet {
 public:
  static OperatorSet assemble(const curve::SampledCurve& c, const AssemblyOptions& opt = {});

  const curve::SampledCurve& curve() const { return *curve_; }
  std::size_t size() const { return curve_->size(); }
  const Eigen::VectorXd& weights() const { return w_; }

  const Eigen::MatrixXd& single_layer() const { return S_; }
  bool has_ksharp() const { return K_.size() > 0; }
  // Matrix of K#; its negative is M.
  const Eigen::MatrixXd& ksharp() const;

  bool has_spectrum() const { return lambda_.size() > 0; }
  // Ascending eigenvalues of the symmetrized DtN map.
  const Eigen::VectorXd& eigenvalues() const;
  // Columns are eigenvectors, orthonormal in the weighted inner product.
  const Eigen::MatrixXd& eigenvectors() const;
  Eigen::Index zero_mode() const { return zero_mode_; }
  // Relative Frobenius size of the weighted-antisymmetric part of N.
  double asymmetry() const { return asymmetry_; }
  double condition_estimate() const { return condition_; }

  // Dense DtN matrix (before symmetrization).
  Eigen::MatrixXd dtn_matrix() const;
  Eigen::VectorXd solve_dtn(const Eigen::VectorXd& g) const;

 private:
  std::shared_ptr<const curve::SampledCurve> curve_;
  Eigen::VectorXd w_;
  Eigen::MatrixXd S_;
  Eigen::MatrixXd K_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd U_;
  Eigen::Index zero_mode_ = 0;
  double asymmetry_ = 0.0;
  double condition_ = 0.0;
};

double integral(const curve::SampledCurve& c, const Eigen::VectorXd& f);
double inner(const curve::SampledCurve& c, const Eigen::VectorXd& f, const Eigen::VectorXd& g);
double l2_norm(const curve::SampledCurve& c, const Eigen::VectorXd& f);
bool is_mean_zero(const curve::SampledCurve& c, const Eigen::VectorXd& f, double rel_tol = 1e-10);
Eigen::VectorXd remove_mean(const curve::SampledCurve& c, const Eigen::VectorXd& f);

Eigen::VectorXd apply_S(const OperatorSet& ops, const Eigen::VectorXd& f);
Eigen::VectorXd apply_N(const OperatorSet& ops, const Eigen::VectorXd& g);
Eigen::VectorXd apply_Ksharp(const OperatorSet& ops, const Eigen::VectorXd& f);
Eigen::VectorXd apply_M(const OperatorSet& ops, const Eigen::VectorXd& f);
// Adjoint of M in the weighted inner product.
Eigen::VectorXd apply_M_adjoint(const OperatorSet& ops, const Eigen::VectorXd& g);

double fractional_norm(const OperatorSet& ops, const Eigen::VectorXd& g, double s);

Eigen::VectorXd tangential_derivative(const curve::SampledCurve& c, const Eigen::VectorXd& g);
double tangential_derivative_norm(const curve::SampledCurve& c, const Eigen::VectorXd& g);

// Writes <stem>.bin (row-major doubles: S then K# if present) and <stem>.json.
void dump(const OperatorSet& ops, const std::string& stem);

}  // namespace mse::potentials
