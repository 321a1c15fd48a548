#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "mse/curve.hpp"

namespace mse::kernels {

enum class Exec { serial, parallel };

// Single-layer matrix with log-split product quadrature on uniform
// arc-length nodes.
void single_layer(const curve::SampledCurve& c, Eigen::MatrixXd& out, Exec exec);

// Matrix of f -> p.v. sum_j w_j nu(x_i).grad_x G_L(x_i - x_j) f_j with the
// curvature limit on the diagonal.
void normal_gradient(const curve::SampledCurve& c, Eigen::MatrixXd& out, Exec exec);

struct OscillationScan {
  // Largest oscillation per radius.
  std::vector<double> per_radius;
  std::vector<std::size_t> worst_node;
  std::size_t skipped = 0;
};

// L2 mean oscillation of the normal over Euclidean surface balls.
OscillationScan normal_oscillation(const curve::SampledCurve& c, const std::vector<double>& radii,
                                   Exec exec);

std::vector<double> dyadic_radii(const curve::SampledCurve& c);

// Kress weights R_k for the periodic log kernel on 2m points, index k = |i-j| mod n.
std::vector<double> kress_weights(std::size_t n);

}  // namespace mse::kernels
