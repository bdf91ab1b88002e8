#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <vector>

#include "jumpepr/grid.hpp"

namespace jumpepr {

inline double density_floor(const Eigen::ArrayXd& values) { return 1e-12 * values.maxCoeff(); }

struct DensityEstimate {
  DensityField field;
  Eigen::Index clipped_samples = 0;  // outliers clipped to the box
  Eigen::ArrayXd bandwidth;          // per axis
};

// Gaussian-kernel density estimate on grid nodes, renormalized to unit
// trapezoid mass. Bandwidth defaults to Silverman's n^{-1/5} * std per axis.
// Samples are sorted before binning so the output is bit-identical under
// permutations of the sample list.
DensityEstimate estimate_density(const std::vector<Eigen::VectorXd>& samples, const Grid& grid,
                                 std::optional<double> bandwidth = std::nullopt);

// Stationary density of the linear alpha-stable system by cosine-transform
// quadrature: rho(x) = (1/pi) * int_0^inf cos(x xi) exp(-xi^alpha/alpha) dxi.
DensityField stable_stationary_density(double alpha, const Grid& grid, double xi_max,
                                       int xi_nodes);

struct GradientField {
  Eigen::MatrixXd values;  // num_nodes x dim
  Eigen::Index floored_nodes = 0;
};

// Central differences of log(max(rho, floor)); one-sided at boundary nodes.
// floor < 0 selects the default 1e-12 * max(rho).
GradientField log_density_gradient(const DensityField& field, double floor = -1.0);

// Inverse-CDF sampling of a 1D grid density (linear within cells).
double sample_from_density_1d(const DensityField& field, std::mt19937_64& rng);

// Cumulative distribution of a 1D density at x by trapezoid quadrature.
double density_cdf_1d(const DensityField& field, double x);

}  // namespace jumpepr
