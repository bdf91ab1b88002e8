#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "jumpepr/errors.hpp"

namespace jumpepr {

// Uniform rectangular grid in one or two dimensions. Node coordinates are
// exactly lower + i*spacing. Flattened indices are x-major (y contiguous).
struct Grid {
  int dim = 1;
  std::array<double, 2> lower{0.0, 0.0};
  std::array<double, 2> upper{1.0, 0.0};
  std::array<int, 2> npts{2, 1};

  static Grid line(double lo, double hi, int n);
  static Grid rectangle(double xlo, double xhi, int nx, double ylo, double yhi, int ny);

  double spacing(int axis) const {
    return (upper[static_cast<size_t>(axis)] - lower[static_cast<size_t>(axis)]) /
           static_cast<double>(npts[static_cast<size_t>(axis)] - 1);
  }
  Eigen::Index num_nodes() const {
    return static_cast<Eigen::Index>(npts[0]) * (dim == 2 ? npts[1] : 1);
  }
  Eigen::Index flat(int ix, int iy = 0) const {
    return static_cast<Eigen::Index>(ix) * (dim == 2 ? npts[1] : 1) + iy;
  }
  int ix_of(Eigen::Index f) const { return dim == 2 ? static_cast<int>(f / npts[1]) : static_cast<int>(f); }
  int iy_of(Eigen::Index f) const { return dim == 2 ? static_cast<int>(f % npts[1]) : 0; }
  double coord(int axis, int idx) const { return lower[static_cast<size_t>(axis)] + idx * spacing(axis); }

  Eigen::VectorXd node(Eigen::Index f) const;
  Eigen::ArrayXd axis_coords(int axis) const;
  // Product trapezoid weights over all nodes (h per axis, halved at edges).
  Eigen::ArrayXd trapezoid_weights() const;
  bool contains(const Eigen::VectorXd& x) const;
  // Multilinear interpolation of nodal values at x; x must lie in the box.
  double interpolate(const Eigen::ArrayXd& values, const Eigen::VectorXd& x) const;
  bool same_geometry(const Grid& o, double tol = 1e-12) const;
};

double trapezoid_integral(const Grid& g, const Eigen::ArrayXd& f);

// All node coordinates, cached once so pair loops avoid per-call allocation.
std::vector<Eigen::VectorXd> all_nodes(const Grid& g);

// Nodal values of a probability density on a grid, the discrete rho(t, .).
struct DensityField {
  Grid grid;
  Eigen::ArrayXd values;
  double time = 0.0;

  double mass() const { return trapezoid_integral(grid, values); }
  // Clamps negative round-off at zero and rescales to unit trapezoid mass.
  void renormalize();
};

DensityField make_density(const Grid& g, const Eigen::ArrayXd& values, double time = 0.0);

// Density evaluated from a pointwise function, renormalized on the grid.
template <class F>
DensityField density_from_function(const Grid& g, F&& f, double time = 0.0) {
  Eigen::ArrayXd v(g.num_nodes());
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i) v[i] = f(g.node(i));
  return make_density(g, v, time);
}

}  // namespace jumpepr
