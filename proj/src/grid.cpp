#include "jumpepr/grid.hpp"

#include <cmath>

namespace jumpepr {

Grid Grid::line(double lo, double hi, int n) {
  if (!(lo < hi) || n < 2) throw ConfigError("Grid::line requires lo < hi and n >= 2");
  Grid g;
  g.dim = 1;
  g.lower = {lo, 0.0};
  g.upper = {hi, 0.0};
  g.npts = {n, 1};
  return g;
}

Grid Grid::rectangle(double xlo, double xhi, int nx, double ylo, double yhi, int ny) {
  if (!(xlo < xhi) || !(ylo < yhi) || nx < 2 || ny < 2)
    throw ConfigError("Grid::rectangle requires lo < hi and n >= 2 per axis");
  Grid g;
  g.dim = 2;
  g.lower = {xlo, ylo};
  g.upper = {xhi, yhi};
  g.npts = {nx, ny};
  return g;
}

Eigen::VectorXd Grid::node(Eigen::Index f) const {
  Eigen::VectorXd x(dim);
  x[0] = coord(0, ix_of(f));
  if (dim == 2) x[1] = coord(1, iy_of(f));
  return x;
}

Eigen::ArrayXd Grid::axis_coords(int axis) const {
  const int n = npts[static_cast<size_t>(axis)];
  Eigen::ArrayXd c(n);
  for (int i = 0; i < n; ++i) c[i] = coord(axis, i);
  return c;
}

Eigen::ArrayXd Grid::trapezoid_weights() const {
  const Eigen::Index n = num_nodes();
  Eigen::ArrayXd w(n);
  const double hx = spacing(0);
  if (dim == 1) {
    w.setConstant(hx);
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    return w;
  }
  const double hy = spacing(1);
  for (Eigen::Index f = 0; f < n; ++f) {
    const int ix = ix_of(f), iy = iy_of(f);
    double wx = (ix == 0 || ix == npts[0] - 1) ? 0.5 * hx : hx;
    double wy = (iy == 0 || iy == npts[1] - 1) ? 0.5 * hy : hy;
    w[f] = wx * wy;
  }
  return w;
}

bool Grid::contains(const Eigen::VectorXd& x) const {
  for (int a = 0; a < dim; ++a)
    if (x[a] < lower[static_cast<size_t>(a)] || x[a] > upper[static_cast<size_t>(a)]) return false;
  return true;
}

double Grid::interpolate(const Eigen::ArrayXd& values, const Eigen::VectorXd& x) const {
  if (!contains(x)) throw NumericError("interpolation point outside grid domain");
  auto locate = [&](int axis, double v, int& idx, double& frac) {
    const double h = spacing(axis);
    double s = (v - lower[static_cast<size_t>(axis)]) / h;
    idx = static_cast<int>(std::floor(s));
    const int nmax = npts[static_cast<size_t>(axis)] - 2;
    if (idx < 0) idx = 0;
    if (idx > nmax) idx = nmax;
    frac = s - idx;
    if (frac < 0.0) frac = 0.0;
    if (frac > 1.0) frac = 1.0;
  };
  int i0;
  double fx;
  locate(0, x[0], i0, fx);
  if (dim == 1) {
    return (1.0 - fx) * values[i0] + fx * values[i0 + 1];
  }
  int j0;
  double fy;
  locate(1, x[1], j0, fy);
  const double v00 = values[flat(i0, j0)], v01 = values[flat(i0, j0 + 1)];
  const double v10 = values[flat(i0 + 1, j0)], v11 = values[flat(i0 + 1, j0 + 1)];
  return (1.0 - fx) * ((1.0 - fy) * v00 + fy * v01) + fx * ((1.0 - fy) * v10 + fy * v11);
}

bool Grid::same_geometry(const Grid& o, double tol) const {
  if (dim != o.dim) return false;
  for (int a = 0; a < dim; ++a) {
    if (npts[static_cast<size_t>(a)] != o.npts[static_cast<size_t>(a)]) return false;
    if (std::abs(lower[static_cast<size_t>(a)] - o.lower[static_cast<size_t>(a)]) > tol) return false;
    if (std::abs(upper[static_cast<size_t>(a)] - o.upper[static_cast<size_t>(a)]) > tol) return false;
  }
  return true;
}

std::vector<Eigen::VectorXd> all_nodes(const Grid& g) {
  std::vector<Eigen::VectorXd> nodes(static_cast<size_t>(g.num_nodes()));
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i) nodes[static_cast<size_t>(i)] = g.node(i);
  return nodes;
}

double trapezoid_integral(const Grid& g, const Eigen::ArrayXd& f) {
  if (f.size() != g.num_nodes()) throw ConfigError("trapezoid_integral: size mismatch");
  return (g.trapezoid_weights() * f).sum();
}

void DensityField::renormalize() {
  values = values.max(0.0);
  const double m = mass();
  if (!(m > 0.0) || !std::isfinite(m)) throw NumericError("density has nonpositive or non-finite mass");
  values /= m;
}

DensityField make_density(const Grid& g, const Eigen::ArrayXd& values, double time) {
  DensityField f;
  f.grid = g;
  f.values = values;
  f.time = time;
  f.renormalize();
  return f;
}

}  // namespace jumpepr
