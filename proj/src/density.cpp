#include "jumpepr/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "jumpepr/errors.hpp"

namespace jumpepr {

namespace {

// Discrete Gaussian kernel sampled at node offsets, truncated where the tail
// is below double round-off relative to the peak.
Eigen::ArrayXd gaussian_taps(double bandwidth, double spacing) {
  const int radius = static_cast<int>(std::ceil(8.5 * bandwidth / spacing));
  Eigen::ArrayXd taps(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) {
    const double u = k * spacing / bandwidth;
    taps[k + radius] = std::exp(-0.5 * u * u);
  }
  taps /= bandwidth * std::sqrt(2.0 * std::numbers::pi);
  return taps;
}

void convolve_axis0(Eigen::ArrayXd& v, const Grid& g, const Eigen::ArrayXd& taps, int axis) {
  const int radius = static_cast<int>(taps.size() / 2);
  const int nx = g.npts[0];
  const int ny = g.dim == 2 ? g.npts[1] : 1;
  Eigen::ArrayXd out(v.size());
  out.setZero();
  const double h = g.spacing(axis);
  if (axis == 0) {
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) {
        double s = 0.0;
        const int klo = std::max(-radius, -ix), khi = std::min(radius, nx - 1 - ix);
        for (int k = klo; k <= khi; ++k) s += taps[k + radius] * v[g.flat(ix + k, iy)];
        out[g.flat(ix, iy)] = s * h;
      }
  } else {
    for (int ix = 0; ix < nx; ++ix)
      for (int iy = 0; iy < ny; ++iy) {
        double s = 0.0;
        const int klo = std::max(-radius, -iy), khi = std::min(radius, ny - 1 - iy);
        for (int k = klo; k <= khi; ++k) s += taps[k + radius] * v[g.flat(ix, iy + k)];
        out[g.flat(ix, iy)] = s * h;
      }
  }
  v = out;
}

}  // namespace

DensityEstimate estimate_density(const std::vector<Eigen::VectorXd>& samples, const Grid& grid,
                                 std::optional<double> bandwidth) {
  const long n = static_cast<long>(samples.size());
  if (n < 100) throw ConfigError("estimate_density requires at least 100 samples");
  const int dim = grid.dim;
  for (const auto& s : samples)
    if (s.size() != dim) throw ConfigError("estimate_density: sample dimension mismatch");

  // Sorted copy: deterministic accumulation order regardless of input order.
  std::vector<Eigen::VectorXd> pts = samples;
  std::sort(pts.begin(), pts.end(), [dim](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (int d = 0; d < dim; ++d) {
      if (a[d] < b[d]) return true;
      if (a[d] > b[d]) return false;
    }
    return false;
  });

  Eigen::Index inside = 0;
  for (const auto& p : pts)
    if (grid.contains(p)) ++inside;
  if (inside == 0) throw NumericError("estimate_density: all samples outside the grid domain");

  Eigen::ArrayXd mean = Eigen::ArrayXd::Zero(dim), sq = Eigen::ArrayXd::Zero(dim);
  for (const auto& p : pts)
    for (int d = 0; d < dim; ++d) {
      mean[d] += p[d];
      sq[d] += p[d] * p[d];
    }
  mean /= double(n);
  Eigen::ArrayXd stddev(dim);
  for (int d = 0; d < dim; ++d) stddev[d] = std::sqrt(std::max(0.0, sq[d] / n - mean[d] * mean[d]));
  if (!bandwidth && stddev.minCoeff() <= 0.0)
    throw NumericError("estimate_density: zero-variance samples (degenerate sample set)");

  Eigen::ArrayXd bw(dim);
  for (int d = 0; d < dim; ++d)
    bw[d] = bandwidth ? *bandwidth : stddev[d] * std::pow(double(n), -0.2);
  if (!(bw.minCoeff() > 0.0)) throw ConfigError("estimate_density: bandwidth must be positive");

  // Linear binning of clipped samples, then exact-kernel convolution per axis.
  Eigen::ArrayXd counts = Eigen::ArrayXd::Zero(grid.num_nodes());
  Eigen::Index clipped = 0;
  auto deposit = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd q = p;
    bool was_out = false;
    for (int d = 0; d < dim; ++d) {
      const double lo = grid.lower[static_cast<size_t>(d)], hi = grid.upper[static_cast<size_t>(d)];
      if (q[d] < lo) {
        q[d] = lo;
        was_out = true;
      }
      if (q[d] > hi) {
        q[d] = hi;
        was_out = true;
      }
    }
    if (was_out) ++clipped;
    int i0;
    double fx;
    {
      const double s = (q[0] - grid.lower[0]) / grid.spacing(0);
      i0 = std::min(std::max(0, static_cast<int>(std::floor(s))), grid.npts[0] - 2);
      fx = std::min(1.0, std::max(0.0, s - i0));
    }
    if (dim == 1) {
      counts[i0] += 1.0 - fx;
      counts[i0 + 1] += fx;
      return;
    }
    int j0;
    double fy;
    {
      const double s = (q[1] - grid.lower[1]) / grid.spacing(1);
      j0 = std::min(std::max(0, static_cast<int>(std::floor(s))), grid.npts[1] - 2);
      fy = std::min(1.0, std::max(0.0, s - j0));
    }
    counts[grid.flat(i0, j0)] += (1.0 - fx) * (1.0 - fy);
    counts[grid.flat(i0, j0 + 1)] += (1.0 - fx) * fy;
    counts[grid.flat(i0 + 1, j0)] += fx * (1.0 - fy);
    counts[grid.flat(i0 + 1, j0 + 1)] += fx * fy;
  };
  for (const auto& p : pts) deposit(p);
  // nodal mass density of the binned empirical measure
  double cellvol = grid.spacing(0) * (dim == 2 ? grid.spacing(1) : 1.0);
  counts /= double(n) * cellvol;

  for (int d = 0; d < dim; ++d) {
    const Eigen::ArrayXd taps = gaussian_taps(bw[d], grid.spacing(d));
    convolve_axis0(counts, grid, taps, d);
  }

  DensityEstimate est;
  est.field = make_density(grid, counts, 0.0);
  est.clipped_samples = clipped;
  est.bandwidth = bw;
  return est;
}

DensityField stable_stationary_density(double alpha, const Grid& grid, double xi_max,
                                       int xi_nodes) {
  if (!(alpha > 0.0) || alpha > 2.0)
    throw ConfigError("stable_stationary_density requires alpha in (0, 2]");
  if (grid.dim != 1) throw ConfigError("stable_stationary_density is one-dimensional");
  if (xi_nodes < 16 || !(xi_max > 0.0)) throw ConfigError("invalid quadrature settings");
  const double tail = std::exp(-std::pow(xi_max, alpha) / alpha);
  if (tail >= 1e-12)
    throw ConfigError("xi_max too small: exp(-xi_max^alpha/alpha) must be below 1e-12");

  const double dxi = xi_max / (xi_nodes - 1);
  Eigen::ArrayXd envelope(xi_nodes), wq(xi_nodes);
  for (int k = 0; k < xi_nodes; ++k) {
    const double xi = k * dxi;
    envelope[k] = std::exp(-std::pow(xi, alpha) / alpha);
    wq[k] = (k == 0 || k == xi_nodes - 1) ? 0.5 * dxi : dxi;
  }

  const Eigen::ArrayXd xs = grid.axis_coords(0);
  Eigen::ArrayXd raw(xs.size());
  // evaluate on |x| and mirror, so symmetry is exact in floating point
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    const double x = std::abs(xs[i]);
    Eigen::Index mirror = -1;
    if (xs[i] > 0.0) {
      // look for the mirrored node (uniform symmetric grids hit this path)
      const double s = (-xs[i] - grid.lower[0]) / grid.spacing(0);
      const auto j = static_cast<Eigen::Index>(std::llround(s));
      if (j >= 0 && j < xs.size() && std::abs(xs[j] + xs[i]) < 1e-13) mirror = j;
    }
    if (mirror >= 0) {
      raw[i] = raw[mirror];
      continue;
    }
    double acc = 0.0;
    for (int k = 0; k < xi_nodes; ++k) acc += wq[k] * std::cos(x * k * dxi) * envelope[k];
    raw[i] = acc / std::numbers::pi;
  }
  const double min_raw = raw.minCoeff();
  if (min_raw < -1e-6)
    throw NumericError(
        "stable_stationary_density: quadrature produced values below -1e-6; increase xi_nodes");
  return make_density(grid, raw.max(0.0), 0.0);
}

GradientField log_density_gradient(const DensityField& field, double floor) {
  const Grid& g = field.grid;
  if (floor < 0.0) floor = density_floor(field.values);
  GradientField out;
  out.values.resize(g.num_nodes(), g.dim);
  Eigen::ArrayXd logr(g.num_nodes());
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i) {
    if (field.values[i] < floor) ++out.floored_nodes;
    logr[i] = std::log(std::max(field.values[i], floor));
  }
  for (int axis = 0; axis < g.dim; ++axis) {
    const int n = g.npts[static_cast<size_t>(axis)];
    const double h = g.spacing(axis);
    const int nx = g.npts[0], ny = g.dim == 2 ? g.npts[1] : 1;
    for (int ix = 0; ix < nx; ++ix)
      for (int iy = 0; iy < ny; ++iy) {
        const int idx = axis == 0 ? ix : iy;
        const Eigen::Index f = g.flat(ix, iy);
        auto at = [&](int shifted) {
          return axis == 0 ? logr[g.flat(shifted, iy)] : logr[g.flat(ix, shifted)];
        };
        double d;
        if (idx == 0)
          d = (at(1) - at(0)) / h;
        else if (idx == n - 1)
          d = (at(n - 1) - at(n - 2)) / h;
        else
          d = (at(idx + 1) - at(idx - 1)) / (2.0 * h);
        out.values(f, axis) = d;
      }
  }
  return out;
}

double sample_from_density_1d(const DensityField& field, std::mt19937_64& rng) {
  const Grid& g = field.grid;
  if (g.dim != 1) throw ConfigError("sample_from_density_1d requires a 1D field");
  const Eigen::Index n = g.num_nodes();
  const double h = g.spacing(0);
  // cell masses by trapezoid
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::ArrayXd cum(n);
  double acc = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    acc += 0.5 * h * (field.values[i] + field.values[i + 1]);
    cum[i] = acc;
  }
  cum[n - 1] = acc;
  const double u = unif(rng) * acc;
  Eigen::Index lo = 0, hi = n - 2;
  while (lo < hi) {
    const Eigen::Index mid = (lo + hi) / 2;
    if (cum[mid] < u)
      lo = mid + 1;
    else
      hi = mid;
  }
  const double prev = lo == 0 ? 0.0 : cum[lo - 1];
  const double frac = (u - prev) / std::max(cum[lo] - prev, 1e-300);
  return g.coord(0, static_cast<int>(lo)) + frac * h;
}

double density_cdf_1d(const DensityField& field, double x) {
  const Grid& g = field.grid;
  if (g.dim != 1) throw ConfigError("density_cdf_1d requires a 1D field");
  if (x <= g.lower[0]) return 0.0;
  if (x >= g.upper[0]) return 1.0;
  const double h = g.spacing(0);
  const double s = (x - g.lower[0]) / h;
  const auto cell = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(s)),
                                           g.num_nodes() - 2);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < cell; ++i) acc += 0.5 * h * (field.values[i] + field.values[i + 1]);
  const double frac = s - static_cast<double>(cell);
  const double va = field.values[cell];
  const double vb = field.values[cell + 1];
  const double vmid = va + frac * (vb - va);
  acc += 0.5 * frac * h * (va + vmid);
  return acc;
}

}  // namespace jumpepr
