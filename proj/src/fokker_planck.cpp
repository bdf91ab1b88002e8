#include "jumpepr/fokker_planck.hpp"

#include <cmath>
#include <cstdio>

#include "jumpepr/density.hpp"

namespace jumpepr {

namespace {

// Central-difference gradient of nodal values, one-sided at boundaries.
Eigen::MatrixXd node_gradient(const Grid& g, const Eigen::ArrayXd& v) {
  Eigen::MatrixXd out(g.num_nodes(), g.dim);
  const int nx = g.npts[0], ny = g.dim == 2 ? g.npts[1] : 1;
  for (int axis = 0; axis < g.dim; ++axis) {
    const double h = g.spacing(axis);
    const int n = g.npts[static_cast<size_t>(axis)];
    for (int ix = 0; ix < nx; ++ix)
      for (int iy = 0; iy < ny; ++iy) {
        const int idx = axis == 0 ? ix : iy;
        auto at = [&](int s) { return axis == 0 ? v[g.flat(s, iy)] : v[g.flat(ix, s)]; };
        double d;
        if (idx == 0)
          d = (at(1) - at(0)) / h;
        else if (idx == n - 1)
          d = (at(n - 1) - at(n - 2)) / h;
        else
          d = (at(idx + 1) - at(idx - 1)) / (2.0 * h);
        out(g.flat(ix, iy), axis) = d;
      }
  }
  return out;
}

// Second difference along the single axis of a 1D grid; zero at the edges.
Eigen::ArrayXd second_difference_1d(const Grid& g, const Eigen::ArrayXd& v) {
  const Eigen::Index n = g.num_nodes();
  const double h2 = g.spacing(0) * g.spacing(0);
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(n);
  for (Eigen::Index i = 1; i + 1 < n; ++i) out[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
  return out;
}

bool is_zero_diffusion(const ProcessSpec& spec) {
  return spec.zero_diffusion || !spec.diffusion_factor;
}

}  // namespace

double pair_weight_1d(const Grid& g, Eigen::Index i, Eigen::Index j, int band_cells) {
  const Eigen::Index d = std::abs(j - i);
  if (d < band_cells) return 0.0;
  double w = g.spacing(0);
  if (d == band_cells) w *= 0.5;
  if (j == 0 || j == g.num_nodes() - 1) w *= 0.5;
  return w;
}

double band_taylor_coefficient(const JumpKernel& kernel, const Grid& g, int band_cells) {
  if (!kernel.singularity_order) return 0.0;
  if (g.dim != 1) throw ConfigError("singular kernels are supported on 1D grids only");
  const double alpha = *kernel.singularity_order - 1.0;
  if (!(alpha > 0.0) || !(alpha < 2.0))
    throw ConfigError("band correction requires singularity order in (1, 3)");
  const double delta = band_cells * g.spacing(0);
  return kernel.singular_coefficient * std::pow(delta, 2.0 - alpha) / (2.0 - alpha);
}

Eigen::MatrixXd local_current(const ProcessSpec& spec, const DensityField& field) {
  const Grid& g = field.grid;
  const Eigen::Index n = g.num_nodes();
  Eigen::MatrixXd j(n, g.dim);
  const Eigen::MatrixXd grad = node_gradient(g, field.values);
  for (Eigen::Index i = 0; i < n; ++i) {
    const State x = g.node(i);
    const State b = spec.drift ? spec.drift(x) : State::Zero(g.dim);
    State val = b * field.values[i];
    if (!is_zero_diffusion(spec)) {
      const Eigen::MatrixXd A = spec.diffusion_matrix(x);
      val -= (A * grad.row(i).transpose()) / spec.beta;
    }
    j.row(i) = val.transpose();
  }
  return j;
}

NonlocalCurrent nonlocal_current(const JumpKernel& kernel, const DensityField& field,
                                 BandScheme band, const Eigen::MatrixXd* kernel_table) {
  const Grid& g = field.grid;
  const Eigen::Index n = g.num_nodes();
  if (n > 4096)
    throw ConfigError("nonlocal_current: grid too large for a dense pair matrix; use the "
                      "streaming reductions instead");
  NonlocalCurrent out;
  out.values.setZero(n, n);
  const double delta = band.band_cells * g.spacing(0);
  const std::vector<State> nodes = all_nodes(g);
  for (Eigen::Index i = 0; i < n; ++i) {
    const State& xi = nodes[static_cast<size_t>(i)];
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const State& xj = nodes[static_cast<size_t>(j)];
      if (g.dim == 1 ? (j - i < band.band_cells) : ((xi - xj).norm() < delta)) {
        ++out.excluded_pairs;
        continue;
      }
      const double kxy = kernel_table ? (*kernel_table)(i, j) : kernel.rate(xi, xj);
      const double kyx = kernel_table ? (*kernel_table)(j, i) : kernel.rate(xj, xi);
      const double v = field.values[i] * kxy - field.values[j] * kyx;
      if (!std::isfinite(v))
        throw NumericError("nonlocal_current: kernel singularity off the excluded band; "
                           "increase delta_diag");
      out.values(i, j) = v;
      out.values(j, i) = -v;
    }
  }
  return out;
}

CurrentField compute_currents(const ProcessSpec& spec, const JumpKernel* kernel,
                              const DensityField& field, BandScheme band,
                              const Eigen::MatrixXd* kernel_table) {
  CurrentField c;
  c.local = local_current(spec, field);
  if (kernel) c.nonlocal = nonlocal_current(*kernel, field, band, kernel_table);
  return c;
}

Eigen::MatrixXd kernel_value_table(const JumpKernel& kernel, const Grid& g) {
  const Eigen::Index n = g.num_nodes();
  if (n > 4096) throw ConfigError("kernel_value_table: grid too large for a dense table");
  Eigen::MatrixXd K(n, n);
  K.setZero();
  const std::vector<State> nodes = all_nodes(g);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) K(i, j) = kernel.rate(nodes[static_cast<size_t>(i)], nodes[static_cast<size_t>(j)]);
  return K;
}

Eigen::ArrayXd nonlocal_gain_loss(const JumpKernel& kernel, const Grid& g,
                                  const Eigen::ArrayXd& rho, BandScheme band) {
  const Eigen::Index n = g.num_nodes();
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(n);
  const std::vector<State> nodes = all_nodes(g);
  if (g.dim == 1) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const State& xi = nodes[static_cast<size_t>(i)];
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = pair_weight_1d(g, i, j, band.band_cells);
        if (w == 0.0) continue;
        const State& xj = nodes[static_cast<size_t>(j)];
        acc += w * (kernel.rate(xj, xi) * rho[j] - kernel.rate(xi, xj) * rho[i]);
      }
      out[i] = acc;
    }
    const double ct = band_taylor_coefficient(kernel, g, band.band_cells);
    if (ct != 0.0) out += ct * second_difference_1d(g, rho);
    return out;
  }
  const Eigen::ArrayXd w = g.trapezoid_weights();
  for (Eigen::Index i = 0; i < n; ++i) {
    const State& xi = nodes[static_cast<size_t>(i)];
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const State& xj = nodes[static_cast<size_t>(j)];
      acc += w[j] * (kernel.rate(xj, xi) * rho[j] - kernel.rate(xi, xj) * rho[i]);
    }
    out[i] = acc;
  }
  return out;
}

Eigen::ArrayXd local_adjoint(const ProcessSpec& spec, const Grid& g, const Eigen::ArrayXd& rho) {
  const Eigen::Index n = g.num_nodes();
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(n);
  if (is_zero_diffusion(spec) && !spec.drift) return out;
  const Eigen::MatrixXd grad = node_gradient(g, rho);
  const int nx = g.npts[0], ny = g.dim == 2 ? g.npts[1] : 1;
  const bool diffusive = !is_zero_diffusion(spec);
  // face flux G_d = -b_d rho + beta^{-1} (A grad rho)_d; L* rho = div G
  for (int axis = 0; axis < g.dim; ++axis) {
    const double h = g.spacing(axis);
    const int nfaces = g.npts[static_cast<size_t>(axis)] - 1;
    for (int ix = 0; ix < (axis == 0 ? 1 : nx); ++ix)
      for (int iy = 0; iy < (axis == 0 ? ny : 1); ++iy)
        for (int f = 0; f < nfaces; ++f) {
          // nodes on either side of the face along this axis
          Eigen::Index ia, ib;
          State xm(g.dim);
          if (axis == 0) {
            ia = g.flat(f, iy);
            ib = g.flat(f + 1, iy);
            xm[0] = 0.5 * (g.coord(0, f) + g.coord(0, f + 1));
            if (g.dim == 2) xm[1] = g.coord(1, iy);
          } else {
            ia = g.flat(ix, f);
            ib = g.flat(ix, f + 1);
            xm[0] = g.coord(0, ix);
            xm[1] = 0.5 * (g.coord(1, f) + g.coord(1, f + 1));
          }
          const double rho_face = 0.5 * (rho[ia] + rho[ib]);
          const State b = spec.drift ? spec.drift(xm) : State::Zero(g.dim);
          double G = -b[axis] * rho_face;
          if (diffusive) {
            const Eigen::MatrixXd A = spec.diffusion_matrix(xm);
            // normal derivative across the face plus averaged cross terms
            State gr(g.dim);
            gr[axis] = (rho[ib] - rho[ia]) / h;
            for (int e = 0; e < g.dim; ++e)
              if (e != axis) gr[e] = 0.5 * (grad(ia, e) + grad(ib, e));
            G += (A.row(axis) * gr).value() / spec.beta;
          }
          // divergence: the face is the right face of ia and the left face of ib
          out[ia] += G / h;
          out[ib] -= G / h;
        }
  }
  return out;
}

Eigen::ArrayXd apply_generator(const ProcessSpec& spec, const JumpKernel* kernel, const Grid& g,
                               const Eigen::ArrayXd& f, BandScheme band) {
  const Eigen::Index n = g.num_nodes();
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(n);
  const Eigen::MatrixXd grad = node_gradient(g, f);
  const bool diffusive = !is_zero_diffusion(spec);
  for (Eigen::Index i = 0; i < n; ++i) {
    const State x = g.node(i);
    if (spec.drift) out[i] += spec.drift(x).dot(grad.row(i).transpose());
  }
  if (diffusive) {
    // conservative face form of div(A grad f)
    const int nx = g.npts[0], ny = g.dim == 2 ? g.npts[1] : 1;
    for (int axis = 0; axis < g.dim; ++axis) {
      const double h = g.spacing(axis);
      const int nfaces = g.npts[static_cast<size_t>(axis)] - 1;
      for (int ix = 0; ix < (axis == 0 ? 1 : nx); ++ix)
        for (int iy = 0; iy < (axis == 0 ? ny : 1); ++iy)
          for (int fc = 0; fc < nfaces; ++fc) {
            Eigen::Index ia, ib;
            State xm(g.dim);
            if (axis == 0) {
              ia = g.flat(fc, iy);
              ib = g.flat(fc + 1, iy);
              xm[0] = 0.5 * (g.coord(0, fc) + g.coord(0, fc + 1));
              if (g.dim == 2) xm[1] = g.coord(1, iy);
            } else {
              ia = g.flat(ix, fc);
              ib = g.flat(ix, fc + 1);
              xm[0] = g.coord(0, ix);
              xm[1] = 0.5 * (g.coord(1, fc) + g.coord(1, fc + 1));
            }
            const Eigen::MatrixXd A = spec.diffusion_matrix(xm);
            State gr(g.dim);
            gr[axis] = (f[ib] - f[ia]) / h;
            for (int e = 0; e < g.dim; ++e)
              if (e != axis) gr[e] = 0.5 * (grad(ia, e) + grad(ib, e));
            const double H = (A.row(axis) * gr).value() / spec.beta;
            out[ia] += H / h;
            out[ib] -= H / h;
          }
    }
  }
  if (kernel) {
    const std::vector<State> nodes = all_nodes(g);
    if (g.dim == 1) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const State& xi = nodes[static_cast<size_t>(i)];
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          const double w = pair_weight_1d(g, i, j, band.band_cells);
          if (w == 0.0) continue;
          acc += w * kernel->rate(xi, nodes[static_cast<size_t>(j)]) * (f[j] - f[i]);
        }
        out[i] += acc;
      }
      const double ct = band_taylor_coefficient(*kernel, g, band.band_cells);
      if (ct != 0.0) out += ct * second_difference_1d(g, f);
    } else {
      const Eigen::ArrayXd w = g.trapezoid_weights();
      for (Eigen::Index i = 0; i < n; ++i) {
        const State& xi = nodes[static_cast<size_t>(i)];
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i) continue;
          acc += w[j] * kernel->rate(xi, nodes[static_cast<size_t>(j)]) * (f[j] - f[i]);
        }
        out[i] += acc;
      }
    }
  }
  return out;
}

Eigen::ArrayXd total_jump_rate(const JumpKernel& kernel, const Grid& g, BandScheme band) {
  const Eigen::Index n = g.num_nodes();
  Eigen::ArrayXd rate = Eigen::ArrayXd::Zero(n);
  const std::vector<State> nodes = all_nodes(g);
  if (g.dim == 1) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const State& xi = nodes[static_cast<size_t>(i)];
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = pair_weight_1d(g, i, j, band.band_cells);
        if (w != 0.0) acc += w * kernel.rate(xi, nodes[static_cast<size_t>(j)]);
      }
      rate[i] = acc;
    }
    return rate;
  }
  const Eigen::ArrayXd w = g.trapezoid_weights();
  for (Eigen::Index i = 0; i < n; ++i) {
    const State& xi = nodes[static_cast<size_t>(i)];
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) acc += w[j] * kernel.rate(xi, nodes[static_cast<size_t>(j)]);
    rate[i] = acc;
  }
  return rate;
}

double fpe_stability_bound(const ProcessSpec& spec, const JumpKernel* kernel, const Grid& g,
                           BandScheme band) {
  double bound = std::numeric_limits<double>::infinity();
  if (!is_zero_diffusion(spec)) {
    double maxA = 0.0;
    for (Eigen::Index i = 0; i < g.num_nodes(); ++i) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.diffusion_matrix(g.node(i)));
      maxA = std::max(maxA, es.eigenvalues().maxCoeff());
    }
    if (maxA > 0.0) {
      double hmin = g.spacing(0);
      if (g.dim == 2) hmin = std::min(hmin, g.spacing(1));
      bound = std::min(bound, hmin * hmin * spec.beta / (2.0 * maxA));
    }
  }
  if (kernel) {
    const double rmax = total_jump_rate(*kernel, g, band).maxCoeff();
    if (rmax > 0.0) bound = std::min(bound, 1.0 / rmax);
  }
  return 0.4 * bound;
}

FpeSolution solve_fpe(const ProcessSpec& spec, const JumpKernel* kernel, const DensityField& rho0,
                      double t_final, double dt, FpeOptions options) {
  if (!(dt > 0.0) || !(t_final > 0.0)) throw ConfigError("solve_fpe: dt and t_final must be positive");
  const Grid& g = rho0.grid;
  const Eigen::Index n = g.num_nodes();
  const double bound = fpe_stability_bound(spec, kernel, g, options.band);
  if (dt > bound) {
    char m[160];
    std::snprintf(m, sizeof(m), "solve_fpe: dt = %g above the stability bound %g", dt, bound);
    throw ConfigError(m);
  }
  const long steps = std::lround(t_final / dt);
  if (std::abs(steps * dt - t_final) > 1e-9 * std::max(1.0, t_final))
    throw ConfigError("solve_fpe: t_final must be an integer multiple of dt");

  // Precompute the dense gain matrix and the loss rate; the nonlocal update is
  // then one matrix-vector product per step.
  Eigen::MatrixXd gain;
  Eigen::ArrayXd loss_rate;
  double ct = 0.0;
  const bool jumps = kernel != nullptr;
  if (jumps) {
    if (n > 8192) throw ConfigError("solve_fpe: nonlocal solve limited to grids of <= 8192 nodes");
    gain.setZero(n, n);
    loss_rate = total_jump_rate(*kernel, g, options.band);
    const std::vector<State> nodes = all_nodes(g);
    if (g.dim == 1) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double w = pair_weight_1d(g, i, j, options.band.band_cells);
          if (w != 0.0)
            gain(i, j) = w * kernel->rate(nodes[static_cast<size_t>(j)], nodes[static_cast<size_t>(i)]);
        }
      ct = band_taylor_coefficient(*kernel, g, options.band.band_cells);
    } else {
      const Eigen::ArrayXd w = g.trapezoid_weights();
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          if (j != i)
            gain(i, j) = w[j] * kernel->rate(nodes[static_cast<size_t>(j)], nodes[static_cast<size_t>(i)]);
    }
  }

  FpeSolution sol;
  sol.stability_bound = bound;
  sol.steps = steps;
  Eigen::ArrayXd rho = rho0.values;
  DensityField snap = rho0;
  snap.time = 0.0;
  sol.snapshots.push_back(snap);
  Eigen::VectorXd gain_vec;
  for (long s = 1; s <= steps; ++s) {
    Eigen::ArrayXd rhs = local_adjoint(spec, g, rho);
    if (jumps) {
      gain_vec.noalias() = gain * rho.matrix();
      rhs += gain_vec.array() - loss_rate * rho;
      if (ct != 0.0) rhs += ct * second_difference_1d(g, rho);
    }
    rho += dt * rhs;
    const double mn = rho.minCoeff();
    if (mn < -1e-8)
      throw NumericError("solve_fpe: density went negative beyond -1e-8 (instability)");
    rho = rho.max(0.0);
    const double m = trapezoid_integral(g, rho);
    sol.max_step_mass_drift = std::max(sol.max_step_mass_drift, std::abs(m - 1.0));
    if (!(m > 0.0)) throw NumericError("solve_fpe: mass collapsed");
    rho /= m;
    if (s % options.snapshot_stride == 0 || s == steps) {
      DensityField f;
      f.grid = g;
      f.values = rho;
      f.time = s * dt;
      sol.snapshots.push_back(f);
    }
  }
  return sol;
}

double stationary_residual(const ProcessSpec& spec, const JumpKernel* kernel,
                           const DensityField& field, BandScheme band) {
  Eigen::ArrayXd r = local_adjoint(spec, field.grid, field.values);
  if (kernel) r += nonlocal_gain_loss(*kernel, field.grid, field.values, band);
  return trapezoid_integral(field.grid, r.abs());
}

}  // namespace jumpepr
