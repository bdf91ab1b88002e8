#include "jumpepr/thermo.hpp"

#include <cmath>

#include "jumpepr/density.hpp"
#include "jumpepr/parallel.hpp"

namespace jumpepr {

namespace {

Eigen::MatrixXd inverse_diffusion(const ProcessSpec& spec, const State& x) {
  const Eigen::MatrixXd A = spec.diffusion_matrix(x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw NumericError("A(x) is singular but nonzero; the mixed case is rejected");
  return A.inverse();
}

bool zero_diffusion(const ProcessSpec& spec) { return spec.zero_diffusion || !spec.diffusion_factor; }

}  // namespace

ForceDecomposition gradient_decomposition(ScalarFn potential) {
  ForceDecomposition d;
  d.potential = std::move(potential);
  d.local_external = [](const State& x) { return State::Zero(x.size()); };
  d.nonlocal_driving = [](const State&, const State&) { return 0.0; };
  return d;
}

double gibbs_entropy(const DensityField& field) {
  const Eigen::ArrayXd w = field.grid.trapezoid_weights();
  double s = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double r = field.values[i];
    if (r > 0.0) s -= w[i] * r * std::log(r);
  }
  return s;
}

double internal_energy(const DensityField& field, const ForceDecomposition& decomposition) {
  if (!decomposition.potential) throw ConfigError("internal_energy: no potential registered");
  const Eigen::ArrayXd w = field.grid.trapezoid_weights();
  double u = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    u += w[i] * decomposition.potential(field.grid.node(i)) * field.values[i];
  return u;
}

double work_rate(const DensityField& field, const CurrentField& currents,
                 const ForceDecomposition& decomposition, BandScheme band) {
  const Grid& g = field.grid;
  const Eigen::ArrayXd w = g.trapezoid_weights();
  double local = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    local += w[i] * decomposition.local_external(g.node(i)).dot(currents.local.row(i).transpose());
  double nl = 0.0;
  if (currents.nonlocal.values.size() > 0) {
    const std::vector<State> nodes = all_nodes(g);
    nl = pair_reduce(g, band.band_cells, [&](Eigen::Index i, Eigen::Index j) {
      return currents.nonlocal.values(i, j) *
             decomposition.nonlocal_driving(nodes[static_cast<size_t>(i)], nodes[static_cast<size_t>(j)]);
    });
  }
  return local + nl;
}

double heat_dissipation(const ProcessSpec& spec, const JumpKernel* kernel,
                        const DensityField& field, const CurrentField& currents,
                        BandScheme band, const Eigen::MatrixXd* kernel_table) {
  const Grid& g = field.grid;
  const Eigen::ArrayXd w = g.trapezoid_weights();
  double local = 0.0;
  if (!zero_diffusion(spec)) {
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const State x = g.node(i);
      const State b = spec.drift ? spec.drift(x) : State::Zero(g.dim);
      local -= spec.beta * w[i] * b.dot(inverse_diffusion(spec, x) * currents.local.row(i).transpose());
    }
  }
  double nl = 0.0;
  if (kernel && currents.nonlocal.values.size() > 0) {
    const double floor = density_floor(field.values);
    const std::vector<State> nodes = all_nodes(g);
    nl = -pair_reduce(g, band.band_cells, [&](Eigen::Index i, Eigen::Index j) {
      if (field.values[i] < floor && field.values[j] < floor) return 0.0;
      const double jnl = currents.nonlocal.values(i, j);
      if (jnl == 0.0) return 0.0;
      const State& xi = nodes[static_cast<size_t>(i)];
      const State& xj = nodes[static_cast<size_t>(j)];
      const double kxy = kernel_table ? (*kernel_table)(i, j) : kernel->rate(xi, xj);
      const double kyx = kernel_table ? (*kernel_table)(j, i) : kernel->rate(xj, xi);
      if (kxy == kyx) return 0.0;  // symmetric kernel carries no log ratio
      if (kxy <= 0.0 || kyx <= 0.0)
        throw NumericError("heat_dissipation: one-sided zero kernel where the density is positive");
      return jnl * std::log(kxy / kyx);
    });
  }
  return local + nl;
}

EprResult entropy_production_rate(const ProcessSpec& spec, const JumpKernel* kernel,
                                  const DensityField& field, BandScheme band, int threads,
                                  const Eigen::MatrixXd* kernel_table) {
  const Grid& g = field.grid;
  const Eigen::Index n = g.num_nodes();
  const Eigen::ArrayXd w = g.trapezoid_weights();
  const double floor = density_floor(field.values);
  EprResult out;

  // local part: beta (A^{-1} b - beta^{-1} s)^T A (A^{-1} b - beta^{-1} s) rho
  if (!zero_diffusion(spec)) {
    const GradientField score = log_density_gradient(field);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (field.values[i] <= 0.0) continue;
      const State x = g.node(i);
      const Eigen::MatrixXd A = spec.diffusion_matrix(x);
      const State b = spec.drift ? spec.drift(x) : State::Zero(g.dim);
      const State u = inverse_diffusion(spec, x) * b - score.values.row(i).transpose() / spec.beta;
      const double q = spec.beta * u.dot(A * u) * field.values[i];
      out.local += w[i] * std::max(q, 0.0);
    }
  }

  if (!kernel) return out;

  // nonlocal part: 1/2 double-int (u - v) log(u/v), u = rho(x)k(x,y), v = rho(y)k(y,x);
  // the integrand is pointwise nonnegative, negative round-off is clipped.
  std::vector<double> row_sum(static_cast<size_t>(n), 0.0);
  std::vector<double> row_min(static_cast<size_t>(n), 0.0);
  std::vector<long> row_skipped(static_cast<size_t>(n), 0);
  std::vector<long> row_undefined(static_cast<size_t>(n), 0);

  const std::vector<State> nodes = all_nodes(g);
  const Eigen::ArrayXd wt = g.trapezoid_weights();
  parallel_for(n, threads, [&](long i) {
    const State& xi = nodes[static_cast<size_t>(i)];
    const double rho_i = field.values[i];
    double acc = 0.0, mn = 0.0;
    long skipped = 0, undefined = 0;
    if (g.dim == 1) {
      for (Eigen::Index j = i + band.band_cells; j < n; ++j) {
        double wp = pair_weight_1d(g, i, j, band.band_cells);
        if (wp == 0.0) continue;
        const double gi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        wp *= g.spacing(0) * gi;
        const double rho_j = field.values[j];
        if (rho_i < floor || rho_j < floor) {
          ++skipped;
          continue;
        }
        const State& xj = nodes[static_cast<size_t>(j)];
        const double u = rho_i * (kernel_table ? (*kernel_table)(i, j) : kernel->rate(xi, xj));
        const double v = rho_j * (kernel_table ? (*kernel_table)(j, i) : kernel->rate(xj, xi));
        if (u == 0.0 && v == 0.0) continue;
        if (u <= 0.0 || v <= 0.0) {
          ++undefined;
          continue;
        }
        const double phi = (u - v) * std::log(u / v);
        mn = std::min(mn, phi);
        acc += wp * std::max(phi, 0.0);
      }
    } else {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double rho_j = field.values[j];
        if (rho_i < floor || rho_j < floor) {
          ++skipped;
          continue;
        }
        const State& xj = nodes[static_cast<size_t>(j)];
        const double u = rho_i * (kernel_table ? (*kernel_table)(i, j) : kernel->rate(xi, xj));
        const double v = rho_j * (kernel_table ? (*kernel_table)(j, i) : kernel->rate(xj, xi));
        if (u == 0.0 && v == 0.0) continue;
        if (u <= 0.0 || v <= 0.0) {
          ++undefined;
          continue;
        }
        const double phi = (u - v) * std::log(u / v);
        mn = std::min(mn, phi);
        acc += wt[i] * wt[j] * std::max(phi, 0.0);
      }
    }
    row_sum[static_cast<size_t>(i)] = acc;
    row_min[static_cast<size_t>(i)] = mn;
    row_skipped[static_cast<size_t>(i)] = skipped;
    row_undefined[static_cast<size_t>(i)] = undefined;
  });

  for (Eigen::Index i = 0; i < n; ++i) {
    out.nonlocal += row_sum[static_cast<size_t>(i)];
    out.min_nonlocal_integrand = std::min(out.min_nonlocal_integrand, row_min[static_cast<size_t>(i)]);
    out.skipped_pairs += row_skipped[static_cast<size_t>(i)];
    out.undefined_pairs += row_undefined[static_cast<size_t>(i)];
  }

  // analytic band term: int rho(x) |grad log rho|^2 c_T dx for singular kernels
  const double ct = g.dim == 1 ? band_taylor_coefficient(*kernel, g, band.band_cells) : 0.0;
  if (ct != 0.0) {
    const GradientField score = log_density_gradient(field);
    double corr = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      corr += w[i] * field.values[i] * score.values.row(i).squaredNorm();
    out.band_correction = ct * corr;
    out.nonlocal += out.band_correction;
  }

  double skipped_mass = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (field.values[i] < floor) skipped_mass += w[i] * field.values[i];
  out.skipped_mass_fraction = skipped_mass / std::max(field.mass(), 1e-300);
  out.coverage_warning = out.skipped_mass_fraction > 0.01;
  return out;
}

Eigen::ArrayXd entropy_rate(const std::vector<DensityField>& snapshots) {
  const size_t m = snapshots.size();
  if (m < 3) throw ConfigError("entropy_rate requires at least 3 snapshots");
  const double dt = snapshots[1].time - snapshots[0].time;
  for (size_t i = 1; i < m; ++i)
    if (std::abs(snapshots[i].time - snapshots[i - 1].time - dt) > 1e-9 * std::max(1.0, dt))
      throw ConfigError("entropy_rate requires a uniform snapshot stride");
  Eigen::ArrayXd S(m);
  for (size_t i = 0; i < m; ++i) S[static_cast<Eigen::Index>(i)] = gibbs_entropy(snapshots[i]);
  Eigen::ArrayXd dS(m);
  dS[0] = (S[1] - S[0]) / dt;
  dS[static_cast<Eigen::Index>(m - 1)] = (S[static_cast<Eigen::Index>(m - 1)] - S[static_cast<Eigen::Index>(m - 2)]) / dt;
  for (size_t i = 1; i + 1 < m; ++i)
    dS[static_cast<Eigen::Index>(i)] =
        (S[static_cast<Eigen::Index>(i + 1)] - S[static_cast<Eigen::Index>(i - 1)]) / (2.0 * dt);
  return dS;
}

FreeEnergyReport free_energy(const DensityField& field, const ForceDecomposition& decomposition,
                             double theta, const DensityField* gibbs_reference) {
  FreeEnergyReport rep;
  rep.value = internal_energy(field, decomposition) - theta * gibbs_entropy(field);
  if (gibbs_reference) {
    if (!gibbs_reference->grid.same_geometry(field.grid))
      throw ConfigError("free_energy: reference density on a different grid");
    const Eigen::ArrayXd w = field.grid.trapezoid_weights();
    const double floor = density_floor(gibbs_reference->values);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double p = field.values[i];
      if (p <= 0.0) continue;
      const double q = std::max(gibbs_reference->values[i], floor);
      kl += w[i] * p * std::log(p / q);
    }
    rep.kl_form = theta * kl;
    rep.offset = rep.value - rep.kl_form;
    rep.has_reference = true;
  }
  return rep;
}

ForceDecomposition decompose_forces_1d(const ProcessSpec& spec, double reference_point,
                                       double lo, double hi, int nodes, double f_loc_constant) {
  if (spec.dim != 1) throw ConfigError("decompose_forces_1d requires dim = 1");
  if (!(lo < reference_point) || !(reference_point < hi))
    throw ConfigError("decompose_forces_1d: reference point must lie inside [lo, hi]");
  const Grid g = Grid::line(lo, hi, nodes);
  const double h = g.spacing(0);
  Eigen::ArrayXd force(nodes);  // A^{-1} b - f_loc
  for (int i = 0; i < nodes; ++i) {
    State x(1);
    x[0] = g.coord(0, i);
    const State b = spec.drift ? spec.drift(x) : State::Zero(1);
    if (zero_diffusion(spec)) throw ConfigError("decompose_forces_1d: A vanishes");
    const double A = spec.diffusion_matrix(x)(0, 0);
    if (!(A > 0.0) && b[0] != 0.0)
      throw NumericError("decompose_forces_1d: A vanishes at a probe with b != 0");
    force[i] = b[0] / A - f_loc_constant;
  }
  // V(x) = -int (A^{-1} b - f_loc), cumulative trapezoid from the left edge
  Eigen::ArrayXd V(nodes);
  V[0] = 0.0;
  for (int i = 1; i < nodes; ++i) V[i] = V[i - 1] - 0.5 * h * (force[i] + force[i - 1]);
  // shift so V(reference_point) = 0
  {
    State r(1);
    r[0] = reference_point;
    Eigen::ArrayXd tmp = V;
    const double vref = g.interpolate(tmp, r);
    V -= vref;
  }
  ForceDecomposition d;
  d.potential = [g, V](const State& x) {
    State q = x;
    // linear extension outside the table
    if (q[0] < g.lower[0]) {
      const double slope = (V[1] - V[0]) / g.spacing(0);
      return V[0] + slope * (q[0] - g.lower[0]);
    }
    if (q[0] > g.upper[0]) {
      const Eigen::Index n = V.size();
      const double slope = (V[n - 1] - V[n - 2]) / g.spacing(0);
      return V[n - 1] + slope * (q[0] - g.upper[0]);
    }
    return g.interpolate(V, q);
  };
  d.local_external = [f_loc_constant](const State& x) {
    State f(x.size());
    f.setConstant(f_loc_constant);
    return f;
  };
  d.nonlocal_driving = [](const State&, const State&) { return 0.0; };
  return d;
}

PairFn decompose_jump_driving(const JumpKernel& kernel, const ForceDecomposition& decomposition,
                              double beta) {
  if (!decomposition.potential) throw ConfigError("decompose_jump_driving: no potential");
  const PairFn rate = kernel.rate;
  const ScalarFn V = decomposition.potential;
  return [rate, V, beta](const State& x, const State& y) {
    const double kxy = rate(x, y), kyx = rate(y, x);
    if (!(kxy > 0.0) || !(kyx > 0.0))
      throw NumericError("decompose_jump_driving: one-sided zero kernel");
    return std::log(kxy / kyx) / beta - (V(x) - V(y));
  };
}

ThermoSeries build_thermo_series(const ProcessSpec& spec, const JumpKernel* kernel,
                                 const std::vector<DensityField>& snapshots,
                                 const ForceDecomposition& decomposition, double theta,
                                 BandScheme band, int threads) {
  const auto m = static_cast<Eigen::Index>(snapshots.size());
  if (m < 3) throw ConfigError("build_thermo_series requires at least 3 snapshots");
  Eigen::MatrixXd table;
  const Eigen::MatrixXd* table_ptr = nullptr;
  if (kernel && snapshots.front().grid.num_nodes() <= 4096) {
    table = kernel_value_table(*kernel, snapshots.front().grid);
    table_ptr = &table;
  }
  ThermoSeries ts;
  ts.times.resize(m);
  ts.entropy.resize(m);
  ts.internal_energy.resize(m);
  ts.work_rate.resize(m);
  ts.heat_dissipation.resize(m);
  ts.epr_local.resize(m);
  ts.epr_nonlocal.resize(m);
  ts.epr_total.resize(m);
  ts.free_energy.resize(m);
  ts.balance_residual.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const DensityField& f = snapshots[static_cast<size_t>(i)];
    ts.times[i] = f.time;
    ts.entropy[i] = gibbs_entropy(f);
    ts.internal_energy[i] = internal_energy(f, decomposition);
    const CurrentField cur = compute_currents(spec, kernel, f, band, table_ptr);
    ts.work_rate[i] = work_rate(f, cur, decomposition, band);
    ts.heat_dissipation[i] = heat_dissipation(spec, kernel, f, cur, band, table_ptr);
    const EprResult ep = entropy_production_rate(spec, kernel, f, band, threads, table_ptr);
    ts.epr_local[i] = ep.local;
    ts.epr_nonlocal[i] = ep.nonlocal;
    ts.epr_total[i] = ep.total();
    ts.free_energy[i] = ts.internal_energy[i] - theta * ts.entropy[i];
  }
  const Eigen::ArrayXd dS = entropy_rate(snapshots);
  for (Eigen::Index i = 0; i < m; ++i)
    ts.balance_residual[i] = std::abs(dS[i] - (ts.epr_total[i] + ts.heat_dissipation[i]));
  return ts;
}

}  // namespace jumpepr
