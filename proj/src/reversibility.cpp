#include "jumpepr/reversibility.hpp"

#include <cmath>
#include <cstdio>

#include "jumpepr/density.hpp"

namespace jumpepr {

namespace {

constexpr double kBulkFraction = 1e-8;  // nodes with rho >= this * max count as bulk

}  // namespace

DetailedBalanceResult check_detailed_balance(const ProcessSpec& spec, const JumpKernel* kernel,
                                             const DensityField& rho_ss, BandScheme band,
                                             double stationarity_tol) {
  DetailedBalanceResult res;
  res.stationary_residual = stationary_residual(spec, kernel, rho_ss, band);
  if (res.stationary_residual > stationarity_tol) {
    char m[160];
    std::snprintf(m, sizeof(m),
                  "check_detailed_balance: input density is not stationary "
                  "(residual %.3g > tolerance %.3g)",
                  res.stationary_residual, stationarity_tol);
    throw NumericError(m);
  }
  const Grid& g = rho_ss.grid;
  const Eigen::Index n = g.num_nodes();
  const double bulk = kBulkFraction * rho_ss.values.maxCoeff();

  // local: sup |j_loc| over the bulk, relative to the size of its two terms
  const Eigen::MatrixXd jloc = local_current(spec, rho_ss);
  const GradientField grad = log_density_gradient(rho_ss);
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (rho_ss.values[i] < bulk) continue;
    const State x = g.node(i);
    const State b = spec.drift ? spec.drift(x) : State::Zero(g.dim);
    double scale = b.norm() * rho_ss.values[i];
    if (!spec.zero_diffusion && spec.diffusion_factor) {
      const Eigen::MatrixXd A = spec.diffusion_matrix(x);
      scale += (A * grad.values.row(i).transpose()).norm() * rho_ss.values[i] / spec.beta;
    }
    num = std::max(num, jloc.row(i).norm());
    den = std::max(den, scale);
  }
  res.local_residual = den > 0.0 ? num / den : 0.0;

  // nonlocal: sup |j_nl| / (rho k + rho' k') over bulk pairs
  if (kernel) {
    const std::vector<State> nodes = all_nodes(g);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (rho_ss.values[i] < bulk) continue;
      for (Eigen::Index j = i + (g.dim == 1 ? band.band_cells : 1); j < n; ++j) {
        if (rho_ss.values[j] < bulk) continue;
        if (g.dim == 1 && j - i < band.band_cells) continue;
        const State& xi = nodes[static_cast<size_t>(i)];
        const State& xj = nodes[static_cast<size_t>(j)];
        const double u = rho_ss.values[i] * kernel->rate(xi, xj);
        const double v = rho_ss.values[j] * kernel->rate(xj, xi);
        if (u + v <= 0.0) continue;
        worst = std::max(worst, std::abs(u - v) / (u + v));
      }
    }
    res.nonlocal_residual = worst;
  }
  return res;
}

GeneratorAsymmetryResult generator_asymmetry(const ProcessSpec& spec, const JumpKernel* kernel,
                                             const DensityField& rho_ss,
                                             const std::vector<Eigen::ArrayXd>& battery,
                                             BandScheme band) {
  const Grid& g = rho_ss.grid;
  const auto m = static_cast<Eigen::Index>(battery.size());
  if (m < 2) throw ConfigError("generator_asymmetry needs at least two test functions");
  const Eigen::ArrayXd mu = g.trapezoid_weights() * rho_ss.values;
  std::vector<Eigen::ArrayXd> Lf(battery.size());
  Eigen::ArrayXd norms(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    Lf[static_cast<size_t>(k)] = apply_generator(spec, kernel, g, battery[static_cast<size_t>(k)], band);
    norms[k] = std::sqrt((mu * battery[static_cast<size_t>(k)].square()).sum());
    if (!(norms[k] > 0.0)) throw ConfigError("generator_asymmetry: test function with zero L2(mu) norm");
  }
  GeneratorAsymmetryResult out;
  out.matrix.setZero(m, m);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index l = 0; l < m; ++l) {
      if (k == l) continue;
      const double a = (mu * Lf[static_cast<size_t>(k)] * battery[static_cast<size_t>(l)]).sum();
      const double b = (mu * Lf[static_cast<size_t>(l)] * battery[static_cast<size_t>(k)]).sum();
      out.matrix(k, l) = (a - b) / (norms[k] * norms[l]);
      out.value = std::max(out.value, std::abs(out.matrix(k, l)));
    }
  return out;
}

std::vector<Eigen::ArrayXd> default_test_battery(const Grid& grid) {
  std::vector<Eigen::ArrayXd> fs;
  const Eigen::Index n = grid.num_nodes();
  auto add = [&](auto&& fn) {
    Eigen::ArrayXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = fn(grid.node(i));
    fs.push_back(std::move(v));
  };
  if (grid.dim == 1) {
    for (double c : {-2.0, -1.0, 0.0, 1.0, 2.0})
      add([c](const State& x) { return std::exp(-0.5 * (x[0] - c) * (x[0] - c)); });
    add([](const State& x) { return x[0] * std::exp(-0.25 * x[0] * x[0]); });
    return fs;
  }
  const double centers[4][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {-1.0, 1.0}};
  for (const auto& c : centers)
    add([c](const State& x) {
      const double dx = x[0] - c[0], dy = x[1] - c[1];
      return std::exp(-0.5 * (dx * dx + dy * dy));
    });
  add([](const State& x) { return x[0] * std::exp(-0.25 * x.squaredNorm()); });
  add([](const State& x) { return x[1] * std::exp(-0.25 * x.squaredNorm()); });
  return fs;
}

GradientStructureResult check_gradient_structure(const ProcessSpec& spec, const JumpKernel* kernel,
                                                 const ScalarFn& potential, double beta,
                                                 const DensityField& rho_ss) {
  if (!potential) throw ConfigError("check_gradient_structure: no potential");
  const Grid& g = rho_ss.grid;
  const double bulk = 1e-4 * rho_ss.values.maxCoeff();
  std::vector<Eigen::Index> probes;
  for (Eigen::Index i = 0; i < g.num_nodes(); ++i)
    if (rho_ss.values[i] >= bulk) probes.push_back(i);
  if (probes.empty()) throw NumericError("check_gradient_structure: empty probe set");

  GradientStructureResult out;
  const bool diffusive = !spec.zero_diffusion && spec.diffusion_factor;
  if (diffusive) {
    const double eps = 1e-5;
    double num = 0.0, den = 0.0;
    for (Eigen::Index i : probes) {
      const State x = g.node(i);
      State gradV(g.dim);
      for (int d = 0; d < g.dim; ++d) {
        State xp = x, xm = x;
        xp[d] += eps;
        xm[d] -= eps;
        gradV[d] = (potential(xp) - potential(xm)) / (2.0 * eps);
      }
      const State b = spec.drift ? spec.drift(x) : State::Zero(g.dim);
      const State AdV = spec.diffusion_matrix(x) * gradV;
      num = std::max(num, (b + AdV).norm());
      den = std::max(den, b.norm() + AdV.norm());
    }
    out.drift_residual = den > 0.0 ? num / den : 0.0;
  }
  if (kernel) {
    // decimated probe pairs, s(x,y) = k(x,y) exp(beta (V(y) - V(x)) / 2)
    const size_t stride = std::max<size_t>(1, probes.size() / 150);
    std::vector<Eigen::Index> sub;
    for (size_t p = 0; p < probes.size(); p += stride) sub.push_back(probes[p]);
    double num = 0.0, smax = 0.0;
    const double delta = g.spacing(0);
    for (size_t a = 0; a < sub.size(); ++a)
      for (size_t b2 = a + 1; b2 < sub.size(); ++b2) {
        const State x = g.node(sub[a]), y = g.node(sub[b2]);
        if ((x - y).norm() < delta) continue;
        const double vx = potential(x), vy = potential(y);
        const double sxy = kernel->rate(x, y) * std::exp(0.5 * beta * (vy - vx));
        const double syx = kernel->rate(y, x) * std::exp(0.5 * beta * (vx - vy));
        num = std::max(num, std::abs(sxy - syx));
        smax = std::max({smax, sxy, syx});
      }
    out.kernel_symmetry_residual = smax > 0.0 ? num / smax : 0.0;
  }
  return out;
}

McReversibility mc_reversibility_test(const PathEnsemble& ensemble, const ScalarFn& f,
                                      const ScalarFn& g, double lag) {
  const long npaths = static_cast<long>(ensemble.paths.size());
  if (npaths < 2) throw ConfigError("mc_reversibility_test needs at least 2 paths");
  const double dt = ensemble.dt;
  const long L = std::lround(lag / dt);
  if (L < 1 || std::abs(L * dt - lag) > 1e-9)
    throw ConfigError("mc_reversibility_test: lag must be a positive multiple of dt");
  const long steps = ensemble.paths.front().times.size() - 1;
  if (L > steps) throw ConfigError("mc_reversibility_test: lag beyond the path horizon");

  // per-path time averages; cluster statistics across paths
  double mf = 0.0, mb = 0.0, md = 0.0, vd = 0.0;
  std::vector<double> diffs(static_cast<size_t>(npaths));
  for (long p = 0; p < npaths; ++p) {
    const Path& path = ensemble.paths[static_cast<size_t>(p)];
    double af = 0.0, ab = 0.0;
    long cnt = 0;
    for (long t = 0; t + L <= steps; ++t) {
      const State x0 = path.states.row(t).transpose();
      const State xL = path.states.row(t + L).transpose();
      af += f(xL) * g(x0);
      ab += f(x0) * g(xL);
      ++cnt;
    }
    af /= cnt;
    ab /= cnt;
    mf += af;
    mb += ab;
    diffs[static_cast<size_t>(p)] = af - ab;
  }
  mf /= npaths;
  mb /= npaths;
  for (double d : diffs) md += d;
  md /= npaths;
  for (double d : diffs) vd += (d - md) * (d - md);
  vd /= (npaths - 1);
  McReversibility out;
  out.forward_corr = mf;
  out.backward_corr = mb;
  out.pooled_se = std::sqrt(vd / npaths);
  out.z_score = (mf - mb == 0.0) ? 0.0 : (mf - mb) / std::max(out.pooled_se, 1e-300);
  return out;
}

McBatteryResult mc_reversibility_battery(const PathEnsemble& ensemble, double lag) {
  const std::vector<std::pair<ScalarFn, ScalarFn>> pairs = {
      {[](const State& x) { return x[0]; }, [](const State& x) { return x[0] * x[0] * x[0]; }},
      {[](const State& x) { return x[0]; }, [](const State& x) { return std::exp(-x[0]); }},
      {[](const State& x) { return x[0] > 0.0 ? 1.0 : 0.0; },
       [](const State& x) { return x[0] * (x[0] < 1.0 ? 1.0 : 0.0); }},
      {[](const State& x) { return std::sin(x[0]); }, [](const State& x) { return x[0] * x[0]; }},
      {[](const State& x) { return std::exp(-0.5 * (x[0] - 1.0) * (x[0] - 1.0)); },
       [](const State& x) { return x[0]; }},
      {[](const State& x) { return std::abs(x[0]); }, [](const State& x) { return std::tanh(x[0]); }}};
  McBatteryResult out;
  // two-sided Bonferroni at overall level 0.05 over 6 pairs
  const double z_crit = 2.6383;
  for (const auto& [f, g] : pairs) {
    const McReversibility r = mc_reversibility_test(ensemble, f, g, lag);
    out.z_scores.push_back(r.z_score);
    if (std::abs(r.z_score) > z_crit) out.any_reject = true;
  }
  return out;
}

ReversibilityReport full_report(const ProcessSpec& spec, const JumpKernel* kernel,
                                const DensityField& rho_ss,
                                const ReversibilityThresholds& thresholds, BandScheme band,
                                std::optional<ScalarFn> potential, int threads) {
  ReversibilityReport rep;
  rep.thresholds = thresholds;
  const DetailedBalanceResult db = check_detailed_balance(spec, kernel, rho_ss, band);
  rep.db_local_residual = db.local_residual;
  rep.db_nonlocal_residual = db.nonlocal_residual;
  rep.stationary_residual = db.stationary_residual;

  const GeneratorAsymmetryResult ga =
      generator_asymmetry(spec, kernel, rho_ss, default_test_battery(rho_ss.grid), band);
  rep.generator_asymmetry = ga.value;

  ScalarFn V;
  if (potential) {
    V = *potential;
  } else {
    // Theorem's V read off the claimed stationary law: V = -beta^{-1} log rho_ss
    const DensityField rho_copy = rho_ss;
    const double beta = spec.beta;
    const double floor = density_floor(rho_ss.values);
    V = [rho_copy, beta, floor](const State& x) {
      return -std::log(std::max(rho_copy.grid.interpolate(rho_copy.values, x), floor)) / beta;
    };
  }
  const GradientStructureResult gs = check_gradient_structure(spec, kernel, V, spec.beta, rho_ss);
  rep.gradient_structure_residual = gs.combined();

  const EprResult ep = entropy_production_rate(spec, kernel, rho_ss, band, threads);
  rep.epr_ss = ep.total();

  rep.pass_detailed_balance = rep.db_local_residual <= thresholds.db_local &&
                              rep.db_nonlocal_residual <= thresholds.db_nonlocal;
  rep.pass_generator = rep.generator_asymmetry <= thresholds.generator;
  rep.pass_gradient = rep.gradient_structure_residual <= thresholds.gradient;
  rep.pass_epr = rep.epr_ss <= thresholds.epr;
  const int passes = int(rep.pass_detailed_balance) + int(rep.pass_generator) +
                     int(rep.pass_gradient) + int(rep.pass_epr);
  rep.verdict_consistent = passes == 0 || passes == 4;
  return rep;
}

}  // namespace jumpepr
