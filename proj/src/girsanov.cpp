#include "jumpepr/girsanov.hpp"

#include <cmath>

#include "jumpepr/density.hpp"
#include "jumpepr/parallel.hpp"

namespace jumpepr {

namespace {

struct LawEval {
  const GirsanovContext& ctx;

  bool in_support(const State& x) const {
    if (ctx.closed_form) return true;
    return ctx.rho_ss.grid.contains(x);
  }
  double log_rho(const State& x) const {
    if (ctx.closed_form) return ctx.closed_form->log_rho(x);
    return ctx.rho_ss.grid.interpolate(ctx.log_rho_nodes, x);
  }
  bool floored(const State& x) const {
    if (ctx.closed_form) return false;
    return ctx.rho_ss.grid.interpolate(ctx.rho_ss.values, x) < ctx.floor;
  }
  State score(const State& x) const {
    if (ctx.closed_form) return ctx.closed_form->score(x);
    State s(ctx.spec.dim);
    for (int d = 0; d < ctx.spec.dim; ++d)
      s[d] = ctx.rho_ss.grid.interpolate(ctx.score_nodes.col(d).array(), x);
    return s;
  }
};

}  // namespace

GirsanovContext build_girsanov_context(const ProcessSpec& spec, const JumpKernel& kernel,
                                       const DensityField& rho_ss, BandScheme band,
                                       std::optional<ClosedFormLaw> closed_form) {
  GirsanovContext ctx;
  ctx.spec = spec;
  ctx.kernel = kernel;
  ctx.rho_ss = rho_ss;
  ctx.band = band;
  ctx.closed_form = std::move(closed_form);
  ctx.fingerprint = spec_fingerprint(spec);
  ctx.has_jumps = spec.has_jumps();
  ctx.singular = kernel.singularity_order.has_value();
  ctx.floor = density_floor(rho_ss.values);

  const Grid& g = rho_ss.grid;
  const Eigen::Index n = g.num_nodes();
  ctx.delta_small = ctx.singular ? band.band_cells * g.spacing(0) : 0.0;

  const bool diffusive = !spec.zero_diffusion && spec.diffusion_factor;
  if (diffusive) {
    if (!spec.constant_diffusion)
      throw ConfigError("pathwise log-RN accumulation requires a constant diffusion factor");
    const Eigen::MatrixXd A = spec.diffusion_matrix(State::Zero(spec.dim));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw ConfigError("pathwise log-RN: A must be positive definite or zero");
    ctx.inv_A = A.inverse();
  }
  if (spec.stable && diffusive)
    throw ConfigError("stable driver with nonzero diffusion is not supported");

  // nodal tables of log rho and the score
  ctx.log_rho_nodes.resize(n);
  if (ctx.closed_form) {
    for (Eigen::Index i = 0; i < n; ++i) ctx.log_rho_nodes[i] = ctx.closed_form->log_rho(g.node(i));
    ctx.score_nodes.resize(n, g.dim);
    for (Eigen::Index i = 0; i < n; ++i)
      ctx.score_nodes.row(i) = ctx.closed_form->score(g.node(i)).transpose();
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      ctx.log_rho_nodes[i] = std::log(std::max(rho_ss.values[i], ctx.floor));
    ctx.score_nodes = log_density_gradient(rho_ss).values;
  }

  if (ctx.has_jumps) {
    // compensator G(x_i) = int (r - 1) k(x_i, y) dy with r the reversed/forward
    // kernel ratio; band-excluded for singular kernels, full off-diagonal else.
    ctx.compensator_nodes.setZero(n);
    const std::vector<State> nodes = all_nodes(g);
    const Eigen::ArrayXd wt = g.trapezoid_weights();
    for (Eigen::Index i = 0; i < n; ++i) {
      const State& xi = nodes[static_cast<size_t>(i)];
      double acc = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = (g.dim == 1 && ctx.singular)
                             ? pair_weight_1d(g, i, j, band.band_cells)
                             : wt[j];
        if (w == 0.0) continue;
        const State& xj = nodes[static_cast<size_t>(j)];
        const double kxy = ctx.kernel.rate(xi, xj);
        if (kxy <= 0.0) continue;
        const double kyx = ctx.kernel.rate(xj, xi);
        if (kyx <= 0.0) continue;
        const double logr = (ctx.log_rho_nodes[j] - ctx.log_rho_nodes[i]) + (std::log(kyx) - std::log(kxy));
        acc += w * std::expm1(logr) * kxy;
      }
      ctx.compensator_nodes[i] = acc;
    }
    ctx.taylor_nodes.setZero(n);
    if (ctx.singular) {
      const double ct = band_taylor_coefficient(kernel, g, band.band_cells);
      for (Eigen::Index i = 0; i < n; ++i)
        ctx.taylor_nodes[i] = ct * ctx.score_nodes.row(i).squaredNorm();
    }
  }
  return ctx;
}

PathLogRn pathwise_log_rn_range(const Path& path, const GirsanovContext& ctx, long step_begin,
                                long step_end) {
  PathLogRn out;
  const LawEval law{ctx};
  const long steps = path.times.size() - 1;
  if (step_begin < 0 || step_end > steps || step_begin > step_end)
    throw ConfigError("pathwise_log_rn_range: step range out of bounds");
  const double dt = path.dt;
  const int dim = ctx.spec.dim;
  const bool diffusive = !ctx.spec.zero_diffusion && ctx.spec.diffusion_factor;

  // per-step jump displacement sums, to recover the continuous increment
  std::vector<const JumpEvent*> jumps_here;
  jumps_here.reserve(path.jumps.size());
  for (const auto& ev : path.jumps)
    if (ev.step >= step_begin && ev.step < step_end) jumps_here.push_back(&ev);

  size_t jptr = 0;
  for (long s = step_begin; s < step_end; ++s) {
    const State x = path.states.row(s).transpose();
    if (!law.in_support(x)) {
      out.valid = false;
      return out;
    }
    if (diffusive) {
      // b_R - b = -2 b + 2 beta^{-1} A s
      const State b = ctx.spec.drift ? ctx.spec.drift(x) : State::Zero(dim);
      const Eigen::MatrixXd A = ctx.spec.diffusion_matrix(x);
      const State diff = -2.0 * b + (2.0 / ctx.spec.beta) * (A * law.score(x));
      State jump_sum = State::Zero(dim);
      while (jptr < jumps_here.size() && jumps_here[jptr]->step == s) {
        jump_sum += jumps_here[jptr]->delta;
        ++jptr;
      }
      const State dxc = path.states.row(s + 1).transpose() - x - jump_sum;
      const State dM = dxc - ito_drift(ctx.spec, x) * dt;
      out.acc.martingale_part += 0.5 * ctx.spec.beta * diff.dot(ctx.inv_A * dM);
      out.acc.drift_part -= 0.25 * ctx.spec.beta * diff.dot(ctx.inv_A * diff) * dt;
    }
    if (ctx.has_jumps) {
      double comp;
      if (ctx.closed_form && !ctx.singular) {
        comp = ctx.rho_ss.grid.contains(x)
                   ? ctx.rho_ss.grid.interpolate(ctx.compensator_nodes, x)
                   : 0.0;
      } else {
        if (!ctx.rho_ss.grid.contains(x)) {
          out.valid = false;
          return out;
        }
        comp = ctx.rho_ss.grid.interpolate(ctx.compensator_nodes, x);
        if (ctx.singular) comp += ctx.rho_ss.grid.interpolate(ctx.taylor_nodes, x);
      }
      out.acc.jump_compensator_part -= comp * dt;
    }
  }

  // jump log ratios: log rho(y) - log rho(x) + log k(y,x) - log k(x,y)
  for (const JumpEvent* evp : jumps_here) {
    const JumpEvent& ev = *evp;
    if (ctx.singular && ev.delta.norm() < ctx.delta_small) {
      ++out.small_jumps_absorbed;  // accounted by the Taylor compensator term
      continue;
    }
    const State& x = ev.pre_state;
    const State y = ev.pre_state + ev.delta;
    if (!law.in_support(x) || !law.in_support(y) || law.floored(x) || law.floored(y)) {
      out.valid = false;
      return out;
    }
    const double kxy = ctx.kernel.rate(x, y);
    const double kyx = ctx.kernel.rate(y, x);
    if (!(kxy > 0.0) || !(kyx > 0.0)) {
      out.valid = false;
      return out;
    }
    double term = law.log_rho(y) - law.log_rho(x);
    if (kyx != kxy) term += std::log(kyx) - std::log(kxy);
    out.acc.jump_log_part += term;
  }
  return out;
}

PathLogRn pathwise_log_rn(const Path& path, const GirsanovContext& ctx) {
  return pathwise_log_rn_range(path, ctx, 0, path.times.size() - 1);
}

EprKlEstimate estimate_epr_kl(const PathEnsemble& ensemble, const GirsanovContext& ctx,
                              int threads) {
  if (ensemble.spec_fingerprint != ctx.fingerprint)
    throw ConfigError("estimate_epr_kl: ensemble fingerprint does not match the process spec");
  const long n = static_cast<long>(ensemble.paths.size());
  if (n < 2) throw ConfigError("estimate_epr_kl needs at least 2 paths");
  std::vector<PathLogRn> results(static_cast<size_t>(n));
  parallel_for(n, threads, [&](long i) {
    results[static_cast<size_t>(i)] = pathwise_log_rn(ensemble.paths[static_cast<size_t>(i)], ctx);
  });
  EprKlEstimate est;
  est.valid.resize(static_cast<size_t>(n), 0);
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n; ++i) {
    if (!results[static_cast<size_t>(i)].valid) continue;
    est.valid[static_cast<size_t>(i)] = 1;
    const double tot = results[static_cast<size_t>(i)].acc.total();
    est.per_path.push_back(results[static_cast<size_t>(i)].acc);
    sum += tot;
    sumsq += tot * tot;
    ++est.retained;
  }
  est.discard_fraction = 1.0 - static_cast<double>(est.retained) / static_cast<double>(n);
  if (est.discard_fraction >= 0.05)
    throw NumericError("estimate_epr_kl: discard fraction >= 5% (density support problem)");
  const double T = ensemble.t_final;
  const double mean = sum / est.retained;
  const double var = std::max(0.0, sumsq / est.retained - mean * mean) *
                     (static_cast<double>(est.retained) / std::max(1L, est.retained - 1));
  est.epr_estimate = -mean / T;
  est.standard_error = std::sqrt(var / est.retained) / T;
  return est;
}

EprKlEstimate estimate_epr_kl(const PathEnsemble& ensemble, const ProcessSpec& spec,
                              const JumpKernel& kernel, const DensityField& rho_ss,
                              BandScheme band, int threads) {
  const GirsanovContext ctx = build_girsanov_context(spec, kernel, rho_ss, band);
  return estimate_epr_kl(ensemble, ctx, threads);
}

}  // namespace jumpepr
