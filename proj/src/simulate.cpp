#include "jumpepr/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "jumpepr/parallel.hpp"

namespace jumpepr {

namespace {

long step_count(double t_final, double dt) {
  if (!(dt > 0.0) || !(t_final > 0.0)) throw ConfigError("t_final and dt must be positive");
  const long n = std::lround(t_final / dt);
  if (n < 1 || std::abs(n * dt - t_final) > 1e-9 * std::max(1.0, t_final))
    throw ConfigError("t_final must be an integer multiple of dt");
  return n;
}

void check_finite(const Eigen::VectorXd& x, double t) {
  if (!x.allFinite()) {
    char m[96];
    std::snprintf(m, sizeof(m), "simulation diverged to a non-finite state at t = %g", t);
    throw NumericError(m);
  }
}

Path init_path(int dim, long steps, double dt, double t_final, uint64_t seed) {
  Path p;
  p.seed = seed;
  p.dt = dt;
  p.t_final = t_final;
  p.times.resize(steps + 1);
  for (long s = 0; s <= steps; ++s) p.times[s] = s * dt;
  p.times[steps] = t_final;
  p.states.resize(steps + 1, dim);
  return p;
}

}  // namespace

uint64_t sub_seed(uint64_t master, uint64_t index) {
  uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double sample_symmetric_stable(double alpha, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
  const double pi = std::numbers::pi;
  const double u = pi * (unif(rng) - 0.5);  // uniform on (-pi/2, pi/2)
  const double w = -std::log(unif(rng));    // exponential mean 1
  if (std::abs(alpha - 1.0) < 1e-12) return std::tan(u);
  const double s = std::sin(alpha * u) / std::pow(std::cos(u), 1.0 / alpha);
  const double t = std::pow(std::cos(u - alpha * u) / w, (1.0 - alpha) / alpha);
  return s * t;
}

Path simulate_path(const ProcessSpec& spec, const Eigen::VectorXd& x0, double t_final, double dt,
                   uint64_t seed) {
  if (spec.stable) throw ConfigError("simulate_path: use simulate_stable_path for stable drivers");
  const long steps = step_count(t_final, dt);
  const double total_rate = spec.jump_rate * spec.levy_mass;
  if (total_rate * dt >= 0.1)
    throw ConfigError("simulate_path requires lambda ||m||_1 dt < 0.1");
  if (total_rate > 0.0 && (!spec.levy_sampler || !spec.jump_map))
    throw ConfigError("simulate_path: jumps need levy_sampler and jump_map");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Path p = init_path(spec.dim, steps, dt, t_final, seed);
  Eigen::VectorXd x = x0;
  p.states.row(0) = x.transpose();
  const double noise_scale = std::sqrt(2.0 / spec.beta) * std::sqrt(dt);
  const bool diffusive = !spec.zero_diffusion && spec.diffusion_factor;
  for (long s = 0; s < steps; ++s) {
    Eigen::VectorXd xn = x + ito_drift(spec, x) * dt;
    if (diffusive) {
      Eigen::VectorXd xi(spec.dim);
      for (int d = 0; d < spec.dim; ++d) xi[d] = gauss(rng);
      xn += noise_scale * (spec.diffusion_factor(x) * xi);
    }
    if (total_rate > 0.0) {
      std::poisson_distribution<int> pois(total_rate * dt);
      const int count = pois(rng);
      for (int c = 0; c < count; ++c) {
        const State z = spec.levy_sampler(rng);
        JumpEvent ev;
        ev.time = p.times[s + 1];
        ev.step = s;
        ev.pre_state = xn;
        ev.delta = spec.jump_map->forward(xn, z);
        xn += ev.delta;
        p.jumps.push_back(std::move(ev));
      }
    }
    check_finite(xn, p.times[s + 1]);
    x = xn;
    p.states.row(s + 1) = x.transpose();
  }
  return p;
}

Path simulate_stable_path(const ProcessSpec& spec, const Eigen::VectorXd& x0, double t_final,
                          double dt, uint64_t seed, double jump_record_threshold) {
  if (!spec.stable) throw ConfigError("simulate_stable_path: spec has no stable driver");
  const double alpha = spec.stable->alpha;
  if (!(alpha > 0.0) || !(alpha < 2.0)) throw ConfigError("stable driver requires alpha in (0, 2)");
  if (spec.dim != 1) throw ConfigError("stable driver is one-dimensional");
  const long steps = step_count(t_final, dt);
  std::mt19937_64 rng(seed);
  Path p = init_path(1, steps, dt, t_final, seed);
  double x = x0[0];
  p.states(0, 0) = x;
  const double scale = std::pow(dt, 1.0 / alpha);
  for (long s = 0; s < steps; ++s) {
    State xs(1);
    xs[0] = x;
    double xn = x + (spec.drift ? spec.drift(xs)[0] : 0.0) * dt;
    const double dl = scale * sample_symmetric_stable(alpha, rng);
    if (std::abs(dl) > jump_record_threshold) {
      JumpEvent ev;
      ev.time = p.times[s + 1];
      ev.step = s;
      ev.pre_state = State::Constant(1, xn);
      ev.delta = State::Constant(1, dl);
      p.jumps.push_back(std::move(ev));
    }
    xn += dl;
    State check(1);
    check[0] = xn;
    check_finite(check, p.times[s + 1]);
    x = xn;
    p.states(s + 1, 0) = x;
  }
  return p;
}

Eigen::VectorXd reversed_drift(const ProcessSpec& spec, const DensityField& rho_ss,
                               const GradientField& score, const Eigen::VectorXd& x) {
  const State b = spec.drift ? spec.drift(x) : State::Zero(spec.dim);
  State out = -b;
  if (!spec.zero_diffusion && spec.diffusion_factor) {
    State s(spec.dim);
    for (int d = 0; d < spec.dim; ++d)
      s[d] = rho_ss.grid.interpolate(score.values.col(d).array(), x);
    out += 2.0 / spec.beta * (spec.diffusion_matrix(x) * s);
  }
  return out;
}

double reversed_kernel(const JumpKernel& kernel, const DensityField& rho_ss,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double rx = rho_ss.grid.interpolate(rho_ss.values, x);
  const double ry = rho_ss.grid.interpolate(rho_ss.values, y);
  const double floor = density_floor(rho_ss.values);
  if (rx < floor)
    throw NumericError("reversed_kernel: density below floor at the current state "
                       "(outside reliable support)");
  return ry * kernel.rate(y, x) / rx;
}

Path simulate_reversed_path(const ProcessSpec& spec, const JumpKernel& kernel,
                            const DensityField& rho_ss, const Eigen::VectorXd& x0, double t_final,
                            double dt, uint64_t seed) {
  if (!spec.constant_diffusion)
    throw ConfigError("simulate_reversed_path is restricted to constant diffusion factors");
  if (spec.stable)
    throw ConfigError("simulate_reversed_path requires a bounded-rate (compound-Poisson) kernel");
  if (rho_ss.grid.dim != 1) throw ConfigError("reversed simulation implemented in 1D");
  const long steps = step_count(t_final, dt);
  const Grid& g = rho_ss.grid;
  const Eigen::Index n = g.num_nodes();
  const double floor = density_floor(rho_ss.values);
  const GradientField score = log_density_gradient(rho_ss);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Path p = init_path(spec.dim, steps, dt, t_final, seed);
  Eigen::VectorXd x = x0;
  p.states.row(0) = x.transpose();
  const double noise_scale = std::sqrt(2.0 / spec.beta) * std::sqrt(dt);
  const bool diffusive = !spec.zero_diffusion && spec.diffusion_factor;
  const Eigen::ArrayXd w = g.trapezoid_weights();
  const std::vector<State> nodes = all_nodes(g);
  Eigen::ArrayXd krow(n), cdf(n);
  for (long s = 0; s < steps; ++s) {
    if (!g.contains(x) || g.interpolate(rho_ss.values, x) < floor)
      throw NumericError("simulate_reversed_path: state left the reliable density support");
    Eigen::VectorXd xn = x + reversed_drift(spec, rho_ss, score, x) * dt;
    if (diffusive) {
      Eigen::VectorXd xi(spec.dim);
      for (int d = 0; d < spec.dim; ++d) xi[d] = gauss(rng);
      xn += noise_scale * (spec.diffusion_factor(x) * xi);
    }
    // reversed jump intensity on the grid: k_R(x, y_j) w_j, sampled by inverse CDF
    const double rx = g.interpolate(rho_ss.values, x);
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = (nodes[static_cast<size_t>(j)] - x).norm() < 0.5 * g.spacing(0)
                           ? 0.0
                           : w[j] * rho_ss.values[j] * kernel.rate(nodes[static_cast<size_t>(j)], x) / rx;
      total += v;
      krow[j] = v;
      cdf[j] = total;
    }
    if (total * dt >= 0.5)
      throw ConfigError("simulate_reversed_path: reversed jump rate too large for this dt");
    std::poisson_distribution<int> pois(total * dt);
    const int count = pois(rng);
    for (int c = 0; c < count; ++c) {
      const double u = unif(rng) * total;
      Eigen::Index lo = 0, hi = n - 1;
      while (lo < hi) {
        const Eigen::Index mid = (lo + hi) / 2;
        if (cdf[mid] < u)
          lo = mid + 1;
        else
          hi = mid;
      }
      JumpEvent ev;
      ev.time = p.times[s + 1];
      ev.step = s;
      ev.pre_state = xn;
      ev.delta = nodes[static_cast<size_t>(lo)] - xn;
      xn += ev.delta;
      p.jumps.push_back(std::move(ev));
    }
    check_finite(xn, p.times[s + 1]);
    x = xn;
    p.states.row(s + 1) = x.transpose();
  }
  return p;
}

PathEnsemble simulate_ensemble(const ProcessSpec& spec, const Eigen::VectorXd& x0, long n_paths,
                               double t_final, double dt, uint64_t master_seed,
                               EnsembleOptions options) {
  PathEnsemble ens;
  ens.dt = dt;
  ens.t_final = t_final;
  ens.master_seed = master_seed;
  ens.spec_fingerprint = spec_fingerprint(spec);
  ens.paths.resize(static_cast<size_t>(n_paths));
  const double thr = options.stable_jump_threshold > 0.0 ? options.stable_jump_threshold : 0.1;
  parallel_for(n_paths, options.threads, [&](long i) {
    const uint64_t seed = sub_seed(master_seed, static_cast<uint64_t>(i));
    ens.paths[static_cast<size_t>(i)] =
        spec.stable ? simulate_stable_path(spec, x0, t_final, dt, seed, thr)
                    : simulate_path(spec, x0, t_final, dt, seed);
  });
  return ens;
}

PathEnsemble simulate_stationary_ensemble(const ProcessSpec& spec, const DensityField& rho_ss,
                                          long n_paths, double t_final, double dt,
                                          uint64_t master_seed, EnsembleOptions options) {
  PathEnsemble ens;
  ens.dt = dt;
  ens.t_final = t_final;
  ens.master_seed = master_seed;
  ens.spec_fingerprint = spec_fingerprint(spec);
  ens.paths.resize(static_cast<size_t>(n_paths));
  const double thr = options.stable_jump_threshold > 0.0 ? options.stable_jump_threshold : 0.1;
  parallel_for(n_paths, options.threads, [&](long i) {
    const uint64_t seed = sub_seed(master_seed, static_cast<uint64_t>(i));
    std::mt19937_64 init_rng(sub_seed(seed, 0x5eed));
    State x0(1);
    x0[0] = sample_from_density_1d(rho_ss, init_rng);
    ens.paths[static_cast<size_t>(i)] =
        spec.stable ? simulate_stable_path(spec, x0, t_final, dt, seed, thr)
                    : simulate_path(spec, x0, t_final, dt, seed);
  });
  return ens;
}

}  // namespace jumpepr
