#include "jumpepr/model.hpp"

#include <cmath>
#include <numbers>

namespace jumpepr {

namespace {

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr double kGlNodes[8] = {-0.9602898564975362, -0.7966664774136267, -0.5255324099163290,
                                -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                0.7966664774136267,  0.9602898564975362};
constexpr double kGlWeights[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                  0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                  0.2223810344533745, 0.1012285362903763};

double gauss_on_interval(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (b - a), m = 0.5 * (a + b);
  double s = 0.0;
  for (int i = 0; i < 8; ++i) s += kGlWeights[i] * f(m + c * kGlNodes[i]);
  return c * s;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

Eigen::MatrixXd ProcessSpec::diffusion_matrix(const State& x) const {
  if (zero_diffusion || !diffusion_factor) return Eigen::MatrixXd::Zero(dim, dim);
  const Eigen::MatrixXd a = diffusion_factor(x);
  return a * a.transpose();
}

uint64_t spec_fingerprint(const ProcessSpec& spec) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s|dim=%d|beta=%.17g|lambda=%.17g|stable=%.17g", spec.name.c_str(),
                spec.dim, spec.beta, spec.jump_rate, spec.stable ? spec.stable->alpha : -1.0);
  return fnv1a(buf);
}

double stable_levy_constant(double alpha) {
  if (!(alpha > 0.0) || !(alpha < 2.0))
    throw ConfigError("stable_levy_constant requires alpha in (0, 2)");
  const double pi = std::numbers::pi;
  return alpha * std::pow(2.0, alpha - 1.0) * std::tgamma(0.5 * (1.0 + alpha)) /
         (std::sqrt(pi) * std::tgamma(1.0 - 0.5 * alpha));
}

JumpKernel stable_jump_kernel(double alpha) {
  const double c = stable_levy_constant(alpha);
  JumpKernel k;
  k.singularity_order = 1.0 + alpha;
  k.singular_coefficient = c;
  k.rate = [c, alpha](const State& x, const State& y) {
    const double r = (x - y).norm();
    return c * std::pow(r, -(1.0 + alpha));
  };
  return k;
}

JumpKernel build_jump_kernel(const ProcessSpec& spec) {
  if (spec.kernel_override) return *spec.kernel_override;
  if (spec.stable) return stable_jump_kernel(spec.stable->alpha);
  if (!(spec.jump_rate > 0.0))
    throw ConfigError("build_jump_kernel: process has no jump part (lambda = 0)");
  if (!spec.jump_map || !spec.jump_map->inverse || !spec.jump_map->inverse_jacobian_det ||
      !spec.levy_density)
    throw ConfigError(
        "build_jump_kernel: lambda > 0 requires a jump_map with inverse (or a kernel_override)");
  const JumpMap map = *spec.jump_map;
  const ScalarFn m = spec.levy_density;
  const double lambda = spec.jump_rate;
  JumpKernel k;
  k.rate = [map, m, lambda](const State& x, const State& y) {
    const State w = y - x;
    const double det = map.inverse_jacobian_det(x, w);
    if (!(det > 0.0))
      throw AssumptionError("jump map inverse Jacobian determinant is not positive");
    return lambda * m(map.inverse(x, w)) * det;
  };
  return k;
}

State ito_drift(const ProcessSpec& spec, const State& x) {
  State b = spec.drift ? spec.drift(x) : State::Zero(spec.dim);
  if (spec.zero_diffusion || spec.constant_diffusion) return b;
  if (spec.div_A) return b + spec.div_A(x) / spec.beta;
  // central differences of A columns, step 1e-5
  const double eps = 1e-5;
  State corr = State::Zero(spec.dim);
  for (int j = 0; j < spec.dim; ++j) {
    State xp = x, xm = x;
    xp[j] += eps;
    xm[j] -= eps;
    const Eigen::MatrixXd Ap = spec.diffusion_matrix(xp);
    const Eigen::MatrixXd Am = spec.diffusion_matrix(xm);
    corr += (Ap.col(j) - Am.col(j)) / (2.0 * eps);
  }
  return b + corr / spec.beta;
}

IntegrabilityReport check_integrability(const ProcessSpec& spec, int quadrature_budget) {
  if (!spec.levy_density) throw ConfigError("check_integrability: no levy_density registered");
  if (spec.dim != 1) throw ConfigError("check_integrability implemented for dim = 1");
  if (quadrature_budget < 16) throw ConfigError("quadrature_budget must be >= 16");
  const ScalarFn& m = spec.levy_density;
  auto eval = [&](double z) {
    State s(1);
    s[0] = z;
    return m(s);
  };
  // Dyadic cells toward 0 (inner, weight z^2) and toward infinity (outer,
  // weight 1); each cell integrated by 8-point Gauss. Divergent integrals show
  // up as linear growth in the level count.
  auto inner_sum = [&](int levels) {
    double s = 0.0;
    for (int k = 0; k < levels; ++k) {
      const double hi = std::pow(2.0, -k), lo = 0.5 * hi;
      s += gauss_on_interval([&](double z) { return z * z * eval(z); }, lo, hi);
      s += gauss_on_interval([&](double z) { return z * z * eval(z); }, -hi, -lo);
    }
    return s;
  };
  auto outer_sum = [&](int levels) {
    double s = 0.0;
    for (int k = 0; k < levels; ++k) {
      const double lo = std::pow(2.0, k), hi = 2.0 * lo;
      s += gauss_on_interval([&](double z) { return eval(z); }, lo, hi);
      s += gauss_on_interval([&](double z) { return eval(z); }, -hi, -lo);
    }
    return s;
  };
  const int levels1 = std::max(8, quadrature_budget / 8);
  const int levels2 = 2 * levels1;
  IntegrabilityReport rep;
  const double inner1 = inner_sum(levels1), inner2 = inner_sum(levels2);
  const double outer1 = outer_sum(levels1), outer2 = outer_sum(levels2);
  rep.inner = inner2;
  rep.outer = outer2;
  rep.value = inner2 + outer2;
  const double v1 = inner1 + outer1;
  rep.relative_change = std::abs(rep.value - v1) / std::max(std::abs(rep.value), 1e-300);
  rep.converged = rep.relative_change <= 1e-3 && std::isfinite(rep.value);
  return rep;
}

RegularityReport check_regularity_E(const JumpKernel& kernel, const DensityField& density,
                                    long pair_samples, uint64_t seed) {
  if (pair_samples <= 0) throw ConfigError("pair_samples must be positive");
  const Grid& g = density.grid;
  const Eigen::ArrayXd w = g.trapezoid_weights();
  Eigen::ArrayXd cdf(w.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    acc += w[i] * std::max(density.values[i], 0.0);
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) throw NumericError("check_regularity_E: density not positive on its grid");
  cdf /= acc;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RegularityReport rep;
  rep.pairs = pair_samples;
  for (long s = 0; s < pair_samples; ++s) {
    // x: inverse-CDF over nodes (density-weighted); y: uniform on the box
    const double u = unif(rng);
    Eigen::Index lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
      const Eigen::Index mid = (lo + hi) / 2;
      if (cdf[mid] < u)
        lo = mid + 1;
      else
        hi = mid;
    }
    const State x = g.node(lo);
    State y(g.dim);
    for (int a = 0; a < g.dim; ++a)
      y[a] = g.lower[static_cast<size_t>(a)] +
             unif(rng) * (g.upper[static_cast<size_t>(a)] - g.lower[static_cast<size_t>(a)]);
    if ((x - y).norm() < 1e-12) continue;
    const double kxy = kernel.rate(x, y);
    const double kyx = kernel.rate(y, x);
    if (kxy < 0.0 || kyx < 0.0) throw AssumptionError("negative jump kernel value");
    if (kxy == 0.0 && kyx == 0.0) continue;
    if (kxy == 0.0 || kyx == 0.0) {
      rep.violations += 1;
      continue;
    }
    rep.max_kbar = std::max(rep.max_kbar, std::abs(kxy * std::log(kxy / kyx)));
  }
  return rep;
}

AssumptionReport check_assumptions(const ProcessSpec& spec, const std::vector<State>& probes,
                                   const std::vector<State>& jump_probes) {
  AssumptionReport rep;
  rep.min_A_eigenvalue = std::numeric_limits<double>::infinity();
  rep.min_inverse_jacobian = std::numeric_limits<double>::infinity();
  for (const State& x : probes) {
    const Eigen::MatrixXd A = spec.diffusion_matrix(x);
    rep.max_A_asymmetry = std::max(rep.max_A_asymmetry, (A - A.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    rep.min_A_eigenvalue = std::min(rep.min_A_eigenvalue, es.eigenvalues().minCoeff());
    const State b = spec.drift ? spec.drift(x) : State::Zero(spec.dim);
    rep.max_growth_ratio =
        std::max(rep.max_growth_ratio, (b.squaredNorm() + A.norm()) / (1.0 + x.squaredNorm()));
  }
  if (spec.jump_map) {
    for (const State& x : probes) {
      for (const State& z : jump_probes) {
        const State w = spec.jump_map->forward(x, z);
        const State z2 = spec.jump_map->inverse(x, w);
        rep.max_jumpmap_roundtrip = std::max(rep.max_jumpmap_roundtrip,
                                             (spec.jump_map->forward(x, z2) - w).norm());
        rep.min_inverse_jacobian =
            std::min(rep.min_inverse_jacobian, spec.jump_map->inverse_jacobian_det(x, w));
      }
    }
  }
  return rep;
}

}  // namespace jumpepr
