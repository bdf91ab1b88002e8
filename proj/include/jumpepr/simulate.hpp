#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "jumpepr/density.hpp"
#include "jumpepr/grid.hpp"
#include "jumpepr/model.hpp"

namespace jumpepr {

// Jump applied at the end of a step: recorded with its time, the state just
// before the displacement, and the displacement itself.
struct JumpEvent {
  double time = 0.0;
  long step = 0;  // the increment index this jump belongs to (state step -> step+1)
  Eigen::VectorXd pre_state;
  Eigen::VectorXd delta;
};

// Cadlag trajectory at step resolution: states on the uniform time grid plus
// explicit jump events.
struct Path {
  Eigen::ArrayXd times;
  Eigen::MatrixXd states;  // (steps + 1) x dim
  std::vector<JumpEvent> jumps;
  uint64_t seed = 0;
  double dt = 0.0;
  double t_final = 0.0;
};

struct PathEnsemble {
  std::vector<Path> paths;
  double dt = 0.0;
  double t_final = 0.0;
  uint64_t spec_fingerprint = 0;
  uint64_t master_seed = 0;
};

// Disjoint per-path seeds derived from a master seed (splitmix64 counter).
uint64_t sub_seed(uint64_t master, uint64_t index);

// Symmetric alpha-stable draw of unit scale by the Chambers-Mallows-Stuck
// transform; scale c gives S(alpha, c) with characteristic function
// exp(-c^alpha |xi|^alpha).
double sample_symmetric_stable(double alpha, std::mt19937_64& rng);

// Euler-Maruyama for the compound-Poisson jump diffusion in Ito form:
// x += (b + beta^{-1} div A) dt + sqrt(2/beta) a sqrt(dt) xi + jumps.
// Jump counts are Poisson(lambda ||m||_1 dt); sizes z ~ m/||m||_1, displacement
// sigma(x, z), applied sequentially at the step boundary.
Path simulate_path(const ProcessSpec& spec, const Eigen::VectorXd& x0, double t_final, double dt,
                   uint64_t seed);

// Exact alpha-stable increments of scale dt^{1/alpha} plus Euler drift.
// Increments larger than jump_record_threshold are recorded as jump events.
Path simulate_stable_path(const ProcessSpec& spec, const Eigen::VectorXd& x0, double t_final,
                          double dt, uint64_t seed, double jump_record_threshold);

// Reversed drift b_R(x) = -b(x) + 2 beta^{-1} A(x) s(x) with s the grid score.
Eigen::VectorXd reversed_drift(const ProcessSpec& spec, const DensityField& rho_ss,
                               const GradientField& score, const Eigen::VectorXd& x);

// Reversed kernel k_R(x, y) = rho_ss(y) k(y, x) / rho_ss(x).
double reversed_kernel(const JumpKernel& kernel, const DensityField& rho_ss,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Stationary time reversal: Euler-Maruyama with drift b_R and jumps thinned
// against the grid-discretized reversed kernel (inverse-CDF landing nodes).
// Requires constant a and a compound-Poisson (bounded-rate) kernel.
Path simulate_reversed_path(const ProcessSpec& spec, const JumpKernel& kernel,
                            const DensityField& rho_ss, const Eigen::VectorXd& x0, double t_final,
                            double dt, uint64_t seed);

struct EnsembleOptions {
  int threads = 1;
  double stable_jump_threshold = -1.0;  // < 0: use grid-free default 0.1
};

// Independent paths from a fixed start point.
PathEnsemble simulate_ensemble(const ProcessSpec& spec, const Eigen::VectorXd& x0, long n_paths,
                               double t_final, double dt, uint64_t master_seed,
                               EnsembleOptions options = {});

// Independent paths with x0 drawn from a 1D stationary density.
PathEnsemble simulate_stationary_ensemble(const ProcessSpec& spec, const DensityField& rho_ss,
                                          long n_paths, double t_final, double dt,
                                          uint64_t master_seed, EnsembleOptions options = {});

}  // namespace jumpepr
