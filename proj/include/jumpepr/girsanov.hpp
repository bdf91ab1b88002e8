#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "jumpepr/fokker_planck.hpp"
#include "jumpepr/simulate.hpp"

namespace jumpepr {

// The four terms of log(P^R / P) along one path. total() is the bookkeeping
// sum; the EPR estimator is -mean(total)/T over a stationary ensemble.
struct LogRnAccumulator {
  double martingale_part = 0.0;
  double drift_part = 0.0;
  double jump_log_part = 0.0;
  double jump_compensator_part = 0.0;

  double total() const {
    return martingale_part + drift_part + jump_log_part + jump_compensator_part;
  }
  LogRnAccumulator& operator+=(const LogRnAccumulator& o) {
    martingale_part += o.martingale_part;
    drift_part += o.drift_part;
    jump_log_part += o.jump_log_part;
    jump_compensator_part += o.jump_compensator_part;
    return *this;
  }
};

// Closed-form stationary law, used instead of grid tables when available.
struct ClosedFormLaw {
  ScalarFn log_rho;
  VectorFn score;  // grad log rho
};

// Precomputed tables for the pathwise accumulator: log rho and its gradient,
// the per-state compensator integral G(x) = int (k_R/k - 1) k dz, and the
// small-jump Taylor term for singular kernels.
struct GirsanovContext {
  ProcessSpec spec;
  JumpKernel kernel;
  DensityField rho_ss;
  BandScheme band{};
  double delta_small = 0.0;  // jumps below this size are absorbed analytically
  bool has_jumps = false;
  bool singular = false;
  std::optional<ClosedFormLaw> closed_form;

  Eigen::ArrayXd log_rho_nodes;
  Eigen::MatrixXd score_nodes;
  Eigen::ArrayXd compensator_nodes;  // G(x) at nodes
  Eigen::ArrayXd taylor_nodes;       // c_T |score|^2 at nodes (singular kernels)
  Eigen::MatrixXd inv_A;             // constant A^{-1} (diffusive case)
  double floor = 0.0;
  uint64_t fingerprint = 0;
};

GirsanovContext build_girsanov_context(const ProcessSpec& spec, const JumpKernel& kernel,
                                       const DensityField& rho_ss, BandScheme band = {},
                                       std::optional<ClosedFormLaw> closed_form = std::nullopt);

struct PathLogRn {
  LogRnAccumulator acc;
  bool valid = true;
  long small_jumps_absorbed = 0;
};

// Accumulates log(P^R/P) over steps [step_begin, step_end); the two halves of
// a path sum exactly to the whole.
PathLogRn pathwise_log_rn_range(const Path& path, const GirsanovContext& ctx, long step_begin,
                                long step_end);
PathLogRn pathwise_log_rn(const Path& path, const GirsanovContext& ctx);

struct EprKlEstimate {
  double epr_estimate = 0.0;
  double standard_error = 0.0;
  double discard_fraction = 0.0;
  long retained = 0;
  std::vector<LogRnAccumulator> per_path;  // retained-path accumulators, in path order
  std::vector<int> valid;                  // per input path
};

// e_p^ss = -(1/T) E[log(P^R/P)] over a stationary ensemble; refuses when the
// discard fraction reaches 5% (support problem).
EprKlEstimate estimate_epr_kl(const PathEnsemble& ensemble, const GirsanovContext& ctx,
                              int threads = 1);
EprKlEstimate estimate_epr_kl(const PathEnsemble& ensemble, const ProcessSpec& spec,
                              const JumpKernel& kernel, const DensityField& rho_ss,
                              BandScheme band = {}, int threads = 1);

}  // namespace jumpepr
