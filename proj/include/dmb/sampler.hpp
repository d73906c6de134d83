#pragma once

// Reverse-time generation with Euler steps on the reverse generator
//   Qhat_t[x][y] = s(x, t)_y sigma(t) Q[y][x],
// and the trajectory-averaged estimate of the data marginals.

#include "dmb/ctdmc.hpp"
#include "dmb/prob.hpp"
#include "dmb/random.hpp"
#include "dmb/score_learning.hpp"

#include <Eigen/Dense>

namespace dmb {

struct SamplerConfig {
  int num_steps = 128;
  double eps_t = kDefaultEpsT;
  // Trajectories advanced together per ratio-source call.
  int batch_size = 1024;
};

struct SamplerDiagnostics {
  long rows = 0;
  long clamped_rows = 0;   // rows where a negative probability was clamped
  long fallback_rows = 0;  // rows with no mass left after clamping (stayed put)
};

// delta_x + dt * Qhat row, clamped at zero and renormalized. `ratios` is the
// length-n ratio vector for this dimension; the entry at x is ignored.
Eigen::VectorXd euler_step_distribution(const FactorizedRateMatrix& q, double sigma_t, double dt,
                                        const Eigen::VectorXd& ratios, int x, SamplerDiagnostics* diag = nullptr);

// One reverse step of every dimension. `ratios` is d x n.
State euler_reverse_step(const State& xt, double t, double dt, const Eigen::MatrixXd& ratios, const RateMatrices& q,
                         const NoiseSchedule& schedule, Rng& rng, SamplerDiagnostics* diag = nullptr);

// x_T ~ terminal, then num_steps Euler steps on the uniform grid from T down to eps_t.
StateBatch generate(const SamplerConfig& config, const ProductDistribution& terminal, const RateMatrices& q,
                    const NoiseSchedule& schedule, const RatioSource& source, Rng& rng, int count,
                    SamplerDiagnostics* diag = nullptr);

// Average over `trajectories` reverse runs of the final-step categorical,
// kept as a full distribution instead of being sampled.
ProductDistribution estimate_mu(const SamplerConfig& config, const ProductDistribution& terminal,
                                const RateMatrices& q, const NoiseSchedule& schedule, const RatioSource& source,
                                Rng& rng, int trajectories, SamplerDiagnostics* diag = nullptr);

double tv_distance(const ProbVector& p, const ProbVector& q);
double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

// Per-dimension histogram of samples (no smoothing).
ProductDistribution empirical_marginals(const StateBatch& samples, int n);

}  // namespace dmb
