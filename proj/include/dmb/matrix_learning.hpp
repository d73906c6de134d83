#pragma once

// Forward variational stage: fit the per-dimension rates a by minimizing
//
//   J_Q = E_{x0 ~ batch} sum_i KL( exp(beta_T Q_i)[x0_i, .] || p0_i exp(beta_T Q_i) ).

#include "dmb/ctdmc.hpp"
#include "dmb/prob.hpp"

#include <vector>

namespace dmb {

enum class InitScheme {
  kAbsorbingText,  // a_i = 0, a_{n-1} = 1
  kUniformSmall,   // a_i = 1e-5
};

std::vector<FactorizedRateMatrix> initial_rate_matrices(const std::vector<Permutation>& perms, InitScheme scheme);

struct MatrixLearnState {
  std::vector<FactorizedRateMatrix> q_per_dim;
  ProductDistribution p0_estimate;
  double step_size = 0.1;
  // Loss after every accepted update.
  std::vector<double> loss_history;
  // Loss at the current rates; refreshed by matrix_learning_loop.
  double current_loss = 0.0;

  int dims() const { return static_cast<int>(q_per_dim.size()); }
  int states() const { return q_per_dim.empty() ? 0 : q_per_dim.front().n(); }
};

double jq_loss(const MatrixLearnState& state, const StateBatch& batch, const NoiseSchedule& schedule);

// Gradient of jq_loss with respect to every a_k, p0_estimate held fixed.
std::vector<Eigen::VectorXd> jq_grad(const MatrixLearnState& state, const StateBatch& batch,
                                     const NoiseSchedule& schedule);

struct MatrixLoopResult {
  int updates = 0;
  int step_halvings = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Projected gradient descent with Armijo backtracking on a fixed batch.
// Stops after max_step accepted updates, when the loss drops below eps_q, or
// when no step size along the projected gradient lowers the loss.
MatrixLoopResult matrix_learning_loop(MatrixLearnState& state, const StateBatch& batch, const NoiseSchedule& schedule,
                                      int max_step, double eps_q);

// p0_estimate evolved to t = T in every dimension.
ProductDistribution predict_terminal(const MatrixLearnState& state, const NoiseSchedule& schedule);

}  // namespace dmb
