#include "dmb/matrix_learning.hpp"

#include "dmb/errors.hpp"

#include <cmath>
#include <string>

namespace dmb {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kStepGrowth = 2.0;
constexpr double kMaxStep = 1e6;
constexpr int kMaxHalvings = 60;

void check_inputs(const MatrixLearnState& state, const StateBatch& batch) {
  if (batch.empty()) throw InvalidArgument("jq_loss: empty batch");
  if (state.dims() == 0 || state.p0_estimate.dims() != state.dims() || state.p0_estimate.states() != state.states()) {
    throw InvalidArgument("jq_loss: state shape mismatch");
  }
  for (const auto& x : batch) {
    if (static_cast<int>(x.size()) != state.dims()) throw InvalidArgument("jq_loss: sample has wrong d");
    for (int s : x) {
      if (s < 0 || s >= state.states()) throw InvalidArgument("jq_loss: state out of range");
    }
  }
}

// Fraction of the batch at each state of dimension i.
Eigen::VectorXd batch_weights(const StateBatch& batch, int dim, int n) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (const auto& x : batch) w[x[dim]] += 1.0;
  return w / static_cast<double>(batch.size());
}

double dimension_loss(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& terminal, const Eigen::VectorXd& weights) {
  double loss = 0.0;
  for (Eigen::Index x = 0; x < kernel.rows(); ++x) {
    if (weights[x] == 0.0) continue;
    loss += weights[x] * kl_divergence(Eigen::VectorXd(kernel.row(x).transpose()), terminal, kRatioFloor);
  }
  return loss;
}

}  // namespace

std::vector<FactorizedRateMatrix> initial_rate_matrices(const std::vector<Permutation>& perms, InitScheme scheme) {
  std::vector<FactorizedRateMatrix> out;
  out.reserve(perms.size());
  for (const auto& perm : perms) {
    switch (scheme) {
      case InitScheme::kAbsorbingText:
        out.push_back(FactorizedRateMatrix::absorbing(perm));
        break;
      case InitScheme::kUniformSmall:
        out.push_back(FactorizedRateMatrix::uniform_rates(perm, 1e-5));
        break;
    }
  }
  return out;
}

double jq_loss(const MatrixLearnState& state, const StateBatch& batch, const NoiseSchedule& schedule) {
  check_inputs(state, batch);
  const double beta_t = schedule.beta_terminal();
  const int n = state.states();
  double loss = 0.0;
  for (int i = 0; i < state.dims(); ++i) {
    const Eigen::MatrixXd kernel = transition_kernel(state.q_per_dim[i], beta_t);
    const Eigen::VectorXd terminal = kernel.transpose() * state.p0_estimate[i].values();
    loss += dimension_loss(kernel, terminal, batch_weights(batch, i, n));
  }
  return loss;
}

std::vector<Eigen::VectorXd> jq_grad(const MatrixLearnState& state, const StateBatch& batch,
                                     const NoiseSchedule& schedule) {
  check_inputs(state, batch);
  const double beta_t = schedule.beta_terminal();
  const int n = state.states();
  std::vector<Eigen::VectorXd> grads;
  grads.reserve(static_cast<std::size_t>(state.dims()));

  for (int i = 0; i < state.dims(); ++i) {
    const FactorizedRateMatrix& q = state.q_per_dim[i];
    const Eigen::VectorXd& p0 = state.p0_estimate[i].values();
    const Eigen::MatrixXd kernel = transition_kernel(q, beta_t);
    const Eigen::VectorXd terminal = kernel.transpose() * p0;
    const Eigen::VectorXd weights = batch_weights(batch, i, n);

    // d loss / d terminal[y], through the floor (zero where the floor is active).
    Eigen::VectorXd terminal_pull = Eigen::VectorXd::Zero(n);
    for (int y = 0; y < n; ++y) {
      if (terminal[y] <= kRatioFloor) continue;
      double acc = 0.0;
      for (int x = 0; x < n; ++x) acc += weights[x] * kernel(x, y);
      terminal_pull[y] = acc / terminal[y];
    }

    // d loss / d kernel[z][y]. The constant +1 from d(k ln k) drops out because
    // every kernel row sums to one for all a.
    Eigen::MatrixXd g(n, n);
    for (int z = 0; z < n; ++z) {
      for (int y = 0; y < n; ++y) {
        double entry = -p0[z] * terminal_pull[y];
        if (weights[z] > 0.0) {
          // Same floor on both logs, so entries where kernel and terminal vanish together cancel.
          entry += weights[z] * (std::log(std::max(kernel(z, y), kRatioFloor)) -
                                 std::log(std::max(terminal[y], kRatioFloor)));
        }
        g(z, y) = entry;
      }
    }

    // Back to sorted coordinates: kernel_sorted[r][c] = D_c - D_{c-1} (c > r), D_r (c = r).
    const auto& perm = q.perm();
    const Eigen::VectorXd factors = (beta_t * q.eigenvalues()).array().exp().matrix();
    Eigen::VectorXd d_factor = Eigen::VectorXd::Zero(n);
    for (int c = 0; c < n; ++c) {
      const int yc = perm.state_at(c);
      double acc = 0.0;
      for (int r = 0; r <= c; ++r) {
        const int zr = perm.state_at(r);
        acc += g(zr, yc);
        if (c + 1 < n) acc -= g(zr, perm.state_at(c + 1));
      }
      d_factor[c] = acc;
    }
    // D_c = exp(-beta sum_{k >= c} a_k), so dD_c/da_k = -beta D_c for c <= k.
    Eigen::VectorXd grad(n - 1);
    double running = 0.0;
    for (int k = 0; k < n - 1; ++k) {
      running += d_factor[k] * factors[k];
      grad[k] = -beta_t * running;
    }
    grads.push_back(std::move(grad));
  }
  return grads;
}

MatrixLoopResult matrix_learning_loop(MatrixLearnState& state, const StateBatch& batch, const NoiseSchedule& schedule,
                                      int max_step, double eps_q) {
  if (max_step < 1) throw InvalidArgument("matrix_learning_loop: max_step must be at least 1");
  if (!(state.step_size > 0.0)) throw InvalidArgument("matrix_learning_loop: step size must be positive");

  MatrixLoopResult result;
  double loss = jq_loss(state, batch, schedule);
  if (!std::isfinite(loss)) throw NumericalError("matrix_learning_loop: initial J_Q is not finite");
  result.initial_loss = loss;

  while (result.updates < max_step && loss >= eps_q) {
    const auto grads = jq_grad(state, batch, schedule);
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxHalvings; ++attempt) {
      MatrixLearnState trial = state;
      double decrease = 0.0;
      for (int i = 0; i < state.dims(); ++i) {
        const Eigen::VectorXd& a = state.q_per_dim[i].rates();
        trial.q_per_dim[i].set_rates_projected(a - state.step_size * grads[i]);
        decrease += grads[i].dot(a - trial.q_per_dim[i].rates());
      }
      if (!(decrease > 0.0)) break;  // projected gradient vanished
      const double trial_loss = jq_loss(trial, batch, schedule);
      if (std::isfinite(trial_loss) && trial_loss <= loss - kArmijo * decrease) {
        state.q_per_dim = std::move(trial.q_per_dim);
        loss = trial_loss;
        state.step_size = std::min(state.step_size * kStepGrowth, kMaxStep);
        accepted = true;
        break;
      }
      state.step_size *= 0.5;
      ++result.step_halvings;
    }
    if (!accepted) break;
    if (!std::isfinite(loss)) {
      throw NumericalError("matrix_learning_loop: J_Q became non-finite at update " + std::to_string(result.updates));
    }
    state.loss_history.push_back(loss);
    ++result.updates;
  }
  state.current_loss = loss;
  result.final_loss = loss;
  return result;
}

ProductDistribution predict_terminal(const MatrixLearnState& state, const NoiseSchedule& schedule) {
  const double beta_t = schedule.beta_terminal();
  std::vector<ProbVector> marginals;
  marginals.reserve(static_cast<std::size_t>(state.dims()));
  for (int i = 0; i < state.dims(); ++i) {
    marginals.push_back(evolve(state.p0_estimate[i], state.q_per_dim[i], beta_t));
  }
  return ProductDistribution(std::move(marginals));
}

}  // namespace dmb
