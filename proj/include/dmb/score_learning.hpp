#pragma once

// Backward stage: the denoising score-entropy objective
//
//   (T - eps_t) E_{t, x0, x_t} sum_i sum_{y != x_t^i} sigma(t) Q_i[y][x_t^i]
//       * ( s_y - r_y + r_y (ln r_y - ln s_y) ),
//   r_y = p_{t|0}(y | x0^i) / p_{t|0}(x_t^i | x0^i),
//
// and the ratio sources (network or exact posterior) consumed by the sampler.

#include "dmb/ctdmc.hpp"
#include "dmb/prob.hpp"
#include "dmb/random.hpp"
#include "dmb/score_model.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace dmb {

using RateMatrices = std::vector<FactorizedRateMatrix>;

inline constexpr double kDefaultEpsT = 1e-3;

struct ScoreBatch {
  StateBatch x0;
  std::vector<double> t;
  StateBatch xt;

  std::size_t size() const { return x0.size(); }
};

// Per dimension, a draw from row x0_i of exp(beta(t) Q_i).
State sample_xt_given_x0(const State& x0, const RateMatrices& q, const NoiseSchedule& schedule, double t, Rng& rng);

// Times uniform on (eps_t, T), then x_t given each x0.
ScoreBatch make_score_batch(const StateBatch& x0, const RateMatrices& q, const NoiseSchedule& schedule, double eps_t,
                            Rng& rng);

// Anything that can produce positive ratio estimates s(x_t, t). Output is
// (d n) x B with entry i*n + y of column b for dimension i, target state y.
class RatioSource {
 public:
  virtual ~RatioSource() = default;
  virtual Eigen::MatrixXd ratios(const StateBatch& xt, std::span<const double> t) const = 0;
};

class NetworkRatios final : public RatioSource {
 public:
  explicit NetworkRatios(const ScoreModel& model) : model_(model) {}
  Eigen::MatrixXd ratios(const StateBatch& xt, std::span<const double> t) const override;

 private:
  const ScoreModel& model_;
};

// The optimal ratio sum_x0 mu(x0) p(y|x0) / sum_x0 mu(x0) p(x_t|x0) in every dimension.
class OracleRatios final : public RatioSource {
 public:
  OracleRatios(ProductDistribution mu, RateMatrices q, NoiseSchedule schedule);
  Eigen::MatrixXd ratios(const StateBatch& xt, std::span<const double> t) const override;

 private:
  ProductDistribution mu_;
  RateMatrices q_;
  NoiseSchedule schedule_;
};

// d x n exact posterior ratios for one state. Throws NumericalError when
// p_t(x_t) falls below 1e-300.
Eigen::MatrixXd exact_score_oracle(const ProductDistribution& mu, const RateMatrices& q, const NoiseSchedule& schedule,
                                   const State& xt, double t);

struct ScoreLossTerms {
  double loss = 0.0;
  // Per-sample loss (already scaled by T - eps_t), used for standard errors.
  Eigen::VectorXd per_sample;
  // d loss / d ln s, same layout as the ratio matrix.
  Eigen::MatrixXd grad_log_ratio;
};

// Core evaluation on explicit ratio estimates.
ScoreLossTerms score_entropy_terms(const Eigen::MatrixXd& ratios, const ScoreBatch& batch, const RateMatrices& q,
                                   const NoiseSchedule& schedule, double eps_t = kDefaultEpsT);

double score_entropy_loss(const ScoreModel& model, const ScoreBatch& batch, const RateMatrices& q,
                          const NoiseSchedule& schedule);
double score_entropy_loss(const RatioSource& source, const ScoreBatch& batch, const RateMatrices& q,
                          const NoiseSchedule& schedule, double eps_t = kDefaultEpsT);

struct ScoreGradient {
  double loss = 0.0;
  LayerParams grads;
};

// Exact reverse-mode gradient of score_entropy_loss on a fixed batch.
ScoreGradient score_grad(const ScoreModel& model, const ScoreBatch& batch, const RateMatrices& q,
                         const NoiseSchedule& schedule);

struct ScoreLoopConfig {
  int max_step = 1000;
  double eps_score = 1e-4;
  int batch_size = 128;
  AdamConfig adam;
  double smoothing = 0.98;  // exponential moving average of the loss
  double divergence_factor = 10.0;
};

struct ScoreLoopResult {
  int updates = 0;
  double initial_loss = 0.0;
  double smoothed_loss = 0.0;
};

// Adam on fresh minibatches drawn with replacement from `dataset`. Stops at
// the step cap or once the smoothed loss is below eps_score.
ScoreLoopResult score_learning_loop(ScoreModel& model, const StateBatch& dataset, const RateMatrices& q,
                                    const NoiseSchedule& schedule, const ScoreLoopConfig& config, Rng& rng);

}  // namespace dmb
