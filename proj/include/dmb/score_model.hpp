#pragma once

// Multilayer perceptron s_theta(x_t, t) producing d x n positive ratio
// estimates. Inputs are one-hot states per dimension concatenated with a
// sinusoidal embedding of the time; hidden layers use SiLU; the output head
// is exponentiated. The final layer starts at zero so s == 1 initially.

#include "dmb/ctdmc.hpp"
#include "dmb/prob.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace dmb {

inline constexpr int kTimeEmbeddingWidth = 16;

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Parameter-shaped container, used for both weights and gradients.
using LayerParams = std::vector<DenseLayer>;

class ScoreModel {
 public:
  ScoreModel() = default;
  ScoreModel(int d, int n, std::vector<int> hidden_widths, const NoiseSchedule& schedule, double eps_t,
             std::uint64_t seed);

  int dims() const { return d_; }
  int states() const { return n_; }
  int input_width() const { return d_ * n_ + kTimeEmbeddingWidth; }
  int output_width() const { return d_ * n_; }
  const std::vector<int>& hidden_widths() const { return hidden_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  double eps_t() const { return eps_t_; }
  std::size_t parameter_count() const;

  const LayerParams& layers() const { return layers_; }
  LayerParams& layers() { return layers_; }

  // Embedding of t on the log-beta scale, normalized to [0, 1] over [eps_t, T].
  Eigen::VectorXd time_embedding(double t) const;

  // Activations kept for the backward pass.
  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;       // input to each layer
    std::vector<Eigen::MatrixXd> preactivations;  // hidden layers only
    Eigen::MatrixXd log_output;                // (d n) x B
  };

  // Log ratios, (d n) x B; column b is sample b, entry i*n + y.
  Eigen::MatrixXd forward_log(const StateBatch& xt, std::span<const double> t, Tape* tape = nullptr) const;
  // exp(forward_log).
  Eigen::MatrixXd forward(const StateBatch& xt, std::span<const double> t) const;

  // Gradient of a scalar loss given d loss / d log_output.
  LayerParams backward(const Tape& tape, const Eigen::MatrixXd& grad_log_output) const;

  bool operator==(const ScoreModel& other) const;

 private:
  Eigen::MatrixXd encode(const StateBatch& xt, std::span<const double> t) const;

  int d_ = 0;
  int n_ = 0;
  std::vector<int> hidden_;
  NoiseSchedule schedule_;
  double eps_t_ = 1e-3;
  LayerParams layers_;
};

// d x n positive ratios for a single state.
Eigen::MatrixXd score_forward(const ScoreModel& model, const State& xt, double t);

LayerParams zeros_like(const LayerParams& params);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW)
};

class AdamOptimizer {
 public:
  AdamOptimizer(const LayerParams& shape, AdamConfig config);
  void step(LayerParams& params, const LayerParams& grads);
  long steps() const { return steps_; }

 private:
  AdamConfig config_;
  LayerParams first_;
  LayerParams second_;
  long steps_ = 0;
};

}  // namespace dmb
