#include "dmb/score_model.hpp"

#include "dmb/errors.hpp"
#include "dmb/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace dmb {

namespace {

constexpr double kMinEmbeddingTime = 1e-9;

Eigen::MatrixXd silu(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

Eigen::MatrixXd silu_derivative(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
  });
}

}  // namespace

ScoreModel::ScoreModel(int d, int n, std::vector<int> hidden_widths, const NoiseSchedule& schedule, double eps_t,
                       std::uint64_t seed)
    : d_(d), n_(n), hidden_(std::move(hidden_widths)), schedule_(schedule), eps_t_(eps_t) {
  if (d < 1 || n < 2) throw InvalidArgument("ScoreModel: need d >= 1 and n >= 2");
  if (!(eps_t > 0.0) || !(eps_t < schedule.horizon())) throw InvalidArgument("ScoreModel: need 0 < eps_t < T");
  for (int w : hidden_) {
    if (w < 1) throw InvalidArgument("ScoreModel: hidden widths must be positive");
  }

  Rng rng(seed);
  std::vector<int> widths{input_width()};
  widths.insert(widths.end(), hidden_.begin(), hidden_.end());
  widths.push_back(output_width());
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.weight = Eigen::MatrixXd::Zero(widths[l + 1], widths[l]);
    layer.bias = Eigen::VectorXd::Zero(widths[l + 1]);
    const bool is_output = l + 2 == widths.size();
    if (!is_output) {
      std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / widths[l]));
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = normal(rng);
      }
    }
    layers_.push_back(std::move(layer));
  }
}

std::size_t ScoreModel::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_) count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return count;
}

Eigen::VectorXd ScoreModel::time_embedding(double t) const {
  const double lo = std::log(schedule_.beta(eps_t_));
  const double hi = std::log(schedule_.beta_terminal());
  const double tau = std::max(t, kMinEmbeddingTime);
  const double u = (std::log(schedule_.beta(tau)) - lo) / (hi - lo);
  Eigen::VectorXd emb(kTimeEmbeddingWidth);
  for (int k = 0; k < kTimeEmbeddingWidth / 2; ++k) {
    const double freq = 0.5 * std::numbers::pi * std::pow(2.0, 0.5 * k);
    emb[2 * k] = std::sin(freq * u);
    emb[2 * k + 1] = std::cos(freq * u);
  }
  return emb;
}

Eigen::MatrixXd ScoreModel::encode(const StateBatch& xt, std::span<const double> t) const {
  if (xt.size() != t.size()) throw InvalidArgument("ScoreModel: batch and time sizes differ");
  const auto batch = static_cast<Eigen::Index>(xt.size());
  Eigen::MatrixXd input = Eigen::MatrixXd::Zero(input_width(), batch);
  double cached_t = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd cached_emb;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const State& x = xt[b];
    if (static_cast<int>(x.size()) != d_) throw InvalidArgument("ScoreModel: sample has wrong d");
    for (int i = 0; i < d_; ++i) {
      if (x[i] < 0 || x[i] >= n_) throw InvalidArgument("ScoreModel: state out of range");
      input(i * n_ + x[i], b) = 1.0;
    }
    if (!(t[b] == cached_t)) {
      cached_t = t[b];
      cached_emb = time_embedding(t[b]);
    }
    input.block(d_ * n_, b, kTimeEmbeddingWidth, 1) = cached_emb;
  }
  return input;
}

Eigen::MatrixXd ScoreModel::forward_log(const StateBatch& xt, std::span<const double> t, Tape* tape) const {
  Eigen::MatrixXd h = encode(xt, t);
  if (tape != nullptr) {
    tape->inputs.clear();
    tape->preactivations.clear();
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * h;
    z.colwise() += layers_[l].bias;
    if (tape != nullptr) tape->inputs.push_back(h);
    if (l + 1 == layers_.size()) {
      h = std::move(z);
    } else {
      h = silu(z);
      if (tape != nullptr) tape->preactivations.push_back(std::move(z));
    }
  }
  if (tape != nullptr) tape->log_output = h;
  return h;
}

Eigen::MatrixXd ScoreModel::forward(const StateBatch& xt, std::span<const double> t) const {
  return forward_log(xt, t).array().exp().matrix();
}

LayerParams ScoreModel::backward(const Tape& tape, const Eigen::MatrixXd& grad_log_output) const {
  LayerParams grads(layers_.size());
  Eigen::MatrixXd g = grad_log_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    grads[l].weight = g * tape.inputs[l].transpose();
    grads[l].bias = g.rowwise().sum();
    if (l == 0) break;
    g = layers_[l].weight.transpose() * g;
    g.array() *= silu_derivative(tape.preactivations[l - 1]).array();
  }
  return grads;
}

bool ScoreModel::operator==(const ScoreModel& other) const {
  if (d_ != other.d_ || n_ != other.n_ || hidden_ != other.hidden_ || eps_t_ != other.eps_t_) return false;
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weight != other.layers_[l].weight || layers_[l].bias != other.layers_[l].bias) return false;
  }
  return true;
}

Eigen::MatrixXd score_forward(const ScoreModel& model, const State& xt, double t) {
  const double times[] = {t};
  const Eigen::MatrixXd column = model.forward(StateBatch{xt}, times);
  // Column entries are laid out i*n + y; reshape to d x n.
  Eigen::MatrixXd out(model.dims(), model.states());
  for (int i = 0; i < model.dims(); ++i) {
    for (int y = 0; y < model.states(); ++y) out(i, y) = column(i * model.states() + y, 0);
  }
  return out;
}

LayerParams zeros_like(const LayerParams& params) {
  LayerParams out(params.size());
  for (std::size_t l = 0; l < params.size(); ++l) {
    out[l].weight = Eigen::MatrixXd::Zero(params[l].weight.rows(), params[l].weight.cols());
    out[l].bias = Eigen::VectorXd::Zero(params[l].bias.size());
  }
  return out;
}

AdamOptimizer::AdamOptimizer(const LayerParams& shape, AdamConfig config)
    : config_(config), first_(zeros_like(shape)), second_(zeros_like(shape)) {}

void AdamOptimizer::step(LayerParams& params, const LayerParams& grads) {
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  const double lr = config_.learning_rate;
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = config_.beta1 * m + (1.0 - config_.beta1) * grad;
    v = config_.beta2 * v + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
    const auto m_hat = m.array() / c1;
    const auto v_hat = v.array() / c2;
    param.array() -= lr * (m_hat / (v_hat.sqrt() + config_.epsilon) + config_.weight_decay * param.array());
  };
  for (std::size_t l = 0; l < params.size(); ++l) {
    update(params[l].weight, grads[l].weight, first_[l].weight, second_[l].weight);
    update(params[l].bias, grads[l].bias, first_[l].bias, second_[l].bias);
  }
}

}  // namespace dmb
