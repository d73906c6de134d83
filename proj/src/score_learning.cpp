#include "dmb/score_learning.hpp"

#include "dmb/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dmb {

namespace {

constexpr double kOracleFloor = 1e-300;

void check_rate_matrices(const RateMatrices& q, int d) {
  if (static_cast<int>(q.size()) != d) throw InvalidArgument("rate matrices do not match d");
}

// p_t in every dimension for the oracle.
std::vector<Eigen::VectorXd> marginals_at(const ProductDistribution& mu, const RateMatrices& q,
                                          const NoiseSchedule& schedule, double t) {
  const double b = schedule.beta(t);
  std::vector<Eigen::VectorXd> out;
  out.reserve(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out.push_back(evolve(mu[static_cast<int>(i)].values(), q[i], b));
  return out;
}

void fill_oracle_column(const std::vector<Eigen::VectorXd>& marginals, const State& xt, int n,
                        Eigen::Ref<Eigen::VectorXd> column) {
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    const double denom = marginals[i][xt[i]];
    if (!(denom >= kOracleFloor)) {
      std::ostringstream msg;
      msg << "exact_score_oracle: p_t(x_t) = " << denom << " in dimension " << i << " at state " << xt[i];
      throw NumericalError(msg.str());
    }
    for (int y = 0; y < n; ++y) column[static_cast<Eigen::Index>(i) * n + y] = marginals[i][y] / denom;
  }
}

}  // namespace

State sample_xt_given_x0(const State& x0, const RateMatrices& q, const NoiseSchedule& schedule, double t, Rng& rng) {
  check_rate_matrices(q, static_cast<int>(x0.size()));
  const double b = schedule.beta(t);
  State xt(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if (b == 0.0) {
      xt[i] = x0[i];
      continue;
    }
    xt[i] = sample_categorical(kernel_row(q[i], b, x0[i]), rng);
  }
  return xt;
}

ScoreBatch make_score_batch(const StateBatch& x0, const RateMatrices& q, const NoiseSchedule& schedule, double eps_t,
                            Rng& rng) {
  ScoreBatch batch;
  batch.x0 = x0;
  batch.t.reserve(x0.size());
  batch.xt.reserve(x0.size());
  const double span = schedule.horizon() - eps_t;
  for (const auto& x : x0) {
    const double t = eps_t + span * uniform01(rng);
    batch.t.push_back(t);
    batch.xt.push_back(sample_xt_given_x0(x, q, schedule, t, rng));
  }
  return batch;
}

Eigen::MatrixXd NetworkRatios::ratios(const StateBatch& xt, std::span<const double> t) const {
  return model_.forward(xt, t);
}

OracleRatios::OracleRatios(ProductDistribution mu, RateMatrices q, NoiseSchedule schedule)
    : mu_(std::move(mu)), q_(std::move(q)), schedule_(schedule) {
  check_rate_matrices(q_, mu_.dims());
}

Eigen::MatrixXd OracleRatios::ratios(const StateBatch& xt, std::span<const double> t) const {
  if (xt.size() != t.size()) throw InvalidArgument("OracleRatios: batch and time sizes differ");
  const int n = mu_.states();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(mu_.dims()) * n, static_cast<Eigen::Index>(xt.size()));
  double cached_t = std::numeric_limits<double>::quiet_NaN();
  std::vector<Eigen::VectorXd> marginals;
  for (std::size_t b = 0; b < xt.size(); ++b) {
    if (!(t[b] == cached_t)) {
      cached_t = t[b];
      marginals = marginals_at(mu_, q_, schedule_, t[b]);
    }
    fill_oracle_column(marginals, xt[b], n, out.col(static_cast<Eigen::Index>(b)));
  }
  return out;
}

Eigen::MatrixXd exact_score_oracle(const ProductDistribution& mu, const RateMatrices& q, const NoiseSchedule& schedule,
                                   const State& xt, double t) {
  check_rate_matrices(q, mu.dims());
  const int n = mu.states();
  Eigen::VectorXd column(static_cast<Eigen::Index>(mu.dims()) * n);
  fill_oracle_column(marginals_at(mu, q, schedule, t), xt, n, column);
  Eigen::MatrixXd out(mu.dims(), n);
  for (int i = 0; i < mu.dims(); ++i) out.row(i) = column.segment(static_cast<Eigen::Index>(i) * n, n).transpose();
  return out;
}

ScoreLossTerms score_entropy_terms(const Eigen::MatrixXd& ratios, const ScoreBatch& batch, const RateMatrices& q,
                                   const NoiseSchedule& schedule, double eps_t) {
  const std::size_t size = batch.size();
  if (size == 0) throw InvalidArgument("score_entropy_loss: empty batch");
  if (batch.t.size() != size || batch.xt.size() != size) throw InvalidArgument("score_entropy_loss: ragged batch");
  const int d = static_cast<int>(batch.x0.front().size());
  check_rate_matrices(q, d);
  const int n = q.front().n();
  if (ratios.rows() != static_cast<Eigen::Index>(d) * n || ratios.cols() != static_cast<Eigen::Index>(size)) {
    throw InvalidArgument("score_entropy_loss: ratio matrix has wrong shape");
  }

  std::vector<Eigen::MatrixXd> dense;
  dense.reserve(q.size());
  for (const auto& m : q) dense.push_back(materialize_dense(m));

  const double weight = (schedule.horizon() - eps_t) / static_cast<double>(size);
  ScoreLossTerms out;
  out.per_sample = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
  out.grad_log_ratio = Eigen::MatrixXd::Zero(ratios.rows(), ratios.cols());

  for (std::size_t b = 0; b < size; ++b) {
    const double t = batch.t[b];
    const double sigma = schedule.sigma(t);
    const double beta_t = schedule.beta(t);
    double sample_loss = 0.0;
    for (int i = 0; i < d; ++i) {
      const int x0 = batch.x0[b][i];
      const int x = batch.xt[b][i];
      const Eigen::VectorXd row = kernel_row(q[i], beta_t, x0);
      const double denom = std::max(row[x], kRatioFloor);
      for (int y = 0; y < n; ++y) {
        if (y == x) continue;
        const double w = sigma * dense[i](y, x);
        if (w == 0.0) continue;
        const double r = row[y] / denom;
        const double s = ratios(static_cast<Eigen::Index>(i) * n + y, static_cast<Eigen::Index>(b));
        const double log_term = r > 0.0 ? r * (std::log(r) - std::log(s)) : 0.0;
        const double term = w * (s - r + log_term);
        if (!std::isfinite(term)) {
          std::ostringstream msg;
          msg << "score_entropy_loss: non-finite term at dim " << i << ", y " << y << ", t " << t;
          throw NumericalError(msg.str());
        }
        sample_loss += term;
        out.grad_log_ratio(static_cast<Eigen::Index>(i) * n + y, static_cast<Eigen::Index>(b)) = weight * w * (s - r);
      }
    }
    out.per_sample[static_cast<Eigen::Index>(b)] = (schedule.horizon() - eps_t) * sample_loss;
  }
  out.loss = out.per_sample.mean();
  return out;
}

double score_entropy_loss(const ScoreModel& model, const ScoreBatch& batch, const RateMatrices& q,
                          const NoiseSchedule& schedule) {
  if (batch.size() == 0) throw InvalidArgument("score_entropy_loss: empty batch");
  return score_entropy_terms(model.forward(batch.xt, batch.t), batch, q, schedule, model.eps_t()).loss;
}

double score_entropy_loss(const RatioSource& source, const ScoreBatch& batch, const RateMatrices& q,
                          const NoiseSchedule& schedule, double eps_t) {
  if (batch.size() == 0) throw InvalidArgument("score_entropy_loss: empty batch");
  return score_entropy_terms(source.ratios(batch.xt, batch.t), batch, q, schedule, eps_t).loss;
}

ScoreGradient score_grad(const ScoreModel& model, const ScoreBatch& batch, const RateMatrices& q,
                         const NoiseSchedule& schedule) {
  if (batch.size() == 0) throw InvalidArgument("score_grad: empty batch");
  ScoreModel::Tape tape;
  const Eigen::MatrixXd log_ratios = model.forward_log(batch.xt, batch.t, &tape);
  const ScoreLossTerms terms =
      score_entropy_terms(log_ratios.array().exp().matrix(), batch, q, schedule, model.eps_t());
  return ScoreGradient{terms.loss, model.backward(tape, terms.grad_log_ratio)};
}

ScoreLoopResult score_learning_loop(ScoreModel& model, const StateBatch& dataset, const RateMatrices& q,
                                    const NoiseSchedule& schedule, const ScoreLoopConfig& config, Rng& rng) {
  if (config.max_step < 1) throw InvalidArgument("score_learning_loop: max_step must be at least 1");
  if (config.batch_size < 1) throw InvalidArgument("score_learning_loop: batch_size must be positive");
  if (dataset.empty()) throw InvalidArgument("score_learning_loop: empty dataset");

  AdamOptimizer optimizer(model.layers(), config.adam);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  ScoreLoopResult result;
  StateBatch x0(static_cast<std::size_t>(config.batch_size));

  while (result.updates < config.max_step) {
    for (auto& x : x0) x = dataset[pick(rng)];
    const ScoreBatch batch = make_score_batch(x0, q, schedule, model.eps_t(), rng);
    const ScoreGradient g = score_grad(model, batch, q, schedule);
    if (!std::isfinite(g.loss)) {
      throw NumericalError("score_learning_loop: non-finite loss at step " + std::to_string(result.updates));
    }
    if (result.updates == 0) {
      result.initial_loss = g.loss;
      result.smoothed_loss = g.loss;
    } else {
      result.smoothed_loss = config.smoothing * result.smoothed_loss + (1.0 - config.smoothing) * g.loss;
    }
    optimizer.step(model.layers(), g.grads);
    ++result.updates;

    if (result.smoothed_loss > config.divergence_factor * result.initial_loss && result.initial_loss > 0.0) {
      std::ostringstream msg;
      msg << "score_learning_loop: diverged at step " << result.updates << " (smoothed loss "
          << result.smoothed_loss << ", initial " << result.initial_loss << ")";
      throw NumericalError(msg.str());
    }
    if (result.smoothed_loss < config.eps_score) break;
  }
  return result;
}

}  // namespace dmb
