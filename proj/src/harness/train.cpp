#include "dmb/harness/train.hpp"

#include "dmb/bridge_solver.hpp"
#include "dmb/errors.hpp"
#include "dmb/evaluation.hpp"
#include "dmb/sampler.hpp"
#include "dmb/score_learning.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>

namespace dmb::harness {

namespace {

constexpr std::uint64_t kModelTag = 0x6d6f64656cULL;
constexpr std::uint64_t kLoopTag = 0x6c6f6f70ULL;

ScoreModel fresh_model(const RunConfig& config) {
  return ScoreModel(config.d, config.n, config.hidden, config.schedule(), config.eps_t,
                    derive_seed(config.seed, kModelTag));
}

SamplerConfig sampler_config(const RunConfig& config) {
  SamplerConfig s;
  s.num_steps = config.sampler_steps;
  s.eps_t = config.eps_t;
  s.batch_size = config.sampler_batch;
  return s;
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Trainer::Trainer(RunConfig config)
    : config_(std::move(config)), schedule_(config_.schedule()), rng_(derive_seed(config_.seed, kLoopTag)) {
  config_.validate();
  data_ = load_dataset(config_);
  if (data_.samples.empty()) throw InvalidArgument("train: dataset is empty");

  const ProductDistribution mu_hat = estimate_marginals(data_.samples, config_.n);
  matrix_.p0_estimate = config_.p0_init == P0Init::kData ? mu_hat : ProductDistribution::uniform(config_.d, config_.n);
  matrix_.step_size = config_.matrix_step_size;

  // Permutations come from data histograms against the terminal of the
  // unpermuted initial chain, then stay fixed.
  const std::vector<Permutation> identity(static_cast<std::size_t>(config_.d), Permutation::identity(config_.n));
  matrix_.q_per_dim = initial_rate_matrices(identity, config_.init_scheme);
  const ProductDistribution terminal = predict_terminal(matrix_, schedule_);
  matrix_.q_per_dim = initial_rate_matrices(permutation_from_data(mu_hat, terminal), config_.init_scheme);

  model_ = fresh_model(config_);
}

Trainer::Trainer(RunConfig config, const Checkpoint& ckpt)
    : config_(std::move(config)), schedule_(config_.schedule()), rng_(deserialize_rng(ckpt.rng_state)) {
  config_.validate();
  data_ = load_dataset(config_);
  if (static_cast<int>(ckpt.q.size()) != config_.d || ckpt.p0_estimate.dims() != config_.d ||
      ckpt.p0_estimate.states() != config_.n) {
    throw InvalidArgument("resume: checkpoint shape does not match config");
  }
  matrix_.q_per_dim = ckpt.q;
  matrix_.p0_estimate = ckpt.p0_estimate;
  matrix_.step_size = config_.matrix_step_size;
  model_ = restore_model(ckpt, config_);
  epoch_ = ckpt.epoch;
  history_ = ckpt.history;
}

bool Trainer::converged() const {
  if (history_.empty()) return false;
  const EpochRecord& last = history_.back();
  return last.j_q + last.j_score < config_.eps_total;
}

EpochRecord Trainer::run_epoch() {
  const int epoch = epoch_ + 1;
  const auto started = std::chrono::steady_clock::now();
  EpochRecord record;
  record.epoch = epoch;
  try {
    Rng matrix_rng(rng_());
    Rng score_rng(rng_());
    Rng sampler_rng(rng_());
    Rng eval_rng(rng_());

    // Rates: warm start from the previous epoch on a fresh batch.
    StateBatch batch(static_cast<std::size_t>(config_.matrix_batch));
    std::uniform_int_distribution<std::size_t> pick(0, data_.samples.size() - 1);
    for (auto& x : batch) x = data_.samples[pick(matrix_rng)];
    matrix_.step_size = config_.matrix_step_size;
    const MatrixLoopResult mres =
        matrix_learning_loop(matrix_, batch, schedule_, config_.max_step_matrix, config_.eps_q);
    record.j_q = mres.final_loss;
    const ProductDistribution terminal = predict_terminal(matrix_, schedule_);

    ScoreLoopConfig score_cfg;
    score_cfg.max_step = config_.max_step_score;
    score_cfg.eps_score = config_.eps_score;
    score_cfg.batch_size = config_.score_batch;
    score_cfg.adam.learning_rate = config_.learning_rate;
    score_cfg.adam.weight_decay = config_.weight_decay;
    const ScoreLoopResult sres =
        score_learning_loop(model_, data_.samples, matrix_.q_per_dim, schedule_, score_cfg, score_rng);
    record.j_score = sres.smoothed_loss;

    const NetworkRatios ratios(model_);
    matrix_.p0_estimate = estimate_mu(sampler_config(config_), terminal, matrix_.q_per_dim, schedule_, ratios,
                                      sampler_rng, config_.mu_trajectories);

    const ProductDistribution next_terminal = predict_terminal(matrix_, schedule_);
    const ElboReport elbo = elbo_estimate(ratios, data_.samples, matrix_.q_per_dim, schedule_, next_terminal,
                                          config_.mc_samples, eval_rng, config_.eps_t);
    record.elbo_bits_per_dim = elbo.bits_per_dim;
    record.kl_mu_p0 = data_.ground_truth ? kl_divergence(*data_.ground_truth, matrix_.p0_estimate)
                                         : std::numeric_limits<double>::quiet_NaN();
  } catch (const EpochFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw EpochFailure(epoch, e.what());
  }
  if (config_.timing) {
    record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  epoch_ = epoch;
  history_.push_back(record);
  return record;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.config_text = config_.to_text();
  ckpt.q = matrix_.q_per_dim;
  ckpt.score_params = model_.layers();
  ckpt.p0_estimate = matrix_.p0_estimate;
  ckpt.epoch = epoch_;
  ckpt.rng_state = serialize_rng(rng_);
  ckpt.history = history_;
  ckpt.vocabulary = data_.vocabulary;
  return ckpt;
}

std::string metrics_header(bool with_ground_truth) {
  return with_ground_truth ? "epoch,j_q,j_score,elbo_bits_per_dim,kl_mu_p0,wall_seconds"
                           : "epoch,j_q,j_score,elbo_bits_per_dim,wall_seconds";
}

std::string metrics_row(const EpochRecord& r, bool with_ground_truth) {
  std::string row = std::to_string(r.epoch) + "," + format_value(r.j_q) + "," + format_value(r.j_score) + "," +
                    format_value(r.elbo_bits_per_dim) + ",";
  if (with_ground_truth) row += format_value(r.kl_mu_p0) + ",";
  return row + format_value(r.wall_seconds);
}

Checkpoint train(const RunConfig& config, bool resume) {
  namespace fs = std::filesystem;
  const fs::path dir = config.output_dir;
  const fs::path metrics_path = dir / kMetricsFile;
  const fs::path ckpt_path = dir / kCheckpointFile;

  std::unique_ptr<Trainer> trainer;
  if (resume) {
    trainer = std::make_unique<Trainer>(config, load_checkpoint(ckpt_path));
  } else {
    trainer = std::make_unique<Trainer>(config);
    fs::create_directories(dir);
    std::ofstream out(metrics_path, std::ios::trunc);
    if (!out) throw InvalidArgument("train: cannot write '" + metrics_path.string() + "'");
    out << metrics_header(trainer->dataset().ground_truth.has_value()) << "\n";
  }
  const bool with_truth = trainer->dataset().ground_truth.has_value();

  while (!trainer->finished()) {
    const EpochRecord record = trainer->run_epoch();
    {
      std::ofstream out(metrics_path, std::ios::app);
      if (!out) throw InvalidArgument("train: cannot append to '" + metrics_path.string() + "'");
      out << metrics_row(record, with_truth) << "\n";
    }
    const Checkpoint ckpt = trainer->checkpoint();
    save_checkpoint(ckpt, dir / ("checkpoint_epoch_" + std::to_string(record.epoch) + ".bin"));
    save_checkpoint(ckpt, ckpt_path);
  }
  return trainer->checkpoint();
}

}  // namespace dmb::harness
