#pragma once

#include "dmb/harness/checkpoint.hpp"
#include "dmb/harness/config.hpp"
#include "dmb/harness/dataset.hpp"
#include "dmb/matrix_learning.hpp"
#include "dmb/random.hpp"
#include "dmb/score_model.hpp"

#include <stdexcept>

namespace dmb::harness {

// A failure inside one outer epoch, tagged with that epoch's index.
class EpochFailure : public std::runtime_error {
 public:
  EpochFailure(int epoch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// The alternating loop: rate fit, score fit, then a fresh p0 from reverse sampling.
class Trainer {
 public:
  explicit Trainer(RunConfig config);
  // Continues from `ckpt`; `config` supplies caps and output settings.
  Trainer(RunConfig config, const Checkpoint& ckpt);

  // One full outer epoch. Does not touch the filesystem.
  EpochRecord run_epoch();
  bool converged() const;
  bool finished() const { return converged() || epoch_ >= config_.epochs; }

  Checkpoint checkpoint() const;

  const RunConfig& config() const { return config_; }
  const Dataset& dataset() const { return data_; }
  const MatrixLearnState& matrix_state() const { return matrix_; }
  const ScoreModel& model() const { return model_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  int epoch() const { return epoch_; }

 private:
  RunConfig config_;
  NoiseSchedule schedule_;
  Dataset data_;
  MatrixLearnState matrix_;
  ScoreModel model_;
  Rng rng_;
  int epoch_ = 0;
  std::vector<EpochRecord> history_;
};

inline const char* const kMetricsFile = "metrics.csv";
inline const char* const kCheckpointFile = "checkpoint.bin";

std::string metrics_header(bool with_ground_truth);
std::string metrics_row(const EpochRecord& record, bool with_ground_truth);

// Runs to convergence or the epoch cap, writing metrics.csv and a checkpoint
// per epoch into config.output_dir. With `resume`, continues from the
// checkpoint already in that directory and appends to its metrics.
Checkpoint train(const RunConfig& config, bool resume = false);

}  // namespace dmb::harness
