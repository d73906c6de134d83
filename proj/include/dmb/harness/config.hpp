#pragma once

#include "dmb/ctdmc.hpp"
#include "dmb/matrix_learning.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dmb::harness {

enum class DatasetKind { kSynthetic, kCharCorpus };
enum class P0Init { kUniform, kData };

struct RunConfig {
  int n = 8;
  int d = 4;

  double sigma_min = 0.1;
  double sigma_max = 10.0;
  double horizon = 1.0;

  InitScheme init_scheme = InitScheme::kAbsorbingText;
  P0Init p0_init = P0Init::kUniform;

  int epochs = 5;
  int max_step_matrix = 200;
  int max_step_score = 2000;
  double eps_q = 1e-6;
  double eps_score = 1e-6;
  double eps_total = 1e-3;
  double matrix_step_size = 0.1;
  int matrix_batch = 512;

  std::vector<int> hidden = {128, 128};
  int score_batch = 128;
  double learning_rate = 3e-4;
  double weight_decay = 0.0;

  int sampler_steps = 128;
  double eps_t = 1e-3;
  int sampler_batch = 1024;
  int mu_trajectories = 4096;
  int mc_samples = 20000;

  std::uint64_t seed = 0;

  DatasetKind dataset = DatasetKind::kSynthetic;
  int synthetic_samples = 10000;
  std::filesystem::path corpus_path;

  std::filesystem::path output_dir = "dmb_run";
  // Wall-clock column; off writes 0 so metrics files are byte-reproducible.
  bool timing = true;

  NoiseSchedule schedule() const { return NoiseSchedule::linear(sigma_min, sigma_max, horizon); }

  // Checks ranges and that referenced paths exist. Throws InvalidArgument.
  void validate() const;

  // Canonical `key = value` text, one key per line in a fixed order.
  std::string to_text() const;
};

// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
// Relative corpus paths resolve against `base_dir`.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// DMB_SEED, when set, replaces the configured seed.
void apply_environment(RunConfig& config);

}  // namespace dmb::harness
