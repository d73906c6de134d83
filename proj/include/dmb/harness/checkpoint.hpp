#pragma once

// Binary container: 8-byte magic "DMBRIDGE", one version byte, then
// sections each prefixed by a little-endian u64 byte length.

#include "dmb/ctdmc.hpp"
#include "dmb/harness/config.hpp"
#include "dmb/prob.hpp"
#include "dmb/score_model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dmb::harness {

inline constexpr std::uint8_t kCheckpointVersion = 1;

struct EpochRecord {
  int epoch = 0;
  double j_q = 0.0;
  double j_score = 0.0;
  double elbo_bits_per_dim = 0.0;
  double kl_mu_p0 = 0.0;  // NaN without a ground truth
  double wall_seconds = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct Checkpoint {
  std::string config_text;
  std::vector<FactorizedRateMatrix> q;
  LayerParams score_params;
  ProductDistribution p0_estimate;
  int epoch = 0;  // completed outer epochs
  std::string rng_state;
  std::vector<EpochRecord> history;
  std::vector<unsigned char> vocabulary;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws InvalidArgument on a bad magic, version mismatch, or truncation.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Config stored in the checkpoint plus a score model carrying its parameters.
RunConfig checkpoint_config(const Checkpoint& ckpt);
ScoreModel restore_model(const Checkpoint& ckpt, const RunConfig& config);

}  // namespace dmb::harness
