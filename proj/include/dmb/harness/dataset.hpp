#pragma once

#include "dmb/harness/config.hpp"
#include "dmb/prob.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dmb::harness {

struct Dataset {
  StateBatch samples;
  // Known generating distribution (synthetic mode only).
  std::optional<ProductDistribution> ground_truth;
  // vocabulary[k] is the byte encoded as state k (char mode only).
  std::vector<unsigned char> vocabulary;

  // States without a vocabulary entry decode to '?'.
  std::string decode(const State& x) const;
};

// Ground truth with Dirichlet(1) marginals drawn from `seed`.
ProductDistribution synthetic_ground_truth(int d, int n, std::uint64_t seed);

// Byte vocabulary sorted by byte value, text chunked into length-d tuples with
// the trailing remainder dropped. Throws InvalidArgument when the file cannot
// be read, has more than n distinct bytes, or is shorter than d.
Dataset load_char_corpus(const std::filesystem::path& path, int d, int n);
Dataset load_char_text(const std::string& text, int d, int n);

Dataset load_dataset(const RunConfig& config);

}  // namespace dmb::harness
