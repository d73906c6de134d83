#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>

namespace dmb {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Inverse-CDF draw from nonnegative weights that sum to (roughly) one.
int sample_categorical(const Eigen::VectorXd& probs, Rng& rng);

// Seed for an independent child stream, derived by splitmix64 from a root seed and a tag.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag);

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& text);

}  // namespace dmb
