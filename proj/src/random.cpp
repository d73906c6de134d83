#include "dmb/random.hpp"

#include "dmb/errors.hpp"

#include <sstream>

namespace dmb {

int sample_categorical(const Eigen::VectorXd& probs, Rng& rng) {
  const double total = probs.sum();
  if (!(total > 0.0)) throw InvalidArgument("sample_categorical: no positive mass");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  int last_positive = -1;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<int>(i);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string serialize_rng(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng deserialize_rng(const std::string& text) {
  std::istringstream in(text);
  Rng rng;
  in >> rng;
  if (in.fail()) throw InvalidArgument("deserialize_rng: malformed engine state");
  return rng;
}

}  // namespace dmb
