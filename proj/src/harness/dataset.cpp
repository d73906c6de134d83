#include "dmb/harness/dataset.hpp"

#include "dmb/errors.hpp"
#include "dmb/random.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace dmb::harness {

namespace {

constexpr std::uint64_t kGroundTruthTag = 0x67726f756e64ULL;
constexpr std::uint64_t kSampleTag = 0x73616d706c65ULL;

}  // namespace

std::string Dataset::decode(const State& x) const {
  std::string out;
  out.reserve(x.size());
  for (int s : x) {
    // n may exceed the vocabulary; unused states have no byte.
    out.push_back(s >= 0 && s < static_cast<int>(vocabulary.size()) ? static_cast<char>(vocabulary[s]) : '?');
  }
  return out;
}

ProductDistribution synthetic_ground_truth(int d, int n, std::uint64_t seed) {
  if (d < 1 || n < 2) throw InvalidArgument("synthetic_ground_truth: need d >= 1 and n >= 2");
  Rng rng(seed);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::vector<ProbVector> marginals;
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd w(n);
    for (int k = 0; k < n; ++k) w[k] = gamma(rng);
    marginals.push_back(ProbVector::normalized(w));
  }
  return ProductDistribution(std::move(marginals));
}

Dataset load_char_text(const std::string& text, int d, int n) {
  if (static_cast<int>(text.size()) < d) throw InvalidArgument("char corpus is shorter than one tuple of length d");
  std::array<bool, 256> seen{};
  for (char c : text) seen[static_cast<unsigned char>(c)] = true;

  Dataset data;
  std::array<int, 256> code{};
  for (int b = 0; b < 256; ++b) {
    if (!seen[b]) continue;
    code[b] = static_cast<int>(data.vocabulary.size());
    data.vocabulary.push_back(static_cast<unsigned char>(b));
  }
  if (static_cast<int>(data.vocabulary.size()) > n) {
    throw InvalidArgument("char corpus has " + std::to_string(data.vocabulary.size()) +
                          " distinct bytes, more than n = " + std::to_string(n));
  }

  const std::size_t tuples = text.size() / static_cast<std::size_t>(d);
  data.samples.reserve(tuples);
  for (std::size_t t = 0; t < tuples; ++t) {
    State x(d);
    for (int i = 0; i < d; ++i) x[i] = code[static_cast<unsigned char>(text[t * d + i])];
    data.samples.push_back(std::move(x));
  }
  return data;
}

Dataset load_char_corpus(const std::filesystem::path& path, int d, int n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read char corpus '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_char_text(buffer.str(), d, n);
}

Dataset load_dataset(const RunConfig& config) {
  if (config.dataset == DatasetKind::kCharCorpus) return load_char_corpus(config.corpus_path, config.d, config.n);

  Dataset data;
  data.ground_truth = synthetic_ground_truth(config.d, config.n, derive_seed(config.seed, kGroundTruthTag));
  Rng rng(derive_seed(config.seed, kSampleTag));
  data.samples.resize(static_cast<std::size_t>(config.synthetic_samples));
  for (auto& x : data.samples) {
    x.resize(config.d);
    for (int i = 0; i < config.d; ++i) x[i] = sample_categorical((*data.ground_truth)[i].values(), rng);
  }
  return data;
}

}  // namespace dmb::harness
