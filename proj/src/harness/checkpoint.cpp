#include "dmb/harness/checkpoint.hpp"

#include "dmb/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dmb::harness {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'B', 'R', 'I', 'D', 'G', 'E'};

class Writer {
 public:
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out_.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) {
    u64(s.size());
    out_ += s;
  }
  void vec(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& data, std::size_t pos = 0, std::size_t end = std::string::npos)
      : data_(data), pos_(pos), end_(end == std::string::npos ? data.size() : end) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + b])) << (8 * b);
    pos_ += 8;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes() {
    const std::uint64_t len = u64();
    need(len);
    std::string s = data_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  Eigen::VectorXd vec() {
    const std::uint64_t len = u64();
    need(len * 8);
    Eigen::VectorXd v(static_cast<Eigen::Index>(len));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
    return v;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::uint64_t count) const {
    if (count > end_ - pos_) throw InvalidArgument("checkpoint: truncated data");
  }

  const std::string& data_;
  std::size_t pos_;
  std::size_t end_;
};

std::string encode_rates(const std::vector<FactorizedRateMatrix>& q) {
  Writer w;
  w.u64(q.size());
  for (const auto& m : q) {
    w.u64(static_cast<std::uint64_t>(m.n()));
    for (int s : m.perm().order()) w.i64(s);
    w.vec(m.rates());
  }
  return w.take();
}

std::vector<FactorizedRateMatrix> decode_rates(const std::string& s) {
  Reader r(s);
  std::vector<FactorizedRateMatrix> q(r.u64());
  for (auto& m : q) {
    std::vector<int> order(r.u64());
    for (auto& o : order) o = static_cast<int>(r.i64());
    Eigen::VectorXd rates = r.vec();
    m = FactorizedRateMatrix(Permutation(std::move(order)), std::move(rates));
  }
  return q;
}

std::string encode_params(const LayerParams& params) {
  Writer w;
  w.u64(params.size());
  for (const auto& layer : params) {
    w.u64(static_cast<std::uint64_t>(layer.weight.rows()));
    w.u64(static_cast<std::uint64_t>(layer.weight.cols()));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) w.f64(layer.weight.data()[i]);
    w.vec(layer.bias);
  }
  return w.take();
}

LayerParams decode_params(const std::string& s) {
  Reader r(s);
  LayerParams params(r.u64());
  for (auto& layer : params) {
    const auto rows = static_cast<Eigen::Index>(r.u64());
    const auto cols = static_cast<Eigen::Index>(r.u64());
    layer.weight.resize(rows, cols);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = r.f64();
    layer.bias = r.vec();
  }
  return params;
}

std::string encode_distribution(const ProductDistribution& p) {
  Writer w;
  w.u64(static_cast<std::uint64_t>(p.dims()));
  for (const auto& m : p.marginals()) w.vec(m.values());
  return w.take();
}

ProductDistribution decode_distribution(const std::string& s) {
  Reader r(s);
  std::vector<ProbVector> marginals;
  const std::uint64_t d = r.u64();
  for (std::uint64_t i = 0; i < d; ++i) marginals.emplace_back(r.vec());
  return ProductDistribution(std::move(marginals));
}

std::string encode_history(const std::vector<EpochRecord>& history) {
  Writer w;
  w.u64(history.size());
  for (const auto& h : history) {
    w.i64(h.epoch);
    w.f64(h.j_q);
    w.f64(h.j_score);
    w.f64(h.elbo_bits_per_dim);
    w.f64(h.kl_mu_p0);
    w.f64(h.wall_seconds);
  }
  return w.take();
}

std::vector<EpochRecord> decode_history(const std::string& s) {
  Reader r(s);
  std::vector<EpochRecord> history(r.u64());
  for (auto& h : history) {
    h.epoch = static_cast<int>(r.i64());
    h.j_q = r.f64();
    h.j_score = r.f64();
    h.elbo_bits_per_dim = r.f64();
    h.kl_mu_p0 = r.f64();
    h.wall_seconds = r.f64();
  }
  return history;
}

std::string encode_epoch(int epoch) {
  Writer w;
  w.i64(epoch);
  return w.take();
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(ckpt.config_text);
  w.bytes(encode_rates(ckpt.q));
  w.bytes(encode_params(ckpt.score_params));
  w.bytes(encode_distribution(ckpt.p0_estimate));
  w.bytes(encode_epoch(ckpt.epoch));
  w.bytes(ckpt.rng_state);
  w.bytes(encode_history(ckpt.history));
  w.bytes(std::string(ckpt.vocabulary.begin(), ckpt.vocabulary.end()));
  return std::string(kMagic, sizeof(kMagic)) + static_cast<char>(kCheckpointVersion) + w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 1 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw InvalidArgument("checkpoint: bad magic");
  }
  const auto version = static_cast<std::uint8_t>(bytes[sizeof(kMagic)]);
  if (version != kCheckpointVersion) {
    throw InvalidArgument("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  Reader r(bytes, sizeof(kMagic) + 1);
  Checkpoint ckpt;
  ckpt.config_text = r.bytes();
  ckpt.q = decode_rates(r.bytes());
  ckpt.score_params = decode_params(r.bytes());
  ckpt.p0_estimate = decode_distribution(r.bytes());
  ckpt.epoch = static_cast<int>(Reader(r.bytes()).i64());
  ckpt.rng_state = r.bytes();
  ckpt.history = decode_history(r.bytes());
  const std::string vocab = r.bytes();
  ckpt.vocabulary.assign(vocab.begin(), vocab.end());
  if (!r.done()) throw InvalidArgument("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("checkpoint: cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidArgument("checkpoint: write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("checkpoint: cannot read '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

RunConfig checkpoint_config(const Checkpoint& ckpt) { return parse_config(ckpt.config_text); }

ScoreModel restore_model(const Checkpoint& ckpt, const RunConfig& config) {
  ScoreModel model(config.d, config.n, config.hidden, config.schedule(), config.eps_t, 0);
  if (model.layers().size() != ckpt.score_params.size()) throw InvalidArgument("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& src = ckpt.score_params[l];
    const auto& dst = model.layers()[l];
    if (src.weight.rows() != dst.weight.rows() || src.weight.cols() != dst.weight.cols() ||
        src.bias.size() != dst.bias.size()) {
      throw InvalidArgument("checkpoint: layer " + std::to_string(l) + " shape mismatch");
    }
  }
  model.layers() = ckpt.score_params;
  return model;
}

}  // namespace dmb::harness
