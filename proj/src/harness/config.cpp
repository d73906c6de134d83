#include "dmb/harness/config.hpp"

#include "dmb/errors.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dmb::harness {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw InvalidArgument("config: bad value '" + value + "' for key '" + key + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  // from_chars for double is not available everywhere; strtod with a full-consumption check.
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw InvalidArgument("config: bad value '" + value + "' for key '" + key + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw InvalidArgument("config: bad boolean '" + value + "' for key '" + key + "'");
}

std::vector<int> parse_widths(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw InvalidArgument("config: '" + key + "' needs at least one width");
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::filesystem::path&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Keys in canonical output order.
const std::vector<std::pair<std::string, Field>>& fields() {
  using P = std::filesystem::path;
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    auto add_int = [&t](const std::string& key, int RunConfig::*member) {
      t.push_back({key,
                   {[key, member](RunConfig& c, const std::string& v, const P&) { c.*member = parse_number<int>(key, v); },
                    [member](const RunConfig& c) { return std::to_string(c.*member); }}});
    };
    auto add_double = [&t](const std::string& key, double RunConfig::*member) {
      t.push_back({key,
                   {[key, member](RunConfig& c, const std::string& v, const P&) { c.*member = parse_double(key, v); },
                    [member](const RunConfig& c) { return format_double(c.*member); }}});
    };

    add_int("n", &RunConfig::n);
    add_int("d", &RunConfig::d);
    add_double("sigma_min", &RunConfig::sigma_min);
    add_double("sigma_max", &RunConfig::sigma_max);
    add_double("horizon", &RunConfig::horizon);
    t.push_back({"init_scheme",
                 {[](RunConfig& c, const std::string& v, const P&) {
                    if (v == "absorbing_text") {
                      c.init_scheme = InitScheme::kAbsorbingText;
                    } else if (v == "uniform_small") {
                      c.init_scheme = InitScheme::kUniformSmall;
                    } else {
                      throw InvalidArgument("config: init_scheme must be absorbing_text or uniform_small");
                    }
                  },
                  [](const RunConfig& c) {
                    return std::string(c.init_scheme == InitScheme::kAbsorbingText ? "absorbing_text"
                                                                                   : "uniform_small");
                  }}});
    t.push_back({"p0_init",
                 {[](RunConfig& c, const std::string& v, const P&) {
                    if (v == "uniform") {
                      c.p0_init = P0Init::kUniform;
                    } else if (v == "data") {
                      c.p0_init = P0Init::kData;
                    } else {
                      throw InvalidArgument("config: p0_init must be uniform or data");
                    }
                  },
                  [](const RunConfig& c) { return std::string(c.p0_init == P0Init::kUniform ? "uniform" : "data"); }}});
    add_int("epochs", &RunConfig::epochs);
    add_int("max_step_matrix", &RunConfig::max_step_matrix);
    add_int("max_step_score", &RunConfig::max_step_score);
    add_double("eps_q", &RunConfig::eps_q);
    add_double("eps_score", &RunConfig::eps_score);
    add_double("eps_total", &RunConfig::eps_total);
    add_double("matrix_step_size", &RunConfig::matrix_step_size);
    add_int("matrix_batch", &RunConfig::matrix_batch);
    t.push_back({"hidden",
                 {[](RunConfig& c, const std::string& v, const P&) { c.hidden = parse_widths("hidden", v); },
                  [](const RunConfig& c) {
                    std::string out;
                    for (std::size_t i = 0; i < c.hidden.size(); ++i) {
                      if (i > 0) out += ",";
                      out += std::to_string(c.hidden[i]);
                    }
                    return out;
                  }}});
    add_int("score_batch", &RunConfig::score_batch);
    add_double("learning_rate", &RunConfig::learning_rate);
    add_double("weight_decay", &RunConfig::weight_decay);
    add_int("sampler_steps", &RunConfig::sampler_steps);
    add_double("eps_t", &RunConfig::eps_t);
    add_int("sampler_batch", &RunConfig::sampler_batch);
    add_int("mu_trajectories", &RunConfig::mu_trajectories);
    add_int("mc_samples", &RunConfig::mc_samples);
    t.push_back({"seed",
                 {[](RunConfig& c, const std::string& v, const P&) { c.seed = parse_number<std::uint64_t>("seed", v); },
                  [](const RunConfig& c) { return std::to_string(c.seed); }}});
    t.push_back({"dataset",
                 {[](RunConfig& c, const std::string& v, const P&) {
                    if (v == "synthetic") {
                      c.dataset = DatasetKind::kSynthetic;
                    } else if (v == "char_corpus") {
                      c.dataset = DatasetKind::kCharCorpus;
                    } else {
                      throw InvalidArgument("config: dataset must be synthetic or char_corpus");
                    }
                  },
                  [](const RunConfig& c) {
                    return std::string(c.dataset == DatasetKind::kSynthetic ? "synthetic" : "char_corpus");
                  }}});
    add_int("synthetic_samples", &RunConfig::synthetic_samples);
    t.push_back({"corpus_path",
                 {[](RunConfig& c, const std::string& v, const P& base) {
                    const P p(v);
                    c.corpus_path = p.is_relative() && !base.empty() ? base / p : p;
                  },
                  [](const RunConfig& c) { return c.corpus_path.string(); }}});
    t.push_back({"output_dir",
                 {[](RunConfig& c, const std::string& v, const P& base) {
                    const P p(v);
                    c.output_dir = p.is_relative() && !base.empty() ? base / p : p;
                  },
                  [](const RunConfig& c) { return c.output_dir.string(); }}});
    t.push_back({"timing",
                 {[](RunConfig& c, const std::string& v, const P&) { c.timing = parse_bool("timing", v); },
                  [](const RunConfig& c) { return std::string(c.timing ? "on" : "off"); }}});
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument("config: " + what);
  };
  require(n >= 2, "n must be at least 2");
  require(d >= 1, "d must be at least 1");
  require(sigma_min > 0.0 && sigma_max >= sigma_min && horizon > 0.0, "need 0 < sigma_min <= sigma_max, horizon > 0");
  require(epochs >= 1 && max_step_matrix >= 1 && max_step_score >= 1, "epoch and step caps must be positive");
  require(eps_q > 0.0 && eps_score > 0.0 && eps_total > 0.0, "tolerances must be positive");
  require(matrix_step_size > 0.0 && matrix_batch >= 1, "matrix step size and batch must be positive");
  require(score_batch >= 1 && learning_rate >= 0.0 && weight_decay >= 0.0, "bad score optimizer settings");
  for (int w : hidden) require(w >= 1, "hidden widths must be positive");
  require(sampler_steps >= 1 && sampler_batch >= 1, "sampler settings must be positive");
  require(eps_t > 0.0 && eps_t < horizon, "need 0 < eps_t < horizon");
  require(mu_trajectories >= 1 && mc_samples >= 2, "need mu_trajectories >= 1 and mc_samples >= 2");
  if (dataset == DatasetKind::kSynthetic) {
    require(synthetic_samples >= 1, "synthetic_samples must be positive");
  } else {
    require(!corpus_path.empty(), "corpus_path is required for char_corpus");
    require(std::filesystem::is_regular_file(corpus_path), "corpus_path '" + corpus_path.string() + "' does not exist");
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  std::map<std::string, const Field*> index;
  for (const auto& [key, field] : fields()) index[key] = &field;

  RunConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end()) throw InvalidArgument("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second->set(config, value, base_dir);
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("config: cannot read '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

void apply_environment(RunConfig& config) {
  if (const char* seed = std::getenv("DMB_SEED"); seed != nullptr && *seed != '\0') {
    config.seed = parse_number<std::uint64_t>("DMB_SEED", trim(seed));
  }
}

}  // namespace dmb::harness
