#include "dmb/errors.hpp"
#include "dmb/harness/checkpoint.hpp"
#include "dmb/harness/config.hpp"
#include "dmb/harness/dataset.hpp"
#include "dmb/harness/train.hpp"
#include "dmb/sampler.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dmb::harness {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dmb_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

RunConfig small_config(const fs::path& out) {
  RunConfig c;
  c.n = 4;
  c.d = 2;
  c.epochs = 2;
  c.max_step_matrix = 20;
  c.max_step_score = 40;
  c.matrix_batch = 64;
  c.hidden = {16};
  c.score_batch = 32;
  c.learning_rate = 1e-3;
  c.sampler_steps = 16;
  c.sampler_batch = 64;
  c.mu_trajectories = 128;
  c.mc_samples = 200;
  c.synthetic_samples = 500;
  c.seed = 99;
  c.timing = false;
  c.output_dir = out;
  return c;
}

TEST(ConfigTest, ParsesKeysCommentsAndDefaults) {
  const RunConfig c = parse_config(
      "# toy run\n"
      "n = 6\n"
      "d=3   # trailing comment\n"
      "hidden = 32, 16\n"
      "init_scheme = uniform_small\n"
      "p0_init = data\n"
      "eps_total = 0.5\n"
      "seed = 18446744073709551615\n"
      "timing = off\n");
  EXPECT_EQ(c.n, 6);
  EXPECT_EQ(c.d, 3);
  EXPECT_EQ(c.hidden, (std::vector<int>{32, 16}));
  EXPECT_EQ(c.init_scheme, InitScheme::kUniformSmall);
  EXPECT_EQ(c.p0_init, P0Init::kData);
  EXPECT_DOUBLE_EQ(c.eps_total, 0.5);
  EXPECT_EQ(c.seed, 18446744073709551615ULL);
  EXPECT_FALSE(c.timing);
  EXPECT_EQ(c.max_step_score, RunConfig{}.max_step_score);
}

TEST(ConfigTest, CanonicalTextRoundTrips) {
  RunConfig c = small_config("some/dir");
  c.sigma_max = 0.1 + 0.2;
  const std::string text = c.to_text();
  EXPECT_EQ(parse_config(text).to_text(), text);
  EXPECT_EQ(parse_config(text).sigma_max, c.sigma_max);
}

TEST(ConfigTest, RejectsMalformedInput) {
  EXPECT_THROW(parse_config("bogus_key = 1\n"), InvalidArgument);
  EXPECT_THROW(parse_config("n 4\n"), InvalidArgument);
  EXPECT_THROW(parse_config("n = four\n"), InvalidArgument);
  EXPECT_THROW(parse_config("init_scheme = random\n"), InvalidArgument);
  EXPECT_THROW(parse_config("eps_q = 1e-3x\n"), InvalidArgument);
}

TEST(ConfigTest, ValidateChecksInvariants) {
  EXPECT_NO_THROW(RunConfig{}.validate());
  auto broken = [](auto edit) {
    RunConfig c;
    edit(c);
    return c;
  };
  EXPECT_THROW(broken([](RunConfig& c) { c.n = 1; }).validate(), InvalidArgument);
  EXPECT_THROW(broken([](RunConfig& c) { c.eps_q = 0.0; }).validate(), InvalidArgument);
  EXPECT_THROW(broken([](RunConfig& c) { c.eps_total = -1.0; }).validate(), InvalidArgument);
  EXPECT_THROW(broken([](RunConfig& c) {
                 c.dataset = DatasetKind::kCharCorpus;
                 c.corpus_path = "/nonexistent/corpus.txt";
               }).validate(),
               InvalidArgument);
}

TEST(ConfigTest, RelativePathsResolveAgainstConfigDirectory) {
  const fs::path dir = scratch_dir("config_paths");
  write_file(dir / "run.cfg", "dataset = char_corpus\ncorpus_path = text.txt\noutput_dir = out\n");
  const RunConfig c = load_config(dir / "run.cfg");
  EXPECT_EQ(c.corpus_path, dir / "text.txt");
  EXPECT_EQ(c.output_dir, dir / "out");
  EXPECT_THROW(load_config(dir / "missing.cfg"), InvalidArgument);
}

TEST(ConfigTest, SeedEnvironmentOverride) {
  RunConfig c;
  c.seed = 5;
  ::setenv("DMB_SEED", "1234", 1);
  apply_environment(c);
  ::unsetenv("DMB_SEED");
  EXPECT_EQ(c.seed, 1234u);
  apply_environment(c);
  EXPECT_EQ(c.seed, 1234u);
}

TEST(DatasetTest, SyntheticMatchesGroundTruth) {
  RunConfig c;
  c.n = 8;
  c.d = 4;
  c.synthetic_samples = 10000;
  c.seed = 7;
  const Dataset data = load_dataset(c);
  ASSERT_TRUE(data.ground_truth.has_value());
  EXPECT_EQ(data.samples.size(), 10000u);
  const ProductDistribution emp = empirical_marginals(data.samples, 8);
  for (int i = 0; i < 4; ++i) {
    EXPECT_LE((emp[i].values() - (*data.ground_truth)[i].values()).cwiseAbs().maxCoeff(), 0.02);
  }
  EXPECT_EQ(load_dataset(c).samples, data.samples);
}

TEST(DatasetTest, CharCorpusTuplesAndVocabulary) {
  const Dataset data = load_char_text("aab", 3, 4);
  ASSERT_EQ(data.samples.size(), 1u);
  EXPECT_EQ(data.samples[0], (State{0, 0, 1}));
  EXPECT_EQ(data.vocabulary, (std::vector<unsigned char>{'a', 'b'}));
  EXPECT_EQ(data.decode({1, 0, 3}), "ba?");
  EXPECT_FALSE(data.ground_truth.has_value());

  const Dataset chunked = load_char_text("hello world!", 5, 16);
  EXPECT_EQ(chunked.samples.size(), 2u);
  EXPECT_EQ(chunked.decode(chunked.samples[1]), " worl");
}

TEST(DatasetTest, CharCorpusErrors) {
  EXPECT_THROW(load_char_text("abcde", 1, 4), InvalidArgument);
  EXPECT_THROW(load_char_text("ab", 3, 4), InvalidArgument);
  EXPECT_THROW(load_char_corpus("/nonexistent/corpus.txt", 2, 4), InvalidArgument);
}

TEST(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  const fs::path dir = scratch_dir("ckpt_roundtrip");
  Trainer trainer(small_config(dir));
  trainer.run_epoch();
  const Checkpoint ckpt = trainer.checkpoint();
  save_checkpoint(ckpt, dir / "a.bin");
  save_checkpoint(load_checkpoint(dir / "a.bin"), dir / "b.bin");
  EXPECT_EQ(read_file(dir / "a.bin"), read_file(dir / "b.bin"));

  const Checkpoint loaded = load_checkpoint(dir / "a.bin");
  EXPECT_EQ(loaded.q, ckpt.q);
  EXPECT_EQ(loaded.p0_estimate, ckpt.p0_estimate);
  EXPECT_EQ(loaded.history, ckpt.history);
  EXPECT_EQ(loaded.epoch, 1);
  EXPECT_TRUE(restore_model(loaded, checkpoint_config(loaded)) == trainer.model());
}

TEST(CheckpointTest, RejectsCorruptContainers) {
  const fs::path dir = scratch_dir("ckpt_corrupt");
  Trainer trainer(small_config(dir));
  const std::string bytes = serialize_checkpoint(trainer.checkpoint());
  ASSERT_EQ(bytes.substr(0, 8), "DMBRIDGE");
  EXPECT_EQ(static_cast<std::uint8_t>(bytes[8]), kCheckpointVersion);

  std::string other_version = bytes;
  other_version[8] = static_cast<char>(kCheckpointVersion + 1);
  EXPECT_THROW(deserialize_checkpoint(other_version), InvalidArgument);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), InvalidArgument);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)), InvalidArgument);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), InvalidArgument);
}

TEST(TrainTest, EpochCapOneRecordsOneCycle) {
  const fs::path dir = scratch_dir("cap_one");
  RunConfig c = small_config(dir);
  c.epochs = 1;
  const Checkpoint ckpt = train(c);
  EXPECT_EQ(ckpt.epoch, 1);
  EXPECT_EQ(ckpt.history.size(), 1u);
  std::istringstream metrics(read_file(dir / kMetricsFile));
  std::string header;
  std::string row;
  std::string extra;
  std::getline(metrics, header);
  std::getline(metrics, row);
  EXPECT_FALSE(std::getline(metrics, extra));
  EXPECT_EQ(header, "epoch,j_q,j_score,elbo_bits_per_dim,kl_mu_p0,wall_seconds");
  EXPECT_EQ(row.substr(0, 2), "1,");
  EXPECT_TRUE(fs::exists(dir / kCheckpointFile));
  EXPECT_TRUE(fs::exists(dir / "checkpoint_epoch_1.bin"));
}

TEST(TrainTest, IdenticalRunsWriteIdenticalMetrics) {
  const fs::path a = scratch_dir("determinism_a");
  const fs::path b = scratch_dir("determinism_b");
  train(small_config(a));
  train(small_config(b));
  EXPECT_EQ(read_file(a / kMetricsFile), read_file(b / kMetricsFile));
  EXPECT_FALSE(read_file(a / kMetricsFile).empty());
}

TEST(TrainTest, ResumeMatchesUninterruptedRun) {
  const fs::path full = scratch_dir("resume_full");
  const fs::path split = scratch_dir("resume_split");
  RunConfig c = small_config(full);
  c.epochs = 3;
  train(c);

  RunConfig first = small_config(split);
  first.epochs = 1;
  train(first);
  RunConfig rest = small_config(split);
  rest.epochs = 3;
  train(rest, true);

  EXPECT_EQ(read_file(full / kMetricsFile), read_file(split / kMetricsFile));
  // The config echo differs in output_dir; everything else must agree exactly.
  Checkpoint a = load_checkpoint(full / kCheckpointFile);
  Checkpoint b = load_checkpoint(split / kCheckpointFile);
  a.config_text.clear();
  b.config_text.clear();
  EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
}

TEST(TrainTest, CharCorpusRun) {
  const fs::path dir = scratch_dir("char_run");
  write_file(dir / "corpus.txt", "the cat sat on the mat and the bat ate the hat ");
  RunConfig c = small_config(dir / "out");
  c.dataset = DatasetKind::kCharCorpus;
  c.corpus_path = dir / "corpus.txt";
  c.n = 16;
  c.d = 3;
  c.epochs = 1;
  const Checkpoint ckpt = train(c);
  EXPECT_EQ(ckpt.vocabulary.size(), 12u);
  std::istringstream metrics(read_file(dir / "out" / kMetricsFile));
  std::string header;
  std::getline(metrics, header);
  EXPECT_EQ(header, "epoch,j_q,j_score,elbo_bits_per_dim,wall_seconds");
}

TEST(TrainTest, FailuresCarryEpochIndex) {
  const fs::path dir = scratch_dir("failure");
  RunConfig c = small_config(dir);
  c.learning_rate = 1e6;
  c.max_step_score = 200;
  Trainer trainer(c);
  try {
    trainer.run_epoch();
    FAIL() << "expected the score loop to diverge";
  } catch (const EpochFailure& e) {
    EXPECT_EQ(e.epoch(), 1);
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST(TrainTest, PriorApproachesDataOnOneDimensionalToy) {
  const fs::path dir = scratch_dir("convergence_1d");
  RunConfig c;
  c.n = 8;
  c.d = 1;
  c.epochs = 5;
  c.hidden = {64, 64};
  c.max_step_score = 1500;
  c.learning_rate = 1e-3;
  c.mu_trajectories = 4096;
  c.mc_samples = 2000;
  c.seed = 3;
  c.timing = false;
  c.output_dir = dir;
  const Checkpoint ckpt = train(c);
  ASSERT_EQ(ckpt.history.size(), 5u);
  for (std::size_t k = 1; k < ckpt.history.size(); ++k) {
    EXPECT_LE(ckpt.history[k].kl_mu_p0, ckpt.history[k - 1].kl_mu_p0 + 0.01) << "epoch " << k + 1;
  }
}

}  // namespace
}  // namespace dmb::harness
