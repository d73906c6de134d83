// Command-line front end: train, sample, eval, solve, selftest.

#include "dmb/bridge_solver.hpp"
#include "dmb/ctdmc.hpp"
#include "dmb/errors.hpp"
#include "dmb/evaluation.hpp"
#include "dmb/harness/checkpoint.hpp"
#include "dmb/harness/config.hpp"
#include "dmb/harness/dataset.hpp"
#include "dmb/harness/train.hpp"
#include "dmb/matrix_learning.hpp"
#include "dmb/sampler.hpp"
#include "dmb/testing/oracles.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace dmb;
using namespace dmb::harness;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

Eigen::VectorXd read_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read '" + path + "'");
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    for (char& c : token) {
      if (c == ',') c = ' ';
    }
    std::istringstream parts(token);
    double v = 0.0;
    while (parts >> v) values.push_back(v);
    if (!parts.eof()) throw InvalidArgument("'" + path + "': not a number: " + token);
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

ProductDistribution checkpoint_terminal(const Checkpoint& ckpt, const NoiseSchedule& schedule) {
  MatrixLearnState state;
  state.q_per_dim = ckpt.q;
  state.p0_estimate = ckpt.p0_estimate;
  return predict_terminal(state, schedule);
}

int run_train(const std::string& config_path, bool resume) {
  RunConfig config = load_config(config_path);
  apply_environment(config);
  const Checkpoint ckpt = train(config, resume);
  std::cout << "trained " << ckpt.epoch << " epochs into " << config.output_dir.string() << "\n";
  if (!ckpt.history.empty()) {
    const auto& last = ckpt.history.back();
    std::cout << "j_q " << last.j_q << "  j_score " << last.j_score << "  elbo " << last.elbo_bits_per_dim
              << " bits/dim\n";
  }
  return 0;
}

int run_sample(const std::string& ckpt_path, int count, int steps, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  RunConfig config = checkpoint_config(ckpt);
  apply_environment(config);
  const ScoreModel model = restore_model(ckpt, config);
  const NoiseSchedule schedule = config.schedule();

  SamplerConfig sampler;
  sampler.num_steps = steps > 0 ? steps : config.sampler_steps;
  sampler.eps_t = config.eps_t;
  sampler.batch_size = config.sampler_batch;
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(ckpt.epoch) + 0x5a5a));
  SamplerDiagnostics diag;
  const StateBatch samples =
      generate(sampler, checkpoint_terminal(ckpt, schedule), ckpt.q, schedule, NetworkRatios(model), rng, count, &diag);

  Dataset decoder;
  decoder.vocabulary = ckpt.vocabulary;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) throw InvalidArgument("cannot write '" + out_path + "'");
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  for (const State& x : samples) {
    if (!ckpt.vocabulary.empty()) {
      out << decoder.decode(x) << "\n";
    } else {
      for (std::size_t i = 0; i < x.size(); ++i) out << (i > 0 ? " " : "") << x[i];
      out << "\n";
    }
  }
  if (diag.clamped_rows > 0) std::cerr << diag.clamped_rows << " of " << diag.rows << " sampler rows clamped\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, int mc_samples) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  RunConfig config = checkpoint_config(ckpt);
  apply_environment(config);
  const ScoreModel model = restore_model(ckpt, config);
  const NoiseSchedule schedule = config.schedule();
  const Dataset data = load_dataset(config);

  Rng rng(derive_seed(config.seed, 0xe7a1));
  const ElboReport report =
      elbo_estimate(NetworkRatios(model), data.samples, ckpt.q, schedule, checkpoint_terminal(ckpt, schedule),
                    mc_samples > 0 ? mc_samples : config.mc_samples, rng, config.eps_t);
  std::cout.precision(8);
  std::cout << "j_score_nats " << report.j_score << " +- " << report.mc_std_error << "\n"
            << "kl_term_nats " << report.kl_term << "\n"
            << "total_nats " << report.total_nats << "\n"
            << "bits_per_dim " << report.bits_per_dim << "\n";
  if (data.ground_truth) {
    std::cout << "entropy_bits_per_dim " << data.ground_truth->entropy() / (config.d * std::log(2.0)) << "\n"
              << "kl_mu_p0_nats " << kl_divergence(*data.ground_truth, ckpt.p0_estimate) << "\n";
  }
  return 0;
}

int run_solve(const std::string& p_path, const std::string& q_path) {
  const ProbVector p(read_vector(p_path));
  const ProbVector q(read_vector(q_path));
  if (p.size() != q.size()) throw InvalidArgument("p and q have different lengths");
  const FactorizedRateMatrix rates = exact_rate_matrix(p, q);
  const double residual = (evolve(q.values(), rates, 1.0) - p.values()).cwiseAbs().maxCoeff();

  std::cout.precision(10);
  std::cout << "perm";
  for (int s : rates.perm().order()) std::cout << " " << s;
  std::cout << "\na";
  for (Eigen::Index k = 0; k < rates.rates().size(); ++k) std::cout << " " << rates.rates()[k];
  std::cout << "\nresidual " << residual << "\n";
  return residual <= 1e-9 ? 0 : kExitRuntime;
}

struct Check {
  std::string name;
  double value;
  double tolerance;
};

int run_selftest() {
  Rng rng(20240601);
  std::vector<Check> checks;

  double kernel_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 15);
    Eigen::VectorXd a(n - 1);
    for (Eigen::Index k = 0; k < a.size(); ++k) a[k] = 3.0 * uniform01(rng);
    const FactorizedRateMatrix q(Permutation(testing::random_permutation(n, rng)), a);
    const double b = 5.0 * uniform01(rng);
    const Eigen::MatrixXd ref = testing::expm_taylor(b * materialize_dense(q));
    kernel_err = std::max(kernel_err, (transition_kernel(q, b) - ref).cwiseAbs().maxCoeff());
  }
  checks.push_back({"kernel vs Taylor exponential", kernel_err, 1e-8});

  double bridge_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 31);
    const ProbVector p(testing::random_simplex(n, rng, 0.1));
    const ProbVector q(testing::random_simplex(n, rng, 0.1));
    const FactorizedRateMatrix rates = exact_rate_matrix(p, q);
    bridge_err = std::max(bridge_err, (evolve(q.values(), rates, 1.0) - p.values()).cwiseAbs().maxCoeff());
  }
  checks.push_back({"bridge round trip", bridge_err, 1e-9});

  double mass_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 15);
    Eigen::VectorXd a(n - 1);
    for (Eigen::Index k = 0; k < a.size(); ++k) a[k] = 3.0 * uniform01(rng);
    const FactorizedRateMatrix q(Permutation(testing::random_permutation(n, rng)), a);
    const Eigen::VectorXd v = 10.0 * testing::random_simplex(n, rng);
    mass_err = std::max(mass_err, std::abs(evolve(v, q, 5.0 * uniform01(rng)).sum() - v.sum()));
  }
  checks.push_back({"mass conservation", mass_err, 1e-12});

  std::vector<Eigen::VectorXd> p{testing::random_simplex(3, rng), testing::random_simplex(3, rng)};
  std::vector<Eigen::VectorXd> q{testing::random_simplex(3, rng), testing::random_simplex(3, rng)};
  const double factored = kl_divergence(p[0], q[0]) + kl_divergence(p[1], q[1]);
  checks.push_back({"KL factorization", std::abs(testing::joint_kl_enumerated(p, q) - factored), 1e-12});

  bool ok = true;
  for (const auto& c : checks) {
    const bool pass = c.value <= c.tolerance;
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << c.value << " (tolerance " << c.tolerance << ")\n";
  }
  return ok ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete Markov bridge: training, sampling, and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  bool resume = false;
  auto* train_cmd = app.add_subcommand("train", "Run the alternating training loop");
  train_cmd->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_flag("--resume", resume, "Continue from the checkpoint in the output directory");

  std::string ckpt_path;
  std::string out_path;
  int count = 16;
  int steps = 0;
  auto* sample_cmd = app.add_subcommand("sample", "Draw samples from a checkpoint");
  sample_cmd->add_option("checkpoint", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--count", count, "Number of samples")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--steps", steps, "Euler steps (default: from config)")->check(CLI::NonNegativeNumber);
  sample_cmd->add_option("--out", out_path, "Output file (default: stdout)");

  int mc_samples = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Estimate the variational bound for a checkpoint");
  eval_cmd->add_option("checkpoint", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--mc-samples", mc_samples, "Monte Carlo samples (default: from config)")
      ->check(CLI::NonNegativeNumber);

  std::string p_path;
  std::string q_path;
  auto* solve_cmd = app.add_subcommand("solve", "Solve p = q exp(Q) for a factorized Q");
  solve_cmd->add_option("p-file", p_path, "Target distribution")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("q-file", q_path, "Source distribution")->required()->check(CLI::ExistingFile);

  auto* selftest_cmd = app.add_subcommand("selftest", "Run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*train_cmd) return run_train(config_path, resume);
    if (*sample_cmd) return run_sample(ckpt_path, count, steps, out_path);
    if (*eval_cmd) return run_eval(ckpt_path, mc_samples);
    if (*solve_cmd) return run_solve(p_path, q_path);
    if (*selftest_cmd) return run_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
