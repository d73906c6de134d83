#include "dmb/sampler.hpp"

#include "dmb/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dmb {

namespace {

void check_config(const SamplerConfig& config, const NoiseSchedule& schedule) {
  if (config.num_steps < 1) throw InvalidArgument("sampler: num_steps must be at least 1");
  if (!(config.eps_t > 0.0) || !(config.eps_t < schedule.horizon())) {
    throw InvalidArgument("sampler: need 0 < eps_t < T");
  }
  if (config.batch_size < 1) throw InvalidArgument("sampler: batch_size must be positive");
}

StateBatch draw_terminal(const ProductDistribution& terminal, Rng& rng, int count) {
  StateBatch out(static_cast<std::size_t>(count), State(static_cast<std::size_t>(terminal.dims())));
  for (auto& x : out) {
    for (int i = 0; i < terminal.dims(); ++i) x[i] = sample_categorical(terminal[i].values(), rng);
  }
  return out;
}

// Advances `states` in place through the first `steps` grid intervals.
void run_steps(const SamplerConfig& config, const RateMatrices& q, const NoiseSchedule& schedule,
               const RatioSource& source, Rng& rng, int steps, StateBatch& states, SamplerDiagnostics* diag) {
  const double dt = (schedule.horizon() - config.eps_t) / config.num_steps;
  const int d = static_cast<int>(q.size());
  const int n = q.front().n();
  std::vector<double> times(states.size());
  for (int k = 0; k < steps; ++k) {
    const double t = schedule.horizon() - k * dt;
    std::fill(times.begin(), times.end(), t);
    const Eigen::MatrixXd ratios = source.ratios(states, times);
    const double sigma = schedule.sigma(t);
    for (std::size_t b = 0; b < states.size(); ++b) {
      for (int i = 0; i < d; ++i) {
        const Eigen::VectorXd r = ratios.col(static_cast<Eigen::Index>(b)).segment(static_cast<Eigen::Index>(i) * n, n);
        const Eigen::VectorXd probs = euler_step_distribution(q[i], sigma, dt, r, states[b][i], diag);
        states[b][i] = sample_categorical(probs, rng);
      }
    }
  }
}

}  // namespace

Eigen::VectorXd euler_step_distribution(const FactorizedRateMatrix& q, double sigma_t, double dt,
                                        const Eigen::VectorXd& ratios, int x, SamplerDiagnostics* diag) {
  if (!(dt >= 0.0)) throw InvalidArgument("euler_step_distribution: dt must be nonnegative");
  Eigen::VectorXd probs = dt * reverse_rate_row(q, sigma_t, ratios, x);
  probs[x] += 1.0;
  bool clamped = false;
  for (Eigen::Index y = 0; y < probs.size(); ++y) {
    if (probs[y] < 0.0) {
      probs[y] = 0.0;
      clamped = true;
    }
  }
  const double total = probs.sum();
  if (diag != nullptr) {
    ++diag->rows;
    if (clamped) ++diag->clamped_rows;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    if (diag != nullptr) ++diag->fallback_rows;
    probs.setZero();
    probs[x] = 1.0;
    return probs;
  }
  return probs / total;
}

State euler_reverse_step(const State& xt, double t, double dt, const Eigen::MatrixXd& ratios, const RateMatrices& q,
                         const NoiseSchedule& schedule, Rng& rng, SamplerDiagnostics* diag) {
  const int d = static_cast<int>(xt.size());
  if (static_cast<int>(q.size()) != d || ratios.rows() != d) throw InvalidArgument("euler_reverse_step: wrong d");
  const double sigma = schedule.sigma(t);
  State next(xt.size());
  for (int i = 0; i < d; ++i) {
    if (dt == 0.0) {
      next[i] = xt[i];
      continue;
    }
    const Eigen::VectorXd r = ratios.row(i).transpose();
    next[i] = sample_categorical(euler_step_distribution(q[i], sigma, dt, r, xt[i], diag), rng);
  }
  return next;
}

StateBatch generate(const SamplerConfig& config, const ProductDistribution& terminal, const RateMatrices& q,
                    const NoiseSchedule& schedule, const RatioSource& source, Rng& rng, int count,
                    SamplerDiagnostics* diag) {
  check_config(config, schedule);
  if (static_cast<int>(q.size()) != terminal.dims()) throw InvalidArgument("generate: wrong d");
  StateBatch out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int start = 0; start < count; start += config.batch_size) {
    StateBatch states = draw_terminal(terminal, rng, std::min(config.batch_size, count - start));
    run_steps(config, q, schedule, source, rng, config.num_steps, states, diag);
    out.insert(out.end(), states.begin(), states.end());
  }
  return out;
}

ProductDistribution estimate_mu(const SamplerConfig& config, const ProductDistribution& terminal,
                                const RateMatrices& q, const NoiseSchedule& schedule, const RatioSource& source,
                                Rng& rng, int trajectories, SamplerDiagnostics* diag) {
  check_config(config, schedule);
  if (trajectories < 1) throw InvalidArgument("estimate_mu: need at least one trajectory");
  const int d = terminal.dims();
  const int n = terminal.states();
  if (static_cast<int>(q.size()) != d) throw InvalidArgument("estimate_mu: wrong d");

  const double dt = (schedule.horizon() - config.eps_t) / config.num_steps;
  const double t_last = schedule.horizon() - (config.num_steps - 1) * dt;
  const double sigma_last = schedule.sigma(t_last);
  std::vector<Eigen::VectorXd> sums(static_cast<std::size_t>(d), Eigen::VectorXd::Zero(n));

  for (int start = 0; start < trajectories; start += config.batch_size) {
    StateBatch states = draw_terminal(terminal, rng, std::min(config.batch_size, trajectories - start));
    run_steps(config, q, schedule, source, rng, config.num_steps - 1, states, diag);
    const std::vector<double> times(states.size(), t_last);
    const Eigen::MatrixXd ratios = source.ratios(states, times);
    for (std::size_t b = 0; b < states.size(); ++b) {
      for (int i = 0; i < d; ++i) {
        const Eigen::VectorXd r = ratios.col(static_cast<Eigen::Index>(b)).segment(static_cast<Eigen::Index>(i) * n, n);
        sums[i] += euler_step_distribution(q[i], sigma_last, dt, r, states[b][i], diag);
      }
    }
  }

  std::vector<ProbVector> marginals;
  marginals.reserve(static_cast<std::size_t>(d));
  for (auto& s : sums) marginals.push_back(ProbVector::normalized(s / trajectories));
  return ProductDistribution(std::move(marginals));
}

double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw InvalidArgument("tv_distance: size mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

double tv_distance(const ProbVector& p, const ProbVector& q) { return tv_distance(p.values(), q.values()); }

ProductDistribution empirical_marginals(const StateBatch& samples, int n) {
  if (samples.empty()) throw InvalidArgument("empirical_marginals: no samples");
  const std::size_t d = samples.front().size();
  std::vector<Eigen::VectorXd> counts(d, Eigen::VectorXd::Zero(n));
  for (const auto& x : samples) {
    for (std::size_t i = 0; i < d; ++i) counts[i][x[i]] += 1.0;
  }
  std::vector<ProbVector> marginals;
  for (auto& c : counts) marginals.push_back(ProbVector::normalized(c));
  return ProductDistribution(std::move(marginals));
}

}  // namespace dmb
