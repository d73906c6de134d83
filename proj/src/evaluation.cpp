#include "dmb/evaluation.hpp"

#include "dmb/errors.hpp"

#include <cmath>
#include <numbers>

namespace dmb {

namespace {

constexpr int kEvalChunk = 1024;

}  // namespace

double kl_term(const State& x0, const RateMatrices& q, const NoiseSchedule& schedule,
               const ProductDistribution& terminal) {
  const int d = static_cast<int>(x0.size());
  if (static_cast<int>(q.size()) != d || terminal.dims() != d) throw InvalidArgument("kl_term: wrong d");
  const double beta_t = schedule.beta_terminal();
  double kl = 0.0;
  for (int i = 0; i < d; ++i) kl += kl_divergence(kernel_row(q[i], beta_t, x0[i]), terminal[i].values(), kRatioFloor);
  return kl;
}

ElboReport elbo_estimate(const RatioSource& source, const StateBatch& dataset, const RateMatrices& q,
                         const NoiseSchedule& schedule, const ProductDistribution& terminal, int mc_samples, Rng& rng,
                         double eps_t) {
  if (dataset.empty()) throw InvalidArgument("elbo_estimate: empty dataset");
  if (mc_samples < 2) throw InvalidArgument("elbo_estimate: need at least two Monte Carlo samples");

  // Independent streams for the two terms, both derived from the caller's generator.
  Rng score_rng(rng());

  ElboReport report;
  for (const auto& x : dataset) report.kl_term += kl_term(x, q, schedule, terminal);
  report.kl_term /= static_cast<double>(dataset.size());

  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int start = 0; start < mc_samples; start += kEvalChunk) {
    StateBatch x0(static_cast<std::size_t>(std::min(kEvalChunk, mc_samples - start)));
    for (auto& x : x0) x = dataset[pick(score_rng)];
    const ScoreBatch batch = make_score_batch(x0, q, schedule, eps_t, score_rng);
    const ScoreLossTerms terms = score_entropy_terms(source.ratios(batch.xt, batch.t), batch, q, schedule, eps_t);
    sum += terms.per_sample.sum();
    sum_sq += terms.per_sample.squaredNorm();
  }
  const double m = static_cast<double>(mc_samples);
  report.j_score = sum / m;
  const double variance = std::max(0.0, (sum_sq - m * report.j_score * report.j_score) / (m - 1.0));
  report.mc_std_error = std::sqrt(variance / m);

  report.total_nats = report.j_score + report.kl_term;
  report.bits_per_dim = report.total_nats / (static_cast<double>(dataset.front().size()) * std::numbers::ln2);
  if (!std::isfinite(report.total_nats) || !std::isfinite(report.mc_std_error)) {
    throw NumericalError("elbo_estimate: non-finite bound");
  }
  return report;
}

ElboReport elbo_estimate(const ScoreModel& model, const StateBatch& dataset, const RateMatrices& q,
                         const NoiseSchedule& schedule, const ProductDistribution& terminal, int mc_samples, Rng& rng) {
  return elbo_estimate(NetworkRatios(model), dataset, q, schedule, terminal, mc_samples, rng, model.eps_t());
}

}  // namespace dmb
