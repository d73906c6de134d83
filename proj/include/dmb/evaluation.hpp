#pragma once

// Variational bound accounting: E[-log p(x0)] <= J_score + E KL(p_{T|0} || p_T),
// with the KL term factorized over dimensions.

#include "dmb/ctdmc.hpp"
#include "dmb/prob.hpp"
#include "dmb/random.hpp"
#include "dmb/score_learning.hpp"

namespace dmb {

struct ElboReport {
  double j_score = 0.0;  // nats
  double kl_term = 0.0;  // nats
  double total_nats = 0.0;
  double bits_per_dim = 0.0;
  double mc_std_error = 0.0;  // of j_score
};

// sum_i KL(exp(beta_T Q_i)[x0_i, .] || terminal_i).
double kl_term(const State& x0, const RateMatrices& q, const NoiseSchedule& schedule,
               const ProductDistribution& terminal);

// j_score by Monte Carlo over (x0, t, x_t) with `mc_samples` draws; kl_term
// averaged over the whole dataset.
ElboReport elbo_estimate(const RatioSource& source, const StateBatch& dataset, const RateMatrices& q,
                         const NoiseSchedule& schedule, const ProductDistribution& terminal, int mc_samples, Rng& rng,
                         double eps_t = kDefaultEpsT);
ElboReport elbo_estimate(const ScoreModel& model, const StateBatch& dataset, const RateMatrices& q,
                         const NoiseSchedule& schedule, const ProductDistribution& terminal, int mc_samples, Rng& rng);

}  // namespace dmb
