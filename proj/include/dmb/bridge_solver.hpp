#pragma once

// Constructive solution of p = q exp(Q) inside the factorized family, plus the
// histogram-based permutation choice used for high-dimensional data.

#include "dmb/ctdmc.hpp"
#include "dmb/prob.hpp"

#include <vector>

namespace dmb {

// p and q reordered so that p'_k / q'_k is ascending. Under that order the
// cumulative ratios P_k / Q_k are nondecreasing and end at 1.
struct SortedPair {
  Permutation perm;
  ProbVector p_sorted;
  ProbVector q_sorted;

  // P_k / Q_k for k = 0..n-1. Prefixes with Q_k = 0 report 0.
  std::vector<double> cumulative_ratios() const;
};

// Ascending p[i]/q[i], ties by index. States with p = q = 0 come first.
// Throws UnsolvableSupport when q[i] = 0 < p[i].
SortedPair sort_permutation(const ProbVector& p, const ProbVector& q);

// Rates a with q exp(Q) = p, Q = A H A^{-1}:
//   a_{k-1} = ln(P_k / Q_k) - ln(P_{k-1} / Q_{k-1}),  P_{n-1} / Q_{n-1} = 1.
// Throws DegeneratePrefix when a reachable prefix carries no target mass,
// which would need an infinite rate.
FactorizedRateMatrix exact_rate_matrix(const ProbVector& p, const ProbVector& q);

inline constexpr double kHistogramSmoothing = 1e-6;

// Per-dimension empirical frequencies with additive smoothing.
ProductDistribution estimate_marginals(const StateBatch& dataset, int n);

// sort_permutation(mu_hat[i], terminal[i]).perm for every dimension.
std::vector<Permutation> permutation_from_data(const ProductDistribution& mu_hat, const ProductDistribution& terminal);

}  // namespace dmb
