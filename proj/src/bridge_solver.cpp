#include "dmb/bridge_solver.hpp"

#include "dmb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace dmb {

std::vector<double> SortedPair::cumulative_ratios() const {
  const int n = p_sorted.size();
  std::vector<double> ratios(static_cast<std::size_t>(n), 0.0);
  double p_sum = 0.0;
  double q_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    p_sum += p_sorted[k];
    q_sum += q_sorted[k];
    ratios[k] = q_sum > 0.0 ? p_sum / q_sum : 0.0;
  }
  return ratios;
}

SortedPair sort_permutation(const ProbVector& p, const ProbVector& q) {
  const int n = p.size();
  if (q.size() != n) throw InvalidArgument("sort_permutation: size mismatch");

  struct Key {
    bool empty;  // p = q = 0
    double ratio;
    int index;
  };
  std::vector<Key> keys;
  keys.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (q[i] == 0.0) {
      if (p[i] > 0.0) {
        throw UnsolvableSupport("sort_permutation: q[" + std::to_string(i) + "] = 0 but p[" + std::to_string(i) +
                                "] > 0");
      }
      keys.push_back({true, 0.0, i});
    } else {
      keys.push_back({false, p[i] / q[i], i});
    }
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    if (a.empty != b.empty) return a.empty;
    if (a.ratio != b.ratio) return a.ratio < b.ratio;
    return a.index < b.index;
  });

  std::vector<int> order(static_cast<std::size_t>(n));
  Eigen::VectorXd p_sorted(n);
  Eigen::VectorXd q_sorted(n);
  for (int k = 0; k < n; ++k) {
    order[k] = keys[k].index;
    p_sorted[k] = p[keys[k].index];
    q_sorted[k] = q[keys[k].index];
  }
  return SortedPair{Permutation(std::move(order)), ProbVector(std::move(p_sorted)), ProbVector(std::move(q_sorted))};
}

FactorizedRateMatrix exact_rate_matrix(const ProbVector& p, const ProbVector& q) {
  const SortedPair sorted = sort_permutation(p, q);
  const int n = p.size();
  if (n < 2) throw InvalidArgument("exact_rate_matrix: n must be at least 2");

  // log(P_k / Q_k); the full sum is 1/1 by construction.
  std::vector<std::optional<double>> log_ratio(static_cast<std::size_t>(n));
  double p_sum = 0.0;
  double q_sum = 0.0;
  for (int k = 0; k + 1 < n; ++k) {
    p_sum += sorted.p_sorted[k];
    q_sum += sorted.q_sorted[k];
    if (q_sum == 0.0) continue;  // leading p = q = 0 states, no constraint
    if (p_sum == 0.0) {
      throw DegeneratePrefix("exact_rate_matrix: sorted prefix of length " + std::to_string(k + 1) +
                             " has source mass but no target mass");
    }
    log_ratio[k] = std::log(p_sum) - std::log(q_sum);
  }
  log_ratio[n - 1] = 0.0;

  // Unconstrained leading entries copy the first constrained value, giving a_k = 0 there.
  int first = 0;
  while (!log_ratio[first]) ++first;
  for (int k = 0; k < first; ++k) log_ratio[k] = log_ratio[first];

  Eigen::VectorXd rates(n - 1);
  for (int c = 1; c < n; ++c) {
    rates[c - 1] = std::max(0.0, *log_ratio[c] - *log_ratio[c - 1]);
  }
  return FactorizedRateMatrix(sorted.perm, std::move(rates));
}

ProductDistribution estimate_marginals(const StateBatch& dataset, int n) {
  if (dataset.empty()) throw InvalidArgument("estimate_marginals: empty dataset");
  if (n < 1) throw InvalidArgument("estimate_marginals: n must be positive");
  const std::size_t d = dataset.front().size();
  if (d == 0) throw InvalidArgument("estimate_marginals: zero-dimensional samples");

  std::vector<Eigen::VectorXd> counts(d, Eigen::VectorXd::Zero(n));
  for (const auto& x : dataset) {
    if (x.size() != d) throw InvalidArgument("estimate_marginals: ragged dataset");
    for (std::size_t i = 0; i < d; ++i) {
      if (x[i] < 0 || x[i] >= n) {
        throw InvalidArgument("estimate_marginals: state " + std::to_string(x[i]) + " outside [0, n)");
      }
      counts[i][x[i]] += 1.0;
    }
  }
  const double total = static_cast<double>(dataset.size());
  std::vector<ProbVector> marginals;
  marginals.reserve(d);
  for (auto& c : counts) {
    Eigen::VectorXd freq = (c / total).array() + kHistogramSmoothing;
    marginals.push_back(ProbVector::normalized(std::move(freq)));
  }
  return ProductDistribution(std::move(marginals));
}

std::vector<Permutation> permutation_from_data(const ProductDistribution& mu_hat, const ProductDistribution& terminal) {
  if (mu_hat.dims() != terminal.dims() || mu_hat.states() != terminal.states()) {
    throw InvalidArgument("permutation_from_data: shape mismatch");
  }
  std::vector<Permutation> perms;
  perms.reserve(static_cast<std::size_t>(mu_hat.dims()));
  for (int i = 0; i < mu_hat.dims(); ++i) perms.push_back(sort_permutation(mu_hat[i], terminal[i]).perm);
  return perms;
}

}  // namespace dmb
