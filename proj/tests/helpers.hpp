#pragma once

#include "dmb/ctdmc.hpp"
#include "dmb/random.hpp"
#include "dmb/testing/oracles.hpp"

#include <Eigen/Dense>

#include <vector>

namespace dmb::test {

// Dense generator written out from the definition of H, independent of the library.
inline Eigen::MatrixXd dense_generator(const std::vector<int>& order, const Eigen::VectorXd& a) {
  const int n = static_cast<int>(order.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    double out = 0.0;
    for (int c = r + 1; c < n; ++c) {
      h(r, c) = a[c - 1];
      out += a[c - 1];
    }
    h(r, r) = -out;
  }
  Eigen::MatrixXd q(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) q(order[r], order[c]) = h(r, c);
  }
  return q;
}

inline FactorizedRateMatrix random_rate_matrix(int n, Rng& rng, double max_rate = 3.0) {
  Eigen::VectorXd a(n - 1);
  for (Eigen::Index k = 0; k < a.size(); ++k) a[k] = max_rate * uniform01(rng);
  return FactorizedRateMatrix(Permutation(testing::random_permutation(n, rng)), a);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace dmb::test
