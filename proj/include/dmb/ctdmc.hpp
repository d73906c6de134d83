#pragma once

// Continuous-time discrete Markov chains with the factorized generator
//
//   Q = A H A^{-1},  H upper triangular with zero row sums,
//
// where A is a fixed permutation and H carries n-1 nonnegative rates a_k:
// row r of H holds a_{c-1} in every column c > r and -sum_{k>=r} a_k on the
// diagonal. H = U diag(lambda) U^{-1} with U the all-ones upper triangular
// matrix and lambda_c = -sum_{k>=c} a_k (lambda_{n-1} = 0), so exp(beta Q)
// has a closed form that never touches a dense exponential.

#include "dmb/prob.hpp"

#include <Eigen/Dense>

#include <vector>

namespace dmb {

// A permutation stored as an index map. order()[k] is the original state that
// occupies sorted position k; position()[i] is the sorted position of state i.
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<int> order);

  static Permutation identity(int n);

  int size() const { return static_cast<int>(order_.size()); }
  const std::vector<int>& order() const { return order_; }
  const std::vector<int>& position() const { return position_; }
  int state_at(int k) const { return order_[k]; }
  int position_of(int state) const { return position_[state]; }
  bool is_identity() const;

  bool operator==(const Permutation& other) const { return order_ == other.order_; }

 private:
  std::vector<int> order_;
  std::vector<int> position_;
};

class FactorizedRateMatrix {
 public:
  FactorizedRateMatrix() = default;
  // `rates` holds a_1..a_{n-1}; perm.size() must equal rates.size() + 1.
  FactorizedRateMatrix(Permutation perm, Eigen::VectorXd rates);

  // a_i = 0 for i < n-1 and a_{n-1} = 1: every state leaks into the permuted last state.
  static FactorizedRateMatrix absorbing(Permutation perm);
  // a_i = value for all i.
  static FactorizedRateMatrix uniform_rates(Permutation perm, double value);
  static FactorizedRateMatrix zero(int n);

  int n() const { return perm_.size(); }
  const Permutation& perm() const { return perm_; }
  const Eigen::VectorXd& rates() const { return rates_; }

  // Replaces the rates, clamping each entry at zero.
  void set_rates_projected(const Eigen::VectorXd& rates);

  // lambda_c = -sum_{k >= c} a_k for c < n-1, lambda_{n-1} = 0 (sorted coordinates).
  Eigen::VectorXd eigenvalues() const;

  // Dense Q[from][to]; off-diagonal entries only need one rate lookup.
  double rate(int from, int to) const;

  bool operator==(const FactorizedRateMatrix& other) const {
    return perm_ == other.perm_ && rates_ == other.rates_;
  }

 private:
  Permutation perm_;
  Eigen::VectorXd rates_;
};

enum class ScheduleKind { kLinear };

// sigma(t) = sigma_min + (sigma_max - sigma_min) t / T and its running integral beta(t).
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  static NoiseSchedule linear(double sigma_min, double sigma_max, double horizon = 1.0);

  ScheduleKind kind() const { return kind_; }
  double sigma_min() const { return sigma_min_; }
  double sigma_max() const { return sigma_max_; }
  double horizon() const { return horizon_; }

  double sigma(double t) const;
  double beta(double t) const;
  double beta_terminal() const { return beta(horizon_); }

 private:
  void check_time(double t) const;

  ScheduleKind kind_ = ScheduleKind::kLinear;
  double sigma_min_ = 0.1;
  double sigma_max_ = 10.0;
  double horizon_ = 1.0;
};

double beta(const NoiseSchedule& schedule, double t);

// exp(beta Q) before the clamp-and-renormalize pass. Exposed for row-sum tests.
Eigen::MatrixXd transition_kernel_raw(const FactorizedRateMatrix& q, double beta);
// exp(beta Q), clamped at zero and row-renormalized.
Eigen::MatrixXd transition_kernel(const FactorizedRateMatrix& q, double beta);
// Row `from` of transition_kernel in O(n).
Eigen::VectorXd kernel_row(const FactorizedRateMatrix& q, double beta, int from);

// Dense A H A^{-1}. Test and diagnostics use only.
Eigen::MatrixXd materialize_dense(const FactorizedRateMatrix& q);

// p0 exp(beta Q) for arbitrary (possibly unnormalized) row vectors.
Eigen::VectorXd evolve(const Eigen::VectorXd& p0, const FactorizedRateMatrix& q, double beta);
ProbVector evolve(const ProbVector& p0, const FactorizedRateMatrix& q, double beta);

// Row x of the reverse generator sigma_t * Q^T weighted by the ratio vector,
// with the diagonal set so the row sums to zero.
Eigen::VectorXd reverse_rate_row(const FactorizedRateMatrix& q, double sigma_t, const Eigen::VectorXd& ratios, int x);

// Floor applied to kernel entries before they are used as divisors.
inline constexpr double kRatioFloor = 1e-12;

}  // namespace dmb
