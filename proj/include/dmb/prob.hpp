#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace dmb {

// One point of the product space: state index per dimension.
using State = std::vector<int>;
using StateBatch = std::vector<State>;

inline constexpr double kProbSumTolerance = 1e-9;

// Categorical distribution over n states. Validated on construction.
class ProbVector {
 public:
  ProbVector() = default;
  explicit ProbVector(Eigen::VectorXd probs);
  ProbVector(std::initializer_list<double> probs);

  static ProbVector uniform(int n);
  static ProbVector point_mass(int n, int state);
  // Clamps negatives to zero and rescales to unit sum.
  static ProbVector normalized(Eigen::VectorXd weights);

  int size() const { return static_cast<int>(probs_.size()); }
  double operator[](int i) const { return probs_[i]; }
  const Eigen::VectorXd& values() const { return probs_; }

  bool operator==(const ProbVector& other) const { return probs_ == other.probs_; }

 private:
  Eigen::VectorXd probs_;
};

// d independent categorical marginals sharing the same state count n.
class ProductDistribution {
 public:
  ProductDistribution() = default;
  explicit ProductDistribution(std::vector<ProbVector> marginals);

  static ProductDistribution uniform(int d, int n);

  int dims() const { return static_cast<int>(marginals_.size()); }
  int states() const { return marginals_.empty() ? 0 : marginals_.front().size(); }
  const ProbVector& operator[](int i) const { return marginals_[i]; }
  const std::vector<ProbVector>& marginals() const { return marginals_; }

  // Joint probability of a full state tuple.
  double probability(std::span<const int> x) const;
  // Sum of per-dimension Shannon entropies, in nats.
  double entropy() const;

  bool operator==(const ProductDistribution& other) const { return marginals_ == other.marginals_; }

 private:
  std::vector<ProbVector> marginals_;
};

// KL(p || q) in nats. Entries of q are floored at `floor` so the result stays finite.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double floor = 1e-12);
double kl_divergence(const ProbVector& p, const ProbVector& q, double floor = 1e-12);
// Sum of per-dimension KL divergences.
double kl_divergence(const ProductDistribution& p, const ProductDistribution& q, double floor = 1e-12);

double entropy(const ProbVector& p);

}  // namespace dmb
