#include "dmb/prob.hpp"

#include "dmb/errors.hpp"

#include <cmath>
#include <string>

namespace dmb {

ProbVector::ProbVector(Eigen::VectorXd probs) : probs_(std::move(probs)) {
  if (probs_.size() == 0) {
    throw InvalidArgument("ProbVector: empty");
  }
  for (Eigen::Index i = 0; i < probs_.size(); ++i) {
    if (!(probs_[i] >= 0.0) || !std::isfinite(probs_[i])) {
      throw InvalidArgument("ProbVector: entry " + std::to_string(i) + " is negative or not finite");
    }
  }
  if (std::abs(probs_.sum() - 1.0) > kProbSumTolerance) {
    throw InvalidArgument("ProbVector: entries sum to " + std::to_string(probs_.sum()));
  }
}

ProbVector::ProbVector(std::initializer_list<double> probs)
    : ProbVector(Eigen::Map<const Eigen::VectorXd>(probs.begin(), static_cast<Eigen::Index>(probs.size()))) {}

ProbVector ProbVector::uniform(int n) {
  if (n < 1) throw InvalidArgument("ProbVector::uniform: n < 1");
  return ProbVector(Eigen::VectorXd::Constant(n, 1.0 / n));
}

ProbVector ProbVector::point_mass(int n, int state) {
  if (state < 0 || state >= n) throw InvalidArgument("ProbVector::point_mass: state out of range");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v[state] = 1.0;
  return ProbVector(std::move(v));
}

ProbVector ProbVector::normalized(Eigen::VectorXd weights) {
  weights = weights.cwiseMax(0.0);
  const double total = weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw InvalidArgument("ProbVector::normalized: no positive mass");
  }
  return ProbVector(weights / total);
}

ProductDistribution::ProductDistribution(std::vector<ProbVector> marginals) : marginals_(std::move(marginals)) {
  if (marginals_.empty()) {
    throw InvalidArgument("ProductDistribution: d must be at least 1");
  }
  const int n = marginals_.front().size();
  for (const auto& m : marginals_) {
    if (m.size() != n) throw InvalidArgument("ProductDistribution: marginals disagree on n");
  }
}

ProductDistribution ProductDistribution::uniform(int d, int n) {
  return ProductDistribution(std::vector<ProbVector>(static_cast<std::size_t>(d), ProbVector::uniform(n)));
}

double ProductDistribution::probability(std::span<const int> x) const {
  if (static_cast<int>(x.size()) != dims()) throw InvalidArgument("ProductDistribution::probability: wrong d");
  double p = 1.0;
  for (int i = 0; i < dims(); ++i) p *= marginals_[i][x[i]];
  return p;
}

double ProductDistribution::entropy() const {
  double h = 0.0;
  for (const auto& m : marginals_) h += dmb::entropy(m);
  return h;
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double floor) {
  if (p.size() != q.size()) throw InvalidArgument("kl_divergence: size mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(std::max(q[i], floor)));
  }
  return kl;
}

double kl_divergence(const ProbVector& p, const ProbVector& q, double floor) {
  return kl_divergence(p.values(), q.values(), floor);
}

double kl_divergence(const ProductDistribution& p, const ProductDistribution& q, double floor) {
  if (p.dims() != q.dims()) throw InvalidArgument("kl_divergence: d mismatch");
  double kl = 0.0;
  for (int i = 0; i < p.dims(); ++i) kl += kl_divergence(p[i], q[i], floor);
  return kl;
}

double entropy(const ProbVector& p) {
  double h = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h;
}

}  // namespace dmb
