#include "dmb/ctdmc.hpp"

#include "dmb/errors.hpp"

#include <cmath>
#include <string>

namespace dmb {

Permutation::Permutation(std::vector<int> order) : order_(std::move(order)), position_(order_.size(), -1) {
  const int n = size();
  for (int k = 0; k < n; ++k) {
    const int s = order_[k];
    if (s < 0 || s >= n || position_[s] != -1) {
      throw InvalidArgument("Permutation: not a permutation of 0..n-1");
    }
    position_[s] = k;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[i] = i;
  return Permutation(std::move(order));
}

bool Permutation::is_identity() const {
  for (int k = 0; k < size(); ++k) {
    if (order_[k] != k) return false;
  }
  return true;
}

FactorizedRateMatrix::FactorizedRateMatrix(Permutation perm, Eigen::VectorXd rates)
    : perm_(std::move(perm)), rates_(std::move(rates)) {
  if (perm_.size() < 2) throw InvalidArgument("FactorizedRateMatrix: n must be at least 2");
  if (rates_.size() != perm_.size() - 1) throw InvalidArgument("FactorizedRateMatrix: need n-1 rates");
  for (Eigen::Index k = 0; k < rates_.size(); ++k) {
    if (!(rates_[k] >= 0.0) || !std::isfinite(rates_[k])) {
      throw InvalidArgument("FactorizedRateMatrix: rate a[" + std::to_string(k) + "] is negative or not finite");
    }
  }
}

FactorizedRateMatrix FactorizedRateMatrix::absorbing(Permutation perm) {
  Eigen::VectorXd rates = Eigen::VectorXd::Zero(perm.size() - 1);
  rates[rates.size() - 1] = 1.0;
  return FactorizedRateMatrix(std::move(perm), std::move(rates));
}

FactorizedRateMatrix FactorizedRateMatrix::uniform_rates(Permutation perm, double value) {
  const int n = perm.size();
  return FactorizedRateMatrix(std::move(perm), Eigen::VectorXd::Constant(n - 1, value));
}

FactorizedRateMatrix FactorizedRateMatrix::zero(int n) {
  return FactorizedRateMatrix(Permutation::identity(n), Eigen::VectorXd::Zero(n - 1));
}

void FactorizedRateMatrix::set_rates_projected(const Eigen::VectorXd& rates) {
  if (rates.size() != rates_.size()) throw InvalidArgument("set_rates_projected: size mismatch");
  for (Eigen::Index k = 0; k < rates.size(); ++k) {
    if (!std::isfinite(rates[k])) throw NumericalError("set_rates_projected: non-finite rate");
  }
  rates_ = rates.cwiseMax(0.0);
}

Eigen::VectorXd FactorizedRateMatrix::eigenvalues() const {
  const int size = n();
  Eigen::VectorXd lambda(size);
  lambda[size - 1] = 0.0;
  double suffix = 0.0;
  for (int c = size - 2; c >= 0; --c) {
    suffix += rates_[c];
    lambda[c] = -suffix;
  }
  return lambda;
}

double FactorizedRateMatrix::rate(int from, int to) const {
  const int r = perm_.position_of(from);
  const int c = perm_.position_of(to);
  if (r == c) return eigenvalues()[r];
  return c > r ? rates_[c - 1] : 0.0;
}

NoiseSchedule NoiseSchedule::linear(double sigma_min, double sigma_max, double horizon) {
  if (!(sigma_min > 0.0) || !(sigma_max >= sigma_min) || !(horizon > 0.0) || !std::isfinite(sigma_max) ||
      !std::isfinite(horizon)) {
    throw InvalidArgument("NoiseSchedule: need 0 < sigma_min <= sigma_max and T > 0");
  }
  NoiseSchedule s;
  s.kind_ = ScheduleKind::kLinear;
  s.sigma_min_ = sigma_min;
  s.sigma_max_ = sigma_max;
  s.horizon_ = horizon;
  return s;
}

void NoiseSchedule::check_time(double t) const {
  if (!(t >= 0.0) || !(t <= horizon_)) {
    throw DomainError("NoiseSchedule: t = " + std::to_string(t) + " outside [0, " + std::to_string(horizon_) + "]");
  }
}

double NoiseSchedule::sigma(double t) const {
  check_time(t);
  return sigma_min_ + (sigma_max_ - sigma_min_) * t / horizon_;
}

double NoiseSchedule::beta(double t) const {
  check_time(t);
  return sigma_min_ * t + (sigma_max_ - sigma_min_) * t * t / (2.0 * horizon_);
}

double beta(const NoiseSchedule& schedule, double t) { return schedule.beta(t); }

namespace {

void check_beta(double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw DomainError("transition kernel: beta must be finite and nonnegative");
  }
}

// D_c = exp(beta lambda_c) in sorted coordinates.
Eigen::VectorXd spectral_factors(const FactorizedRateMatrix& q, double beta) {
  return (beta * q.eigenvalues()).array().exp().matrix();
}

// Row r of U diag(D) U^{-1}: D_r on the diagonal and the adjacent difference
// D_c - D_{c-1} = D_c (1 - exp(-beta a_{c-1})) to the right of it.
void fill_sorted_row(const FactorizedRateMatrix& q, double beta, const Eigen::VectorXd& factors, int r,
                     Eigen::VectorXd& out_sorted) {
  const int n = q.n();
  out_sorted.setZero(n);
  out_sorted[r] = factors[r];
  for (int c = r + 1; c < n; ++c) {
    out_sorted[c] = -factors[c] * std::expm1(-beta * q.rates()[c - 1]);
  }
}

void clamp_and_renormalize(Eigen::Ref<Eigen::VectorXd> row) {
  row = row.cwiseMax(0.0);
  const double total = row.sum();
  if (total > 0.0) row /= total;
}

}  // namespace

Eigen::MatrixXd transition_kernel_raw(const FactorizedRateMatrix& q, double beta) {
  check_beta(beta);
  const int n = q.n();
  const auto& perm = q.perm();
  const Eigen::VectorXd factors = spectral_factors(q, beta);
  Eigen::MatrixXd kernel(n, n);
  Eigen::VectorXd sorted_row;
  for (int r = 0; r < n; ++r) {
    fill_sorted_row(q, beta, factors, r, sorted_row);
    for (int c = 0; c < n; ++c) kernel(perm.state_at(r), perm.state_at(c)) = sorted_row[c];
  }
  return kernel;
}

Eigen::MatrixXd transition_kernel(const FactorizedRateMatrix& q, double beta) {
  Eigen::MatrixXd kernel = transition_kernel_raw(q, beta);
  for (Eigen::Index i = 0; i < kernel.rows(); ++i) {
    Eigen::VectorXd row = kernel.row(i).transpose();
    clamp_and_renormalize(row);
    kernel.row(i) = row.transpose();
  }
  return kernel;
}

Eigen::VectorXd kernel_row(const FactorizedRateMatrix& q, double beta, int from) {
  check_beta(beta);
  const int n = q.n();
  if (from < 0 || from >= n) throw InvalidArgument("kernel_row: state out of range");
  const auto& perm = q.perm();
  const Eigen::VectorXd factors = spectral_factors(q, beta);
  Eigen::VectorXd sorted_row;
  fill_sorted_row(q, beta, factors, perm.position_of(from), sorted_row);
  Eigen::VectorXd row(n);
  for (int c = 0; c < n; ++c) row[perm.state_at(c)] = sorted_row[c];
  clamp_and_renormalize(row);
  return row;
}

Eigen::MatrixXd materialize_dense(const FactorizedRateMatrix& q) {
  const int n = q.n();
  const auto& perm = q.perm();
  const Eigen::VectorXd lambda = q.eigenvalues();
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    dense(perm.state_at(r), perm.state_at(r)) = lambda[r];
    for (int c = r + 1; c < n; ++c) dense(perm.state_at(r), perm.state_at(c)) = q.rates()[c - 1];
  }
  return dense;
}

Eigen::VectorXd evolve(const Eigen::VectorXd& p0, const FactorizedRateMatrix& q, double beta) {
  if (p0.size() != q.n()) throw InvalidArgument("evolve: size mismatch");
  return transition_kernel(q, beta).transpose() * p0;
}

ProbVector evolve(const ProbVector& p0, const FactorizedRateMatrix& q, double beta) {
  return ProbVector::normalized(evolve(p0.values(), q, beta));
}

Eigen::VectorXd reverse_rate_row(const FactorizedRateMatrix& q, double sigma_t, const Eigen::VectorXd& ratios, int x) {
  const int n = q.n();
  if (ratios.size() != n) throw InvalidArgument("reverse_rate_row: ratio vector has wrong size");
  if (x < 0 || x >= n) throw InvalidArgument("reverse_rate_row: state out of range");
  Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
  double outflow = 0.0;
  for (int y = 0; y < n; ++y) {
    if (y == x) continue;
    const double entry = sigma_t * q.rate(y, x) * ratios[y];
    if (entry < 0.0 || std::isnan(entry)) {
      throw InvariantViolation("reverse_rate_row: negative reverse rate toward state " + std::to_string(y));
    }
    row[y] = entry;
    outflow += entry;
  }
  row[x] = -outflow;
  return row;
}

}  // namespace dmb
