#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "cfmimo/model.hpp"

namespace cfmimo {

// Per-user transmit subproblem left after fixing the FP auxiliaries:
//   maximize 2 Re{v^H b} - v^H Q v - (lambda * alpha + mu) ||v||^2.
// The maximizer is v(c) = (c I + Q)^{-1} b with c = lambda * alpha + mu.
struct PowerSubproblem {
  CMatrix Q;  // N x N Hermitian PSD
  CVector b;  // N
  double alpha = 0.0;
};

class NumericalBlowUp : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Q diagonalized once so ||v(c)||^2 is cheap to evaluate during bisection.
class PowerCurve {
 public:
  explicit PowerCurve(const PowerSubproblem& sp) : b_(sp.b) {
    if (sp.Q.rows() == 1) {
      eig_ = Eigen::VectorXd::Constant(1, std::max(0.0, sp.Q(0, 0).real()));
      basis_ = CMatrix::Identity(1, 1);
    } else {
      Eigen::SelfAdjointEigenSolver<CMatrix> es(sp.Q);
      eig_ = es.eigenvalues().cwiseMax(0.0);
      basis_ = es.eigenvectors();
    }
    coeff2_ = (basis_.adjoint() * b_).cwiseAbs2();
    jitter_ = 1e-12 * std::max(1.0, eig_.maxCoeff());
  }

  double power(double c) const {
    double p = 0.0;
    for (Eigen::Index i = 0; i < eig_.size(); ++i) {
      if (coeff2_(i) == 0.0) continue;
      const double d = denom(c, i);
      p += coeff2_(i) / (d * d);
    }
    return p;
  }

  CVector beamformer(double c) const {
    CVector w = basis_.adjoint() * b_;
    for (Eigen::Index i = 0; i < eig_.size(); ++i) w(i) = coeff2_(i) == 0.0 ? Complex(0.0) : w(i) / denom(c, i);
    return basis_ * w;
  }

  double b_norm() const { return b_.norm(); }

 private:
  double denom(double c, Eigen::Index i) const {
    const double d = c + eig_(i);
    return d > 0.0 ? d : jitter_;
  }

  CVector b_;
  Eigen::VectorXd eig_;
  CMatrix basis_;
  Eigen::VectorXd coeff2_;
  double jitter_;
};

// Smallest mu >= 0 with ||v(base + mu)||^2 <= p_max, to relative tolerance tol.
// The returned mu is always on the feasible side.
inline double bisect_power_multiplier(const PowerCurve& curve, double base, double p_max, double tol) {
  if (curve.power(base) <= p_max) return 0.0;
  double lo = 0.0;
  // ||(cI + Q)^{-1} b|| <= ||b|| / c, so this bound is feasible when Q >= 0.
  double hi = std::max(curve.b_norm() / std::sqrt(p_max), 1e-300);
  int doublings = 0;
  while (!std::isfinite(hi) || !(curve.power(base + hi) <= p_max)) {
    if (++doublings > 100 || !std::isfinite(hi)) throw NumericalBlowUp("bisect_power_multiplier: no feasible upper bound");
    hi *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double p_hi = curve.power(base + hi);
    if (p_max - p_hi < tol * p_max) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (curve.power(base + mid) <= p_max)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

struct MultiplierSolution {
  double lambda = 0.0;
  std::vector<double> mu;
  std::vector<CVector> v;
};

// Power/capacity multipliers for one processor's users: try lambda = 0 with
// per-user bisection on mu; if sum alpha ||v||^2 exceeds the capacity, fix
// lambda = lambda_init and redo the per-user bisection.
inline MultiplierSolution solve_multipliers(std::span<const PowerSubproblem> problems, double capacity, double p_max,
                                            double lambda_init, double bisect_tol, bool enforce_capacity = true) {
  std::vector<PowerCurve> curves;
  curves.reserve(problems.size());
  for (const auto& sp : problems) curves.emplace_back(sp);

  MultiplierSolution sol;
  auto solve_with = [&](double lambda) {
    sol.lambda = lambda;
    sol.mu.assign(problems.size(), 0.0);
    sol.v.resize(problems.size());
    double load = 0.0;
    for (std::size_t i = 0; i < problems.size(); ++i) {
      const double base = lambda * problems[i].alpha;
      sol.mu[i] = bisect_power_multiplier(curves[i], base, p_max, bisect_tol);
      sol.v[i] = curves[i].beamformer(base + sol.mu[i]);
      load += problems[i].alpha * sol.v[i].squaredNorm();
    }
    return load;
  };

  const double load = solve_with(0.0);
  if (enforce_capacity && load > capacity) solve_with(lambda_init);
  return sol;
}

}  // namespace cfmimo
