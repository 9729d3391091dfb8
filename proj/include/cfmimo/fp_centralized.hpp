#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cfmimo/allocation.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/multipliers.hpp"
#include "cfmimo/received_gram.hpp"
#include "cfmimo/topology.hpp"

namespace cfmimo {

// Iterate of the single-CPU weighted sum-rate solver.
struct AllocationState {
  std::vector<CVector> V;      // transmit beamformers, N x 1
  std::vector<double> gamma;   // auxiliary SINRs
  std::vector<CVector> Y;      // auxiliary receivers, M|C_u| x 1
  std::vector<double> alpha;   // reweighted-l1 weights
  double lambda = 0.0;         // capacity multiplier
  std::vector<double> mu;      // per-user power multipliers
  std::vector<double> delta;   // sum-rate weights
  int iter = 0;
};

// Full power on every user, alpha = 1/P_T.
inline AllocationState init_centralized(const NetworkTopology& topo, const ChannelRealization& ch,
                                        std::span<const double> delta, const SimConfig& cfg) {
  const int U = topo.num_users();
  const double pt = cfg.pt_mw();
  AllocationState s;
  s.V.resize(U);
  for (int u = 0; u < U; ++u)
    s.V[u] = full_power_init(concat_cluster_channel(ch, topo.clusters.serving_aps[u], u), pt);
  s.gamma.assign(U, 0.0);
  s.Y.assign(U, CVector());
  s.alpha.assign(U, 1.0 / pt);
  s.mu.assign(U, 0.0);
  s.delta.assign(delta.begin(), delta.end());
  return s;
}

namespace detail {

inline std::vector<int> all_users(int U) {
  std::vector<int> users(U);
  for (int u = 0; u < U; ++u) users[u] = u;
  return users;
}

inline std::vector<double> gamma_cent(const ChannelRealization& ch, const NetworkTopology& topo,
                                      const ReceivedGram& gram) {
  const int U = topo.num_users();
  std::vector<double> gamma(U, 0.0);
  for (int u = 0; u < U; ++u) {
    const auto& cu = topo.clusters.serving_aps[u];
    const CVector x = gram.received(cu, u);
    if (x.squaredNorm() == 0.0) continue;
    CMatrix b = gram.covariance(cu);
    b.noalias() -= x * x.adjoint();
    b.diagonal().array() += ch.sigma2;
    gamma[u] = inverse_quadratic_form(b, x);
  }
  return gamma;
}

inline std::vector<CVector> y_cent(const AllocationState& s, const ChannelRealization& ch,
                                   const NetworkTopology& topo, const ReceivedGram& gram) {
  const int U = topo.num_users();
  std::vector<CVector> Y(U);
  for (int u = 0; u < U; ++u) {
    const auto& cu = topo.clusters.serving_aps[u];
    const CVector x = gram.received(cu, u);
    if (x.squaredNorm() == 0.0) {
      Y[u] = CVector::Zero(x.size());
      continue;
    }
    CMatrix a = gram.covariance(cu);
    a.diagonal().array() += ch.sigma2;
    Y[u] = std::sqrt(s.delta[u] * (1.0 + s.gamma[u])) * HermitianSolver(a).solve(x);
  }
  return Y;
}

}  // namespace detail

// gamma_u = v_u^H H_uu^H (sigma^2 I + sum_{u' != u} H_uu' v_u' v_u'^H H_uu'^H)^{-1} H_uu v_u.
inline std::vector<double> update_gamma_cent(const AllocationState& s, const ChannelRealization& ch,
                                             const NetworkTopology& topo) {
  const auto users = detail::all_users(topo.num_users());
  return detail::gamma_cent(ch, topo, ReceivedGram(ch, s.V, users));
}

// y_u = sqrt(delta_u (1 + gamma_u)) (sigma^2 I + sum_{u'} H_uu' v_u' v_u'^H H_uu'^H)^{-1} H_uu v_u,
// the MMSE receiver up to scale.
inline std::vector<CVector> update_y_cent(const AllocationState& s, const ChannelRealization& ch,
                                          const NetworkTopology& topo) {
  const auto users = detail::all_users(topo.num_users());
  return detail::y_cent(s, ch, topo, ReceivedGram(ch, s.V, users));
}

// Per-user quadratic subproblems of the transmit update (Q_u, b_u, alpha_u).
inline std::vector<PowerSubproblem> centralized_power_subproblems(const AllocationState& s,
                                                                  const ChannelRealization& ch,
                                                                  const NetworkTopology& topo) {
  const int U = topo.num_users();
  std::vector<ReceiveTap> taps(U);
  for (int u = 0; u < U; ++u) taps[u] = {&topo.clusters.serving_aps[u], &s.Y[u]};
  auto Q = back_projected_gram(ch, taps);
  std::vector<PowerSubproblem> out(U);
  for (int u = 0; u < U; ++u) {
    out[u].Q = std::move(Q[u]);
    out[u].b = std::sqrt(s.delta[u] * (1.0 + s.gamma[u])) *
               back_project(ch, topo.clusters.serving_aps[u], s.Y[u], u);
    out[u].alpha = s.alpha[u];
  }
  return out;
}

inline MultiplierSolution update_v_cent(const AllocationState& s, const ChannelRealization& ch,
                                        const NetworkTopology& topo, const SimConfig& cfg, FpOptions opts = {}) {
  const auto problems = centralized_power_subproblems(s, ch, topo);
  const double capacity = static_cast<double>(topo.num_aps()) * cfg.M;
  return solve_multipliers(problems, capacity, cfg.pt_mw(), cfg.lambda_init, cfg.bisect_tol, opts.enforce_capacity);
}

// Quadratic-transform surrogate f_q(V, Gamma, Y).
inline double surrogate_objective_cent(const AllocationState& s, const ChannelRealization& ch,
                                       const NetworkTopology& topo) {
  const auto users = detail::all_users(topo.num_users());
  const ReceivedGram gram(ch, s.V, users);
  double f = 0.0;
  for (int u = 0; u < topo.num_users(); ++u) {
    const auto& cu = topo.clusters.serving_aps[u];
    f += s.delta[u] * (std::log1p(s.gamma[u]) - s.gamma[u]);
    const CVector x = gram.received(cu, u);
    f += 2.0 * std::sqrt(s.delta[u] * (1.0 + s.gamma[u])) * s.Y[u].dot(x).real();
    CMatrix a = gram.covariance(cu);
    a.diagonal().array() += ch.sigma2;
    f -= s.Y[u].dot(a * s.Y[u]).real();
  }
  return f;
}

using CentralizedObserver = std::function<void(const AllocationState&)>;

// Single-CPU weighted sum-rate allocation with reweighted-l1 scheduling.
inline AllocationResult run_centralized(const NetworkTopology& topo, const ChannelRealization& ch,
                                        std::span<const double> delta, const SimConfig& cfg, FpOptions opts = {},
                                        const CentralizedObserver& observer = {}) {
  const int U = topo.num_users();
  AllocationResult res;
  res.serving_groups.assign(U, {});
  if (U == 0) {
    res.converged = true;
    return res;
  }
  AllocationState s = init_centralized(topo, ch, delta, cfg);
  const auto users = detail::all_users(U);
  const double eps = cfg.epsilon();
  double previous = 0.0;
  for (int it = 0; it < cfg.fp_max_iters; ++it) {
    {
      const ReceivedGram gram(ch, s.V, users);
      s.gamma = detail::gamma_cent(ch, topo, gram);
      s.Y = detail::y_cent(s, ch, topo, gram);
    }
    const double objective = weighted_log_sum(s.gamma, s.delta);
    res.trace.push_back(objective);
    auto sol = update_v_cent(s, ch, topo, cfg, opts);
    s.V = std::move(sol.v);
    s.lambda = sol.lambda;
    s.mu = std::move(sol.mu);
    if (opts.update_alpha) s.alpha = update_alpha(s.V, eps);
    s.iter = it + 1;
    if (observer) observer(s);
    if (it > 0 && fp_converged(previous, objective, cfg.fp_rel_tol)) {
      res.converged = true;
      break;
    }
    previous = objective;
  }
  res.iterations = s.iter;

  std::vector<double> power(U);
  for (int u = 0; u < U; ++u) power[u] = s.V[u].squaredNorm();
  const auto keep = threshold_and_cap(power, cfg.power_threshold_frac * cfg.pt_mw(), topo.num_aps() * cfg.M);
  res.V.assign(U, CVector::Zero(cfg.N));
  for (int u : keep) {
    res.V[u] = s.V[u];
    res.scheduled.push_back(u);
    res.serving_groups[u].push_back(topo.clusters.serving_aps[u]);
  }
  return res;
}

}  // namespace cfmimo
