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

// Local decisions tau_pu of every processor plus the exchanged transmit set V.
// Per-processor vectors are indexed like layout.users[p].
struct LocalDecisionSet {
  ProcessorLayout layout;
  std::vector<std::vector<CVector>> tau;
  std::vector<std::vector<double>> gamma;
  std::vector<std::vector<CVector>> y;
  std::vector<std::vector<double>> alpha;
  std::vector<std::vector<double>> mu;
  std::vector<double> lambda;
  std::vector<CVector> V;      // per user
  std::vector<double> delta;   // per user; delta_pu inherits delta_u
  int iter = 0;
};

inline LocalDecisionSet init_local_decisions(ProcessorLayout layout, const NetworkTopology& topo,
                                             const ChannelRealization& ch, std::span<const double> delta,
                                             const SimConfig& cfg) {
  const double pt = cfg.pt_mw();
  LocalDecisionSet d;
  d.layout = std::move(layout);
  const int P = d.layout.size();
  d.tau.resize(P);
  d.gamma.resize(P);
  d.y.resize(P);
  d.alpha.resize(P);
  d.mu.resize(P);
  d.lambda.assign(P, 0.0);
  for (int p = 0; p < P; ++p) {
    const auto n = d.layout.users[p].size();
    for (std::size_t k = 0; k < n; ++k) {
      const int u = d.layout.users[p][k];
      d.tau[p].push_back(full_power_init(concat_cluster_channel(ch, d.layout.user_aps[p][k], u), pt));
    }
    d.gamma[p].assign(n, 0.0);
    d.y[p].assign(n, CVector());
    d.alpha[p].assign(n, 1.0 / pt);
    d.mu[p].assign(n, 0.0);
  }
  d.V.resize(topo.num_users());
  for (int u = 0; u < topo.num_users(); ++u)
    d.V[u] = full_power_init(concat_cluster_channel(ch, topo.clusters.serving_aps[u], u), pt);
  d.delta.assign(delta.begin(), delta.end());
  return d;
}

namespace detail {

inline std::vector<double> gamma_local(int p, const LocalDecisionSet& d, const ChannelRealization& ch,
                                       const ReceivedGram& gram_v) {
  const auto& users = d.layout.users[p];
  std::vector<double> gamma(users.size(), 0.0);
  for (std::size_t k = 0; k < users.size(); ++k) {
    const int u = users[k];
    const auto& s = d.layout.user_aps[p][k];
    const CVector x = concat_cluster_channel(ch, s, u) * d.tau[p][k];
    if (x.squaredNorm() == 0.0) continue;
    const CVector e = gram_v.received(s, u);
    CMatrix b = gram_v.covariance(s);
    b.noalias() -= e * e.adjoint();
    b.diagonal().array() += ch.sigma2;
    gamma[k] = inverse_quadratic_form(b, x);
  }
  return gamma;
}

inline std::vector<CVector> y_local(int p, const LocalDecisionSet& d, const ChannelRealization& ch,
                                    const ReceivedGram& gram_v) {
  const auto& users = d.layout.users[p];
  std::vector<CVector> Y(users.size());
  for (std::size_t k = 0; k < users.size(); ++k) {
    const int u = users[k];
    const auto& s = d.layout.user_aps[p][k];
    const CVector x = concat_cluster_channel(ch, s, u) * d.tau[p][k];
    if (x.squaredNorm() == 0.0) {
      Y[k] = CVector::Zero(x.size());
      continue;
    }
    const CVector e = gram_v.received(s, u);
    CMatrix a = gram_v.covariance(s);
    a.noalias() += x * x.adjoint() - e * e.adjoint();
    a.diagonal().array() += ch.sigma2;
    Y[k] = std::sqrt(d.delta[u] * (1.0 + d.gamma[p][k])) * HermitianSolver(a).solve(x);
  }
  return Y;
}

inline std::vector<int> user_range(int U) {
  std::vector<int> v(U);
  for (int u = 0; u < U; ++u) v[u] = u;
  return v;
}

}  // namespace detail

// Local pseudo-SINR gamma_pu with interference from the exchanged V.
inline std::vector<double> update_gamma_local(int p, const LocalDecisionSet& d, const ChannelRealization& ch) {
  const auto users = detail::user_range(static_cast<int>(d.V.size()));
  return detail::gamma_local(p, d, ch, ReceivedGram(ch, d.V, users));
}

inline std::vector<CVector> update_y_local(int p, const LocalDecisionSet& d, const ChannelRealization& ch) {
  const auto users = detail::user_range(static_cast<int>(d.V.size()));
  return detail::y_local(p, d, ch, ReceivedGram(ch, d.V, users));
}

// Information exchange: for every user u, sum over all processors p' and
// their users u' of H_{p'u}^H y_{p'u'} y_{p'u'}^H H_{p'u}.
inline std::vector<CMatrix> exchanged_back_projection(const LocalDecisionSet& d, const ChannelRealization& ch) {
  std::vector<ReceiveTap> taps;
  for (int p = 0; p < d.layout.size(); ++p)
    for (std::size_t k = 0; k < d.layout.users[p].size(); ++k) taps.push_back({&d.layout.user_aps[p][k], &d.y[p][k]});
  return back_projected_gram(ch, taps);
}

inline std::vector<PowerSubproblem> local_power_subproblems(int p, const LocalDecisionSet& d,
                                                            std::span<const CMatrix> exchanged,
                                                            const ChannelRealization& ch) {
  const auto& users = d.layout.users[p];
  std::vector<PowerSubproblem> out(users.size());
  for (std::size_t k = 0; k < users.size(); ++k) {
    const int u = users[k];
    out[k].Q = exchanged[u];
    out[k].b = std::sqrt(d.delta[u] * (1.0 + d.gamma[p][k])) * back_project(ch, d.layout.user_aps[p][k], d.y[p][k], u);
    out[k].alpha = d.alpha[p][k];
  }
  return out;
}

inline MultiplierSolution update_tau_local(int p, const LocalDecisionSet& d, std::span<const CMatrix> exchanged,
                                           const ChannelRealization& ch, const SimConfig& cfg, FpOptions opts = {}) {
  const auto problems = local_power_subproblems(p, d, exchanged, ch);
  return solve_multipliers(problems, d.layout.capacity(p, cfg.M), cfg.pt_mw(), cfg.lambda_init, cfg.bisect_tol,
                           opts.enforce_capacity);
}

// v_u = tau_{p* u} with p* the processor allocating the most power; ties go
// to the lowest processor index. Users no processor decides for stay silent.
inline std::vector<CVector> select_v_max(const ProcessorLayout& layout,
                                         const std::vector<std::vector<CVector>>& tau, int num_users, int N) {
  std::vector<CVector> V(num_users, CVector::Zero(N));
  std::vector<double> best(num_users, -1.0);
  for (int p = 0; p < layout.size(); ++p)
    for (std::size_t k = 0; k < layout.users[p].size(); ++k) {
      const int u = layout.users[p][k];
      const double n2 = tau[p][k].squaredNorm();
      if (n2 > best[u]) {
        best[u] = n2;
        V[u] = tau[p][k];
      }
    }
  return V;
}

inline std::vector<CVector> select_v_max(const LocalDecisionSet& d) {
  const int N = d.V.empty() ? 1 : static_cast<int>(d.V.front().size());
  return select_v_max(d.layout, d.tau, static_cast<int>(d.V.size()), N);
}

// Objective sum_p sum_u delta_pu log(1 + gamma_pu).
inline double local_objective(const LocalDecisionSet& d) {
  double s = 0.0;
  for (int p = 0; p < d.layout.size(); ++p)
    for (std::size_t k = 0; k < d.layout.users[p].size(); ++k)
      s += d.delta[d.layout.users[p][k]] * std::log1p(d.gamma[p][k]);
  return s;
}

// Per-processor threshold plus capacity cap; fills V, scheduled and serving groups.
inline void extract_local_schedule(const ProcessorLayout& layout, const std::vector<std::vector<CVector>>& tau,
                                   int num_users, const SimConfig& cfg, AllocationResult& res) {
  const double threshold = cfg.power_threshold_frac * cfg.pt_mw();
  res.serving_groups.assign(num_users, {});
  std::vector<bool> on(num_users, false);
  for (int p = 0; p < layout.size(); ++p) {
    std::vector<double> power(layout.users[p].size());
    for (std::size_t k = 0; k < power.size(); ++k) power[k] = tau[p][k].squaredNorm();
    for (int k : threshold_and_cap(power, threshold, layout.capacity(p, cfg.M))) {
      const int u = layout.users[p][k];
      on[u] = true;
      res.serving_groups[u].push_back(layout.user_aps[p][k]);
    }
  }
  res.V = select_v_max(layout, tau, num_users, cfg.N);
  res.scheduled.clear();
  for (int u = 0; u < num_users; ++u) {
    if (on[u])
      res.scheduled.push_back(u);
    else
      res.V[u].setZero();
  }
}

using ExchangeObserver = std::function<void(const LocalDecisionSet&)>;

// FP loop with per-sweep exchange of V and the receive auxiliaries.
inline AllocationResult run_exchange(ProcessorLayout layout, const NetworkTopology& topo, const ChannelRealization& ch,
                                     std::span<const double> delta, const SimConfig& cfg, FpOptions opts = {},
                                     const ExchangeObserver& observer = {}) {
  const int U = topo.num_users();
  AllocationResult res;
  if (U == 0) {
    res.converged = true;
    return res;
  }
  LocalDecisionSet d = init_local_decisions(std::move(layout), topo, ch, delta, cfg);
  const int P = d.layout.size();
  const auto users = detail::user_range(U);
  const double eps = cfg.epsilon();
  double previous = 0.0;
  for (int it = 0; it < cfg.fp_max_iters; ++it) {
    {
      const ReceivedGram gram_v(ch, d.V, users);
      for (int p = 0; p < P; ++p) d.gamma[p] = detail::gamma_local(p, d, ch, gram_v);
      for (int p = 0; p < P; ++p) d.y[p] = detail::y_local(p, d, ch, gram_v);
    }
    const double objective = local_objective(d);
    res.trace.push_back(objective);
    const auto exchanged = exchanged_back_projection(d, ch);
    for (int p = 0; p < P; ++p) {
      auto sol = update_tau_local(p, d, exchanged, ch, cfg, opts);
      d.tau[p] = std::move(sol.v);
      d.mu[p] = std::move(sol.mu);
      d.lambda[p] = sol.lambda;
    }
    d.V = select_v_max(d);
    if (opts.update_alpha)
      for (int p = 0; p < P; ++p) d.alpha[p] = update_alpha(d.tau[p], eps);
    d.iter = it + 1;
    if (observer) observer(d);
    if (it > 0 && fp_converged(previous, objective, cfg.fp_rel_tol)) {
      res.converged = true;
      break;
    }
    previous = objective;
  }
  res.iterations = d.iter;
  extract_local_schedule(d.layout, d.tau, U, cfg, res);
  return res;
}

// Each AP decides for E_r; capacity M per AP.
inline AllocationResult run_distributed(const NetworkTopology& topo, const ChannelRealization& ch,
                                        std::span<const double> delta, const SimConfig& cfg, FpOptions opts = {}) {
  return run_exchange(ap_processors(topo), topo, ch, delta, cfg, opts);
}

// Each CPU decides for E_q over the stacked channels of C_qu; capacity |B_q| M.
inline AllocationResult run_semi_distributed(const NetworkTopology& topo, const ChannelRealization& ch,
                                             std::span<const double> delta, const SimConfig& cfg,
                                             FpOptions opts = {}) {
  return run_exchange(cpu_processors(topo), topo, ch, delta, cfg, opts);
}

}  // namespace cfmimo
