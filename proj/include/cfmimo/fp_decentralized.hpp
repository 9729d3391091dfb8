#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cfmimo/allocation.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/fp_exchange.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/multipliers.hpp"
#include "cfmimo/received_gram.hpp"
#include "cfmimo/topology.hpp"

namespace cfmimo {

// Heuristic weight that user u2 is scheduled by some processor other than p,
// where p is an AP id or a CPU id:
//   AP r:  sum_{r' in C_u2 \ r} M / |E_r'|
//   CPU q: sum_{q' in D_u2 \ q} |B_q| M / |E_q'|
// Not clamped to [0, 1].
inline double schedule_probability(ProcessorKind kind, int p, int u2, const NetworkTopology& topo, int M) {
  const auto& cs = topo.clusters;
  double s = 0.0;
  if (kind == ProcessorKind::Ap) {
    for (int r2 : cs.serving_aps[u2])
      if (r2 != p) s += static_cast<double>(M) / static_cast<double>(cs.ap_users[r2].size());
  } else {
    const double own = static_cast<double>(topo.cpu_aps[p].size()) * M;
    for (int q2 : cs.user_cpus[u2])
      if (q2 != p) s += own / static_cast<double>(cs.cpu_users[q2].size());
  }
  return s;
}

// Combined noise plus statistically approximated non-local interference seen by
// processor p for one of its users: a diagonal with one scalar per AP of the
// user's AP subset, each repeated over the AP's M antennas.
struct NonLocalApprox {
  IndexSet aps;
  std::vector<double> interference;  // kappa-scaled estimate per AP, excludes noise
  double sigma2 = 0.0;
  int M = 0;

  Eigen::VectorXd diagonal() const {
    Eigen::VectorXd d(static_cast<Eigen::Index>(aps.size()) * M);
    for (std::size_t k = 0; k < aps.size(); ++k)
      d.segment(static_cast<Eigen::Index>(k) * M, M).setConstant(sigma2 + interference[k]);
    return d;
  }
};

// AP or CPU id of layout entry p.
inline int processor_id(const ProcessorLayout& layout, int p, const NetworkTopology& topo) {
  const int r = layout.aps[p].front();
  return layout.kind == ProcessorKind::Ap ? r : topo.cpu_of_ap[r];
}

// kappa * sum_{u2 != u} P_T p_{p u2} gain(r, u2) for every r in aps; p is an AP or CPU id.
inline NonLocalApprox nonlocal_interference(ProcessorKind kind, int p, int u, std::span<const int> aps,
                                            const NetworkTopology& topo, const ChannelRealization& ch,
                                            const SimConfig& cfg) {
  NonLocalApprox n;
  n.aps.assign(aps.begin(), aps.end());
  n.sigma2 = ch.sigma2;
  n.M = ch.M;
  const double pt = cfg.pt_mw();
  for (int r : aps) {
    double s = 0.0;
    for (int u2 = 0; u2 < topo.num_users(); ++u2) {
      if (u2 == u) continue;
      s += pt * schedule_probability(kind, p, u2, topo, cfg.M) * ch.large_scale(r, u2);
    }
    n.interference.push_back(cfg.kappa * s);
  }
  return n;
}

// The same approximation for every (processor, local user) pair at once, using
// per-AP totals minus the user's own term.
inline std::vector<std::vector<NonLocalApprox>> build_nonlocal(const ProcessorLayout& layout,
                                                               const NetworkTopology& topo,
                                                               const ChannelRealization& ch, const SimConfig& cfg) {
  const int U = topo.num_users();
  const double pt = cfg.pt_mw();
  std::vector<std::vector<NonLocalApprox>> out(layout.size());
  for (int p = 0; p < layout.size(); ++p) {
    std::vector<double> prob(U);
    const int id = processor_id(layout, p, topo);
    for (int u2 = 0; u2 < U; ++u2) prob[u2] = schedule_probability(layout.kind, id, u2, topo, cfg.M);
    std::vector<double> total(topo.num_aps(), 0.0);
    for (int r : layout.aps[p])
      for (int u2 = 0; u2 < U; ++u2) total[r] += pt * prob[u2] * ch.large_scale(r, u2);
    for (std::size_t k = 0; k < layout.users[p].size(); ++k) {
      const int u = layout.users[p][k];
      NonLocalApprox n;
      n.aps = layout.user_aps[p][k];
      n.sigma2 = ch.sigma2;
      n.M = ch.M;
      for (int r : n.aps) n.interference.push_back(cfg.kappa * (total[r] - pt * prob[u] * ch.large_scale(r, u)));
      out[p].push_back(std::move(n));
    }
  }
  return out;
}

// State of one processor's independent FP loop.
struct LocalProblemState {
  std::vector<CVector> tau;
  std::vector<double> gamma;
  std::vector<CVector> y;
  std::vector<double> alpha;
  std::vector<double> mu;
  double lambda = 0.0;
  int iter = 0;
};

namespace detail {

// tau scattered into a per-user array for ReceivedGram.
inline std::vector<CVector> scatter_local(const ProcessorLayout& layout, int p, std::span<const CVector> tau, int U) {
  std::vector<CVector> tx(U);
  for (std::size_t k = 0; k < layout.users[p].size(); ++k) tx[layout.users[p][k]] = tau[k];
  return tx;
}

}  // namespace detail

// Pseudo-SINR of local user k at processor p: interference only from the
// processor's own users plus the static non-local diagonal.
inline double pseudo_sinr(const ProcessorLayout& layout, int p, int k, std::span<const CVector> tau,
                          const ChannelRealization& ch, const NonLocalApprox& nonlocal) {
  const auto& users = layout.users[p];
  const auto& s = layout.user_aps[p][k];
  const CVector x = concat_cluster_channel(ch, s, users[k]) * tau[k];
  if (x.squaredNorm() == 0.0) return 0.0;
  CMatrix b = CMatrix::Zero(x.size(), x.size());
  b.diagonal() = nonlocal.diagonal().cast<Complex>();
  for (std::size_t j = 0; j < users.size(); ++j) {
    if (static_cast<int>(j) == k || tau[j].squaredNorm() == 0.0) continue;
    add_outer(b, concat_cluster_channel(ch, s, users[j]) * tau[j]);
  }
  return inverse_quadratic_form(b, x);
}

using LocalObserver = std::function<void(int, const LocalProblemState&)>;

// One processor's FP loop (gamma -> y -> tau -> alpha) on local information only.
inline LocalProblemState solve_local_problem(const ProcessorLayout& layout, int p, const NetworkTopology& topo,
                                             const ChannelRealization& ch, std::span<const double> delta,
                                             const std::vector<NonLocalApprox>& nonlocal, const SimConfig& cfg,
                                             FpOptions opts, bool& converged, const LocalObserver& observer = {}) {
  const int U = topo.num_users();
  const auto& users = layout.users[p];
  const auto n = users.size();
  const double pt = cfg.pt_mw();
  const double eps = cfg.epsilon();
  LocalProblemState st;
  for (std::size_t k = 0; k < n; ++k)
    st.tau.push_back(full_power_init(concat_cluster_channel(ch, layout.user_aps[p][k], users[k]), pt));
  st.gamma.assign(n, 0.0);
  st.y.assign(n, CVector());
  st.alpha.assign(n, 1.0 / pt);
  st.mu.assign(n, 0.0);
  converged = n == 0;
  if (n == 0) return st;

  std::vector<double> local_delta(n);
  for (std::size_t k = 0; k < n; ++k) local_delta[k] = delta[users[k]];
  double previous = 0.0;
  for (int it = 0; it < cfg.fp_max_iters; ++it) {
    {
      const auto tx = detail::scatter_local(layout, p, st.tau, U);
      const ReceivedGram gram(ch, tx, users);
      for (std::size_t k = 0; k < n; ++k) {
        const auto& s = layout.user_aps[p][k];
        const CVector x = gram.received(s, users[k]);
        if (x.squaredNorm() == 0.0) {
          st.gamma[k] = 0.0;
          st.y[k] = CVector::Zero(x.size());
          continue;
        }
        CMatrix a = gram.covariance(s);
        a.diagonal() += nonlocal[k].diagonal().cast<Complex>();
        CMatrix b = a;
        b.noalias() -= x * x.adjoint();
        st.gamma[k] = inverse_quadratic_form(b, x);
        st.y[k] = std::sqrt(local_delta[k] * (1.0 + st.gamma[k])) * HermitianSolver(a).solve(x);
      }
    }
    const double objective = weighted_log_sum(st.gamma, local_delta);
    std::vector<ReceiveTap> taps(n);
    for (std::size_t k = 0; k < n; ++k) taps[k] = {&layout.user_aps[p][k], &st.y[k]};
    const auto Q = back_projected_gram(ch, taps);
    std::vector<PowerSubproblem> problems(n);
    for (std::size_t k = 0; k < n; ++k) {
      problems[k].Q = Q[users[k]];
      problems[k].b = std::sqrt(local_delta[k] * (1.0 + st.gamma[k])) *
                      back_project(ch, layout.user_aps[p][k], st.y[k], users[k]);
      problems[k].alpha = st.alpha[k];
    }
    auto sol = solve_multipliers(problems, layout.capacity(p, cfg.M), pt, cfg.lambda_init, cfg.bisect_tol,
                                 opts.enforce_capacity);
    st.tau = std::move(sol.v);
    st.mu = std::move(sol.mu);
    st.lambda = sol.lambda;
    if (opts.update_alpha) st.alpha = update_alpha(st.tau, eps);
    st.iter = it + 1;
    if (observer) observer(p, st);
    if (it > 0 && fp_converged(previous, objective, cfg.fp_rel_tol)) {
      converged = true;
      break;
    }
    previous = objective;
  }
  return st;
}

// Independent per-processor loops; V is selected once after all have converged.
inline AllocationResult run_decentralized(const ProcessorLayout& layout, const NetworkTopology& topo,
                                          const ChannelRealization& ch, std::span<const double> delta,
                                          const SimConfig& cfg, FpOptions opts = {},
                                          const LocalObserver& observer = {}) {
  const int U = topo.num_users();
  AllocationResult res;
  res.converged = true;
  if (U == 0) return res;
  const auto nonlocal = build_nonlocal(layout, topo, ch, cfg);
  std::vector<std::vector<CVector>> tau(layout.size());
  for (int p = 0; p < layout.size(); ++p) {
    bool ok = false;
    auto st = solve_local_problem(layout, p, topo, ch, delta, nonlocal[p], cfg, opts, ok, observer);
    res.converged = res.converged && ok;
    res.iterations = std::max(res.iterations, st.iter);
    tau[p] = std::move(st.tau);
  }
  extract_local_schedule(layout, tau, U, cfg, res);
  return res;
}

inline AllocationResult run_decentralized_distributed(const NetworkTopology& topo, const ChannelRealization& ch,
                                                      std::span<const double> delta, const SimConfig& cfg,
                                                      FpOptions opts = {}) {
  return run_decentralized(ap_processors(topo), topo, ch, delta, cfg, opts);
}

inline AllocationResult run_decentralized_semi(const NetworkTopology& topo, const ChannelRealization& ch,
                                               std::span<const double> delta, const SimConfig& cfg,
                                               FpOptions opts = {}) {
  return run_decentralized(cpu_processors(topo), topo, ch, delta, cfg, opts);
}

}  // namespace cfmimo
