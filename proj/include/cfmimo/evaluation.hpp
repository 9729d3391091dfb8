#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cfmimo/allocation.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/received_gram.hpp"
#include "cfmimo/topology.hpp"

namespace cfmimo {

enum class Mode { Centralized, Distributed, Semi, DistDecentralized, SemiDecentralized, RoundRobin };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Centralized: return "centralized";
    case Mode::Distributed: return "distributed";
    case Mode::Semi: return "semi";
    case Mode::DistDecentralized: return "dist-decentralized";
    case Mode::SemiDecentralized: return "semi-decentralized";
    case Mode::RoundRobin: return "round-robin";
  }
  return "unknown";
}

inline Mode parse_mode(std::string_view s) {
  for (Mode m : {Mode::Centralized, Mode::Distributed, Mode::Semi, Mode::DistDecentralized, Mode::SemiDecentralized,
                 Mode::RoundRobin})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

// True-SINR outcome of one allocation in one timeslot.
struct TimeSlotResult {
  Mode mode = Mode::Centralized;
  int timeslot = 0;
  std::vector<double> sinr;
  std::vector<double> se;           // log2(1 + sinr), zero when unscheduled
  std::vector<std::uint8_t> scheduled;
  double sum_se = 0.0;
  double jain = 1.0;
};

// (sum x)^2 / (n sum x^2); 1 for an all-zero (or empty) input.
inline double jains_index(std::span<const double> values) {
  double s = 0.0, s2 = 0.0;
  for (double v : values) {
    if (v < 0.0) throw std::invalid_argument("jains_index: negative value");
    s += v;
    s2 += v * v;
  }
  if (s2 == 0.0) return 1.0;
  return s * s / (static_cast<double>(values.size()) * s2);
}

// w_u = (sigma^2 I + sum_{u'} H_uu' v_u' v_u'^H H_uu'^H)^{-1} H_uu v_u over the cluster C_u.
inline CVector mmse_receiver_centralized(int u, std::span<const CVector> V, const ChannelRealization& ch,
                                         const NetworkTopology& topo) {
  const auto& cu = topo.clusters.serving_aps[u];
  CMatrix a = CMatrix::Zero(static_cast<Eigen::Index>(cu.size()) * ch.M, static_cast<Eigen::Index>(cu.size()) * ch.M);
  a.diagonal().array() += ch.sigma2;
  for (int u2 = 0; u2 < topo.num_users(); ++u2)
    if (V[u2].size() > 0 && V[u2].squaredNorm() > 0.0) add_outer(a, concat_cluster_channel(ch, cu, u2) * V[u2]);
  return HermitianSolver(a).solve(concat_cluster_channel(ch, cu, u) * V[u]);
}

namespace detail {

inline std::vector<int> mask_to_users(std::span<const std::uint8_t> mask) {
  std::vector<int> out;
  for (std::size_t u = 0; u < mask.size(); ++u)
    if (mask[u]) out.push_back(static_cast<int>(u));
  return out;
}

inline double true_sinr_centralized(int u, const ReceivedGram& gram, const ChannelRealization& ch,
                                    const NetworkTopology& topo) {
  const auto& cu = topo.clusters.serving_aps[u];
  const CVector x = gram.received(cu, u);
  CMatrix b = gram.covariance(cu);
  b.noalias() -= x * x.adjoint();
  b.diagonal().array() += ch.sigma2;
  return inverse_quadratic_form(b, x);
}

}  // namespace detail

// v_u^H H_uu^H (sigma^2 I + sum_{u' in S, u' != u} H_uu' v_u' v_u'^H H_uu'^H)^{-1} H_uu v_u,
// zero for unscheduled users.
inline double true_sinr_centralized(int u, std::span<const CVector> V, std::span<const std::uint8_t> scheduled,
                                    const ChannelRealization& ch, const NetworkTopology& topo) {
  if (!scheduled[u]) return 0.0;
  const auto users = detail::mask_to_users(scheduled);
  return detail::true_sinr_centralized(u, ReceivedGram(ch, V, users), ch, topo);
}

// Stage-one local receivers and stage-two combining for one user. Entry g
// of every vector refers to the serving group groups[g].
struct LocalCombining {
  std::vector<CVector> w;  // local MMSE receivers
  CVector a;               // SINR-optimal combining weights
  CVector signal;          // g_uu
  CMatrix disturbance;     // F_u + sum_{u' != u} g_uu' g_uu'^H
  std::vector<CVector> interference;  // g_uu' per transmitting u' != u
};

namespace detail {

inline LocalCombining local_combining(int u, std::span<const CVector> V, const std::vector<IndexSet>& groups,
                                      const ReceivedGram& gram, const ChannelRealization& ch,
                                      bool keep_interference) {
  LocalCombining lc;
  const auto G = static_cast<Eigen::Index>(groups.size());
  const auto& active = gram.active();
  const auto K = static_cast<Eigen::Index>(active.size());
  CMatrix proj(G, K);  // proj(g, k) = w_g^H H_{S_g a_k} v_{a_k}
  Eigen::VectorXd noise(G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const auto& s = groups[g];
    CMatrix a = gram.covariance(s);
    a.diagonal().array() += ch.sigma2;
    const CVector w = HermitianSolver(a).solve(concat_cluster_channel(ch, s, u) * V[u]);
    Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(K);
    for (std::size_t k = 0; k < s.size(); ++k)
      row.noalias() += w.segment(static_cast<Eigen::Index>(k) * ch.M, ch.M).adjoint() * gram.cols(s[k]);
    proj.row(g) = row;
    noise(g) = ch.sigma2 * w.squaredNorm();
    lc.w.push_back(w);
  }
  const auto self = std::find(active.begin(), active.end(), u);
  if (self == active.end()) throw std::logic_error("local_combining: user is not transmitting");
  const auto ku = static_cast<Eigen::Index>(self - active.begin());
  lc.signal = proj.col(ku);
  lc.disturbance = proj * proj.adjoint();
  lc.disturbance.noalias() -= lc.signal * lc.signal.adjoint();
  lc.disturbance.diagonal() += noise.cast<Complex>();
  lc.a = HermitianSolver(lc.disturbance).solve(lc.signal);
  if (keep_interference)
    for (Eigen::Index k = 0; k < K; ++k)
      if (k != ku) lc.interference.push_back(proj.col(k));
  return lc;
}

inline double combined_sinr(const CVector& a, const LocalCombining& lc) {
  const double num = std::norm(a.dot(lc.signal));
  const double den = a.dot(lc.disturbance * a).real();
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace detail

// Local MMSE receivers at each serving group and the combining vector
// a_u = (F_u + sum_{u' != u} g_uu' g_uu'^H)^{-1} g_uu. Empty when u is silent.
inline LocalCombining local_receivers_and_combining(int u, std::span<const CVector> V,
                                                    std::span<const std::uint8_t> transmitting,
                                                    const std::vector<IndexSet>& groups,
                                                    const ChannelRealization& ch) {
  if (!transmitting[u] || groups.empty()) return {};
  const auto users = detail::mask_to_users(transmitting);
  return detail::local_combining(u, V, groups, ReceivedGram(ch, V, users), ch, true);
}

// |a^H g_uu|^2 / (a^H F_u a + sum_{u' != u} |a^H g_uu'|^2) at the given combining vector.
inline double combined_sinr(const CVector& a, const LocalCombining& lc) {
  if (lc.signal.size() == 0) return 0.0;
  return detail::combined_sinr(a, lc);
}

inline double true_sinr_distributed(int u, std::span<const CVector> V, std::span<const std::uint8_t> transmitting,
                                    const std::vector<IndexSet>& groups, const ChannelRealization& ch) {
  const auto lc = local_receivers_and_combining(u, V, transmitting, groups, ch);
  return combined_sinr(lc.a, lc);
}

inline void finalize_timeslot(TimeSlotResult& r) {
  r.se.resize(r.sinr.size());
  r.sum_se = 0.0;
  for (std::size_t u = 0; u < r.sinr.size(); ++u) {
    r.se[u] = r.scheduled[u] ? std::log2(1.0 + r.sinr[u]) : 0.0;
    r.sum_se += r.se[u];
  }
  r.jain = jains_index(r.se);
}

inline bool uses_centralized_receiver(Mode m) { return m == Mode::Centralized || m == Mode::RoundRobin; }

// True SINR and SE of an allocation under the mode's physical receiver model:
// joint MMSE over C_u for centralized operation, per-group local MMSE plus
// optimal combining otherwise.
inline TimeSlotResult evaluate_allocation(Mode mode, const NetworkTopology& topo, const ChannelRealization& ch,
                                          const AllocationResult& alloc, int timeslot = 0) {
  const int U = topo.num_users();
  TimeSlotResult r;
  r.mode = mode;
  r.timeslot = timeslot;
  r.sinr.assign(U, 0.0);
  r.scheduled.assign(U, 0);
  for (int u : alloc.scheduled) r.scheduled[u] = 1;
  const auto users = detail::mask_to_users(r.scheduled);
  const ReceivedGram gram(ch, alloc.V, users);
  for (int u : users) {
    if (uses_centralized_receiver(mode)) {
      r.sinr[u] = detail::true_sinr_centralized(u, gram, ch, topo);
    } else {
      const auto& groups = alloc.serving_groups[u];
      if (groups.empty()) continue;
      const auto lc = detail::local_combining(u, alloc.V, groups, gram, ch, false);
      r.sinr[u] = detail::combined_sinr(lc.a, lc);
    }
  }
  finalize_timeslot(r);
  return r;
}

// Users split by index modulo group_count; the group (slot mod group_count)
// transmits at full power and is received with the joint MMSE receiver.
inline AllocationResult round_robin_allocation(const NetworkTopology& topo, const ChannelRealization& ch,
                                               const SimConfig& cfg, int group_count, int slot) {
  if (group_count < 1) throw std::invalid_argument("round_robin: group_count must be >= 1");
  const int U = topo.num_users();
  AllocationResult res;
  res.V.assign(U, CVector::Zero(cfg.N));
  res.serving_groups.assign(U, {});
  res.converged = true;
  for (int u = 0; u < U; ++u) {
    if (u % group_count != slot % group_count) continue;
    const auto& cu = topo.clusters.serving_aps[u];
    res.V[u] = full_power_init(concat_cluster_channel(ch, cu, u), cfg.pt_mw());
    res.scheduled.push_back(u);
    res.serving_groups[u].push_back(cu);
  }
  return res;
}

inline TimeSlotResult round_robin_baseline(const NetworkTopology& topo, const ChannelRealization& ch,
                                           const SimConfig& cfg, int group_count, int slot) {
  return evaluate_allocation(Mode::RoundRobin, topo, ch, round_robin_allocation(topo, ch, cfg, group_count, slot),
                             slot);
}

inline constexpr double kRateFloor = 1e-6;

// Long-term average SE per user with exponential forgetting; weights are
// delta_u = 1 / max(Rbar_u, floor). Rbar starts at 1 so the first slot is unweighted.
struct FairnessState {
  std::vector<double> rbar;
  double eta = 0.2;

  static FairnessState initial(int num_users, double eta) { return {std::vector<double>(num_users, 1.0), eta}; }

  std::vector<double> weights() const {
    std::vector<double> d(rbar.size());
    for (std::size_t u = 0; u < rbar.size(); ++u) d[u] = 1.0 / std::max(rbar[u], kRateFloor);
    return d;
  }
};

// Rbar <- eta R + (1 - eta) Rbar; returns the next slot's weights.
inline std::vector<double> pf_update(FairnessState& state, std::span<const double> se) {
  if (!(state.eta > 0.0 && state.eta < 1.0)) throw std::invalid_argument("pf_update: eta must lie in (0, 1)");
  for (std::size_t u = 0; u < state.rbar.size(); ++u)
    state.rbar[u] = std::max(state.eta * se[u] + (1.0 - state.eta) * state.rbar[u], kRateFloor);
  return state.weights();
}

}  // namespace cfmimo
