#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/linalg.hpp"
#include "cfmimo/model.hpp"
#include "cfmimo/topology.hpp"

namespace cfmimo {

// Converged output of any allocator.
struct AllocationResult {
  std::vector<CVector> V;  // per-user transmit vectors (zero for silent users)
  IndexSet scheduled;      // users that transmit
  // Per user, the AP subsets that process its signal: one subset per serving
  // processor, or the single cluster C_u in centralized operation.
  std::vector<std::vector<IndexSet>> serving_groups;
  std::vector<double> trace;  // surrogate objective per iteration
  bool converged = false;
  int iterations = 0;
};

// Diagnostics and test hooks. Production runs use the defaults.
struct FpOptions {
  bool enforce_capacity = true;  // false pins lambda = 0
  bool update_alpha = true;      // false freezes the reweighting at 1/P_T
};

enum class ProcessorKind { Ap, Cpu };

// Who makes decisions for whom. Processor p owns the APs aps[p] and decides
// for users[p]; user_aps[p][k] is the AP subset through which p sees
// users[p][k] (a single AP, C_qu, or C_u).
struct ProcessorLayout {
  ProcessorKind kind = ProcessorKind::Cpu;
  std::vector<IndexSet> aps;
  std::vector<IndexSet> users;
  std::vector<std::vector<IndexSet>> user_aps;

  int size() const { return static_cast<int>(aps.size()); }
  int capacity(int p, int M) const { return M * static_cast<int>(aps[p].size()); }
};

inline ProcessorLayout ap_processors(const NetworkTopology& topo) {
  ProcessorLayout L;
  L.kind = ProcessorKind::Ap;
  for (int r = 0; r < topo.num_aps(); ++r) {
    L.aps.push_back({r});
    L.users.push_back(topo.clusters.ap_users[r]);
    L.user_aps.emplace_back(topo.clusters.ap_users[r].size(), IndexSet{r});
  }
  return L;
}

inline ProcessorLayout cpu_processors(const NetworkTopology& topo) {
  ProcessorLayout L;
  L.kind = ProcessorKind::Cpu;
  for (int q = 0; q < topo.num_cpus(); ++q) {
    L.aps.push_back(topo.cpu_aps[q]);
    L.users.push_back(topo.clusters.cpu_users[q]);
    std::vector<IndexSet> sets;
    for (int u : topo.clusters.cpu_users[q]) sets.push_back(topo.clusters.cpu_user_aps[q][u]);
    L.user_aps.push_back(std::move(sets));
  }
  return L;
}

// ||v||^2 = P_T with the direction of the dominant right singular vector of h.
inline CVector full_power_init(const CMatrix& h, double p_max) {
  return std::sqrt(p_max) * dominant_right_singular(h);
}

inline std::vector<double> update_alpha(std::span<const CVector> V, double epsilon) {
  std::vector<double> a(V.size());
  for (std::size_t i = 0; i < V.size(); ++i) a[i] = 1.0 / (V[i].squaredNorm() + epsilon);
  return a;
}

// Indices i (into candidates) whose power exceeds the threshold, capped at
// `cap` by keeping the largest powers; exact ties go to the lower index.
inline std::vector<int> threshold_and_cap(std::span<const double> power, double threshold, int cap) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < power.size(); ++i)
    if (power[i] > threshold) idx.push_back(static_cast<int>(i));
  if (static_cast<int>(idx.size()) > cap) {
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return power[a] > power[b]; });
    idx.resize(std::max(cap, 0));
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

// Relative-change stopping rule shared by every FP loop.
inline bool fp_converged(double previous, double current, double rel_tol) {
  return std::abs(current - previous) <= rel_tol * std::max(std::abs(previous), 1e-12);
}

inline double weighted_log_sum(std::span<const double> gamma, std::span<const double> delta) {
  double s = 0.0;
  for (std::size_t i = 0; i < gamma.size(); ++i) s += delta[i] * std::log1p(gamma[i]);
  return s;
}

}  // namespace cfmimo
