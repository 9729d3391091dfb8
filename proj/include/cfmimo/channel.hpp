#pragma once

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "cfmimo/model.hpp"
#include "cfmimo/pathloss.hpp"
#include "cfmimo/topology.hpp"

namespace cfmimo {

inline constexpr double kShadowingStdDb = 4.0;

// Lognormal shadowing as a linear factor, 4 dB standard deviation.
template <typename Rng>
double draw_shadowing(Rng& rng) {
  std::normal_distribution<double> x_db(0.0, kShadowingStdDb);
  return std::pow(10.0, x_db(rng) / 10.0);
}

// psi_ru * beta(d_ru) for every AP/user pair (APs x users), drawn once per topology.
template <typename Rng>
RMatrix draw_large_scale(const NetworkTopology& topo, Rng& rng) {
  const HexLayout layout(topo.cell_radius_km);
  RMatrix gains(topo.num_aps(), topo.num_users());
  for (int u = 0; u < topo.num_users(); ++u)
    for (int r = 0; r < topo.num_aps(); ++r) {
      const double d = layout.wrap_distance(topo.ap_positions[r], topo.user_positions[u]);
      gains(r, u) = draw_shadowing(rng) * pathloss_linear(d);
    }
  return gains;
}

// Per-AP channel blocks stored as one M x (U*N) matrix per AP; the block of
// user u occupies columns [u*N, (u+1)*N).
struct ChannelRealization {
  int M = 0;
  int N = 0;
  std::vector<CMatrix> per_ap;
  RMatrix large_scale;
  double sigma2 = 0.0;

  int num_aps() const { return static_cast<int>(per_ap.size()); }
  int num_users() const { return per_ap.empty() ? 0 : static_cast<int>(per_ap.front().cols()) / N; }

  auto block(int r, int u) const { return per_ap[r].middleCols(static_cast<Eigen::Index>(u) * N, N); }
  auto block(int r, int u) { return per_ap[r].middleCols(static_cast<Eigen::Index>(u) * N, N); }
};

// H_ru = sqrt(large_scale) G_ru with G_ru entries CN(0, 1).
template <typename Rng>
ChannelRealization draw_realization(const NetworkTopology& topo, const RMatrix& large_scale, const SimConfig& cfg,
                                    Rng& rng) {
  if (large_scale.rows() != topo.num_aps() || large_scale.cols() != topo.num_users())
    throw std::invalid_argument("draw_realization: large-scale matrix has wrong shape");
  ChannelRealization ch;
  ch.M = cfg.M;
  ch.N = cfg.N;
  ch.large_scale = large_scale;
  ch.sigma2 = noise_power(cfg).mw;
  std::normal_distribution<double> component(0.0, std::sqrt(0.5));
  ch.per_ap.assign(topo.num_aps(), CMatrix(cfg.M, static_cast<Eigen::Index>(topo.num_users()) * cfg.N));
  for (int r = 0; r < topo.num_aps(); ++r) {
    for (int u = 0; u < topo.num_users(); ++u) {
      const double amp = std::sqrt(large_scale(r, u));
      auto blk = ch.block(r, u);
      for (Eigen::Index j = 0; j < blk.cols(); ++j)
        for (Eigen::Index i = 0; i < blk.rows(); ++i) {
          const double re = component(rng);
          const double im = component(rng);
          blk(i, j) = amp * Complex(re, im);
        }
    }
  }
  return ch;
}

// Vertical stack of H_{r u} over the APs in cluster, in the given (ascending) order.
inline CMatrix concat_cluster_channel(const ChannelRealization& ch, std::span<const int> cluster, int u) {
  if (cluster.empty()) throw std::invalid_argument("concat_cluster_channel: empty cluster");
  CMatrix out(static_cast<Eigen::Index>(cluster.size()) * ch.M, ch.N);
  for (std::size_t k = 0; k < cluster.size(); ++k)
    out.middleRows(static_cast<Eigen::Index>(k) * ch.M, ch.M) = ch.block(cluster[k], u);
  return out;
}

}  // namespace cfmimo
