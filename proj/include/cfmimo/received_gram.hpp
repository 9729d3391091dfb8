#pragma once

#include <span>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/model.hpp"
#include "cfmimo/topology.hpp"

namespace cfmimo {

// Received-signal covariance of a set of transmitters, seen at arbitrary AP
// subsets. Per-AP effective columns E_r = [H_{r u} x_u] are formed once and
// the M x M blocks E_r E_{r'}^H are cached, so the covariance over any AP set
// is assembled from blocks instead of re-summing over users.
class ReceivedGram {
 public:
  // tx is indexed by global user id; only users listed in `users` with a
  // nonzero transmit vector contribute.
  ReceivedGram(const ChannelRealization& ch, std::span<const CVector> tx, std::span<const int> users)
      : ch_(&ch), tx_(tx) {
    for (int u : users)
      if (tx[u].size() > 0 && tx[u].squaredNorm() > 0.0) active_.push_back(u);
    const int R = ch.num_aps();
    cols_.resize(R);
    have_cols_.assign(R, false);
    blocks_.resize(static_cast<std::size_t>(R) * R);
    have_block_.assign(static_cast<std::size_t>(R) * R, false);
  }

  // Sum over active transmitters of (H_{S u} x_u)(H_{S u} x_u)^H, S = aps.
  CMatrix covariance(std::span<const int> aps) const {
    const int M = ch_->M;
    const auto n = static_cast<Eigen::Index>(aps.size());
    CMatrix out(n * M, n * M);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) {
        const CMatrix& blk = block(aps[i], aps[j]);
        out.block(i * M, j * M, M, M) = blk;
        if (j != i) out.block(j * M, i * M, M, M) = blk.adjoint();
      }
    }
    return out;
  }

  // H_{S u} x_u for the given user (zero when the user is inactive).
  CVector received(std::span<const int> aps, int u) const {
    const int M = ch_->M;
    CVector out(static_cast<Eigen::Index>(aps.size()) * M);
    const bool on = tx_[u].size() > 0;
    for (std::size_t k = 0; k < aps.size(); ++k) {
      if (on)
        out.segment(static_cast<Eigen::Index>(k) * M, M) = ch_->block(aps[k], u) * tx_[u];
      else
        out.segment(static_cast<Eigen::Index>(k) * M, M).setZero();
    }
    return out;
  }

  const std::vector<int>& active() const { return active_; }

  // E_r: column k is H_{r a_k} x_{a_k} with a_k = active()[k].
  const CMatrix& cols(int r) const {
    if (!have_cols_[r]) {
      CMatrix e(ch_->M, static_cast<Eigen::Index>(active_.size()));
      for (std::size_t k = 0; k < active_.size(); ++k)
        e.col(static_cast<Eigen::Index>(k)) = ch_->block(r, active_[k]) * tx_[active_[k]];
      cols_[r] = std::move(e);
      have_cols_[r] = true;
    }
    return cols_[r];
  }

 private:
  const CMatrix& block(int r, int s) const {
    const std::size_t idx = static_cast<std::size_t>(r) * ch_->num_aps() + s;
    if (!have_block_[idx]) {
      blocks_[idx].noalias() = cols(r) * cols(s).adjoint();
      have_block_[idx] = true;
    }
    return blocks_[idx];
  }

  const ChannelRealization* ch_;
  std::span<const CVector> tx_;
  std::vector<int> active_;
  mutable std::vector<CMatrix> cols_;
  mutable std::vector<bool> have_cols_;
  mutable std::vector<CMatrix> blocks_;
  mutable std::vector<bool> have_block_;
};

// Stack of the per-AP segments of a receive vector y (length M|S|) projected
// back through user u's channel: sum_{k} H_{S_k u}^H y_k, an N-vector.
inline CVector back_project(const ChannelRealization& ch, std::span<const int> aps, const CVector& y, int u) {
  CVector z = CVector::Zero(ch.N);
  for (std::size_t k = 0; k < aps.size(); ++k)
    z.noalias() += ch.block(aps[k], u).adjoint() * y.segment(static_cast<Eigen::Index>(k) * ch.M, ch.M);
  return z;
}

// A receive vector attached to an AP subset; the unit of information the
// transmit update consumes.
struct ReceiveTap {
  const IndexSet* aps = nullptr;
  const CVector* y = nullptr;
};

// For every user u: Q_u = sum over taps t of (H_{S_t u}^H y_t)(H_{S_t u}^H y_t)^H.
// Computed per AP as Y_r^H H_r so the cost is linear in the number of taps.
inline std::vector<CMatrix> back_projected_gram(const ChannelRealization& ch, std::span<const ReceiveTap> taps) {
  const int R = ch.num_aps();
  const int U = ch.num_users();
  const int M = ch.M;
  const int N = ch.N;
  const auto T = static_cast<Eigen::Index>(taps.size());
  // Z(t, u*N + j) = (H_{S_t u}^H y_t)_j conjugated, i.e. rows y_t^H H_{S_t u}.
  CMatrix Z = CMatrix::Zero(T, static_cast<Eigen::Index>(U) * N);
  std::vector<std::vector<std::pair<Eigen::Index, Eigen::Index>>> per_ap(R);  // (tap, segment offset)
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& aps = *taps[t].aps;
    if (taps[t].y->squaredNorm() == 0.0) continue;
    for (std::size_t k = 0; k < aps.size(); ++k) per_ap[aps[k]].emplace_back(t, static_cast<Eigen::Index>(k) * M);
  }
  for (int r = 0; r < R; ++r) {
    const auto& list = per_ap[r];
    if (list.empty()) continue;
    CMatrix Yr(M, static_cast<Eigen::Index>(list.size()));
    for (std::size_t i = 0; i < list.size(); ++i)
      Yr.col(static_cast<Eigen::Index>(i)) = taps[list[i].first].y->segment(list[i].second, M);
    const CMatrix prod = Yr.adjoint() * ch.per_ap[r];
    for (std::size_t i = 0; i < list.size(); ++i) Z.row(list[i].first) += prod.row(static_cast<Eigen::Index>(i));
  }
  std::vector<CMatrix> q(U);
  for (int u = 0; u < U; ++u) {
    const auto zu = Z.middleCols(static_cast<Eigen::Index>(u) * N, N);
    q[u] = zu.adjoint() * zu;
  }
  return q;
}

}  // namespace cfmimo
