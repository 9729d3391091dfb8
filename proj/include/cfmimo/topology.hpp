#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cfmimo/model.hpp"
#include "cfmimo/pathloss.hpp"

namespace cfmimo {

struct Point {
  double x{0.0};
  double y{0.0};
};

using IndexSet = std::vector<int>;  // always kept sorted ascending

// User-centric cluster sets derived from large-scale gains.
struct ClusterSets {
  std::vector<IndexSet> serving_aps;      // C_u
  std::vector<IndexSet> ap_users;         // E_r
  std::vector<IndexSet> cpu_users;        // E_q
  std::vector<IndexSet> user_cpus;        // D_u
  std::vector<std::vector<IndexSet>> cpu_user_aps;  // C_qu indexed [q][u], empty when q not in D_u
};

struct NetworkTopology {
  std::vector<Point> ap_positions;
  std::vector<Point> user_positions;
  std::vector<int> cpu_of_ap;
  std::vector<IndexSet> cpu_aps;  // B_q
  double cell_radius_km = 0.5;
  int n_cells = 7;
  ClusterSets clusters;

  int num_aps() const { return static_cast<int>(ap_positions.size()); }
  int num_users() const { return static_cast<int>(user_positions.size()); }
  int num_cpus() const { return static_cast<int>(cpu_aps.size()); }
};

// Pointy-top hexagonal layout of seven cells: one center cell and its six
// neighbours. Translating the super-cell by the six vectors of the 7-reuse
// lattice tiles the plane, which gives the wrap-around distance.
class HexLayout {
 public:
  explicit HexLayout(double radius_km) : radius_(radius_km) {
    const double d = std::sqrt(3.0) * radius_;  // neighbouring center spacing
    centers_[0] = {0.0, 0.0};
    for (int k = 0; k < 6; ++k) {
      const double a = std::numbers::pi / 3.0 * k;
      centers_[k + 1] = {d * std::cos(a), d * std::sin(a)};
    }
    // 2 a1 + a2 with a1 = d(1,0), a2 = d(1/2, sqrt3/2), rotated in 60 degree steps.
    const Point t{2.5 * d, std::sqrt(3.0) / 2.0 * d};
    for (int k = 0; k < 6; ++k) {
      const double a = std::numbers::pi / 3.0 * k;
      shifts_[k] = {t.x * std::cos(a) - t.y * std::sin(a), t.x * std::sin(a) + t.y * std::cos(a)};
    }
  }

  double radius() const { return radius_; }
  const std::array<Point, 7>& centers() const { return centers_; }
  const std::array<Point, 6>& shifts() const { return shifts_; }
  double cell_area() const { return 1.5 * std::sqrt(3.0) * radius_ * radius_; }

  bool inside_cell(int cell, Point p, double slack = 1e-12) const {
    const double dx = std::abs(p.x - centers_[cell].x);
    const double dy = std::abs(p.y - centers_[cell].y);
    return dx <= std::sqrt(3.0) / 2.0 * radius_ + slack && dx / std::sqrt(3.0) + dy <= radius_ + slack;
  }

  bool inside_region(Point p) const {
    for (int c = 0; c < 7; ++c)
      if (inside_cell(c, p)) return true;
    return false;
  }

  template <typename Rng>
  Point sample_in_cell(int cell, Rng& rng) const {
    std::uniform_real_distribution<double> ux(-std::sqrt(3.0) / 2.0 * radius_, std::sqrt(3.0) / 2.0 * radius_);
    std::uniform_real_distribution<double> uy(-radius_, radius_);
    for (;;) {
      const Point p{centers_[cell].x + ux(rng), centers_[cell].y + uy(rng)};
      if (inside_cell(cell, p, 0.0)) return p;
    }
  }

  double wrap_distance(Point a, Point b) const {
    if (b.x < a.x || (b.x == a.x && b.y < a.y)) std::swap(a, b);  // exact symmetry
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    double best = std::hypot(dx, dy);
    for (const auto& s : shifts_) best = std::min(best, std::hypot(dx + s.x, dy + s.y));
    return best;
  }

 private:
  double radius_;
  std::array<Point, 7> centers_{};
  std::array<Point, 6> shifts_{};
};

inline constexpr double kUserExclusionKm = 0.02;
inline constexpr int kMaxPlacementRetries = 100000;

inline double wrap_distance(Point a, Point b, const NetworkTopology& topo) {
  return HexLayout(topo.cell_radius_km).wrap_distance(a, b);
}

inline int users_per_cell(double cell_radius_km, double density_per_km2) {
  return static_cast<int>(std::floor(density_per_km2 * HexLayout(cell_radius_km).cell_area() + 1e-9));
}

// APs and users uniform per virtual cell; CPU q owns the APs of cell q. Users
// are redrawn until they are at least 20 m from every AP (wrap-around distance).
template <typename Rng>
NetworkTopology generate_topology(int n_cells, double cell_radius_km, int aps_per_cell,
                                  double user_density_per_km2, Rng& rng) {
  if (n_cells != 7) throw std::invalid_argument("generate_topology: only the 7-cell layout is supported");
  if (!(cell_radius_km > 0.0)) throw std::invalid_argument("generate_topology: cell radius must be > 0");
  if (aps_per_cell < 1) throw std::invalid_argument("generate_topology: need at least one AP per cell");
  if (!(user_density_per_km2 >= 0.0)) throw std::invalid_argument("generate_topology: density must be >= 0");

  const HexLayout layout(cell_radius_km);
  NetworkTopology topo;
  topo.cell_radius_km = cell_radius_km;
  topo.n_cells = n_cells;
  topo.cpu_aps.resize(n_cells);
  for (int c = 0; c < n_cells; ++c) {
    for (int k = 0; k < aps_per_cell; ++k) {
      topo.cpu_aps[c].push_back(static_cast<int>(topo.ap_positions.size()));
      topo.cpu_of_ap.push_back(c);
      topo.ap_positions.push_back(layout.sample_in_cell(c, rng));
    }
  }
  const int per_cell = users_per_cell(cell_radius_km, user_density_per_km2);
  for (int c = 0; c < n_cells; ++c) {
    for (int k = 0; k < per_cell; ++k) {
      int tries = 0;
      for (;;) {
        if (++tries > kMaxPlacementRetries)
          throw std::runtime_error("generate_topology: user exclusion-zone sampling did not terminate");
        const Point p = layout.sample_in_cell(c, rng);
        bool ok = true;
        for (const auto& ap : topo.ap_positions) {
          if (layout.wrap_distance(p, ap) < kUserExclusionKm) {
            ok = false;
            break;
          }
        }
        if (ok) {
          topo.user_positions.push_back(p);
          break;
        }
      }
    }
  }
  return topo;
}

inline NetworkTopology generate_topology(int n_cells, double cell_radius_km, int aps_per_cell,
                                         double user_density_per_km2, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return generate_topology(n_cells, cell_radius_km, aps_per_cell, user_density_per_km2, rng);
}

// Derives E_r, E_q, D_u and C_qu from C_u and the CPU partition.
inline ClusterSets derive_cluster_sets(std::vector<IndexSet> serving, const NetworkTopology& topo) {
  const int n_aps = topo.num_aps();
  const int n_cpus = topo.num_cpus();
  const int n_users = static_cast<int>(serving.size());
  ClusterSets cs;
  cs.serving_aps = std::move(serving);
  cs.ap_users.assign(n_aps, {});
  cs.cpu_users.assign(n_cpus, {});
  cs.user_cpus.assign(n_users, {});
  cs.cpu_user_aps.assign(n_cpus, std::vector<IndexSet>(n_users));
  for (int u = 0; u < n_users; ++u) {
    auto& c = cs.serving_aps[u];
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    for (int r : c) {
      cs.ap_users[r].push_back(u);
      cs.cpu_user_aps[topo.cpu_of_ap[r]][u].push_back(r);
    }
    for (int q = 0; q < n_cpus; ++q) {
      if (!cs.cpu_user_aps[q][u].empty()) {
        cs.user_cpus[u].push_back(q);
        cs.cpu_users[q].push_back(u);
      }
    }
  }
  return cs;
}

// C_u = {r : gain(r,u) >= beta(rho)} U {argmax_r gain(r,u)}. gains is APs x users.
inline ClusterSets build_clusters(const NetworkTopology& topo, const RMatrix& large_scale_gains, double rho_km) {
  if (large_scale_gains.rows() != topo.num_aps() || large_scale_gains.cols() != topo.num_users())
    throw std::invalid_argument("build_clusters: gain matrix has wrong shape");
  const double threshold = pathloss_linear(rho_km);
  std::vector<IndexSet> serving(topo.num_users());
  for (int u = 0; u < topo.num_users(); ++u) {
    int best = 0;
    for (int r = 0; r < topo.num_aps(); ++r) {
      const double g = large_scale_gains(r, u);
      if (g >= threshold) serving[u].push_back(r);
      if (g > large_scale_gains(best, u)) best = r;
    }
    if (topo.num_aps() > 0 && std::find(serving[u].begin(), serving[u].end(), best) == serving[u].end())
      serving[u].push_back(best);
  }
  return derive_cluster_sets(std::move(serving), topo);
}

// One record per node: kind id x_km y_km cpu (users carry cpu -1).
inline void write_topology(std::ostream& os, const NetworkTopology& topo) {
  os.precision(17);
  os << "# kind id x_km y_km cpu\n";
  for (int r = 0; r < topo.num_aps(); ++r)
    os << "ap " << r << ' ' << topo.ap_positions[r].x << ' ' << topo.ap_positions[r].y << ' ' << topo.cpu_of_ap[r]
       << '\n';
  for (int u = 0; u < topo.num_users(); ++u)
    os << "user " << u << ' ' << topo.user_positions[u].x << ' ' << topo.user_positions[u].y << " -1\n";
}

// Inverse of write_topology. Clusters are not part of the snapshot.
inline NetworkTopology read_topology(std::istream& is, double cell_radius_km = 0.5) {
  NetworkTopology topo;
  topo.cell_radius_km = cell_radius_km;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    int id = 0, cpu = 0;
    Point p;
    if (!(ls >> kind >> id >> p.x >> p.y >> cpu))
      throw std::runtime_error("read_topology: malformed record on line " + std::to_string(line_no));
    if (kind == "ap") {
      if (id != topo.num_aps()) throw std::runtime_error("read_topology: AP ids must be consecutive");
      topo.ap_positions.push_back(p);
      topo.cpu_of_ap.push_back(cpu);
      if (cpu < 0) throw std::runtime_error("read_topology: AP without CPU");
      if (cpu >= topo.num_cpus()) topo.cpu_aps.resize(cpu + 1);
      topo.cpu_aps[cpu].push_back(id);
    } else if (kind == "user") {
      if (id != topo.num_users()) throw std::runtime_error("read_topology: user ids must be consecutive");
      topo.user_positions.push_back(p);
    } else {
      throw std::runtime_error("read_topology: unknown kind '" + kind + "' on line " + std::to_string(line_no));
    }
  }
  return topo;
}

}  // namespace cfmimo
