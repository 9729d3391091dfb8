#include <catch_amalgamated.hpp>

#include "cfmimo/channel.hpp"
#include "cfmimo/pathloss.hpp"

using namespace cfmimo;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("pathloss follows the log-distance law", "[channel]") {
  CHECK_THAT(pathloss_db(1.0), WithinAbs(-112.4271, 1e-12));
  CHECK_THAT(pathloss_db(0.1), WithinAbs(-74.4271, 1e-12));
  CHECK_THAT(pathloss_db(0.01), WithinAbs(-36.4271, 1e-12));
  CHECK_THROWS_AS(pathloss_db(0.0), std::domain_error);
  CHECK_THROWS_AS(pathloss_db(-1.0), std::domain_error);
}

TEST_CASE("shadowing is 4 dB lognormal", "[channel]") {
  std::mt19937_64 rng(1);
  const int n = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = draw_shadowing(rng);
    REQUIRE(s > 0.0);
    const double db = 10.0 * std::log10(s);
    sum += db;
    sum2 += db * db;
  }
  const double mean = sum / n;
  CHECK_THAT(mean, WithinAbs(0.0, 0.1));
  CHECK_THAT(std::sqrt(sum2 / n - mean * mean), WithinAbs(4.0, 0.2));
}

namespace {

NetworkTopology line_topology(int aps, int users) {
  NetworkTopology t;
  for (int r = 0; r < aps; ++r) {
    t.ap_positions.push_back({0.1 * r, 0.0});
    t.cpu_of_ap.push_back(0);
  }
  t.cpu_aps = {{}};
  for (int r = 0; r < aps; ++r) t.cpu_aps[0].push_back(r);
  for (int u = 0; u < users; ++u) t.user_positions.push_back({0.0, 0.05 * (u + 1)});
  return t;
}

}  // namespace

TEST_CASE("small-scale fading has unit variance", "[channel]") {
  const auto t = line_topology(25, 25);
  SimConfig cfg;
  cfg.M = 10;
  cfg.N = 16;
  const RMatrix ones = RMatrix::Ones(25, 25);
  std::mt19937_64 rng(2);
  const auto ch = draw_realization(t, ones, cfg, rng);  // 25*25*10*16 = 1e5 entries
  double e2 = 0.0, re = 0.0;
  long count = 0;
  for (const auto& m : ch.per_ap) {
    e2 += m.cwiseAbs2().sum();
    re += m.real().sum();
    count += m.size();
  }
  CHECK(count == 100000);
  CHECK_THAT(e2 / count, WithinAbs(1.0, 0.05));
  CHECK_THAT(re / count, WithinAbs(0.0, 0.02));
  CHECK_THAT(ch.sigma2, WithinRel(noise_power(cfg).mw, 1e-15));
}

TEST_CASE("channel power follows the large-scale gain", "[channel]") {
  const auto t = line_topology(2, 3);
  SimConfig cfg;
  cfg.M = 8;
  cfg.N = 1;
  RMatrix g(2, 3);
  g << 1e-9, 2e-10, 5e-11, 3e-12, 7e-9, 1e-10;
  std::mt19937_64 rng(3);
  RMatrix acc = RMatrix::Zero(2, 3);
  const int draws = 3000;
  for (int i = 0; i < draws; ++i) {
    const auto ch = draw_realization(t, g, cfg, rng);
    for (int r = 0; r < 2; ++r)
      for (int u = 0; u < 3; ++u) acc(r, u) += ch.block(r, u).squaredNorm() / cfg.M;
  }
  for (int r = 0; r < 2; ++r)
    for (int u = 0; u < 3; ++u) CHECK_THAT(acc(r, u) / draws, WithinRel(g(r, u), 0.05));
}

TEST_CASE("realizations are reproducible per seed", "[channel]") {
  const auto t = line_topology(3, 4);
  SimConfig cfg;
  const RMatrix g = RMatrix::Constant(3, 4, 1e-10);
  std::mt19937_64 a(7), b(7), c(8);
  const auto x = draw_realization(t, g, cfg, a);
  const auto y = draw_realization(t, g, cfg, b);
  const auto z = draw_realization(t, g, cfg, c);
  for (int r = 0; r < 3; ++r) {
    CHECK(x.per_ap[r] == y.per_ap[r]);
    CHECK(x.per_ap[r] != z.per_ap[r]);
  }
  CHECK_THROWS_AS(draw_realization(t, RMatrix::Ones(2, 4), cfg, a), std::invalid_argument);
}

TEST_CASE("concat_cluster_channel stacks blocks in AP order", "[channel]") {
  const auto t = line_topology(3, 2);
  SimConfig cfg;
  cfg.M = 4;
  cfg.N = 2;
  std::mt19937_64 rng(5);
  const auto ch = draw_realization(t, RMatrix::Ones(3, 2), cfg, rng);
  const IndexSet one{1};
  CHECK(concat_cluster_channel(ch, one, 0) == CMatrix(ch.block(1, 0)));
  const IndexSet two{0, 2};
  const CMatrix h = concat_cluster_channel(ch, two, 1);
  REQUIRE(h.rows() == 8);
  REQUIRE(h.cols() == 2);
  CHECK(h.topRows(4) == CMatrix(ch.block(0, 1)));
  CHECK(h.bottomRows(4) == CMatrix(ch.block(2, 1)));
  CHECK_THAT(h.squaredNorm(), WithinRel(ch.block(0, 1).squaredNorm() + ch.block(2, 1).squaredNorm(), 1e-14));
  CHECK_THROWS(concat_cluster_channel(ch, IndexSet{}, 0));
}
