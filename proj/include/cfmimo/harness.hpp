#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cfmimo/allocation.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/evaluation.hpp"
#include "cfmimo/fp_centralized.hpp"
#include "cfmimo/fp_decentralized.hpp"
#include "cfmimo/fp_exchange.hpp"
#include "cfmimo/model.hpp"
#include "cfmimo/topology.hpp"

namespace cfmimo {

// Defaults are the desk-scale profile: 14 APs, 50 users/km^2, 20 topologies.
struct ExperimentSpec {
  std::vector<Mode> modes{Mode::Centralized, Mode::Semi, Mode::Distributed, Mode::SemiDecentralized,
                          Mode::DistDecentralized};
  int n_topologies = 20;
  int n_timeslots = 1;
  std::vector<double> densities{50.0};
  std::vector<int> aps_per_cell{2};
  std::vector<double> kappas;  // empty: the single value SimConfig::kappa
  std::uint64_t seed = 1;
  std::string output_dir = ".";
  int n_cells = 7;
  double cell_radius_km = 0.5;
  int round_robin_groups = 2;

  void validate() const {
    if (modes.empty()) throw ConfigError("at least one mode is required");
    if (n_topologies < 1) throw ConfigError("topologies must be >= 1");
    if (n_timeslots < 1) throw ConfigError("timeslots must be >= 1");
    if (densities.empty() || aps_per_cell.empty()) throw ConfigError("densities and aps_per_cell must be nonempty");
    for (double d : densities)
      if (!(d >= 0.0)) throw ConfigError("densities must be >= 0");
    for (int a : aps_per_cell)
      if (a < 1) throw ConfigError("aps_per_cell must be >= 1");
    for (double k : kappas)
      if (!(k >= 0.0)) throw ConfigError("kappas must be >= 0");
    if (n_cells != 7) throw ConfigError("only the 7-cell layout is supported");
    if (!(cell_radius_km > 0.0)) throw ConfigError("cell_radius_km must be > 0");
    if (round_robin_groups < 1) throw ConfigError("round_robin_groups must be >= 1");
  }
};

struct LoadedConfig {
  ExperimentSpec spec;
  SimConfig cfg;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s) {
  std::istringstream is(s);
  T v{};
  is >> v;
  if (is.fail() || !is.eof()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline void apply_key(LoadedConfig& lc, const std::string& key, const std::string& value) {
  auto& c = lc.cfg;
  auto& s = lc.spec;
  auto num = [&](auto& field) { field = parse_number<std::decay_t<decltype(field)>>(value); };
  if (key == "M") num(c.M);
  else if (key == "N") num(c.N);
  else if (key == "P_T_dbm") num(c.P_T.value);
  else if (key == "noise_psd_dbm_hz") num(c.noise_psd_dbm_hz);
  else if (key == "noise_figure_db") num(c.noise_figure_db);
  else if (key == "bandwidth_hz") num(c.bandwidth_hz);
  else if (key == "eta") num(c.eta);
  else if (key == "rho_km") num(c.rho_km);
  else if (key == "epsilon") num(c.epsilon_cs);
  else if (key == "kappa") num(c.kappa);
  else if (key == "fp_max_iters") num(c.fp_max_iters);
  else if (key == "fp_rel_tol") num(c.fp_rel_tol);
  else if (key == "bisect_tol") num(c.bisect_tol);
  else if (key == "power_threshold_frac") num(c.power_threshold_frac);
  else if (key == "lambda_init") num(c.lambda_init);
  else if (key == "seed") {
    num(s.seed);
    c.seed = s.seed;
  } else if (key == "modes") {
    s.modes.clear();
    for (const auto& m : split_list(value)) s.modes.push_back(parse_mode(m));
  } else if (key == "topologies") num(s.n_topologies);
  else if (key == "timeslots") num(s.n_timeslots);
  else if (key == "densities") {
    s.densities.clear();
    for (const auto& d : split_list(value)) s.densities.push_back(parse_number<double>(d));
  } else if (key == "aps_per_cell") {
    s.aps_per_cell.clear();
    for (const auto& a : split_list(value)) s.aps_per_cell.push_back(parse_number<int>(a));
  } else if (key == "kappas") {
    s.kappas.clear();
    for (const auto& k : split_list(value)) s.kappas.push_back(parse_number<double>(k));
  } else if (key == "output_dir") s.output_dir = value;
  else if (key == "cell_radius_km") num(s.cell_radius_km);
  else if (key == "round_robin_groups") num(s.round_robin_groups);
  else throw ConfigError("unknown key '" + key + "'");
}

}  // namespace detail

// Flat `key = value` text, `#` starts a comment, lists are comma separated.
// Missing keys keep their defaults.
inline LoadedConfig parse_config(std::istream& is, const std::string& origin = "<config>") {
  LoadedConfig lc;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const auto where = origin + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(where + "expected 'key = value'");
    try {
      detail::apply_key(lc, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  lc.cfg.validate();
  lc.spec.validate();
  return lc;
}

inline LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_config(in, path.string());
}

// One evaluated timeslot of one topology.
struct SlotRecord {
  int topology = 0;
  TimeSlotResult result;
  bool converged = true;
  int iterations = 0;
};

// All slots of one (mode, density, AP count, kappa) combination, ordered by
// topology then timeslot.
struct ScenarioResult {
  Mode mode = Mode::Centralized;
  double density = 0.0;
  int aps = 0;
  double kappa = 1.0;
  std::vector<SlotRecord> slots;

  std::vector<double> sum_se() const {
    std::vector<double> v;
    for (const auto& s : slots) v.push_back(s.result.sum_se);
    return v;
  }
  double mean_sum_se() const {
    const auto v = sum_se();
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
  double std_error() const {
    const auto v = sum_se();
    if (v.size() < 2) return 0.0;
    const double m = mean_sum_se();
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  double mean_jain() const {
    double s = 0.0;
    for (const auto& r : slots) s += r.result.jain;
    return slots.empty() ? 0.0 : s / static_cast<double>(slots.size());
  }
  std::vector<double> se_samples() const {
    std::vector<double> v;
    for (const auto& r : slots) v.insert(v.end(), r.result.se.begin(), r.result.se.end());
    return v;
  }
  int nonconverged() const {
    return static_cast<int>(std::count_if(slots.begin(), slots.end(), [](const auto& r) { return !r.converged; }));
  }
};

struct AggregateResult {
  std::vector<ScenarioResult> scenarios;

  const ScenarioResult* find(Mode mode, double density, int aps, double kappa) const {
    for (const auto& s : scenarios)
      if (s.mode == mode && s.density == density && s.aps == aps && s.kappa == kappa) return &s;
    return nullptr;
  }
  const ScenarioResult* find(Mode mode) const {
    for (const auto& s : scenarios)
      if (s.mode == mode) return &s;
    return nullptr;
  }
};

inline bool uses_kappa(Mode m) { return m == Mode::DistDecentralized || m == Mode::SemiDecentralized; }

// Runs one mode's allocator; the round-robin baseline needs the slot index.
inline AllocationResult allocate(Mode mode, const NetworkTopology& topo, const ChannelRealization& ch,
                                 std::span<const double> delta, const SimConfig& cfg, int slot = 0,
                                 int round_robin_groups = 2) {
  switch (mode) {
    case Mode::Centralized: return run_centralized(topo, ch, delta, cfg);
    case Mode::Distributed: return run_distributed(topo, ch, delta, cfg);
    case Mode::Semi: return run_semi_distributed(topo, ch, delta, cfg);
    case Mode::DistDecentralized: return run_decentralized_distributed(topo, ch, delta, cfg);
    case Mode::SemiDecentralized: return run_decentralized_semi(topo, ch, delta, cfg);
    case Mode::RoundRobin: return round_robin_allocation(topo, ch, cfg, round_robin_groups, slot);
  }
  throw std::logic_error("allocate: unknown mode");
}

// Seeds depend on the base seed, the scenario geometry and the trial index,
// never on mode or kappa, so every mode sees the same draws.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> salt) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32)};
  for (auto s : salt) {
    words.push_back(static_cast<std::uint32_t>(s));
    words.push_back(static_cast<std::uint32_t>(s >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t w[2];
  seq.generate(w, w + 2);
  return (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
}

// One network drawn for a trial: positions, clusters and large-scale gains.
struct Trial {
  NetworkTopology topo;
  RMatrix large_scale;
  std::uint64_t fading_seed = 0;
};

inline Trial make_trial(const ExperimentSpec& spec, const SimConfig& cfg, double density, int aps_per_cell,
                        int index) {
  const auto key = static_cast<std::uint64_t>(std::llround(density * 1000.0));
  std::mt19937_64 rng(derive_seed(spec.seed, {key, static_cast<std::uint64_t>(aps_per_cell),
                                              static_cast<std::uint64_t>(index)}));
  Trial t;
  t.topo = generate_topology(spec.n_cells, spec.cell_radius_km, aps_per_cell, density, rng);
  t.large_scale = draw_large_scale(t.topo, rng);
  t.topo.clusters = build_clusters(t.topo, t.large_scale, cfg.rho_km);
  t.fading_seed = rng();
  return t;
}

inline int worker_count() {
  if (const char* env = std::getenv("CFMIMO_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs task(i) for i in [0, n) on a pool of workers pulling indices from a
// shared counter. The first exception is rethrown after all workers join.
inline void parallel_for(int n, int workers, const std::function<void(int)>& task) {
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  pool.clear();
  if (error) std::rethrow_exception(error);
}

using ProgressCallback = std::function<void(int done, int total)>;

// Monte Carlo over topologies and timeslots. Each (mode, kappa) keeps its own
// proportional-fair state across the timeslots of a topology.
inline AggregateResult run_experiment(const ExperimentSpec& spec, const SimConfig& cfg,
                                      const ProgressCallback& progress = {}) {
  spec.validate();
  cfg.validate();
  const std::vector<double> kappas = spec.kappas.empty() ? std::vector<double>{cfg.kappa} : spec.kappas;

  struct Task {
    std::size_t density, aps;
    int trial;
  };
  std::vector<Task> tasks;
  for (std::size_t d = 0; d < spec.densities.size(); ++d)
    for (std::size_t a = 0; a < spec.aps_per_cell.size(); ++a)
      for (int t = 0; t < spec.n_topologies; ++t) tasks.push_back({d, a, t});

  // outputs[task][mode][kappa] -> slots of that trial
  using TrialOut = std::vector<std::vector<std::vector<SlotRecord>>>;
  std::vector<TrialOut> outputs(tasks.size());
  std::atomic<int> done{0};
  std::mutex progress_mutex;

  parallel_for(static_cast<int>(tasks.size()), worker_count(), [&](int i) {
    const auto& task = tasks[i];
    const Trial trial = make_trial(spec, cfg, spec.densities[task.density], spec.aps_per_cell[task.aps], task.trial);
    const int U = trial.topo.num_users();
    TrialOut out(spec.modes.size(), std::vector<std::vector<SlotRecord>>(kappas.size()));
    std::vector<std::vector<FairnessState>> fair(spec.modes.size(),
                                                 std::vector<FairnessState>(kappas.size(),
                                                                            FairnessState::initial(U, cfg.eta)));
    std::mt19937_64 fading(trial.fading_seed);
    for (int slot = 0; slot < spec.n_timeslots; ++slot) {
      const ChannelRealization ch = draw_realization(trial.topo, trial.large_scale, cfg, fading);
      for (std::size_t m = 0; m < spec.modes.size(); ++m) {
        const Mode mode = spec.modes[m];
        for (std::size_t k = 0; k < kappas.size(); ++k) {
          SlotRecord rec;
          rec.topology = task.trial;
          if (!uses_kappa(mode) && k > 0) {
            // kappa does not enter this mode; reuse the first evaluation
            rec = out[m][0].back();
          } else {
            SimConfig c = cfg;
            c.kappa = kappas[k];
            const auto delta = fair[m][k].weights();
            const auto alloc = allocate(mode, trial.topo, ch, delta, c, slot, spec.round_robin_groups);
            rec.result = evaluate_allocation(mode, trial.topo, ch, alloc, slot);
            rec.converged = alloc.converged;
            rec.iterations = alloc.iterations;
            pf_update(fair[m][k], rec.result.se);
          }
          out[m][k].push_back(std::move(rec));
        }
      }
    }
    outputs[i] = std::move(out);
    const int n = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(n, static_cast<int>(tasks.size()));
    }
  });

  AggregateResult agg;
  for (std::size_t d = 0; d < spec.densities.size(); ++d)
    for (std::size_t a = 0; a < spec.aps_per_cell.size(); ++a)
      for (std::size_t m = 0; m < spec.modes.size(); ++m)
        for (std::size_t k = 0; k < kappas.size(); ++k) {
          ScenarioResult s;
          s.mode = spec.modes[m];
          s.density = spec.densities[d];
          s.aps = spec.aps_per_cell[a] * spec.n_cells;
          s.kappa = kappas[k];
          for (std::size_t i = 0; i < tasks.size(); ++i)
            if (tasks[i].density == d && tasks[i].aps == a)
              for (auto& r : outputs[i][m][k]) s.slots.push_back(r);
          agg.scenarios.push_back(std::move(s));
        }
  return agg;
}

// One aggregate per kappa over identical seeds; only decentralized modes are meaningful.
inline AggregateResult sweep_kappa(const ExperimentSpec& spec, const SimConfig& cfg,
                                   const ProgressCallback& progress = {}) {
  for (Mode m : spec.modes)
    if (!uses_kappa(m)) throw ConfigError("sweep-kappa: mode '" + std::string(to_string(m)) + "' ignores kappa");
  return run_experiment(spec, cfg, progress);
}

inline void emit_csv(const AggregateResult& result, std::ostream& os) {
  os << "mode,density,aps,kappa,topology,timeslot,user,sinr,se,scheduled\n";
  os << std::setprecision(10);
  for (const auto& s : result.scenarios)
    for (const auto& rec : s.slots)
      for (std::size_t u = 0; u < rec.result.sinr.size(); ++u)
        os << to_string(s.mode) << ',' << s.density << ',' << s.aps << ',' << s.kappa << ',' << rec.topology << ','
           << rec.result.timeslot << ',' << u << ',' << rec.result.sinr[u] << ',' << rec.result.se[u] << ','
           << static_cast<int>(rec.result.scheduled[u]) << '\n';
}

// Empirical CDF points (x, F(x)) with one point per distinct value.
inline std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (i + 1 == samples.size() || samples[i + 1] != samples[i])
      out.emplace_back(samples[i], static_cast<double>(i + 1) / n);
  return out;
}

// Per-user SE CDF per mode, pooled over all scenarios of that mode.
inline void emit_cdf(const AggregateResult& result, std::ostream& os) {
  os << "mode,se,cum_prob\n";
  os << std::setprecision(10);
  std::vector<Mode> order;
  for (const auto& s : result.scenarios)
    if (std::find(order.begin(), order.end(), s.mode) == order.end()) order.push_back(s.mode);
  for (Mode m : order) {
    std::vector<double> pooled;
    for (const auto& s : result.scenarios)
      if (s.mode == m) {
        const auto v = s.se_samples();
        pooled.insert(pooled.end(), v.begin(), v.end());
      }
    for (const auto& [x, p] : empirical_cdf(std::move(pooled))) os << to_string(m) << ',' << x << ',' << p << '\n';
  }
}

inline void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  body(out);
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

inline void emit_csv(const AggregateResult& result, const std::filesystem::path& path) {
  write_file(path, [&](std::ostream& os) { emit_csv(result, os); });
}

inline void emit_cdf(const AggregateResult& result, const std::filesystem::path& path) {
  write_file(path, [&](std::ostream& os) { emit_cdf(result, os); });
}

// Complex-multiplication and exchange counts for one topology.
struct OverheadReport {
  Mode mode = Mode::Centralized;
  std::vector<double> per_user_complexity;  // receiver computation per user
  double mean_complexity = 0.0;
  double exchange = 0.0;  // complex numbers exchanged per allocation run
};

inline OverheadReport estimate_overhead(const NetworkTopology& topo, const SimConfig& cfg, Mode mode, int n_iter) {
  const double M3 = std::pow(static_cast<double>(cfg.M), 3);
  const double B = topo.num_aps();
  const auto& cs = topo.clusters;
  OverheadReport rep;
  rep.mode = mode;
  for (int u = 0; u < topo.num_users(); ++u) {
    const double c = static_cast<double>(cs.serving_aps[u].size());
    double x = 0.0;
    switch (mode) {
      case Mode::Centralized:
      case Mode::RoundRobin: x = M3 * c * c * B + M3 * c * c * c; break;
      case Mode::Distributed:
      case Mode::DistDecentralized: x = M3 * c * B + M3 * c; break;
      case Mode::Semi:
      case Mode::SemiDecentralized:
        for (int q : cs.user_cpus[u]) {
          const double cq = static_cast<double>(cs.cpu_user_aps[q][u].size());
          x += M3 * cq * cq * B + M3 * cq * cq * cq;
        }
        break;
    }
    rep.per_user_complexity.push_back(x);
  }
  if (!rep.per_user_complexity.empty())
    rep.mean_complexity = std::accumulate(rep.per_user_complexity.begin(), rep.per_user_complexity.end(), 0.0) /
                          static_cast<double>(rep.per_user_complexity.size());
  const double MN = static_cast<double>(cfg.M) * cfg.N;
  const double per_iter = static_cast<double>(n_iter) * (cfg.M + cfg.N);
  if (mode == Mode::Distributed) {
    for (int r = 0; r < topo.num_aps(); ++r)
      for (int r2 = 0; r2 < topo.num_aps(); ++r2)
        if (r2 != r)
          rep.exchange += MN * static_cast<double>(cs.ap_users[r].size()) +
                          per_iter * static_cast<double>(cs.ap_users[r2].size());
  } else if (mode == Mode::Semi) {
    for (int q = 0; q < topo.num_cpus(); ++q)
      for (int r2 = 0; r2 < topo.num_aps(); ++r2)
        if (topo.cpu_of_ap[r2] != q)
          rep.exchange += MN * static_cast<double>(cs.cpu_users[q].size()) +
                          per_iter * static_cast<double>(cs.ap_users[r2].size());
  }
  return rep;
}

}  // namespace cfmimo
