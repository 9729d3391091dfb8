// Batch driver: run experiments, sweep kappa, estimate overhead, compare modes.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfmimo/cfmimo.hpp"

namespace {

using namespace cfmimo;

struct CommonArgs {
  std::string config;
  std::vector<std::string> modes;
  std::optional<int> topologies;
  std::optional<int> timeslots;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "key = value configuration file");
  cmd->add_option("--mode", a.modes,
                  "centralized | distributed | semi | dist-decentralized | semi-decentralized | round-robin")
      ->take_all();
  cmd->add_option("--topologies", a.topologies, "number of random topologies");
  cmd->add_option("--timeslots", a.timeslots, "timeslots per topology");
  cmd->add_option("--seed", a.seed, "base random seed");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_flag("--quiet", a.quiet, "suppress progress output");
}

LoadedConfig resolve(const CommonArgs& a) {
  LoadedConfig lc = a.config.empty() ? LoadedConfig{} : load_config(a.config);
  if (!a.modes.empty()) {
    lc.spec.modes.clear();
    for (const auto& m : a.modes) {
      try {
        lc.spec.modes.push_back(parse_mode(m));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (a.topologies) lc.spec.n_topologies = *a.topologies;
  if (a.timeslots) lc.spec.n_timeslots = *a.timeslots;
  if (a.seed) lc.spec.seed = lc.cfg.seed = *a.seed;
  if (a.out) lc.spec.output_dir = *a.out;
  lc.spec.validate();
  lc.cfg.validate();
  return lc;
}

ProgressCallback progress_printer(bool quiet) {
  if (quiet) return {};
  return [](int done, int total) {
    std::fprintf(stderr, "\r[%d/%d] topologies", done, total);
    if (done == total) std::fputc('\n', stderr);
  };
}

void print_summary(const AggregateResult& res) {
  for (const auto& s : res.scenarios) {
    std::cout << std::defaultfloat << to_string(s.mode) << " density=" << s.density << " aps=" << s.aps
              << " kappa=" << s.kappa << std::fixed << std::setprecision(3) << "  mean sum SE " << s.mean_sum_se()
              << " +/- " << s.std_error() << "  Jain " << s.mean_jain() << "  (" << s.slots.size() << " samples";
    if (const int n = s.nonconverged()) std::cout << ", " << n << " hit the iteration cap";
    std::cout << ")\n";
  }
}

void write_outputs(const AggregateResult& res, const ExperimentSpec& spec, const std::string& stem) {
  const std::filesystem::path dir(spec.output_dir);
  emit_csv(res, dir / (stem + ".csv"));
  emit_cdf(res, dir / (stem + "_cdf.csv"));
  std::cout << "wrote " << (dir / (stem + ".csv")).string() << " and " << (dir / (stem + "_cdf.csv")).string()
            << '\n';
}

int cmd_run(const CommonArgs& a) {
  const auto lc = resolve(a);
  const auto res = run_experiment(lc.spec, lc.cfg, progress_printer(a.quiet));
  print_summary(res);
  write_outputs(res, lc.spec, "results");
  return 0;
}

int cmd_sweep(const CommonArgs& a, const std::vector<double>& kappas) {
  auto lc = resolve(a);
  if (a.modes.empty()) lc.spec.modes = {Mode::DistDecentralized, Mode::SemiDecentralized};
  if (!kappas.empty()) lc.spec.kappas = kappas;
  if (lc.spec.kappas.empty()) lc.spec.kappas = {0.5, 1.0, 2.0, 5.0, 10.0};
  const auto res = sweep_kappa(lc.spec, lc.cfg, progress_printer(a.quiet));
  print_summary(res);
  for (Mode m : lc.spec.modes) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& s : res.scenarios)
      if (s.mode == m) {
        const double v = s.mean_sum_se();
        lo = first ? v : std::min(lo, v);
        hi = first ? v : std::max(hi, v);
        first = false;
      }
    std::cout << to_string(m) << " kappa spread " << (lo > 0.0 ? 100.0 * (hi - lo) / lo : 0.0) << " %\n";
  }
  write_outputs(res, lc.spec, "kappa_sweep");
  return 0;
}

int cmd_overhead(const CommonArgs& a, std::optional<int> iters) {
  const auto lc = resolve(a);
  const auto trial = make_trial(lc.spec, lc.cfg, lc.spec.densities.front(), lc.spec.aps_per_cell.front(), 0);
  std::cout << "topology: " << trial.topo.num_aps() << " APs, " << trial.topo.num_users() << " users, "
            << trial.topo.num_cpus() << " CPUs\n";
  std::cout << std::setprecision(6);
  for (Mode m : lc.spec.modes) {
    int n_iter = iters.value_or(0);
    if (!iters && (m == Mode::Distributed || m == Mode::Semi)) {
      std::mt19937_64 rng(trial.fading_seed);
      const auto ch = draw_realization(trial.topo, trial.large_scale, lc.cfg, rng);
      const std::vector<double> delta(trial.topo.num_users(), 1.0);
      n_iter = allocate(m, trial.topo, ch, delta, lc.cfg).iterations;
    }
    const auto rep = estimate_overhead(trial.topo, lc.cfg, m, n_iter);
    std::cout << to_string(m) << ": mean receiver complexity " << rep.mean_complexity << " CM/user, exchange "
              << rep.exchange << " complex values";
    if (m == Mode::Distributed || m == Mode::Semi) std::cout << " (N_iter = " << n_iter << ")";
    std::cout << '\n';
  }
  return 0;
}

int cmd_compare(const CommonArgs& a) {
  auto lc = resolve(a);
  if (lc.spec.modes.size() < 2) throw ConfigError("compare needs at least two modes");
  const auto res = run_experiment(lc.spec, lc.cfg, progress_printer(a.quiet));
  print_summary(res);
  for (const auto& base : res.scenarios) {
    if (base.mode != lc.spec.modes.front()) continue;
    for (const auto& other : res.scenarios) {
      if (other.mode == base.mode || other.density != base.density || other.aps != base.aps ||
          other.kappa != base.kappa)
        continue;
      const double b = base.mean_sum_se();
      const double delta = b > 0.0 ? 100.0 * (other.mean_sum_se() - b) / b : 0.0;
      std::cout << to_string(other.mode) << " vs " << to_string(base.mode) << " (aps=" << base.aps
                << ", density=" << std::defaultfloat << base.density << "): " << std::fixed << std::setprecision(2)
                << std::showpos << delta << std::noshowpos
                << " % mean sum SE\n";
    }
  }
  if (a.out) write_outputs(res, lc.spec, "compare");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uplink resource allocation for user-centric cell-free MIMO"};
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, overhead_args, compare_args;
  std::vector<double> kappas;
  std::optional<int> iters;

  auto* run = app.add_subcommand("run", "Monte Carlo experiment; writes per-user CSV and SE CDF");
  add_common(run, run_args);
  auto* sweep = app.add_subcommand("sweep-kappa", "decentralized modes over a list of kappa values");
  add_common(sweep, sweep_args);
  sweep->add_option("--kappa", kappas, "kappa values (default 0.5 1 2 5 10)")->take_all();
  auto* overhead = app.add_subcommand("overhead", "receiver complexity and exchange volume per mode");
  add_common(overhead, overhead_args);
  overhead->add_option("--iters", iters, "iteration count used for exchange accounting");
  auto* compare = app.add_subcommand("compare", "mean sum SE of each mode relative to the first");
  add_common(compare, compare_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*sweep) return cmd_sweep(sweep_args, kappas);
    if (*overhead) return cmd_overhead(overhead_args, iters);
    if (*compare) return cmd_compare(compare_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
