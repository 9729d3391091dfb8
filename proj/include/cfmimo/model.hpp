#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cfmimo {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;

// Thrown for invalid configuration values or malformed config files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Power in dBm. Kept distinct from linear milliwatt so the two cannot be mixed
// inside an SINR expression.
struct DbmPower {
  double value{0.0};
};

struct LinearPower {
  double mw{0.0};
};

inline LinearPower dbm_to_mw(DbmPower x) { return {std::pow(10.0, x.value / 10.0)}; }

inline DbmPower mw_to_dbm(LinearPower p) {
  if (!(p.mw > 0.0)) throw std::domain_error("mw_to_dbm: power must be positive");
  return {10.0 * std::log10(p.mw)};
}

struct SimConfig {
  int M = 8;  // antennas per AP
  int N = 1;  // antennas per user
  DbmPower P_T{23.0};
  double noise_psd_dbm_hz = -174.0;
  double noise_figure_db = 8.0;
  double bandwidth_hz = 20e6;
  double eta = 0.2;      // proportional-fair forgetting factor
  double rho_km = 0.4;   // cluster boundary distance
  double epsilon_cs = 0.0;  // <= 0 means "derive as M / (0.9 P_T)"
  double kappa = 1.0;    // non-local interference scale
  int fp_max_iters = 100;
  double fp_rel_tol = 1e-4;
  double bisect_tol = 1e-9;
  double power_threshold_frac = 0.01;
  double lambda_init = 0.1;
  std::uint64_t seed = 1;

  double pt_mw() const { return dbm_to_mw(P_T).mw; }

  // Reweighting floor; the table default M / (0.9 P_T) with P_T in mW.
  double epsilon() const {
    return epsilon_cs > 0.0 ? epsilon_cs : static_cast<double>(M) / (0.9 * pt_mw());
  }

  void validate() const {
    if (M < 1) throw ConfigError("M must be >= 1");
    if (N < 1) throw ConfigError("N must be >= 1");
    if (!std::isfinite(P_T.value)) throw ConfigError("P_T must be finite");
    if (!(bandwidth_hz > 0.0)) throw ConfigError("bandwidth_hz must be > 0");
    if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("eta must lie in (0, 1)");
    if (!(rho_km > 0.0)) throw ConfigError("rho_km must be > 0");
    if (epsilon_cs < 0.0) throw ConfigError("epsilon_cs must be > 0 (or 0 for the default)");
    // kappa = 0 is accepted as a diagnostic that disables the non-local term.
    if (!(kappa >= 0.0)) throw ConfigError("kappa must be >= 0");
    if (fp_max_iters < 1) throw ConfigError("fp_max_iters must be >= 1");
    if (!(fp_rel_tol > 0.0)) throw ConfigError("fp_rel_tol must be > 0");
    if (!(bisect_tol > 0.0 && bisect_tol < 1.0)) throw ConfigError("bisect_tol must lie in (0, 1)");
    if (!(power_threshold_frac > 0.0 && power_threshold_frac < 1.0))
      throw ConfigError("power_threshold_frac must lie in (0, 1)");
    if (!(lambda_init > 0.0)) throw ConfigError("lambda_init must be > 0");
  }
};

// Thermal noise per receive antenna in mW: psd + 10 log10(B) + NF, all in dB units.
inline LinearPower noise_power(const SimConfig& cfg) {
  if (!(cfg.bandwidth_hz > 0.0)) throw ConfigError("noise_power: bandwidth must be > 0");
  return dbm_to_mw({cfg.noise_psd_dbm_hz + 10.0 * std::log10(cfg.bandwidth_hz) + cfg.noise_figure_db});
}

}  // namespace cfmimo
