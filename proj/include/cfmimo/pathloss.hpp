#pragma once

#include <cmath>
#include <stdexcept>

namespace cfmimo {

// COST231 Walfisch-Ikegami at 1800 MHz, d in km.
inline double pathloss_db(double d_km) {
  if (!(d_km > 0.0)) throw std::domain_error("pathloss_db: distance must be > 0");
  return -112.4271 - 38.0 * std::log10(d_km);
}

inline double pathloss_linear(double d_km) { return std::pow(10.0, pathloss_db(d_km) / 10.0); }

}  // namespace cfmimo
