#pragma once

#include "lmhd/util.hpp"

namespace lmhd {

// T = (c1/c2)^{1/4} nu^{-2} ||(v0,H0)||^2
double horizon_T(double nu, double initial_energy_sq, double c1, double c2);

// Time-dependent truncation wavenumber:
//   Lambda(t) = E_* t^{-1/3}          on (0, T/2]
//   Lambda(t) = E_* (T-t)^{-1/3}      on [T/2, T)   (mirror form, continuous)
//   Lambda(t) = +inf                  for t >= T
struct WavenumberSchedule {
  double E_star = 1.0;
  double T = 1.0;
  double mirror_exponent = 1.0 / 3.0;

  WavenumberSchedule() = default;
  WavenumberSchedule(double e, double t) : E_star(e), T(t) {
    if (e <= 0 || t <= 0) fail_config("WavenumberSchedule: E_star and T must be positive");
  }

  double lambda_of_t(double t) const;

  // first time the cutoff stops acting on a grid resolving modes up to kmax
  double bite_time(double kmax) const {
    double t = std::pow(E_star / kmax, 3.0);
    return std::min(t, T / 2.0);
  }
};

}  // namespace lmhd
