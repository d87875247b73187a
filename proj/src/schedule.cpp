#include "lmhd/schedule.hpp"

#include <cmath>

#include "lmhd/ops.hpp"

namespace lmhd {

double horizon_T(double nu, double initial_energy_sq, double c1, double c2) {
  if (nu <= 0 || initial_energy_sq <= 0 || c1 <= 0 || c2 <= 0)
    fail_config("horizon_T: all inputs must be positive");
  return std::pow(c1 / c2, 0.25) / (nu * nu) * initial_energy_sq;
}

double WavenumberSchedule::lambda_of_t(double t) const {
  if (t <= 0) fail_numeric("lambda_of_t: t must be positive");
  if (t >= T) return kInfLambda;
  double s = std::min(t, T - t);
  return E_star * std::pow(s, -mirror_exponent);
}

}  // namespace lmhd
