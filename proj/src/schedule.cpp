#include "gsgd/schedule.hpp"

#include <cmath>
#include <string>

#include "gsgd/errors.hpp"

namespace gsgd {

std::string_view to_string(ScheduleMode mode) {
  return mode == ScheduleMode::InverseTime ? "InverseTime" : "Constant";
}

ScheduleMode schedule_mode_from_string(std::string_view name) {
  if (name == "InverseTime") return ScheduleMode::InverseTime;
  if (name == "Constant") return ScheduleMode::Constant;
  throw ConfigError("unknown schedule mode: " + std::string(name));
}

void ScheduleConfig::validate() const {
  if (!(base_rate > 0.0)) {
    throw ConfigError("schedule base_rate must be positive");
  }
  if (mode == ScheduleMode::InverseTime) {
    if (decay < 0.0) throw ConfigError("schedule decay must be non-negative");
    if (!(exponent > 0.5) || !(exponent <= 1.0)) {
      throw ConfigError("schedule exponent must lie in (0.5, 1]");
    }
  }
}

double learning_rate(long t, const ScheduleConfig& sched) {
  if (sched.mode == ScheduleMode::Constant) return sched.base_rate;
  return sched.base_rate /
         std::pow(1.0 + sched.decay * static_cast<double>(t), sched.exponent);
}

DenominatorInfo adaptive_denominator_info(double R, double rho, double c_hat) {
  DenominatorInfo info;
  const double quad = (2.0 * rho + R) * (2.0 * rho + R);
  const double linear = 1.0 + c_hat * (rho + R);
  const double gamma2 = std::max(quad, linear);
  info.gamma2_branch = quad >= linear ? 0 : 1;
  const double gamma1 = R * R * gamma2;
  info.floored = gamma1 <= 1.0;
  info.value = std::sqrt(std::max(1.0, gamma1));
  return info;
}

double adaptive_denominator(double R, double rho, double c_hat) {
  return adaptive_denominator_info(R, rho, c_hat).value;
}

DenominatorInfo sphere_denominator_info(double R) {
  DenominatorInfo info;
  // Same association as the adaptive form so the two agree bitwise at
  // rho = c = 1 (where the quadratic branch always wins).
  const double quad = (2.0 + R) * (2.0 + R);
  const double gamma1 = R * R * quad;
  info.gamma2_branch = 0;
  info.floored = gamma1 <= 1.0;
  info.value = std::sqrt(std::max(1.0, gamma1));
  return info;
}

double sphere_denominator(double R) { return sphere_denominator_info(R).value; }

}  // namespace gsgd
