#pragma once

#include <string_view>

namespace gsgd {

enum class ScheduleMode { InverseTime, Constant };
std::string_view to_string(ScheduleMode mode);
ScheduleMode schedule_mode_from_string(std::string_view name);

// Robbins-Monro learning-rate schedule g(t) = eta / (1 + lambda*t)^alpha.
// InverseTime with alpha in (0.5, 1] satisfies sum g = inf, sum g^2 < inf;
// Constant mode is provided for ablation and warned about at training time.
struct ScheduleConfig {
  double base_rate = 0.1;  // eta
  double decay = 1e-3;     // lambda
  double exponent = 1.0;   // alpha
  ScheduleMode mode = ScheduleMode::InverseTime;

  void validate() const;  // throws ConfigError
  bool operator==(const ScheduleConfig&) const = default;
};

double learning_rate(long t, const ScheduleConfig& sched);

// Adaptive step-size denominator
//   g(w) = (max{1, R^2 * max{(2*rho+R)^2, 1 + c_hat*(rho+R)}})^(1/2),
// always >= 1 and monotone non-decreasing in R.
double adaptive_denominator(double R, double rho, double c_hat);

// Sphere closed form (max{1, R^2 (2+R)^2})^(1/2); coincides with
// adaptive_denominator(R, 1, 1) for every R >= 0.
double sphere_denominator(double R);

// Same evaluations with the branch bookkeeping exposed for diagnostics.
struct DenominatorInfo {
  double value = 1.0;
  int gamma2_branch = 0;  // 0: (2*rho+R)^2 won, 1: 1 + c_hat*(rho+R) won
  bool floored = false;   // max{1, Gamma1} picked the floor
};
DenominatorInfo adaptive_denominator_info(double R, double rho, double c_hat);
DenominatorInfo sphere_denominator_info(double R);

}  // namespace gsgd
