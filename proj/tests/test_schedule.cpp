#include "gsgd/schedule.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "gsgd/errors.hpp"

using namespace gsgd;

TEST_CASE("learning rate schedules") {
  ScheduleConfig inv{0.1, 0.5, 1.0, ScheduleMode::InverseTime};
  CHECK(learning_rate(0, inv) == 0.1);

  ScheduleConfig unit{1.0, 1.0, 1.0, ScheduleMode::InverseTime};
  CHECK(learning_rate(3, unit) == doctest::Approx(0.25).epsilon(1e-15));

  ScheduleConfig flat{0.1, 123.0, 1.0, ScheduleMode::Constant};
  CHECK(learning_rate(0, flat) == 0.1);
  CHECK(learning_rate(100000, flat) == 0.1);

  // alpha < 1 decays more slowly.
  ScheduleConfig slow{1.0, 1.0, 0.6, ScheduleMode::InverseTime};
  CHECK(learning_rate(100, slow) > learning_rate(100, unit));
}

TEST_CASE("Robbins-Monro sums for the inverse-time schedule") {
  ScheduleConfig sched{1.0, 1.0, 1.0, ScheduleMode::InverseTime};
  // Partial sums of g grow without bound (harmonic growth)...
  double sum_small = 0.0, sum_large = 0.0;
  for (long t = 0; t < 1000; ++t) sum_small += learning_rate(t, sched);
  sum_large = sum_small;
  for (long t = 1000; t < 1000000; ++t) sum_large += learning_rate(t, sched);
  CHECK(sum_large - sum_small > 6.0);

  // ...while the tail of sum g^2 is Cauchy.
  double tail = 0.0;
  for (long t = 10000; t < 100000; ++t) {
    const double g = learning_rate(t, sched);
    tail += g * g;
  }
  CHECK(tail < 1e-4);
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS((ScheduleConfig{0.0, 1.0, 1.0, ScheduleMode::InverseTime}
                       .validate()),
                  ConfigError);
  CHECK_THROWS_AS((ScheduleConfig{0.1, -1.0, 1.0, ScheduleMode::InverseTime}
                       .validate()),
                  ConfigError);
  CHECK_THROWS_AS((ScheduleConfig{0.1, 1.0, 0.5, ScheduleMode::InverseTime}
                       .validate()),
                  ConfigError);
  CHECK_THROWS_AS((ScheduleConfig{0.1, 1.0, 1.01, ScheduleMode::InverseTime}
                       .validate()),
                  ConfigError);
  CHECK_NOTHROW((ScheduleConfig{0.1, 1.0, 0.75, ScheduleMode::InverseTime}
                     .validate()));
  CHECK_NOTHROW((ScheduleConfig{0.1, 0.0, 1.0, ScheduleMode::Constant}
                     .validate()));
  CHECK(schedule_mode_from_string("InverseTime") == ScheduleMode::InverseTime);
  CHECK_THROWS_AS(schedule_mode_from_string("Cosine"), ConfigError);
}

TEST_CASE("adaptive denominator evaluates the two-branch bound") {
  CHECK(adaptive_denominator(0.0, 0.0, 0.0) == 1.0);
  CHECK(adaptive_denominator(1.0, 1.0, 1.0) == doctest::Approx(3.0).epsilon(1e-15));

  // Branch bookkeeping: tight curvature forces the linear branch.
  auto info = adaptive_denominator_info(0.1, 0.0, 1000.0);
  CHECK(info.gamma2_branch == 1);
  CHECK(info.value == doctest::Approx(std::sqrt(0.01 * 101.0)));
  CHECK(!info.floored);

  auto floored = adaptive_denominator_info(0.2, 1.0, 1.0);
  CHECK(floored.floored);
  CHECK(floored.value == 1.0);
}

TEST_CASE("sphere denominator closed form") {
  CHECK(sphere_denominator(0.0) == 1.0);
  CHECK(sphere_denominator(1.0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(sphere_denominator(0.2) == 1.0);  // 0.04 * 4.84 < 1 floors out
}

TEST_CASE("property: sphere form equals the adaptive bound at rho=c=1") {
  for (double R = 0.0; R <= 20.0; R += 0.01) {
    REQUIRE(adaptive_denominator(R, 1.0, 1.0) == sphere_denominator(R));
  }
}

TEST_CASE("property: denominators are >= 1 and monotone in R") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(0.0, 10.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const double rho = pos(rng), c = pos(rng);
    double r1 = pos(rng), r2 = pos(rng);
    if (r1 > r2) std::swap(r1, r2);
    const double d1 = adaptive_denominator(r1, rho, c);
    const double d2 = adaptive_denominator(r2, rho, c);
    REQUIRE(d1 >= 1.0);
    REQUIRE(d2 >= d1);
    REQUIRE(sphere_denominator(r1) >= 1.0);
    REQUIRE(sphere_denominator(r2) >= sphere_denominator(r1));
  }
}
