#include <cmath>

#include <gtest/gtest.h>

#include "intersim/idm.hpp"

namespace intersim {
namespace {

TEST(IdmAcceleration, FreeFlowFixedPoint) {
  IdmParams p;
  EXPECT_EQ(idm_acceleration(p.v_desired, kInf, 0.0, p), 0.0);
  EXPECT_EQ(idm_acceleration(0.0, kInf, 0.0, p), p.accel_max);
}

TEST(IdmAcceleration, AtDesiredGap) {
  IdmParams p;
  p.v_desired = 15.0;
  p.accel_exp = 4.0;
  p.accel_max = 1.5;
  const double gap = desired_gap(5.0, 0.0, p);
  EXPECT_NEAR(idm_acceleration(5.0, gap, 0.0, p), -0.0185185185185185, 1e-12);
}

TEST(IdmAcceleration, RejectsBadInput) {
  IdmParams p;
  EXPECT_THROW(idm_acceleration(-1.0, 10.0, 0.0, p), InvalidInput);
  EXPECT_THROW(idm_acceleration(5.0, 0.0, 0.0, p), InvalidInput);
  EXPECT_THROW(idm_acceleration(5.0, -3.0, 0.0, p), InvalidInput);
  EXPECT_THROW(idm_acceleration(5.0, std::nan(""), 0.0, p), InvalidInput);
  EXPECT_THROW(idm_acceleration(kInf, 10.0, 0.0, p), InvalidInput);
  EXPECT_THROW(idm_acceleration(5.0, 10.0, std::nan(""), p), InvalidInput);
}

TEST(IdmAcceleration, MonotoneInGap) {
  IdmParams p;
  double prev = -kInf;
  for (double gap = 1.0; gap < 200.0; gap += 1.0) {
    const double a = idm_acceleration(10.0, gap, 0.0, p);
    EXPECT_GT(a, prev);
    prev = a;
  }
}

TEST(DesiredGap, Examples) {
  IdmParams p;
  p.gap_min = 2.0;
  p.headway_time = 1.5;
  EXPECT_EQ(desired_gap(0.0, 0.0, p), p.gap_min);
  EXPECT_DOUBLE_EQ(desired_gap(10.0, 0.0, p), 17.0);
  EXPECT_EQ(desired_gap(2.0, -50.0, p), p.gap_min);
}

TEST(Params, Validate) {
  IdmParams p;
  EXPECT_NO_THROW(p.validate());
  p.accel_exp = 0.5;
  EXPECT_THROW(p.validate(), InvalidInput);
  p = IdmParams{};
  p.decel_comf = 0.0;
  EXPECT_THROW(p.validate(), InvalidInput);
}

TEST(SpeedUpdate, Examples) {
  EXPECT_EQ(speed_update(10.0, 0.0, 0.5), 10.0);
  EXPECT_EQ(speed_update(1.0, -4.0, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(speed_update(10.0, 1.5, 0.5), 10.75);
  EXPECT_DOUBLE_EQ(step_displacement(10.0, 10.75, 0.5), 5.1875);
}

TEST(Equilibrium, IsStationary) {
  IdmParams p;
  for (double gap : {3.0, 8.0, 20.0, 45.0, 120.0}) {
    const double v = equilibrium_speed(gap, p);
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, p.v_desired);
    EXPECT_NEAR(idm_acceleration(v, gap, 0.0, p), 0.0, 1e-9) << "gap " << gap;
  }
  EXPECT_EQ(equilibrium_speed(p.gap_min, p), 0.0);
  EXPECT_EQ(equilibrium_speed(1.0, p), 0.0);
}

TEST(Ttc, Examples) {
  EXPECT_DOUBLE_EQ(ttc(20.0, 5.0), 4.0);
  EXPECT_EQ(ttc(20.0, 0.0), kInf);
  EXPECT_EQ(ttc(20.0, -1.0), kInf);
  EXPECT_EQ(ttc(0.0, 1.0), 0.0);
}

TEST(StoppingDistance, MatchesStepwiseBraking) {
  for (double v0 : {0.0, 0.7, 5.0, 13.3, 20.0}) {
    double v = v0, d = 0.0;
    while (v > 0.0) {
      const double next = speed_update(v, -4.5, 0.5);
      d += step_displacement(v, next, 0.5);
      v = next;
    }
    EXPECT_NEAR(discrete_stopping_distance(v0, 4.5, 0.5), d, 1e-12) << v0;
  }
}

}  // namespace
}  // namespace intersim
