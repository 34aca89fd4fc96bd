#pragma once

#include <array>
#include <memory>

#include "dempref/dynamics.hpp"

namespace dempref {

// Highway driving domain.
//
// State (6): x lateral position, y longitudinal position, theta heading
// (0 = along the road), v speed, and the other vehicle's pose (x_o, y_o).
// Control (2): steering s and acceleration a, both in [-1, 1].
//
// Forward Euler unicycle with friction, all updates using the pre-step state:
//   x += v sin(theta) dt,   y += v cos(theta) dt,
//   theta += v s kappa dt,  v += (a - alpha v) dt,
//   y_o += other_speed dt.
//
// Raw features, in order:
//   lane    = exp(-30 d^2), d = distance to the nearest lane center   in (0, 1]
//   speed   = -(v - 1)^2                                              in [-(|v|max + 1)^2, 0]
//   heading = cos(theta)                                              in [-1, 1]
//   avoid   = -exp(-(7 dx^2 + 3 dy^2)) w.r.t. the other vehicle       in [-1, 0]
struct DriverParams {
  double steering_gain = 2.0;
  double friction = 0.1;
  std::array<double, 3> lane_centers{-0.17, 0.0, 0.17};
  double lane_width = 0.17;
  double other_speed = 0.8;
  int horizon = 5;
  int steps_per_control = 10;
  double dt = 0.1;
  // x, y, theta, v, x_o, y_o
  std::array<double, 6> start_state{0.0, 0.0, 0.0, 0.8, -0.17, 0.3};
  int calibration_trajectories = 1000;
  std::uint64_t calibration_seed = 0x5eed0001;
};

class DriverSystem final : public System {
 public:
  enum StateIndex { kX = 0, kY, kHeading, kSpeed, kOtherX, kOtherY };
  enum FeatureIndex { kLane = 0, kSpeedFeature, kHeadingFeature, kAvoid };

  explicit DriverSystem(DriverParams params = {});

  Vector transition(const Vector& state, const Vector& control) const override;
  Vector raw_features(const Vector& state, const Vector& control) const override;
  std::vector<std::string> feature_names() const override;

  const DriverParams& params() const { return params_; }

  // Upper bound on |v| reachable from the start state within one rollout.
  double max_speed_bound() const;

 private:
  static SystemSpec make_spec(const DriverParams& params);

  DriverParams params_;
};

std::shared_ptr<const DriverSystem> make_driver(DriverParams params = {});

}  // namespace dempref
