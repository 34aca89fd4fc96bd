#include "dempref/driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dempref {

SystemSpec DriverSystem::make_spec(const DriverParams& params) {
  SystemSpec spec;
  spec.name = "driver";
  spec.state_dim = 6;
  spec.control_dim = 2;
  spec.feature_dim = 4;
  spec.horizon = params.horizon;
  spec.steps_per_control = params.steps_per_control;
  spec.dt = params.dt;
  spec.control_lo = Vector::Constant(2, -1.0);
  spec.control_hi = Vector::Constant(2, 1.0);
  spec.start_state = Eigen::Map<const Vector>(params.start_state.data(), 6);
  return spec;
}

DriverSystem::DriverSystem(DriverParams params) : System(make_spec(params)), params_(params) {
  if (params_.calibration_trajectories > 0)
    calibrate_normalization(params_.calibration_trajectories, params_.calibration_seed);
}

Vector DriverSystem::transition(const Vector& state, const Vector& control) const {
  const double dt = params_.dt;
  const double heading = state[kHeading];
  const double v = state[kSpeed];
  Vector next = state;
  next[kX] += v * std::sin(heading) * dt;
  next[kY] += v * std::cos(heading) * dt;
  next[kHeading] += v * control[0] * params_.steering_gain * dt;
  next[kSpeed] += (control[1] - params_.friction * v) * dt;
  next[kOtherY] += params_.other_speed * dt;
  return next;
}

Vector DriverSystem::raw_features(const Vector& state, const Vector& /*control*/) const {
  double d = std::numeric_limits<double>::infinity();
  for (double center : params_.lane_centers) d = std::min(d, std::abs(state[kX] - center));
  const double dx = state[kX] - state[kOtherX];
  const double dy = state[kY] - state[kOtherY];
  Vector f(4);
  f[kLane] = std::exp(-30.0 * d * d);
  f[kSpeedFeature] = -(state[kSpeed] - 1.0) * (state[kSpeed] - 1.0);
  f[kHeadingFeature] = std::cos(state[kHeading]);
  f[kAvoid] = -std::exp(-(7.0 * dx * dx + 3.0 * dy * dy));
  return f;
}

std::vector<std::string> DriverSystem::feature_names() const { return {"lane", "speed", "heading", "avoid"}; }

double DriverSystem::max_speed_bound() const {
  // |a| <= 1 and friction only pulls v toward zero, so |v| grows by at most dt per substep.
  return std::abs(params_.start_state[kSpeed]) + spec().num_substeps() * params_.dt;
}

std::shared_ptr<const DriverSystem> make_driver(DriverParams params) {
  return std::make_shared<const DriverSystem>(params);
}

}  // namespace dempref
