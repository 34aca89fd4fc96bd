#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace dempref {

using Vector = Eigen::VectorXd;

// Static description of a deterministic discrete-time system.
struct SystemSpec {
  std::string name;
  int state_dim = 0;
  int control_dim = 0;
  int feature_dim = 0;
  int horizon = 1;            // planned controls per trajectory
  int steps_per_control = 1;  // substeps each planned control is held for
  double dt = 0.1;            // seconds per substep
  Vector control_lo;
  Vector control_hi;
  Vector start_state;

  int num_substeps() const { return horizon * steps_per_control; }
  // Length of the flattened control sequence [u_0, u_1, ..., u_{T-1}].
  int decision_dim() const { return horizon * control_dim; }

  // Throws InvalidArgument when an invariant does not hold.
  void validate() const;
};

// Per-step features are reported as (raw - shift) / scale.
struct FeatureNormalization {
  Vector shift;
  Vector scale;
};

// A rolled-out control sequence. states has num_substeps() + 1 entries;
// controls has horizon entries; phi caches the summed per-substep features.
struct Trajectory {
  std::vector<Vector> controls;
  std::vector<Vector> states;
  Vector phi;

  bool operator==(const Trajectory& other) const;
};

// Interface every domain implements. Implementations provide the raw
// transition and raw features; normalization constants are frozen at
// construction by calibrate_normalization().
class System {
 public:
  virtual ~System() = default;

  const SystemSpec& spec() const { return spec_; }
  const FeatureNormalization& normalization() const { return normalization_; }

  // f(x, u) without bounds or finiteness checks.
  virtual Vector transition(const Vector& state, const Vector& control) const = 0;
  // Unnormalized per-step features.
  virtual Vector raw_features(const Vector& state, const Vector& control) const = 0;
  virtual std::vector<std::string> feature_names() const = 0;

 protected:
  explicit System(SystemSpec spec);

  // Rolls out `num_trajectories` uniformly random in-bounds control
  // sequences and sets shift/scale to the mean/stddev of the raw per-step
  // features over every visited (state, control) pair.
  void calibrate_normalization(int num_trajectories, std::uint64_t seed);

 private:
  SystemSpec spec_;
  FeatureNormalization normalization_;
};

bool within_bounds(const SystemSpec& spec, const Vector& control);

// x' = f(x, u). Throws OutOfBounds if u leaves the (closed) control box,
// NonFinite if x or the result contains NaN/Inf.
Vector step(const System& system, const Vector& state, const Vector& control);

// Normalized per-step features phi(x, u). Throws NonFinite.
Vector features(const System& system, const Vector& state, const Vector& control);

// Simulates the controls from spec().start_state. Each planned control is
// held for steps_per_control substeps; phi = sum over substeps t of
// features(states[t], control active at t). Errors from step() are rethrown
// as RolloutError carrying the substep index.
Trajectory rollout(const System& system, std::span<const Vector> controls);
// Same, with controls flattened as [u_0..., u_1..., ...].
Trajectory rollout(const System& system, std::span<const double> flat_controls);
// Feature sum only; skips storing states. Used in optimizer inner loops.
Vector rollout_feature_sum(const System& system, std::span<const double> flat_controls);

std::vector<double> flatten_controls(const Trajectory& trajectory);
std::vector<Vector> unflatten_controls(const SystemSpec& spec, std::span<const double> flat);

// Re-simulates trajectory.controls and checks states bit-for-bit and phi
// within `phi_tolerance` per component.
bool replays(const System& system, const Trajectory& trajectory, double phi_tolerance = 1e-9);

// Domain registry.
std::shared_ptr<const System> make_system(std::string_view name);
std::vector<std::string> system_names();

}  // namespace dempref
