#include "dempref/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "dempref/driver.hpp"
#include "dempref/errors.hpp"
#include "dempref/random.hpp"

namespace dempref {

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

std::string describe(const Vector& v) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ")";
  return os.str();
}

}  // namespace

void SystemSpec::validate() const {
  if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
  if (steps_per_control < 1) throw InvalidArgument("steps_per_control must be >= 1");
  if (feature_dim < 1) throw InvalidArgument("feature_dim must be >= 1");
  if (state_dim < 1 || control_dim < 1) throw InvalidArgument("state/control dims must be >= 1");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be > 0");
  if (control_lo.size() != control_dim || control_hi.size() != control_dim)
    throw InvalidArgument("control bounds do not match control_dim");
  for (int i = 0; i < control_dim; ++i)
    if (!(control_lo[i] < control_hi[i])) throw InvalidArgument("control bound lo must be < hi");
  if (start_state.size() != state_dim) throw InvalidArgument("start_state does not match state_dim");
}

bool Trajectory::operator==(const Trajectory& other) const {
  auto same = [](const std::vector<Vector>& a, const std::vector<Vector>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].size() != b[i].size() || a[i] != b[i]) return false;
    return true;
  };
  return same(controls, other.controls) && same(states, other.states) &&
         phi.size() == other.phi.size() && phi == other.phi;
}

System::System(SystemSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  normalization_.shift = Vector::Zero(spec_.feature_dim);
  normalization_.scale = Vector::Ones(spec_.feature_dim);
}

void System::calibrate_normalization(int num_trajectories, std::uint64_t seed) {
  const int k = spec_.feature_dim;
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Vector sum = Vector::Zero(k);
  Vector sum_sq = Vector::Zero(k);
  long count = 0;
  Vector control(spec_.control_dim);
  for (int n = 0; n < num_trajectories; ++n) {
    Vector state = spec_.start_state;
    for (int t = 0; t < spec_.num_substeps(); ++t) {
      if (t % spec_.steps_per_control == 0) {
        for (int j = 0; j < spec_.control_dim; ++j)
          control[j] = spec_.control_lo[j] + unit(rng) * (spec_.control_hi[j] - spec_.control_lo[j]);
      }
      const Vector f = raw_features(state, control);
      sum += f;
      sum_sq += f.cwiseProduct(f);
      ++count;
      state = transition(state, control);
    }
  }
  const Vector mean = sum / static_cast<double>(count);
  Vector var = sum_sq / static_cast<double>(count) - mean.cwiseProduct(mean);
  normalization_.shift = mean;
  normalization_.scale = Vector(k);
  for (int i = 0; i < k; ++i) {
    const double sd = std::sqrt(std::max(var[i], 0.0));
    normalization_.scale[i] = sd > 1e-12 ? sd : 1.0;
  }
}

bool within_bounds(const SystemSpec& spec, const Vector& control) {
  if (control.size() != spec.control_dim) return false;
  for (int i = 0; i < spec.control_dim; ++i)
    if (!(control[i] >= spec.control_lo[i] && control[i] <= spec.control_hi[i])) return false;
  return true;
}

Vector step(const System& system, const Vector& state, const Vector& control) {
  const SystemSpec& spec = system.spec();
  if (state.size() != spec.state_dim)
    throw DimensionMismatch("state has " + std::to_string(state.size()) + " components, expected " +
                            std::to_string(spec.state_dim));
  if (control.size() != spec.control_dim)
    throw DimensionMismatch("control has " + std::to_string(control.size()) + " components, expected " +
                            std::to_string(spec.control_dim));
  if (!within_bounds(spec, control)) throw OutOfBounds("control " + describe(control) + " outside the control box");
  if (!all_finite(state)) throw NonFinite("state " + describe(state) + " is not finite");
  Vector next = system.transition(state, control);
  if (!all_finite(next)) throw NonFinite("transition produced non-finite state " + describe(next));
  return next;
}

Vector features(const System& system, const Vector& state, const Vector& control) {
  const FeatureNormalization& norm = system.normalization();
  Vector f = system.raw_features(state, control);
  if (!all_finite(f)) throw NonFinite("features non-finite at state " + describe(state));
  return (f - norm.shift).cwiseQuotient(norm.scale);
}

Trajectory rollout(const System& system, std::span<const Vector> controls) {
  const SystemSpec& spec = system.spec();
  if (static_cast<int>(controls.size()) != spec.horizon)
    throw DimensionMismatch("expected " + std::to_string(spec.horizon) + " controls, got " +
                            std::to_string(controls.size()));
  Trajectory traj;
  traj.controls.assign(controls.begin(), controls.end());
  traj.states.reserve(spec.num_substeps() + 1);
  traj.states.push_back(spec.start_state);
  traj.phi = Vector::Zero(spec.feature_dim);
  for (int t = 0; t < spec.num_substeps(); ++t) {
    const Vector& u = controls[t / spec.steps_per_control];
    const Vector& x = traj.states.back();
    try {
      Vector next = step(system, x, u);
      traj.phi += features(system, x, u);
      traj.states.push_back(std::move(next));
    } catch (const Error& e) {
      throw RolloutError(t, e.what());
    }
  }
  return traj;
}

Trajectory rollout(const System& system, std::span<const double> flat_controls) {
  const auto controls = unflatten_controls(system.spec(), flat_controls);
  return rollout(system, std::span<const Vector>(controls));
}

Vector rollout_feature_sum(const System& system, std::span<const double> flat_controls) {
  const SystemSpec& spec = system.spec();
  if (static_cast<int>(flat_controls.size()) != spec.decision_dim())
    throw DimensionMismatch("flat control sequence has wrong length");
  Vector phi = Vector::Zero(spec.feature_dim);
  Vector x = spec.start_state;
  Vector u(spec.control_dim);
  for (int t = 0; t < spec.num_substeps(); ++t) {
    if (t % spec.steps_per_control == 0) {
      const int c = t / spec.steps_per_control;
      for (int j = 0; j < spec.control_dim; ++j) u[j] = flat_controls[c * spec.control_dim + j];
    }
    try {
      Vector next = step(system, x, u);
      phi += features(system, x, u);
      x = std::move(next);
    } catch (const Error& e) {
      throw RolloutError(t, e.what());
    }
  }
  return phi;
}

std::vector<double> flatten_controls(const Trajectory& trajectory) {
  std::vector<double> flat;
  for (const Vector& u : trajectory.controls) flat.insert(flat.end(), u.data(), u.data() + u.size());
  return flat;
}

std::vector<Vector> unflatten_controls(const SystemSpec& spec, std::span<const double> flat) {
  if (static_cast<int>(flat.size()) != spec.decision_dim())
    throw DimensionMismatch("flat control sequence has " + std::to_string(flat.size()) +
                            " entries, expected " + std::to_string(spec.decision_dim()));
  std::vector<Vector> controls(spec.horizon, Vector(spec.control_dim));
  for (int c = 0; c < spec.horizon; ++c)
    for (int j = 0; j < spec.control_dim; ++j) controls[c][j] = flat[c * spec.control_dim + j];
  return controls;
}

bool replays(const System& system, const Trajectory& trajectory, double phi_tolerance) {
  if (trajectory.states.empty() || trajectory.states.front() != system.spec().start_state) return false;
  Trajectory again;
  try {
    again = rollout(system, std::span<const Vector>(trajectory.controls));
  } catch (const Error&) {
    return false;
  }
  if (again.states.size() != trajectory.states.size()) return false;
  for (std::size_t i = 0; i < again.states.size(); ++i)
    if (again.states[i] != trajectory.states[i]) return false;
  if (again.phi.size() != trajectory.phi.size()) return false;
  return ((again.phi - trajectory.phi).cwiseAbs().array() <= phi_tolerance).all();
}

std::shared_ptr<const System> make_system(std::string_view name) {
  if (name == "driver") {
    static const std::shared_ptr<const System> driver = make_driver();
    return driver;
  }
  std::string valid;
  for (const auto& n : system_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw UnknownDomain("unknown domain '" + std::string(name) + "'; valid domains: " + valid);
}

std::vector<std::string> system_names() { return {"driver"}; }

}  // namespace dempref
