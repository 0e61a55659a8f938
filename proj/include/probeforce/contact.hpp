#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace probeforce {

struct HertzParams {
  double effective_radius = 0.01;  // m
  double young_modulus = 5e4;      // Pa
  double poisson_ratio = 0.5;

  void validate() const;
};

struct SpringDamperParams {
  double stiffness = 0.0;  // N/m
  double damping = 0.0;    // N s/m
};

// Axis-aligned rectangle in surface coordinates (m).
struct Region {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

struct Patch {
  Region region;
  SpringDamperParams params;
};

// Multiplicative scale 1 + depth*sin(2*pi*frequency*t) applied to every patch.
struct TemporalModulation {
  double depth = 0.0;
  double frequency = 0.0;

  double scale(double t) const;
};

/// Piecewise-constant impedance map with smoothed borders.
///
/// blend_width is the width of the equivalent linear ramp. The smoothstep
/// actually spans 1.5 * blend_width so its steepest slope equals
/// (K2 - K1) / blend_width, the same as a linear ramp of that width. Borders
/// are blended along x and y independently, one patch at a time.
class StiffnessField {
 public:
  StiffnessField() = default;
  StiffnessField(std::vector<Patch> patches, double blend_width,
                 std::optional<TemporalModulation> modulation = std::nullopt);

  static StiffnessField uniform(SpringDamperParams p, Region bounds);
  // Equal-width strips along x, spanning [x0, x0 + n*width] by [y_min, y_max].
  static StiffnessField strips(const std::vector<SpringDamperParams>& values, double x0,
                               double width, double y_min, double y_max,
                               double blend_width);
  // Linear stiffness ramp along x from k0 at x0 to k1 at x1 (flat outside).
  static StiffnessField ramp(double k0, double k1, double x0, double x1, Region bounds,
                             double damping = 0.0);

  const std::vector<Patch>& patches() const { return patches_; }
  double blend_width() const { return blend_width_; }
  const std::optional<TemporalModulation>& modulation() const { return modulation_; }
  Region bounds() const { return bounds_; }
  struct Ramp {
    double k0, k1, x0, x1, damping;
  };
  bool is_ramp() const { return ramp_.has_value(); }
  const std::optional<Ramp>& ramp_params() const { return ramp_; }

  SpringDamperParams sample(double x, double y, double t) const;

 private:
  const Patch* locate(double x, double y) const;

  std::vector<Patch> patches_;
  double blend_width_ = 0.0;
  std::optional<TemporalModulation> modulation_;
  std::optional<Ramp> ramp_;
  Region bounds_;
};

struct SurfaceMotion {
  double amplitude = 0.0;  // m
  double frequency = 0.0;  // Hz
  double rest_height = 0.0;
};

struct SurfaceState {
  double position;
  double velocity;
};

struct ContactState {
  Eigen::Vector3d end_effector_pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d end_effector_vel = Eigen::Vector3d::Zero();
  Eigen::Vector3d surface_pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};

// Force law acting along the contact normal. Unilateral by default.
struct ContactLaw {
  std::variant<SpringDamperParams, HertzParams> model = SpringDamperParams{};
  bool unilateral = true;

  double force(double depth, double depth_rate) const;
  // Local stiffness dF/d(depth) at the given depth.
  double stiffness(double depth) const;
};

double hertz_force(const HertzParams& p, double depth);
double hertz_tangent_stiffness(const HertzParams& p, double depth);
double spring_damper_force(const SpringDamperParams& p, double depth, double depth_rate);
SpringDamperParams field_sample(const StiffnessField& f, double x, double y, double t);
SurfaceState surface_state(const SurfaceMotion& m, double t);

inline constexpr double kDefaultForceFloor = 0.05;  // N

// Direction points from the environment into the end-effector. Returns
// nullopt below the floor; callers then keep their last valid normal.
std::optional<Eigen::Vector3d> estimate_normal(const Eigen::Vector3d& filtered_force,
                                               double force_floor = kDefaultForceFloor);

double probe_scale(double estimated, double tool_radius, double probe_radius);

}  // namespace probeforce
