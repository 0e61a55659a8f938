#pragma once

#include "probeforce/contact.hpp"
#include "probeforce/signal.hpp"

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

namespace probeforce {

struct PiGains {
  double kp = 0.0;
  double ki = 0.0;
  double integral_limit = 50.0;  // N s

  void validate() const;
};

struct PiState {
  double integral = 0.0;
  bool saturated = false;
};

// e = F_d - F_meas, integral clamped to +-integral_limit, dF = kp e + ki integral.
double pi_step(const PiGains& g, PiState& state, double F_d, double F_meas, double dt);

struct AdmittanceConfig {
  double compliance = 1e-3;     // m/N
  double stiffness_floor = 1.0;  // N/m
  bool clamped = false;

  static AdmittanceConfig from_estimate(double stiffness_estimate, double stiffness_floor = 1.0);
};

double admittance_step(const AdmittanceConfig& a, double dF);

struct ResolutionError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Second-order position loop x'' = w^2 (x_ref - x) - 2 zeta w x'.
/// Discretised exactly under a zero-order hold on x_ref; the transition
/// matrices are cached per dt.
class InnerLoopModel {
 public:
  InnerLoopModel(double natural_frequency = 300.0, double damping_ratio = 0.9);

  double step(double x_ref, double dt);
  void set_state(double x, double v);
  double position() const { return x_; }
  double velocity() const { return v_; }
  double natural_frequency() const { return w_; }
  double damping_ratio() const { return zeta_; }

 private:
  void prepare(double dt);

  double w_, zeta_;
  double x_ = 0.0, v_ = 0.0;
  double cached_dt_ = -1.0;
  Eigen::Matrix2d Phi_;
  Eigen::Vector2d Gamma_;
};

double inner_loop_step(InnerLoopModel& m, double x_ref, double dt);

/// Rate-limited stiffness used for the compliance. Changes are limited in
/// log space (|d ln K / dt| <= slew_rate) and floored at stiffness_floor.
class StiffnessTracker {
 public:
  StiffnessTracker(double initial, double stiffness_floor = 1.0, double slew_rate = 3.0);

  double update(std::optional<double> candidate, double dt);
  double value() const { return k_; }

 private:
  double k_, floor_, slew_;
};

struct DhLink {
  double a = 0.0, alpha = 0.0, d = 0.0, theta_offset = 0.0;
  double q_min = -3.0, q_max = 3.0;
};

/// Serial arm with standard DH links; only kinematics are modelled.
class SerialArm {
 public:
  explicit SerialArm(std::vector<DhLink> links);
  // Seven-joint arm with iiwa-like DH parameters and joint limits.
  static SerialArm seven_dof();

  std::size_t dof() const { return links_.size(); }
  const std::vector<DhLink>& links() const { return links_; }
  Eigen::Vector3d forward(const Eigen::VectorXd& q) const;
  // Translational 3 x n Jacobian.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& q) const;
  bool within_limits(const Eigen::VectorXd& q) const;

 private:
  std::vector<DhLink> links_;
};

struct JointState {
  Eigen::VectorXd q;
  SerialArm arm = SerialArm::seven_dof();
};

struct JointIncrement {
  Eigen::VectorXd dq;
  double condition_number = 1.0;
  bool singular = false;  // damped fallback used
};

inline constexpr double kSingularCondition = 1e8;
inline constexpr double kPinvDamping = 1e-6;

JointIncrement pseudo_inverse_solve(const Eigen::MatrixXd& J, const Eigen::VectorXd& dx);
JointIncrement joint_increment(const JointState& js, double C, const Eigen::Vector3d& dF);

struct ForceLoopConfig {
  PiGains gains;
  double natural_frequency = 300.0;
  double damping_ratio = 0.9;
  double delay = 0.1;          // lumped measurement delay T_d
  bool lowpass = true;         // lowpass counts towards T_d by its group delay
  double lowpass_cutoff = 8.0;
  std::size_t lowpass_taps = kDefaultLowpassTaps;
  double sample_rate = 1000.0;
  double stiffness_floor = 1.0;
  double contact_height = 0.0;  // x at which contact begins (surface rest)
};

struct LoopTick {
  double F_raw = 0.0;
  double F_meas = 0.0;  // filtered and delayed, as seen by the PI
  double error = 0.0;
  double dF = 0.0;
  double x_ref = 0.0;
  double x = 0.0;  // inner-loop position after the tick
  double compliance = 0.0;
  bool compliance_clamped = false;
};

/// One-DOF force loop along the contact normal: measurement path (lowpass
/// plus transport delay) -> PI -> admittance -> inner position loop.
/// Positions increase into the surface; depth = x - surface position.
class ForceLoop {
 public:
  explicit ForceLoop(ForceLoopConfig cfg);

  // `force` is the sensor reading at the current position.
  LoopTick step(double F_d, double force, double stiffness_estimate, double dt);

  const ForceLoopConfig& config() const { return cfg_; }
  InnerLoopModel& inner() { return inner_; }
  const InnerLoopModel& inner() const { return inner_; }
  const PiState& pi_state() const { return pi_; }
  std::size_t transport_delay_samples() const { return delay_ ? delay_->length() : 0; }

 private:
  ForceLoopConfig cfg_;
  std::optional<FirFilter> lowpass_;
  std::optional<DelayLine> delay_;
  PiState pi_;
  InnerLoopModel inner_;
};

// Reads the environment at the loop's current position and advances one tick.
LoopTick closed_loop_step(ForceLoop& loop, double F_d, const ContactLaw& env,
                          SurfaceState surface, double noise, double stiffness_estimate,
                          double dt);

}  // namespace probeforce
