#pragma once

#include "probeforce/contact.hpp"
#include "probeforce/control.hpp"
#include "probeforce/estimator.hpp"
#include "probeforce/probe.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace probeforce {

struct EnvironmentConfig {
  StiffnessField field = StiffnessField::uniform({1000.0, 0.0}, Region{-0.1, 0.2, -0.05, 0.05});
  SurfaceMotion surface;
  std::optional<HertzParams> hertz;  // replaces the spring-damper law when set
  bool unilateral = true;
};

// Straight lateral path from (x0, y0) to (x1, y1), starting at `start_time`.
struct TraverseConfig {
  double x0 = 0.0, y0 = 0.0;
  double x1 = 0.0, y1 = 0.0;
  double speed = 0.0;  // m/s
  double start_time = 0.0;

  Eigen::Vector2d position(double t) const;
};

struct ControllerConfig {
  bool enabled = true;
  std::optional<PiGains> gains;  // tuned for critical damping when absent
  double integral_limit = 50.0;
  bool adaptation = true;
  double fixed_stiffness = 3200.0;                // K_hat when adaptation is off
  std::optional<double> initial_stiffness;        // defaults to fixed_stiffness
  double stiffness_floor = 1.0;
  double slew_rate = 3.0;  // 1/s on ln K_hat_used; 0 disables
  double warmup = 0.5;     // s before live estimates are accepted
  std::size_t accept_after = 0;  // consecutive estimator updates; 0 means probe taps
  double natural_frequency = 300.0;
  double damping_ratio = 0.9;
  double delay = 0.1;
  bool lowpass = true;
  double lowpass_cutoff = 8.0;
  std::size_t lowpass_taps = kDefaultLowpassTaps;
  double hold_depth = 1e-3;  // fixed indentation when the controller is disabled
};

struct ArmConfig {
  bool enabled = true;
  std::vector<double> q0{0.0, 0.5, 0.0, -1.2, 0.0, 0.8, 0.0};
};

struct ScenarioConfig {
  std::string name = "custom";
  double duration = 1.0;
  double dt = 1e-3;
  EnvironmentConfig environment;
  bool probe_enabled = true;
  ProbeConfig probe;
  RlsConfig estimator;
  ControllerConfig controller;
  TraverseConfig traverse;
  ArmConfig arm;
  double force_reference = 5.0;  // N
  double noise = 0.02;           // N, sensor noise sigma
  std::uint64_t seed = 1;
  double force_floor = kDefaultForceFloor;
  double metrics_skip_fraction = 0.2;
  double abort_factor = 10.0;  // abort when F > abort_factor * F_d
  double transition_pad = 0.1;  // s around border crossings

  void validate() const;
};

namespace events {
inline constexpr std::uint32_t probe_invalid = 1u << 0;
inline constexpr std::uint32_t contact_lost = 1u << 1;
inline constexpr std::uint32_t covariance_reset = 1u << 2;
inline constexpr std::uint32_t compliance_clamped = 1u << 3;
inline constexpr std::uint32_t singular_jacobian = 1u << 4;
inline constexpr std::uint32_t normal_held = 1u << 5;
inline constexpr std::uint32_t unphysical_estimate = 1u << 6;
inline constexpr std::uint32_t aborted = 1u << 7;
inline constexpr std::uint32_t no_estimate = 1u << 8;
inline constexpr std::uint32_t joint_limit = 1u << 9;
}  // namespace events

struct TraceRecord {
  double t = 0.0;
  double x_e = 0.0;    // tool position along the inward normal
  double z_s = 0.0;    // surface position along the same axis
  double delta = 0.0;  // band-passed probe indentation
  double F_raw = 0.0;  // true contact force
  double F_filt = 0.0;  // force seen by the PI (filtered and delayed)
  double F_d = 0.0;
  double K_true = 0.0;
  double K_hat = 0.0;
  double D_hat = 0.0;
  double mu = 0.0;
  double residual = 0.0;
  std::uint32_t events = 0;
  double F_meas = 0.0;  // noisy sensor reading
  double e = 0.0;
  double dF = 0.0;
  double x_ref = 0.0;
  double K_hat_used = 0.0;
  double pos_x = 0.0;
  double pos_y = 0.0;
};

struct Metrics {
  double rms_force_error = 0.0;
  double max_overshoot = 0.0;
  std::optional<double> settling_time;
  std::optional<double> estimate_rel_error_rms;
};

enum class RunStatus { ok, unstable };

struct ScenarioResult {
  std::vector<TraceRecord> trace;
  std::vector<ProbeSample> probe_samples;
  Metrics metrics;
  RunStatus status = RunStatus::ok;
  std::string diagnostic;
  std::optional<PiGains> gains_used;
  std::map<std::string, double> extras;
};

/// Fixed-step world. Each tick: surface motion, traverse position,
/// environment force, sensor noise, filters and delay, probe sample,
/// estimator update, controller, inner loop, commanded joint pose.
class World {
 public:
  explicit World(ScenarioConfig cfg);

  TraceRecord step();
  double time() const { return static_cast<double>(tick_) * cfg_.dt; }
  std::size_t ticks() const { return tick_; }
  bool aborted() const { return aborted_; }
  const ScenarioConfig& config() const { return cfg_; }
  const std::optional<PiGains>& gains() const { return gains_; }
  const std::optional<ProbeSample>& last_probe_sample() const { return last_probe_; }
  const Eigen::Vector3d& normal() const { return normal_; }
  const Eigen::VectorXd& joints() const { return q_; }
  double arm_tracking_error() const { return arm_error_; }

 private:
  ScenarioConfig cfg_;
  std::size_t tick_ = 0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
  std::optional<PiGains> gains_;
  std::optional<ForceLoop> loop_;
  std::optional<Probe> probe_;
  std::optional<ImpedanceEstimator> estimator_;
  std::optional<StiffnessTracker> tracker_;
  std::size_t consecutive_updates_ = 0;
  std::size_t accept_after_ = 0;
  FirFilter normal_lp_[3];
  Eigen::Vector3d normal_ = Eigen::Vector3d::UnitZ();
  std::optional<ProbeSample> last_probe_;
  double x_ = 0.0, v_ = 0.0;  // tool position when the controller is disabled
  std::optional<SerialArm> arm_;
  Eigen::VectorXd q_;
  Eigen::Vector3d arm_origin_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d arm_target_ = Eigen::Vector3d::Zero();
  double arm_error_ = 0.0;
  bool aborted_ = false;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);

Metrics compute_metrics(const std::vector<TraceRecord>& trace, double skip_fraction = 0.2);

// True where the tool is inside a border's blend support, padded in time.
std::vector<bool> transition_mask(const ScenarioConfig& cfg, const std::vector<TraceRecord>& trace);
double rms_force_error_where(const std::vector<TraceRecord>& trace, const std::vector<bool>& keep);

ScenarioConfig static_slider_defaults();
ScenarioConfig pulsating_defaults();
ScenarioConfig estimation_defaults();

// Adds rms_outside_transitions and abort checks.
ScenarioResult run_static_slider(const ScenarioConfig& cfg);

struct Spectrum {
  std::vector<double> freqs;
  std::vector<double> amplitude;
  double peak_frequency = 0.0;
};
// Single-sided amplitude spectrum of the steady-window force error.
Spectrum force_error_spectrum(const std::vector<TraceRecord>& trace, double skip_fraction,
                              double f_lo, double f_hi, double df);

// Adds error spectrum peak and the amplitude at the surface frequency.
ScenarioResult run_pulsating(const ScenarioConfig& cfg);

struct PatchEstimate {
  std::size_t patch = 0;
  double true_stiffness = 0.0;
  double mean_estimate = 0.0;
  double rel_error = 0.0;
  double rel_std = 0.0;  // of K_hat in the window, relative to truth
  std::size_t samples = 0;
};

// Steady window: second half of the time spent beyond the blend support of
// every border of a patch.
std::vector<PatchEstimate> patch_estimates(const ScenarioConfig& cfg, const std::vector<TraceRecord>& trace);

ScenarioResult run_estimation_validation(const ScenarioConfig& cfg);

// Dispatch on cfg.name: static_slider, pulsating, estimation, else run_scenario.
ScenarioResult run_named(const ScenarioConfig& cfg);

}  // namespace probeforce
