#include "probeforce/control.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace probeforce {

void PiGains::validate() const {
  if (!(kp >= 0.0) || !(ki >= 0.0) || !(integral_limit > 0.0))
    throw std::invalid_argument("PI gains need kp >= 0, ki >= 0, integral_limit > 0");
}

double pi_step(const PiGains& g, PiState& state, double F_d, double F_meas, double dt) {
  if (!(dt > 0.0)) throw std::domain_error("pi_step: dt must be > 0");
  const double e = F_d - F_meas;
  const double raw = state.integral + e * dt;
  state.integral = std::clamp(raw, -g.integral_limit, g.integral_limit);
  state.saturated = state.integral != raw;
  return g.kp * e + g.ki * state.integral;
}

AdmittanceConfig AdmittanceConfig::from_estimate(double stiffness_estimate, double stiffness_floor) {
  if (!(stiffness_floor > 0.0)) throw std::invalid_argument("stiffness_floor must be > 0");
  AdmittanceConfig a;
  a.stiffness_floor = stiffness_floor;
  a.clamped = !(stiffness_estimate >= stiffness_floor);
  a.compliance = 1.0 / (a.clamped ? stiffness_floor : stiffness_estimate);
  return a;
}

double admittance_step(const AdmittanceConfig& a, double dF) { return a.compliance * dF; }

InnerLoopModel::InnerLoopModel(double natural_frequency, double damping_ratio)
    : w_(natural_frequency), zeta_(damping_ratio) {
  if (!(w_ > 0.0) || !(zeta_ > 0.0))
    throw std::invalid_argument("inner loop needs natural_frequency > 0 and damping_ratio > 0");
}

void InnerLoopModel::prepare(double dt) {
  if (dt == cached_dt_) return;
  if (!(dt > 0.0)) throw std::domain_error("inner_loop_step: dt must be > 0");
  if (dt * w_ >= 0.5) throw ResolutionError("inner_loop_step: dt * natural_frequency must be < 0.5");
  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  M(0, 1) = 1.0;
  M(1, 0) = -w_ * w_;
  M(1, 1) = -2.0 * zeta_ * w_;
  M(1, 2) = w_ * w_;
  const Eigen::Matrix3d E = (M * dt).exp();
  Phi_ = E.topLeftCorner<2, 2>();
  Gamma_ = E.topRightCorner<2, 1>();
  cached_dt_ = dt;
}

double InnerLoopModel::step(double x_ref, double dt) {
  prepare(dt);
  const Eigen::Vector2d s = Phi_ * Eigen::Vector2d(x_, v_) + Gamma_ * x_ref;
  x_ = s(0);
  v_ = s(1);
  return x_;
}

void InnerLoopModel::set_state(double x, double v) {
  x_ = x;
  v_ = v;
}

double inner_loop_step(InnerLoopModel& m, double x_ref, double dt) { return m.step(x_ref, dt); }

StiffnessTracker::StiffnessTracker(double initial, double stiffness_floor, double slew_rate)
    : k_(std::max(initial, stiffness_floor)), floor_(stiffness_floor), slew_(slew_rate) {
  if (!(stiffness_floor > 0.0)) throw std::invalid_argument("stiffness_floor must be > 0");
  if (slew_rate < 0.0) throw std::invalid_argument("slew_rate must be >= 0");
}

double StiffnessTracker::update(std::optional<double> candidate, double dt) {
  if (!candidate || !std::isfinite(*candidate)) return k_;
  const double target = std::max(*candidate, floor_);
  if (slew_ <= 0.0) {
    k_ = target;
    return k_;
  }
  const double lim = slew_ * dt;
  const double r = std::clamp(std::log(target / k_), -lim, lim);
  k_ *= std::exp(r);
  return k_;
}

SerialArm::SerialArm(std::vector<DhLink> links) : links_(std::move(links)) {
  if (links_.empty()) throw std::invalid_argument("serial arm needs at least one link");
}

SerialArm SerialArm::seven_dof() {
  constexpr double h = std::numbers::pi / 2.0;
  constexpr double deg = std::numbers::pi / 180.0;
  const double d[7] = {0.36, 0.0, 0.42, 0.0, 0.4, 0.0, 0.126};
  const double alpha[7] = {-h, h, h, -h, -h, h, 0.0};
  const double lim[7] = {170, 120, 170, 120, 170, 120, 175};
  std::vector<DhLink> links;
  for (int i = 0; i < 7; ++i) links.push_back({0.0, alpha[i], d[i], 0.0, -lim[i] * deg, lim[i] * deg});
  return SerialArm(std::move(links));
}

namespace {

Eigen::Matrix4d dh_transform(const DhLink& l, double q) {
  const double th = q + l.theta_offset;
  const double ct = std::cos(th), st = std::sin(th);
  const double ca = std::cos(l.alpha), sa = std::sin(l.alpha);
  Eigen::Matrix4d T;
  T << ct, -st * ca, st * sa, l.a * ct,
       st, ct * ca, -ct * sa, l.a * st,
       0.0, sa, ca, l.d,
       0.0, 0.0, 0.0, 1.0;
  return T;
}

}  // namespace

Eigen::Vector3d SerialArm::forward(const Eigen::VectorXd& q) const {
  if (static_cast<std::size_t>(q.size()) != links_.size())
    throw std::invalid_argument("joint vector size does not match arm");
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  for (std::size_t i = 0; i < links_.size(); ++i) T = T * dh_transform(links_[i], q(static_cast<Eigen::Index>(i)));
  return T.block<3, 1>(0, 3);
}

Eigen::MatrixXd SerialArm::jacobian(const Eigen::VectorXd& q) const {
  if (static_cast<std::size_t>(q.size()) != links_.size())
    throw std::invalid_argument("joint vector size does not match arm");
  const auto n = static_cast<Eigen::Index>(links_.size());
  std::vector<Eigen::Matrix4d> frames(links_.size() + 1, Eigen::Matrix4d::Identity());
  for (Eigen::Index i = 0; i < n; ++i)
    frames[static_cast<std::size_t>(i + 1)] = frames[static_cast<std::size_t>(i)] * dh_transform(links_[static_cast<std::size_t>(i)], q(i));
  const Eigen::Vector3d pe = frames.back().block<3, 1>(0, 3);
  Eigen::MatrixXd J(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& F = frames[static_cast<std::size_t>(i)];
    const Eigen::Vector3d z = F.block<3, 1>(0, 2);
    J.col(i) = z.cross(pe - F.block<3, 1>(0, 3));
  }
  return J;
}

bool SerialArm::within_limits(const Eigen::VectorXd& q) const {
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const double v = q(static_cast<Eigen::Index>(i));
    if (v < links_[i].q_min || v > links_[i].q_max) return false;
  }
  return true;
}

JointIncrement pseudo_inverse_solve(const Eigen::MatrixXd& J, const Eigen::VectorXd& dx) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  JointIncrement out;
  const double smax = s.size() ? s(0) : 0.0;
  const double smin = s.size() ? s(s.size() - 1) : 0.0;
  out.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  out.singular = !(out.condition_number <= kSingularCondition);
  Eigen::VectorXd inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (out.singular)
      inv(i) = s(i) / (s(i) * s(i) + kPinvDamping * kPinvDamping);
    else
      inv(i) = 1.0 / s(i);
  }
  out.dq = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * dx;
  return out;
}

JointIncrement joint_increment(const JointState& js, double C, const Eigen::Vector3d& dF) {
  return pseudo_inverse_solve(js.arm.jacobian(js.q), C * dF);
}

ForceLoop::ForceLoop(ForceLoopConfig cfg)
    : cfg_(std::move(cfg)), inner_(cfg_.natural_frequency, cfg_.damping_ratio) {
  cfg_.gains.validate();
  if (cfg_.delay < 0.0) throw std::invalid_argument("loop delay must be >= 0");
  double remaining = cfg_.delay;
  if (cfg_.lowpass) {
    lowpass_.emplace(design_lowpass(cfg_.lowpass_cutoff, cfg_.sample_rate, cfg_.lowpass_taps));
    remaining -= lowpass_->spec().group_delay();
  }
  if (std::llround(remaining * cfg_.sample_rate) >= 1) delay_.emplace(remaining, cfg_.sample_rate);
  inner_.set_state(cfg_.contact_height, 0.0);
}

LoopTick ForceLoop::step(double F_d, double force, double stiffness_estimate, double dt) {
  LoopTick tick;
  tick.F_raw = force;
  double m = force;
  if (lowpass_) m = lowpass_->step(m);
  if (delay_) m = delay_->step(m);
  tick.F_meas = m;
  tick.error = F_d - m;
  tick.dF = pi_step(cfg_.gains, pi_, F_d, m, dt);
  const auto adm = AdmittanceConfig::from_estimate(stiffness_estimate, cfg_.stiffness_floor);
  tick.compliance = adm.compliance;
  tick.compliance_clamped = adm.clamped;
  tick.x_ref = cfg_.contact_height + admittance_step(adm, tick.dF);
  tick.x = inner_.step(tick.x_ref, dt);
  return tick;
}

LoopTick closed_loop_step(ForceLoop& loop, double F_d, const ContactLaw& env,
                          SurfaceState surface, double noise, double stiffness_estimate,
                          double dt) {
  const double depth = loop.inner().position() - surface.position;
  const double rate = loop.inner().velocity() - surface.velocity;
  const double F = env.force(depth, rate);
  LoopTick tick = loop.step(F_d, F + noise, stiffness_estimate, dt);
  tick.F_raw = F;
  return tick;
}

}  // namespace probeforce
