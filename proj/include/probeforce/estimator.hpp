#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

namespace probeforce {

struct RegressorSample {
  double y = 0.0;                               // F_k + F_{k-1}
  Eigen::Vector2d phi = Eigen::Vector2d::Zero();  // [d_k, d_{k-1}]
};

struct RlsConfig {
  Eigen::Vector2d theta0 = Eigen::Vector2d::Zero();
  double p0 = 1e9;      // P0 = p0 * I
  double g = 1e7;       // covariance reset gain
  double g_max = 1e12;  // upper bound on g
  Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
  double innovation_scale = 1.0;  // 1/N, multiplies |e| inside tanh
  double sample_period = 1e-3;    // s
  bool adaptive_forgetting = true;
  double fixed_lambda = 0.999;  // used when adaptive_forgetting is false

  void validate() const;
};

struct RlsState {
  Eigen::Vector2d theta = Eigen::Vector2d::Zero();  // [A, B]
  Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
  double mu = 0.0;
  double g = 0.0;
  Eigen::Matrix2d J = Eigen::Matrix2d::Identity();
  double T = 1e-3;
  double residual = 0.0;  // last innovation
  bool reset_event = false;

  static RlsState initial(const RlsConfig& c);
};

struct ImpedanceEstimate {
  double stiffness = 0.0;
  double damping = 0.0;
  double residual = 0.0;
  double timestamp = 0.0;
  bool physical = true;
};

std::optional<RegressorSample> make_regressor(double F_k, double F_km1, double d_k, double d_km1);

// Adaptive-forgetting update with covariance resetting:
//   Pbar = (P^-1 + phi phi^T)^-1,  theta += Pbar phi e,
//   mu = tanh(s_e |e|),            P = mu Pbar + g J.
RlsState rls_update(const RlsState& s, const RegressorSample& sample,
                    const RlsConfig& cfg = RlsConfig{});

// Classical exponential forgetting, P = Pbar / lambda. Baseline only.
RlsState rls_update_fixed(const RlsState& s, const RegressorSample& sample, double lambda);

ImpedanceEstimate recover_impedance(const Eigen::Vector2d& theta, double T);

// Inverse of recover_impedance: A = (2D + TK)/T, B = (-2D + TK)/T.
Eigen::Vector2d impedance_to_theta(double K, double D, double T);

// Least squares over the samples. Throws SingularDesign if rank < 2.
Eigen::Vector2d batch_ls(const std::vector<RegressorSample>& samples);

struct SingularDesign : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Streams (t, delta, force, valid) samples into the RLS. Consecutive valid
/// samples form one regressor; an invalid sample breaks the pairing.
class ImpedanceEstimator {
 public:
  explicit ImpedanceEstimator(RlsConfig cfg = {}, double scale = 1.0);

  std::optional<ImpedanceEstimate> update(double t, double displacement, double force, bool valid);

  const RlsState& state() const { return state_; }
  const RlsConfig& config() const { return cfg_; }
  std::optional<ImpedanceEstimate> latest() const { return latest_; }
  std::size_t updates() const { return updates_; }
  std::size_t resets() const { return resets_; }

 private:
  RlsConfig cfg_;
  double scale_;
  RlsState state_;
  std::optional<std::pair<double, double>> prev_;  // (displacement, force)
  std::optional<ImpedanceEstimate> latest_;
  std::size_t updates_ = 0;
  std::size_t resets_ = 0;
};

}  // namespace probeforce
