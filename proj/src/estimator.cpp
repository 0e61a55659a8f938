#include "probeforce/estimator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace probeforce {

namespace {

bool positive_definite(const Eigen::Matrix2d& P) {
  return P.allFinite() && P(0, 0) > 0.0 && P.determinant() > 0.0;
}

Eigen::Matrix2d symmetrize(const Eigen::Matrix2d& P) { return 0.5 * (P + P.transpose()); }

// (P^-1 + phi phi^T)^-1 via Sherman-Morrison; avoids inverting a large P.
Eigen::Matrix2d information_update(const Eigen::Matrix2d& P, const Eigen::Vector2d& phi) {
  const Eigen::Vector2d Pphi = P * phi;
  return symmetrize(P - Pphi * Pphi.transpose() / (1.0 + phi.dot(Pphi)));
}

}  // namespace

void RlsConfig::validate() const {
  if (!(p0 > 0.0)) throw std::invalid_argument("estimator.p0 must be > 0");
  if (!(g > 0.0) || g > g_max) throw std::invalid_argument("estimator.g must be in (0, g_max]");
  if (!(sample_period > 0.0)) throw std::invalid_argument("estimator sample period must be > 0");
  if (!positive_definite(symmetrize(J))) throw std::invalid_argument("estimator.J must be positive definite");
  if (!(innovation_scale > 0.0)) throw std::invalid_argument("estimator.innovation_scale must be > 0");
  if (!(fixed_lambda > 0.0) || fixed_lambda > 1.0)
    throw std::invalid_argument("estimator.fixed_lambda must be in (0, 1]");
}

RlsState RlsState::initial(const RlsConfig& c) {
  c.validate();
  RlsState s;
  s.theta = c.theta0;
  s.P = c.p0 * Eigen::Matrix2d::Identity();
  s.g = c.g;
  s.J = symmetrize(c.J);
  s.T = c.sample_period;
  return s;
}

std::optional<RegressorSample> make_regressor(double F_k, double F_km1, double d_k, double d_km1) {
  if (!std::isfinite(F_k) || !std::isfinite(F_km1) || !std::isfinite(d_k) || !std::isfinite(d_km1))
    return std::nullopt;
  return RegressorSample{F_k + F_km1, Eigen::Vector2d(d_k, d_km1)};
}

RlsState rls_update(const RlsState& s, const RegressorSample& sample, const RlsConfig& cfg) {
  RlsState n = s;
  n.reset_event = false;
  const Eigen::Vector2d& phi = sample.phi;
  const double e = sample.y - phi.dot(s.theta);
  const Eigen::Matrix2d Pbar = information_update(s.P, phi);
  n.theta = s.theta + Pbar * phi * e;
  // tanh saturates to exactly 1.0 in double precision for large arguments.
  n.mu = std::min(std::tanh(cfg.innovation_scale * std::abs(e)), std::nextafter(1.0, 0.0));
  n.residual = e;
  n.P = symmetrize(n.mu * Pbar + s.g * s.J);
  if (!positive_definite(n.P) || !n.theta.allFinite()) {
    n.P = cfg.p0 * Eigen::Matrix2d::Identity();
    if (!n.theta.allFinite()) n.theta = cfg.theta0;
    n.reset_event = true;
  }
  return n;
}

RlsState rls_update_fixed(const RlsState& s, const RegressorSample& sample, double lambda) {
  RlsState n = s;
  n.reset_event = false;
  const double e = sample.y - sample.phi.dot(s.theta);
  const Eigen::Matrix2d Pbar = information_update(s.P, sample.phi);
  n.theta = s.theta + Pbar * sample.phi * e;
  n.mu = lambda;
  n.residual = e;
  n.P = symmetrize(Pbar / lambda);
  return n;
}

ImpedanceEstimate recover_impedance(const Eigen::Vector2d& theta, double T) {
  if (!(T > 0.0)) throw std::domain_error("recover_impedance: T must be > 0");
  ImpedanceEstimate est;
  est.stiffness = 0.5 * (theta(0) + theta(1));
  est.damping = 0.25 * T * (theta(0) - theta(1));
  est.physical = est.stiffness >= 0.0 && est.damping >= 0.0;
  return est;
}

Eigen::Vector2d impedance_to_theta(double K, double D, double T) {
  return {(2.0 * D + T * K) / T, (-2.0 * D + T * K) / T};
}

Eigen::Vector2d batch_ls(const std::vector<RegressorSample>& samples) {
  if (samples.size() < 2) throw SingularDesign("batch_ls needs at least two samples");
  Eigen::MatrixX2d A(samples.size(), 2);
  Eigen::VectorXd y(samples.size());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    A.row(i) = samples[static_cast<std::size_t>(i)].phi.transpose();
    y(i) = samples[static_cast<std::size_t>(i)].y;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixX2d> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2) throw SingularDesign("batch_ls: regressor design is rank deficient");
  return qr.solve(y);
}

ImpedanceEstimator::ImpedanceEstimator(RlsConfig cfg, double scale)
    : cfg_(std::move(cfg)), scale_(scale), state_(RlsState::initial(cfg_)) {}

std::optional<ImpedanceEstimate> ImpedanceEstimator::update(double t, double displacement,
                                                            double force, bool valid) {
  if (!valid || !std::isfinite(displacement) || !std::isfinite(force)) {
    prev_.reset();
    return std::nullopt;
  }
  std::optional<ImpedanceEstimate> out;
  if (prev_) {
    if (auto r = make_regressor(force, prev_->second, displacement, prev_->first)) {
      state_ = cfg_.adaptive_forgetting ? rls_update(state_, *r, cfg_)
                                        : rls_update_fixed(state_, *r, cfg_.fixed_lambda);
      if (state_.reset_event) ++resets_;
      ++updates_;
      auto est = recover_impedance(state_.theta, cfg_.sample_period);
      est.stiffness *= scale_;
      est.damping *= scale_;
      est.residual = state_.residual;
      est.timestamp = t;
      latest_ = est;
      out = est;
    }
  }
  prev_ = std::make_pair(displacement, force);
  return out;
}

}  // namespace probeforce
