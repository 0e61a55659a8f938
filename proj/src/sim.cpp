#include "probeforce/sim.hpp"

#include "probeforce/stability.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace probeforce {

Eigen::Vector2d TraverseConfig::position(double t) const {
  const Eigen::Vector2d a(x0, y0), b(x1, y1);
  const double len = (b - a).norm();
  if (len == 0.0 || speed <= 0.0) return a;
  const double s = std::clamp(speed * (t - start_time), 0.0, len);
  return a + (b - a) * (s / len);
}

void ScenarioConfig::validate() const {
  if (!(duration > 0.0)) throw std::invalid_argument("duration must be > 0");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (probe_enabled) {
    probe.validate();
    if (dt > 1.0 / (10.0 * probe.frequency))
      throw std::invalid_argument("dt must be <= 1/(10 * probe.frequency) when the probe is enabled");
  }
  if (environment.surface.amplitude < 0.0 || environment.surface.frequency < 0.0)
    throw std::invalid_argument("surface amplitude and frequency must be >= 0");
  if (environment.hertz) environment.hertz->validate();
  if (traverse.speed < 0.0) throw std::invalid_argument("traverse.speed must be >= 0");
  const Region b = environment.field.bounds();
  if (!b.contains(traverse.x0, traverse.y0) || !b.contains(traverse.x1, traverse.y1))
    throw std::invalid_argument("traverse endpoints must lie inside the stiffness field");
  if (noise < 0.0) throw std::invalid_argument("noise must be >= 0");
  if (metrics_skip_fraction < 0.0 || metrics_skip_fraction >= 1.0)
    throw std::invalid_argument("metrics_skip_fraction must be in [0, 1)");
  if (controller.enabled) {
    if (dt * controller.natural_frequency >= 0.5)
      throw std::invalid_argument("dt * controller.natural_frequency must be < 0.5");
    if (controller.gains) controller.gains->validate();
    if (!(controller.stiffness_floor > 0.0)) throw std::invalid_argument("stiffness_floor must be > 0");
    if (!(controller.fixed_stiffness > 0.0)) throw std::invalid_argument("fixed_stiffness must be > 0");
  }
  estimator.validate();
  if (arm.enabled && arm.q0.size() != 7) throw std::invalid_argument("arm.q0 must have 7 entries");
}

World::World(ScenarioConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  cfg_.validate();
  const double fs = 1.0 / cfg_.dt;
  const auto& cc = cfg_.controller;
  if (cc.enabled) {
    gains_ = cc.gains ? *cc.gains
                      : tune_pi_critical(cc.natural_frequency, cc.damping_ratio, cc.delay,
                                         cc.integral_limit).gains;
    ForceLoopConfig lc;
    lc.gains = *gains_;
    lc.natural_frequency = cc.natural_frequency;
    lc.damping_ratio = cc.damping_ratio;
    lc.delay = cc.delay;
    lc.lowpass = cc.lowpass;
    lc.lowpass_cutoff = cc.lowpass_cutoff;
    lc.lowpass_taps = cc.lowpass_taps;
    lc.sample_rate = fs;
    lc.stiffness_floor = cc.stiffness_floor;
    lc.contact_height = cfg_.environment.surface.rest_height;
    loop_.emplace(lc);
    tracker_.emplace(cc.initial_stiffness.value_or(cc.fixed_stiffness), cc.stiffness_floor, cc.slew_rate);
  } else {
    x_ = cfg_.environment.surface.rest_height + cc.hold_depth;
  }
  if (cfg_.probe_enabled) {
    ProbeConfig pc = cfg_.probe;
    pc.sample_rate = fs;
    probe_.emplace(pc);
    RlsConfig rc = cfg_.estimator;
    rc.sample_period = cfg_.dt;
    estimator_.emplace(rc, probe_->stiffness_scale());
    accept_after_ = cc.accept_after ? cc.accept_after : pc.taps;
  }
  for (auto& f : normal_lp_) f = FirFilter(design_lowpass(8.0, fs, kDefaultLowpassTaps));
  if (cfg_.arm.enabled) {
    arm_.emplace(SerialArm::seven_dof());
    q_ = Eigen::Map<const Eigen::VectorXd>(cfg_.arm.q0.data(), 7);
    arm_origin_ = arm_->forward(q_);
    arm_target_ = arm_origin_;
  }
}

TraceRecord World::step() {
  const double t = time();
  const double dt = cfg_.dt;
  const auto& env = cfg_.environment;
  TraceRecord r;
  r.t = t;
  r.F_d = cfg_.force_reference;

  const SurfaceState surf = surface_state(env.surface, t);
  const Eigen::Vector2d pos = cfg_.traverse.position(t);
  const SpringDamperParams imp = env.field.sample(pos.x(), pos.y(), t);
  ContactLaw law;
  law.unilateral = env.unilateral;
  if (env.hertz) law.model = *env.hertz;
  else law.model = imp;

  const double x = loop_ ? loop_->inner().position() : x_;
  const double v = loop_ ? loop_->inner().velocity() : v_;
  const double depth = x - surf.position;
  const double rate = v - surf.velocity;
  const double F = law.force(depth, rate);
  r.x_e = x;
  r.z_s = surf.position;
  r.pos_x = pos.x();
  r.pos_y = pos.y();
  r.F_raw = F;
  r.K_true = env.hertz ? law.stiffness(depth) : imp.stiffness;
  if (depth <= 0.0) r.events |= events::contact_lost;

  // Fixed draw order keeps runs reproducible whatever is enabled.
  const double n_axial = cfg_.noise * gauss_(rng_);
  const double n_x = cfg_.noise * gauss_(rng_);
  const double n_y = cfg_.noise * gauss_(rng_);
  const double n_probe = cfg_.noise * gauss_(rng_);
  r.F_meas = F + n_axial;

  const Eigen::Vector3d fv(normal_lp_[0].step(n_x), normal_lp_[1].step(n_y), normal_lp_[2].step(r.F_meas));
  if (auto n = estimate_normal(fv, cfg_.force_floor)) normal_ = *n;
  else r.events |= events::normal_held;

  bool updated = false;
  if (probe_) {
    const ProbeSample s = probe_->sample(t, depth, rate, law, n_probe);
    last_probe_ = s;
    r.delta = s.displacement;
    if (!s.valid) r.events |= events::probe_invalid;
    const std::size_t resets_before = estimator_->resets();
    updated = estimator_->update(t, s.displacement, s.force, s.valid).has_value();
    if (estimator_->resets() != resets_before) r.events |= events::covariance_reset;
    consecutive_updates_ = updated ? consecutive_updates_ + 1 : 0;
    if (const auto& est = estimator_->latest()) {
      r.K_hat = est->stiffness;
      r.D_hat = est->damping;
      r.residual = est->residual;
      r.mu = estimator_->state().mu;
      if (!est->physical) r.events |= events::unphysical_estimate;
    } else {
      r.events |= events::no_estimate;
    }
  }

  double x_ref = x;
  if (loop_) {
    const auto& cc = cfg_.controller;
    double k_used = cc.fixed_stiffness;
    if (cc.adaptation) {
      std::optional<double> candidate;
      if (estimator_ && updated && t >= cc.warmup && consecutive_updates_ >= accept_after_)
        candidate = estimator_->latest()->stiffness;
      k_used = tracker_->update(candidate, dt);
    }
    const LoopTick tick = loop_->step(cfg_.force_reference, r.F_meas, k_used, dt);
    r.F_filt = tick.F_meas;
    r.e = tick.error;
    r.dF = tick.dF;
    r.x_ref = tick.x_ref;
    r.K_hat_used = k_used;
    if (tick.compliance_clamped) r.events |= events::compliance_clamped;
    x_ref = tick.x_ref;
  } else {
    r.F_filt = r.F_meas;
    r.e = cfg_.force_reference - r.F_meas;
    r.x_ref = x_;
  }

  if (arm_) {
    // Surface normal points along +z; indentation moves the tool down.
    const Eigen::Vector2d p0 = cfg_.traverse.position(0.0);
    const double x0 = loop_ ? env.surface.rest_height : x_;
    const Eigen::Vector3d target = arm_origin_ + Eigen::Vector3d(pos.x() - p0.x(), pos.y() - p0.y(), -(x_ref - x0));
    const JointIncrement inc = pseudo_inverse_solve(arm_->jacobian(q_), target - arm_target_);
    q_ += inc.dq;
    arm_target_ = target;
    arm_error_ = (arm_->forward(q_) - arm_target_).norm();
    if (inc.singular) r.events |= events::singular_jacobian;
    if (!arm_->within_limits(q_)) r.events |= events::joint_limit;
  }

  if (cfg_.force_reference > 0.0 && F > cfg_.abort_factor * cfg_.force_reference) {
    aborted_ = true;
    r.events |= events::aborted;
  }
  ++tick_;
  return r;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  World w(cfg);
  ScenarioResult res;
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
  res.trace.reserve(n);
  double arm_err = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    res.trace.push_back(w.step());
    if (w.last_probe_sample()) res.probe_samples.push_back(*w.last_probe_sample());
    arm_err = std::max(arm_err, w.arm_tracking_error());
    if (w.aborted()) {
      res.status = RunStatus::unstable;
      std::ostringstream os;
      os << "contact force " << res.trace.back().F_raw << " N exceeded " << cfg.abort_factor
         << " x F_d at t = " << res.trace.back().t << " s; run aborted";
      res.diagnostic = os.str();
      break;
    }
  }
  res.gains_used = w.gains();
  res.metrics = compute_metrics(res.trace, cfg.metrics_skip_fraction);
  if (cfg.arm.enabled) res.extras["arm_tracking_error_max"] = arm_err;
  if (w.gains()) {
    res.extras["kp"] = w.gains()->kp;
    res.extras["ki"] = w.gains()->ki;
  }
  return res;
}

Metrics compute_metrics(const std::vector<TraceRecord>& trace, double skip_fraction) {
  if (trace.empty()) throw std::invalid_argument("compute_metrics: empty trace");
  Metrics m;
  const auto start = static_cast<std::size_t>(std::ceil(skip_fraction * static_cast<double>(trace.size())));
  double se = 0.0, sk = 0.0;
  std::size_t n = 0, nk = 0;
  for (std::size_t i = std::min(start, trace.size() - 1); i < trace.size(); ++i) {
    const auto& r = trace[i];
    se += (r.F_raw - r.F_d) * (r.F_raw - r.F_d);
    ++n;
    if (r.K_true > 0.0 && !(r.events & events::no_estimate) && r.K_hat != 0.0) {
      sk += std::pow((r.K_hat - r.K_true) / r.K_true, 2);
      ++nk;
    }
  }
  m.rms_force_error = std::sqrt(se / static_cast<double>(n));
  if (nk) m.estimate_rel_error_rms = std::sqrt(sk / static_cast<double>(nk));
  for (const auto& r : trace) m.max_overshoot = std::max(m.max_overshoot, r.F_raw - r.F_d);
  std::ptrdiff_t last_bad = -1;
  for (std::size_t i = 0; i < trace.size(); ++i)
    if (std::abs(trace[i].F_raw - trace[i].F_d) >= 0.02 * std::abs(trace[i].F_d) &&
        trace[i].F_raw != trace[i].F_d)
      last_bad = static_cast<std::ptrdiff_t>(i);
  // Settled only if the in-band tail covers at least a tenth of the trace.
  const auto first_good = static_cast<std::size_t>(last_bad + 1);
  const std::size_t min_tail = std::max<std::size_t>(1, trace.size() / 10);
  if (trace.size() - first_good >= min_tail) m.settling_time = trace[first_good].t;
  return m;
}

namespace {

struct Borders {
  std::vector<double> x, y;
};

Borders interior_borders(const StiffnessField& f) {
  Borders b;
  const Region bb = f.bounds();
  for (const auto& p : f.patches()) {
    if (p.region.x_max < bb.x_max) b.x.push_back(p.region.x_max);
    if (p.region.y_max < bb.y_max) b.y.push_back(p.region.y_max);
  }
  std::sort(b.x.begin(), b.x.end());
  b.x.erase(std::unique(b.x.begin(), b.x.end()), b.x.end());
  std::sort(b.y.begin(), b.y.end());
  b.y.erase(std::unique(b.y.begin(), b.y.end()), b.y.end());
  return b;
}

}  // namespace

std::vector<bool> transition_mask(const ScenarioConfig& cfg, const std::vector<TraceRecord>& trace) {
  const auto& field = cfg.environment.field;
  const Borders b = field.is_ramp() ? Borders{} : interior_borders(field);
  const double half = 0.75 * field.blend_width();
  std::vector<bool> raw(trace.size(), false);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& r = trace[i];
    for (double bx : b.x) {
      if (std::abs(r.pos_x - bx) <= half) raw[i] = true;
      if (i > 0 && (trace[i - 1].pos_x - bx) * (r.pos_x - bx) <= 0.0 && trace[i - 1].pos_x != r.pos_x) raw[i] = true;
    }
    for (double by : b.y) {
      if (std::abs(r.pos_y - by) <= half) raw[i] = true;
      if (i > 0 && (trace[i - 1].pos_y - by) * (r.pos_y - by) <= 0.0 && trace[i - 1].pos_y != r.pos_y) raw[i] = true;
    }
  }
  const auto pad = static_cast<std::ptrdiff_t>(std::llround(cfg.transition_pad / cfg.dt));
  std::vector<bool> out(trace.size(), false);
  const auto n = static_cast<std::ptrdiff_t>(trace.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (!raw[static_cast<std::size_t>(i)]) continue;
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - pad); j <= std::min(n - 1, i + pad); ++j)
      out[static_cast<std::size_t>(j)] = true;
  }
  return out;
}

double rms_force_error_where(const std::vector<TraceRecord>& trace, const std::vector<bool>& keep) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (!keep[i]) continue;
    s += std::pow(trace[i].F_raw - trace[i].F_d, 2);
    ++n;
  }
  if (n == 0) throw std::runtime_error("no samples selected for RMS");
  return std::sqrt(s / static_cast<double>(n));
}

namespace {

StiffnessField four_patch_field(const std::vector<double>& k, double blend) {
  std::vector<SpringDamperParams> v;
  for (double x : k) v.push_back({x, 0.0});
  return StiffnessField::strips(v, 0.0, 0.03, -0.02, 0.02, blend);
}

}  // namespace

ScenarioConfig static_slider_defaults() {
  ScenarioConfig c;
  c.name = "static_slider";
  c.environment.field = four_patch_field({400.0, 800.0, 1600.0, 3200.0}, 0.006);
  c.traverse = {0.005, 0.0, 0.115, 0.0, 0.005, 0.0};
  c.duration = 22.0;
  c.controller.fixed_stiffness = 3200.0;
  return c;
}

ScenarioConfig pulsating_defaults() {
  ScenarioConfig c;
  c.name = "pulsating";
  c.environment.field = four_patch_field({250.0, 500.0, 1000.0}, 0.006);
  c.environment.surface = {0.005, 0.5, 0.0};
  c.traverse = {0.005, 0.0, 0.085, 0.0, 0.005, 0.0};
  c.duration = 16.0;
  c.controller.fixed_stiffness = 1000.0;
  return c;
}

ScenarioConfig estimation_defaults() {
  ScenarioConfig c = static_slider_defaults();
  c.name = "estimation";
  c.controller.enabled = false;
  c.controller.hold_depth = 1e-3;
  c.force_reference = 0.0;
  return c;
}

ScenarioResult run_static_slider(const ScenarioConfig& cfg) {
  if (cfg.environment.field.patches().size() < 2) throw std::invalid_argument("static slider needs a multi-patch field");
  if (!(cfg.traverse.speed > 0.0)) throw std::invalid_argument("static slider needs traverse.speed > 0");
  ScenarioResult res = run_scenario(cfg);
  if (res.status != RunStatus::ok) return res;
  const auto mask = transition_mask(cfg, res.trace);
  const double t_skip = cfg.metrics_skip_fraction * cfg.duration;
  std::vector<bool> keep(res.trace.size()), border(res.trace.size());
  double overshoot = 0.0;
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    keep[i] = !mask[i] && res.trace[i].t >= t_skip;
    if (mask[i] && res.trace[i].t >= t_skip)
      overshoot = std::max(overshoot, res.trace[i].F_raw - res.trace[i].F_d);
  }
  res.extras["rms_outside_transitions"] = rms_force_error_where(res.trace, keep);
  res.extras["border_overshoot_max"] = overshoot;
  return res;
}

Spectrum force_error_spectrum(const std::vector<TraceRecord>& trace, double skip_fraction,
                              double f_lo, double f_hi, double df) {
  const auto start = static_cast<std::size_t>(std::ceil(skip_fraction * static_cast<double>(trace.size())));
  if (start + 2 >= trace.size()) throw std::invalid_argument("trace too short for a spectrum");
  const std::size_t n = trace.size() - start;
  std::vector<double> e(n), w(n);
  double mean = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = trace[start + i].F_raw - trace[start + i].F_d;
    mean += e[i];
  }
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    wsum += w[i];
  }
  Spectrum s;
  double best = -1.0;
  for (double f = f_lo; f <= f_hi + 1e-12; f += df) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i)
      acc += w[i] * (e[i] - mean) * std::polar(1.0, -2.0 * std::numbers::pi * f * trace[start + i].t);
    const double a = 2.0 * std::abs(acc) / wsum;
    s.freqs.push_back(f);
    s.amplitude.push_back(a);
    if (a > best) {
      best = a;
      s.peak_frequency = f;
    }
  }
  return s;
}

ScenarioResult run_pulsating(const ScenarioConfig& cfg) {
  ScenarioResult res = run_scenario(cfg);
  if (res.status != RunStatus::ok) return res;
  const double fsurf = cfg.environment.surface.frequency;
  const Spectrum s = force_error_spectrum(res.trace, cfg.metrics_skip_fraction, 0.1, 5.0, 0.01);
  res.extras["error_peak_frequency"] = s.peak_frequency;
  if (fsurf > 0.0) {
    std::vector<double> sorted = s.amplitude;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double median = sorted[sorted.size() / 2];
    const auto it = std::min_element(s.freqs.begin(), s.freqs.end(),
                                     [&](double a, double b) { return std::abs(a - fsurf) < std::abs(b - fsurf); });
    const double amp = s.amplitude[static_cast<std::size_t>(it - s.freqs.begin())];
    res.extras["error_amplitude_at_surface_frequency"] = amp;
    res.extras["error_peak_to_median"] = median > 0.0 ? amp / median : 0.0;
  }
  double fmin = std::numeric_limits<double>::infinity();
  for (const auto& r : res.trace)
    if (r.t >= cfg.metrics_skip_fraction * cfg.duration) fmin = std::min(fmin, r.F_raw);
  res.extras["min_force_steady"] = fmin;
  return res;
}

std::vector<PatchEstimate> patch_estimates(const ScenarioConfig& cfg, const std::vector<TraceRecord>& trace) {
  const auto& field = cfg.environment.field;
  const Borders b = interior_borders(field);
  const double half = 0.75 * field.blend_width();
  auto interior = [&](const Patch& p, double x, double y) {
    if (!p.region.contains(x, y)) return false;
    for (double bx : b.x)
      if (std::abs(x - bx) <= half) return false;
    for (double by : b.y)
      if (std::abs(y - by) <= half) return false;
    return true;
  };
  std::vector<PatchEstimate> out;
  for (std::size_t i = 0; i < field.patches().size(); ++i) {
    const auto& p = field.patches()[i];
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < trace.size(); ++k)
      if (interior(p, trace[k].pos_x, trace[k].pos_y) && !(trace[k].events & events::no_estimate))
        idx.push_back(k);
    if (idx.size() < 4) continue;
    const std::size_t from = idx.size() / 2;
    PatchEstimate pe;
    pe.patch = i;
    pe.true_stiffness = p.params.stiffness;
    double s = 0.0, s2 = 0.0;
    for (std::size_t j = from; j < idx.size(); ++j) {
      s += trace[idx[j]].K_hat;
      s2 += trace[idx[j]].K_hat * trace[idx[j]].K_hat;
    }
    pe.samples = idx.size() - from;
    const double n = static_cast<double>(pe.samples);
    pe.mean_estimate = s / n;
    const double var = std::max(0.0, s2 / n - pe.mean_estimate * pe.mean_estimate);
    pe.rel_error = std::abs(pe.mean_estimate - pe.true_stiffness) / pe.true_stiffness;
    pe.rel_std = std::sqrt(var) / pe.true_stiffness;
    out.push_back(pe);
  }
  return out;
}

ScenarioResult run_estimation_validation(const ScenarioConfig& cfg) {
  if (!cfg.probe_enabled) throw std::invalid_argument("estimation validation needs the probe enabled");
  ScenarioResult res = run_scenario(cfg);
  for (const auto& pe : patch_estimates(cfg, res.trace)) {
    const std::string k = "patch" + std::to_string(pe.patch);
    res.extras[k + "_true"] = pe.true_stiffness;
    res.extras[k + "_mean"] = pe.mean_estimate;
    res.extras[k + "_rel_error"] = pe.rel_error;
    res.extras[k + "_rel_std"] = pe.rel_std;
  }
  return res;
}

ScenarioResult run_named(const ScenarioConfig& cfg) {
  if (cfg.name == "static_slider") return run_static_slider(cfg);
  if (cfg.name == "pulsating") return run_pulsating(cfg);
  if (cfg.name == "estimation") return run_estimation_validation(cfg);
  return run_scenario(cfg);
}

}  // namespace probeforce
