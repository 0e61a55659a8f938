#include "probeforce/contact.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace probeforce {

namespace {

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

// Soft indicator of [lo, hi]. Edges listed as hard (outer field boundary)
// switch sharply; the others ramp over `support` centred on the edge.
double soft_interval(double v, double lo, double hi, double support, bool hard_lo,
                     bool hard_hi) {
  double w = 1.0;
  if (support <= 0.0 || hard_lo) {
    if (v < lo) return 0.0;
  } else {
    w *= smoothstep((v - lo) / support + 0.5);
  }
  if (support <= 0.0 || hard_hi) {
    if (v > hi) return 0.0;
  } else {
    w *= 1.0 - smoothstep((v - hi) / support + 0.5);
  }
  return w;
}

}  // namespace

void HertzParams::validate() const {
  if (!(effective_radius > 0.0) || !(young_modulus > 0.0) || !(poisson_ratio >= 0.0) ||
      !(poisson_ratio < 1.0)) {
    throw std::domain_error("invalid Hertz parameters");
  }
}

double TemporalModulation::scale(double t) const {
  return 1.0 + depth * std::sin(2.0 * std::numbers::pi * frequency * t);
}

StiffnessField::StiffnessField(std::vector<Patch> patches, double blend_width,
                               std::optional<TemporalModulation> modulation)
    : patches_(std::move(patches)), blend_width_(blend_width), modulation_(modulation) {
  if (patches_.empty()) throw std::invalid_argument("stiffness field needs at least one patch");
  if (blend_width_ < 0.0) throw std::invalid_argument("blend_width must be >= 0");
  if (modulation_ && std::abs(modulation_->depth) > 1.0)
    throw std::invalid_argument("temporal modulation depth must be within [-1, 1]");
  bounds_ = patches_.front().region;
  for (const auto& p : patches_) {
    if (p.params.stiffness < 0.0 || p.params.damping < 0.0)
      throw std::invalid_argument("patch stiffness and damping must be >= 0");
    if (!(p.region.x_max > p.region.x_min) || !(p.region.y_max > p.region.y_min))
      throw std::invalid_argument("patch region must have positive extent");
    bounds_.x_min = std::min(bounds_.x_min, p.region.x_min);
    bounds_.x_max = std::max(bounds_.x_max, p.region.x_max);
    bounds_.y_min = std::min(bounds_.y_min, p.region.y_min);
    bounds_.y_max = std::max(bounds_.y_max, p.region.y_max);
  }
}

StiffnessField StiffnessField::uniform(SpringDamperParams p, Region bounds) {
  return StiffnessField({Patch{bounds, p}}, 0.0);
}

StiffnessField StiffnessField::strips(const std::vector<SpringDamperParams>& values,
                                      double x0, double width, double y_min, double y_max,
                                      double blend_width) {
  std::vector<Patch> patches;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double lo = x0 + width * static_cast<double>(i);
    patches.push_back({Region{lo, lo + width, y_min, y_max}, values[i]});
  }
  return StiffnessField(std::move(patches), blend_width);
}

StiffnessField StiffnessField::ramp(double k0, double k1, double x0, double x1,
                                    Region bounds, double damping) {
  if (!(x1 > x0)) throw std::invalid_argument("ramp needs x1 > x0");
  StiffnessField f({Patch{bounds, {std::min(k0, k1), damping}}}, 0.0);
  f.ramp_ = Ramp{k0, k1, x0, x1, damping};
  return f;
}

const Patch* StiffnessField::locate(double x, double y) const {
  for (const auto& p : patches_)
    if (p.region.contains(x, y)) return &p;
  return nullptr;
}

SpringDamperParams StiffnessField::sample(double x, double y, double t) const {
  if (!bounds_.contains(x, y)) throw std::out_of_range("field query outside bounds");
  SpringDamperParams out;
  if (ramp_) {
    const double u = std::clamp((x - ramp_->x0) / (ramp_->x1 - ramp_->x0), 0.0, 1.0);
    out = {ramp_->k0 + (ramp_->k1 - ramp_->k0) * u, ramp_->damping};
  } else if (blend_width_ <= 0.0) {
    const Patch* p = locate(x, y);
    if (!p) throw std::out_of_range("field query falls in a gap between patches");
    out = p->params;
  } else {
    const double support = 1.5 * blend_width_;
    double wsum = 0.0, k = 0.0, d = 0.0;
    for (const auto& p : patches_) {
      const auto& r = p.region;
      const double wx = soft_interval(x, r.x_min, r.x_max, support, r.x_min <= bounds_.x_min,
                                      r.x_max >= bounds_.x_max);
      if (wx == 0.0) continue;
      const double wy = soft_interval(y, r.y_min, r.y_max, support, r.y_min <= bounds_.y_min,
                                      r.y_max >= bounds_.y_max);
      const double w = wx * wy;
      wsum += w;
      k += w * p.params.stiffness;
      d += w * p.params.damping;
    }
    if (wsum <= 0.0) throw std::out_of_range("field query falls in a gap between patches");
    out = {k / wsum, d / wsum};
  }
  if (modulation_) {
    const double s = modulation_->scale(t);
    out.stiffness *= s;
    out.damping *= s;
  }
  return out;
}

double ContactLaw::force(double depth, double depth_rate) const {
  if (const auto* sd = std::get_if<SpringDamperParams>(&model)) {
    if (unilateral) return spring_damper_force(*sd, depth, depth_rate);
    return sd->stiffness * depth + sd->damping * depth_rate;
  }
  const auto& h = std::get<HertzParams>(model);
  if (depth <= 0.0) return 0.0;
  return hertz_force(h, depth);
}

double ContactLaw::stiffness(double depth) const {
  if (const auto* sd = std::get_if<SpringDamperParams>(&model)) {
    return (unilateral && depth < 0.0) ? 0.0 : sd->stiffness;
  }
  if (depth <= 0.0) return 0.0;
  return hertz_tangent_stiffness(std::get<HertzParams>(model), depth);
}

double hertz_force(const HertzParams& p, double depth) {
  p.validate();
  if (depth < 0.0 || !std::isfinite(depth)) throw std::domain_error("hertz_force: depth must be >= 0");
  const double nu2 = p.poisson_ratio * p.poisson_ratio;
  return 4.0 * std::sqrt(p.effective_radius) * p.young_modulus * std::pow(depth, 1.5) /
         (3.0 * (1.0 - nu2));
}

double hertz_tangent_stiffness(const HertzParams& p, double depth) {
  p.validate();
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw std::domain_error("hertz_tangent_stiffness: depth must be > 0");
  const double nu2 = p.poisson_ratio * p.poisson_ratio;
  return 2.0 * std::sqrt(p.effective_radius) * p.young_modulus * std::sqrt(depth) / (1.0 - nu2);
}

double spring_damper_force(const SpringDamperParams& p, double depth, double depth_rate) {
  if (depth < 0.0) return 0.0;
  return p.stiffness * depth + p.damping * depth_rate;
}

SpringDamperParams field_sample(const StiffnessField& f, double x, double y, double t) {
  return f.sample(x, y, t);
}

SurfaceState surface_state(const SurfaceMotion& m, double t) {
  const double w = 2.0 * std::numbers::pi * m.frequency;
  return {m.rest_height + m.amplitude * std::sin(w * t), m.amplitude * w * std::cos(w * t)};
}

std::optional<Eigen::Vector3d> estimate_normal(const Eigen::Vector3d& filtered_force,
                                               double force_floor) {
  const double n = filtered_force.norm();
  if (!(n > force_floor)) return std::nullopt;
  return filtered_force / n;
}

double probe_scale(double estimated, double tool_radius, double probe_radius) {
  if (!(tool_radius > 0.0) || !(probe_radius > 0.0))
    throw std::domain_error("probe_scale: radii must be positive");
  return tool_radius / probe_radius * estimated;
}

}  // namespace probeforce
