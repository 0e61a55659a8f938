#include "probeforce/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace probeforce {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void ProbeConfig::validate() const {
  if (!(frequency > 0.0) || !(amplitude > 0.0)) throw std::invalid_argument("probe frequency and amplitude must be > 0");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("probe sample rate must be > 0");
  if (!(band_lo > 0.0) || !(band_hi > band_lo) || !(band_hi < sample_rate / 2.0))
    throw std::invalid_argument("probe band must satisfy 0 < band_lo < band_hi < Nyquist");
  if (frequency >= sample_rate / 2.0) throw std::invalid_argument("probe frequency above Nyquist");
  probe_scale(1.0, tool_radius, probe_radius);
}

FirSpec ProbeConfig::bandpass() const { return design_bandpass(band_lo, band_hi, sample_rate, taps); }

ProbeConfig ProbeConfig::scaled_for(double f) const {
  if (!(f > 0.0)) throw std::invalid_argument("probe frequency must be > 0");
  ProbeConfig c = *this;
  const double s = f / frequency;
  c.frequency = f;
  c.band_lo = band_lo * s;
  c.band_hi = band_hi * s;
  auto n = static_cast<std::size_t>(std::llround(static_cast<double>(taps) / s));
  if (n % 2 == 0) ++n;
  c.taps = std::max<std::size_t>(n, 11);
  return c;
}

double probe_displacement(const ProbeConfig& c, double t) {
  return 0.5 * c.amplitude * (1.0 - std::cos(kTwoPi * c.frequency * t));
}

double probe_velocity(const ProbeConfig& c, double t) {
  return 0.5 * c.amplitude * kTwoPi * c.frequency * std::sin(kTwoPi * c.frequency * t);
}

Probe::Probe(ProbeConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  disp_ = FirFilter(cfg_.bandpass());
  force_ = FirFilter(cfg_.bandpass());
}

ProbeSample Probe::sample(double t, double base_depth, double base_rate, const ContactLaw& law,
                          double noise) {
  ProbeSample s;
  s.t = t;
  s.raw_depth = base_depth + probe_displacement(cfg_, t);
  const double rate = base_rate + probe_velocity(cfg_, t);
  const double area = cfg_.probe_radius / cfg_.tool_radius;
  s.raw_force = area * law.force(s.raw_depth, rate) + noise;
  clean_ = s.raw_depth > 0.0 ? clean_ + 1 : 0;
  s.displacement = disp_.step(s.raw_depth);
  s.force = force_.step(s.raw_force);
  s.valid = clean_ >= cfg_.taps;
  return s;
}

ProbeSample probe_sample(Probe& probe, double t, double base_depth, double base_rate,
                         const ContactLaw& law, double noise) {
  return probe.sample(t, base_depth, base_rate, law, noise);
}

HighFreqReport validate_high_freq_reduction(const HighFreqSetup& st, double f) {
  const ProbeConfig pc = st.probe.scaled_for(f);
  const double fs = pc.sample_rate;
  const double dt = 1.0 / fs;
  const double hold = 2.0 * static_cast<double>(pc.taps) / fs + 0.5;
  const double travel = std::abs(st.x_end - st.x_start) / st.speed;
  const double dir = st.x_end >= st.x_start ? 1.0 : -1.0;
  const auto n = static_cast<std::size_t>(std::llround((hold + travel) * fs));
  const std::size_t gd = pc.bandpass().group_delay_samples();

  Probe probe(pc);
  FirFilter clean_force(pc.bandpass());
  RlsConfig rc = st.rls;
  rc.sample_period = dt;
  ImpedanceEstimator est(rc, probe.stiffness_scale());
  std::mt19937_64 rng(st.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<double> k_hist;
  k_hist.reserve(n);
  double se = 0.0, se_al = 0.0, sn = 0.0, sr = 0.0;
  HighFreqReport rep;
  rep.probe_frequency = f;
  rep.taps = pc.taps;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double x = st.x_start + dir * st.speed * std::max(0.0, t - hold);
    const auto imp = st.field.sample(x, st.y, t);
    k_hist.push_back(imp.stiffness);
    ContactLaw law{imp, true};
    const double eps = st.noise_sigma > 0.0 ? st.noise_sigma * noise(rng) : 0.0;
    const ProbeSample s = probe.sample(t, st.base_depth, 0.0, law, eps);
    const double fb_clean = clean_force.step(s.raw_force - eps);
    const auto e = est.update(t, s.displacement, s.force, s.valid);
    if (t < hold + st.settle || !s.valid) continue;
    const double k_lag = k_hist[k >= gd ? k - gd : 0];
    if (e && imp.stiffness > 0.0) {
      se += std::pow((e->stiffness - imp.stiffness) / imp.stiffness, 2);
      se_al += std::pow((e->stiffness - k_lag) / k_lag, 2);
      ++rep.samples;
    }
    const double retained = pc.probe_radius / pc.tool_radius * k_lag * s.displacement;
    sn += std::pow(fb_clean - retained, 2);
    sr += std::pow(retained, 2);
  }
  if (rep.samples == 0) throw std::runtime_error("high-frequency validation produced no estimates");
  rep.rel_error_rms = std::sqrt(se / static_cast<double>(rep.samples));
  rep.rel_error_rms_aligned = std::sqrt(se_al / static_cast<double>(rep.samples));
  rep.neglected_ratio = sr > 0.0 ? std::sqrt(sn / sr) : 0.0;
  return rep;
}

}  // namespace probeforce
