#pragma once

#include "probeforce/contact.hpp"
#include "probeforce/estimator.hpp"
#include "probeforce/signal.hpp"

#include <cstdint>
#include <vector>

namespace probeforce {

struct ProbeConfig {
  double frequency = 20.0;   // Hz
  double amplitude = 5e-5;   // m, peak of the raised cosine
  double probe_radius = 0.005;
  double tool_radius = 0.005;
  double band_lo = 6.0;  // Hz, -6 dB edges of the band-pass
  double band_hi = 26.0;
  std::size_t taps = kDefaultBandpassTaps;
  double sample_rate = 1000.0;

  void validate() const;
  FirSpec bandpass() const;
  // Same design rescaled to another excitation frequency: band edges scale
  // with f, filter length with 1/f.
  ProbeConfig scaled_for(double new_frequency) const;
};

struct ProbeSample {
  double t = 0.0;
  double displacement = 0.0;  // band-passed total indentation
  double force = 0.0;         // band-passed probe force
  bool valid = false;
  double raw_depth = 0.0;
  double raw_force = 0.0;
};

// d(t) = (a/2)(1 - cos(2 pi f t)), in [0, a].
double probe_displacement(const ProbeConfig& c, double t);
double probe_velocity(const ProbeConfig& c, double t);

/// Streaming probe channel. Total indentation and measured force pass
/// through identical band-pass filters. A sample is valid once the filters
/// hold a full window of in-contact history.
class Probe {
 public:
  explicit Probe(ProbeConfig cfg);

  // base_depth/base_rate: tool indentation and its rate; noise is added to
  // the raw force before filtering.
  ProbeSample sample(double t, double base_depth, double base_rate, const ContactLaw& law,
                     double noise = 0.0);

  const ProbeConfig& config() const { return cfg_; }
  double stiffness_scale() const { return probe_scale(1.0, cfg_.tool_radius, cfg_.probe_radius); }

 private:
  ProbeConfig cfg_;
  FirFilter disp_, force_;
  std::size_t clean_ = 0;  // consecutive in-contact samples
};

ProbeSample probe_sample(Probe& probe, double t, double base_depth, double base_rate,
                         const ContactLaw& law, double noise = 0.0);

struct HighFreqSetup {
  StiffnessField field = StiffnessField::ramp(2000.0, 4000.0, 0.0, 0.02, Region{-0.01, 0.03, -0.01, 0.01});
  double y = 0.0;
  double x_start = 0.0;
  double x_end = 0.02;
  double speed = 0.005;      // m/s
  double base_depth = 1e-3;  // m
  double noise_sigma = 0.0;  // N
  std::uint64_t seed = 1;
  RlsConfig rls = [] {
    RlsConfig c;
    c.g = 3e7;
    return c;
  }();
  ProbeConfig probe;  // at the reference 20 Hz design
  double settle = 0.5;  // s after traverse start before errors count
};

struct HighFreqReport {
  double probe_frequency = 0.0;
  std::size_t taps = 0;
  double rel_error_rms = 0.0;          // K_hat(t) vs K(t)
  double rel_error_rms_aligned = 0.0;  // K_hat(t) vs K(t - group delay)
  double neglected_ratio = 0.0;        // rms(F_bp - K delta_bp) / rms(K delta_bp)
  std::size_t samples = 0;
};

/// Holds still while the filters warm up, then traverses the field at
/// constant speed, comparing the estimate against the field itself.
HighFreqReport validate_high_freq_reduction(const HighFreqSetup& setup, double probe_frequency);

}  // namespace probeforce
