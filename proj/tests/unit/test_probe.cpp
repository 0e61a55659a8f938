#include "doctest.h"

#include "probeforce/probe.hpp"

#include <cmath>

using namespace probeforce;

namespace {

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Band-passed force over band-passed displacement after 2 s at a fixed base depth.
double amplitude_ratio(const ContactLaw& law, double base_depth) {
  Probe probe{ProbeConfig{}};
  std::vector<double> f, d;
  for (int k = 0; k <= 2000; ++k) {
    const auto s = probe.sample(k * 1e-3, base_depth, 0.0, law);
    if (k >= 1500) {
      REQUIRE(s.valid);
      f.push_back(s.force);
      d.push_back(s.displacement);
    }
  }
  return probe.stiffness_scale() * rms(f) / rms(d);
}

}  // namespace

TEST_SUITE("probe") {
  TEST_CASE("raised cosine displacement") {
    const ProbeConfig c;
    CHECK(probe_displacement(c, 0.0) == 0.0);
    CHECK(probe_displacement(c, 0.025) == doctest::Approx(c.amplitude).epsilon(1e-12));
    double mean = 0.0, lo = 1.0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      const double d = probe_displacement(c, i * 0.05 / n);
      mean += d / n;
      lo = std::min(lo, d);
    }
    CHECK(mean == doctest::Approx(c.amplitude / 2.0).epsilon(1e-12));
    CHECK(lo >= 0.0);
    const double h = 1e-7, t = 0.013;
    CHECK(probe_velocity(c, t) ==
          doctest::Approx((probe_displacement(c, t + h) - probe_displacement(c, t - h)) / (2 * h)).epsilon(1e-6));
  }

  TEST_CASE("config validation") {
    ProbeConfig c;
    CHECK_NOTHROW(c.validate());
    c.amplitude = -1.0;
    CHECK_THROWS(c.validate());
    c = ProbeConfig{};
    c.band_hi = 4.0;
    CHECK_THROWS(c.validate());
    const auto s = ProbeConfig{}.scaled_for(2.0);
    CHECK(s.band_lo == doctest::Approx(0.6));
    CHECK(s.band_hi == doctest::Approx(2.6));
    CHECK(s.taps % 2 == 1);
    CHECK(s.taps > 2500);
  }

  TEST_CASE("linear environment amplitude ratio") {
    ContactLaw law;
    law.model = SpringDamperParams{1000.0, 0.0};
    CHECK(amplitude_ratio(law, 1e-3) == doctest::Approx(1000.0).epsilon(0.02));
  }

  TEST_CASE("probe radius scaling") {
    ContactLaw law;
    law.model = SpringDamperParams{1000.0, 0.0};
    ProbeConfig c;
    c.probe_radius = 0.0025;
    c.tool_radius = 0.01;
    Probe probe(c);
    CHECK(probe.stiffness_scale() == doctest::Approx(4.0));
    ProbeSample s;
    for (int k = 0; k <= 1000; ++k) s = probe.sample(k * 1e-3, 1e-3, 0.0, law);
    // The probe sees r/R of the tool stiffness.
    CHECK(s.raw_force == doctest::Approx(0.25 * law.force(s.raw_depth, 0.0)));
  }

  TEST_CASE("zero stiffness gives no band-passed force") {
    ContactLaw law;
    law.model = SpringDamperParams{0.0, 0.0};
    Probe probe{ProbeConfig{}};
    double worst = 0.0;
    for (int k = 0; k <= 1000; ++k) worst = std::max(worst, std::abs(probe.sample(k * 1e-3, 1e-3, 0.0, law).force));
    CHECK(worst < 1e-12);
  }

  TEST_CASE("hertz environment follows the tangent stiffness") {
    ContactLaw law;
    const HertzParams hp;
    law.model = hp;
    for (double d0 : {1e-3, 3e-3}) CHECK(amplitude_ratio(law, d0) == doctest::Approx(hertz_tangent_stiffness(hp, d0)).epsilon(0.05));
  }

  TEST_CASE("validity") {
    ContactLaw law;
    law.model = SpringDamperParams{1000.0, 0.0};
    Probe probe{ProbeConfig{}};
    std::size_t first_valid = 0;
    for (std::size_t k = 0; k < 400; ++k)
      if (probe.sample(static_cast<double>(k) * 1e-3, 1e-3, 0.0, law).valid && !first_valid) first_valid = k;
    CHECK(first_valid + 1 == ProbeConfig{}.taps);
    // Contact lost: invalid, and the window has to refill afterwards.
    CHECK_FALSE(probe.sample(0.4, -1e-3, 0.0, law).valid);
    CHECK_FALSE(probe.sample(0.401, 1e-3, 0.0, law).valid);
  }

  TEST_CASE("high-frequency reduction") {
    HighFreqSetup flat;
    flat.field = StiffnessField::ramp(3000.0, 3000.0, 0.0, 0.02, Region{-0.01, 0.03, -0.01, 0.01});
    const auto r0 = validate_high_freq_reduction(flat, 20.0);
    CHECK(r0.neglected_ratio < 1e-6);
    CHECK(r0.rel_error_rms < 0.01);

    const HighFreqSetup setup;  // 1e5 N/m per m at 5 mm/s
    const auto r20 = validate_high_freq_reduction(setup, 20.0);
    const auto r2 = validate_high_freq_reduction(setup, 2.0);
    CHECK(r20.rel_error_rms < 0.05);
    CHECK(r2.rel_error_rms > r20.rel_error_rms);
    CHECK(r2.neglected_ratio > r20.neglected_ratio);
  }
}
