#include "doctest.h"

#include "probeforce/config.hpp"
#include "probeforce/io.hpp"
#include "probeforce/sim.hpp"

#include <cmath>
#include <sstream>

using namespace probeforce;

namespace {

std::string csv(const ScenarioConfig& c) {
  const auto r = run_named(c);
  std::ostringstream os;
  write_trace_csv(os, r.trace, run_metadata(c, r.gains_used));
  return os.str();
}

ScenarioConfig loop_only(double dt) {
  ScenarioConfig c;
  c.duration = 3.0;
  c.dt = dt;
  c.probe_enabled = false;
  c.arm.enabled = false;
  c.noise = 0.0;
  c.controller.adaptation = false;
  c.controller.fixed_stiffness = 1000.0;
  c.controller.lowpass = false;
  return c;
}

TraceRecord rec(double t, double F, double F_d) {
  TraceRecord r;
  r.t = t;
  r.F_raw = F;
  r.F_d = F_d;
  return r;
}

double crossing_time(const ScenarioConfig& c, double x) {
  return c.traverse.start_time + (x - c.traverse.x0) / c.traverse.speed;
}

// Seconds after each border until K_hat is within 10% of the next patch.
double mean_response(const ScenarioConfig& c, const ScenarioResult& r) {
  const double K[] = {400.0, 800.0, 1600.0, 3200.0};
  double sum = 0.0;
  for (int b = 0; b < 3; ++b) {
    const double tb = crossing_time(c, 0.03 * (b + 1));
    for (const auto& t : r.trace)
      if (t.t > tb && std::abs(t.K_hat - K[b + 1]) < 0.1 * K[b + 1]) {
        sum += t.t - tb;
        break;
      }
  }
  return sum / 3.0;
}

}  // namespace

TEST_SUITE("sim") {
  TEST_CASE("all-zero scenario gives a zero trace") {
    ScenarioConfig c;
    c.controller.enabled = false;
    c.controller.hold_depth = 0.0;
    c.probe_enabled = false;
    c.force_reference = 0.0;
    c.noise = 0.0;
    c.arm.enabled = false;
    const auto r = run_scenario(c);
    REQUIRE(r.trace.size() == 1000);
    for (const auto& t : r.trace) {
      CHECK(t.F_raw == 0.0);
      CHECK(t.F_filt == 0.0);
      CHECK(t.F_meas == 0.0);
      CHECK(t.delta == 0.0);
      CHECK(t.e == 0.0);
      CHECK(t.dF == 0.0);
      CHECK(t.x_e == 0.0);
      CHECK(t.z_s == 0.0);
    }
  }

  TEST_CASE("same seed gives identical traces") {
    auto c = static_slider_defaults();
    c.duration = 2.0;
    CHECK(csv(c) == csv(c));
    auto d = c;
    d.seed = 99;
    CHECK(csv(c) != csv(d));
  }

  TEST_CASE("halving dt barely moves the force trajectory") {
    const auto a = run_scenario(loop_only(1e-3));
    const auto b = run_scenario(loop_only(5e-4));
    REQUIRE(b.trace.size() == 2 * a.trace.size());
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
      const double fa = a.trace[i].F_raw, fb = b.trace[2 * i].F_raw;
      CHECK(a.trace[i].t == doctest::Approx(b.trace[2 * i].t));
      diff += (fa - fb) * (fa - fb);
      ref += fa * fa;
    }
    CHECK(std::sqrt(diff / ref) < 0.01);
  }

  TEST_CASE("commands depend only on the past") {
    // Two fields that differ only beyond x = 0.06, reached at t = 11 s.
    auto a = static_slider_defaults();
    a.duration = 14.0;
    auto b = a;
    b.environment.field = StiffnessField::strips({{400, 0}, {800, 0}, {1200, 0}, {200, 0}}, 0.0, 0.03, -0.02, 0.02, 0.006);
    const auto ra = run_named(a), rb = run_named(b);
    const double t_split = crossing_time(a, 0.06 - 0.75 * 0.006);
    bool same_before = true, differ_after = false;
    for (std::size_t i = 0; i < ra.trace.size(); ++i) {
      const bool equal = ra.trace[i].x_ref == rb.trace[i].x_ref && ra.trace[i].F_raw == rb.trace[i].F_raw;
      if (ra.trace[i].t < t_split) same_before = same_before && equal;
      else differ_after = differ_after || !equal;
    }
    CHECK(same_before);
    CHECK(differ_after);
  }

  TEST_CASE("passive spring does no net work over a cycle") {
    ScenarioConfig c;
    c.controller.enabled = false;
    c.controller.hold_depth = 2e-3;
    c.probe_enabled = false;
    c.arm.enabled = false;
    c.noise = 0.0;
    c.force_reference = 0.0;
    c.environment.field = StiffnessField::uniform({1000.0, 0.0}, Region{-0.1, 0.1, -0.1, 0.1});
    c.environment.surface = {5e-4, 0.5, 0.0};
    c.duration = 2.0;
    const auto r = run_scenario(c);
    double work = 0.0, prev_d = r.trace.front().x_e - r.trace.front().z_s, prev_f = r.trace.front().F_raw;
    const double d0 = prev_d;
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      const double d = r.trace[i].x_e - r.trace[i].z_s, f = r.trace[i].F_raw;
      work += 0.5 * (f + prev_f) * (d - prev_d);
      prev_d = d;
      prev_f = f;
    }
    // Close the cycle exactly back to the starting depth.
    work += 0.5 * (prev_f + 1000.0 * d0) * (d0 - prev_d);
    CHECK(std::abs(work) < 1e-6);
  }

  TEST_CASE("metrics") {
    std::vector<TraceRecord> flat;
    for (int i = 0; i < 1000; ++i) flat.push_back(rec(i * 1e-3, 5.0, 5.0));
    const auto m = compute_metrics(flat);
    CHECK(m.rms_force_error == 0.0);
    CHECK(m.max_overshoot == 0.0);
    REQUIRE(m.settling_time);
    CHECK(*m.settling_time == 0.0);

    const double a = 0.3;
    std::vector<TraceRecord> sine;
    for (int i = 0; i < 10000; ++i) sine.push_back(rec(i * 1e-3, 5.0 + a * std::sin(2 * M_PI * 2.0 * i * 1e-3), 5.0));
    const auto s = compute_metrics(sine, 0.2);
    CHECK(s.rms_force_error == doctest::Approx(a / std::sqrt(2.0)).epsilon(1e-6));
    CHECK(s.max_overshoot == doctest::Approx(a).epsilon(1e-4));
    CHECK_FALSE(s.settling_time);
  }

  TEST_CASE("static slider: adaptation beats the fixed stiffest estimate") {
    auto on = static_slider_defaults();
    auto off = on;
    off.controller.adaptation = false;
    const auto r_on = run_static_slider(on), r_off = run_static_slider(off);
    CHECK(r_on.status == RunStatus::ok);
    CHECK(r_on.extras.at("rms_outside_transitions") < 0.25);
    CHECK(r_on.metrics.rms_force_error / r_off.metrics.rms_force_error < 0.5);
  }

  TEST_CASE("static slider: sharp borders overshoot at every crossing") {
    auto sharp = static_slider_defaults();
    sharp.environment.field = StiffnessField::strips({{400, 0}, {800, 0}, {1600, 0}, {3200, 0}}, 0.0, 0.03, -0.02, 0.02, 0.0);
    auto smooth = static_slider_defaults();
    const auto rs = run_static_slider(sharp), rb = run_static_slider(smooth);
    for (double xb : {0.03, 0.06, 0.09}) {
      const double tb = crossing_time(sharp, xb);
      auto peak = [&](const ScenarioResult& r) {
        double p = -INFINITY;
        for (const auto& t : r.trace)
          if (t.t >= tb && t.t <= tb + 2.0) p = std::max(p, t.F_raw - t.F_d);
        return p;
      };
      CHECK(peak(rs) > 1.0);
      CHECK(peak(rs) > 3.0 * peak(rb));
    }
  }

  TEST_CASE("instability aborts with a diagnostic") {
    auto c = loop_only(1e-3);
    c.controller.fixed_stiffness = 50.0;  // far below the true 1000 N/m
    c.duration = 10.0;
    const auto r = run_scenario(c);
    CHECK(r.status == RunStatus::unstable);
    CHECK_FALSE(r.diagnostic.empty());
    CHECK((r.trace.back().events & events::aborted) != 0);
  }

  TEST_CASE("pulsating surface") {
    auto on = pulsating_defaults();
    auto off = on;
    off.controller.adaptation = false;
    const auto r_on = run_pulsating(on), r_off = run_pulsating(off);
    CHECK(r_on.metrics.rms_force_error < r_off.metrics.rms_force_error);
    CHECK(r_on.extras.at("error_peak_frequency") == doctest::Approx(0.5).epsilon(0.1));
    CHECK(r_off.extras.at("error_peak_frequency") == doctest::Approx(0.5).epsilon(0.1));

    auto still = on;
    still.environment.surface.amplitude = 0.0;
    const auto r_still = run_pulsating(still);
    for (const auto& t : r_still.trace) CHECK(t.z_s == still.environment.surface.rest_height);
    CHECK(r_still.extras.at("error_amplitude_at_surface_frequency") <
          0.1 * r_on.extras.at("error_amplitude_at_surface_frequency"));
  }

  TEST_CASE("estimation: noiseless patches are recovered within 1%") {
    auto c = estimation_defaults();
    c.noise = 0.0;
    const auto r = run_estimation_validation(c);
    const auto est = patch_estimates(c, r.trace);
    REQUIRE(est.size() == 4);
    for (const auto& p : est) {
      CHECK(p.samples > 100);
      CHECK(p.rel_error < 0.01);
    }
  }

  TEST_CASE("estimation: trial-to-trial spread over five seeds") {
    auto c = estimation_defaults();
    std::vector<std::vector<double>> means(4);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      c.seed = seed;
      const auto r = run_estimation_validation(c);
      for (const auto& p : patch_estimates(c, r.trace)) means[p.patch].push_back(p.mean_estimate);
    }
    for (std::size_t p = 0; p < 4; ++p) {
      REQUIRE(means[p].size() == 5);
      double mu = 0.0, var = 0.0;
      for (double m : means[p]) mu += m / 5.0;
      for (double m : means[p]) var += (m - mu) * (m - mu) / 4.0;
      MESSAGE("patch " << p << " mean " << mu << " spread " << std::sqrt(var));
      CHECK(std::sqrt(var) > 0.0);
      CHECK(std::sqrt(var) / mu < 0.1);
    }
  }

  TEST_CASE("estimation: smaller J is smoother but slower") {
    auto a = estimation_defaults();
    auto b = a;
    b.estimator.J = 0.1 * Eigen::Matrix2d::Identity();
    const auto ra = run_estimation_validation(a), rb = run_estimation_validation(b);
    const auto pa = patch_estimates(a, ra.trace), pb = patch_estimates(b, rb.trace);
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      sa += pa[i].rel_std;
      sb += pb[i].rel_std;
    }
    CHECK(sb < sa);
    CHECK(mean_response(b, rb) > mean_response(a, ra));
  }

  TEST_CASE("arm follows the commanded tool position") {
    auto c = static_slider_defaults();
    c.duration = 3.0;
    const auto r = run_static_slider(c);
    CHECK(r.extras.at("arm_tracking_error_max") < 1e-4);
  }

  TEST_CASE("config validation") {
    ScenarioConfig c;
    CHECK_NOTHROW(c.validate());
    c.dt = 0.0;
    CHECK_THROWS(c.validate());
    c = ScenarioConfig{};
    c.traverse = {0.0, 0.0, 0.5, 0.0, 0.01, 0.0};  // leaves the field
    c.duration = 60.0;
    CHECK_THROWS(c.validate());
  }
}
