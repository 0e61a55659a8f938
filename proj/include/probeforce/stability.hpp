#pragma once

#include "probeforce/control.hpp"

#include <complex>
#include <optional>
#include <vector>

namespace probeforce {

// Real polynomial, coefficients in descending degree.
using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b);
Poly poly_add(const Poly& a, const Poly& b);
Poly poly_scale(const Poly& a, double k);
std::complex<double> poly_eval(const Poly& p, std::complex<double> s);
std::vector<std::complex<double>> poly_roots(const Poly& p);

struct RationalTF {
  Poly num{1.0};
  Poly den{1.0};

  RationalTF() = default;
  RationalTF(Poly n, Poly d);

  std::complex<double> operator()(std::complex<double> s) const;
  RationalTF operator*(const RationalTF& o) const;
};

RationalTF pade2(double delay);

struct LoopModel {
  PiGains pi;
  double compliance_est = 1e-3;   // C, m/N
  double true_stiffness = 1000.0;  // K_E, N/m
  double natural_frequency = 300.0;
  double damping_ratio = 0.9;
  double delay = 0.1;

  void validate() const;
};

RationalTF compose_open_loop(const LoopModel& m);

struct BodePoint {
  double f;
  double magnitude_db;
  double phase_deg;
  bool valid = true;  // false when evaluated on (or numerically at) a pole
};

std::vector<BodePoint> bode(const RationalTF& tf, const std::vector<double>& freqs);
std::vector<double> logspace(double f_lo, double f_hi, std::size_t points);

struct Sweep {
  double f_lo = 0.01;
  double f_hi = 1000.0;
  std::size_t points = 2000;
};

struct MarginReport {
  std::optional<double> gain_margin_db;    // nullopt: unbounded
  std::optional<double> phase_margin_deg;  // nullopt: unbounded
  std::optional<double> gain_crossover;    // Hz
  std::optional<double> phase_crossover;   // Hz
  bool stable = true;
};

MarginReport margins(const RationalTF& tf, const Sweep& sweep = {});

// Roots of 1 + L(s), i.e. num + den.
std::vector<std::complex<double>> closed_loop_poles(const RationalTF& open_loop);
bool closed_loop_stable(const RationalTF& open_loop);

struct MarginRow {
  double ratio;  // K_hat / K_E
  MarginReport report;
};

LoopModel with_ratio(const LoopModel& m, double ratio);
std::vector<MarginRow> margin_sweep(const LoopModel& m, const std::vector<double>& ratios,
                                    const Sweep& sweep = {});
// Gain margin non-decreasing along the rows (unbounded counts as +inf).
bool gain_margin_monotone(const std::vector<MarginRow>& rows);
// Smallest stable ratio, bracketed in [lo, hi] and refined to rel_tol.
double stability_boundary(const LoopModel& m, double lo = 0.01, double hi = 1.0,
                          double rel_tol = 0.01);

/// PI gains for the matched loop (C K_E = 1): for each kp the integral gain
/// is raised until the dominant closed-loop pole stops being real, and kp
/// is chosen to maximise that pole's decay rate.
struct TunedGains {
  PiGains gains;
  double decay_rate;  // 1/s, of the dominant pole
};
TunedGains tune_pi_critical(double natural_frequency, double damping_ratio, double delay,
                            double integral_limit = 50.0);

}  // namespace probeforce
