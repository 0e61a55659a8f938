#include "probeforce/stability.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace probeforce {

namespace {

constexpr double kPi = std::numbers::pi;

Poly trim(Poly p) {
  std::size_t i = 0;
  while (i + 1 < p.size() && p[i] == 0.0) ++i;
  p.erase(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(i));
  return p;
}

double wrap_near(double phase, double reference) {
  return phase + 360.0 * std::round((reference - phase) / 360.0);
}

double phase_deg(const RationalTF& tf, double f, double reference) {
  const auto v = tf(std::complex<double>(0.0, 2.0 * kPi * f));
  return wrap_near(std::arg(v) * 180.0 / kPi, reference);
}

double mag(const RationalTF& tf, double f) {
  return std::abs(tf(std::complex<double>(0.0, 2.0 * kPi * f)));
}

// Bisection in log-frequency on a sign change of g between a and b.
template <class G>
double refine(double a, double b, G g) {
  double ga = g(a);
  while (b / a - 1.0 > 1e-9) {
    const double m = std::sqrt(a * b);
    const double gm = g(m);
    if ((gm > 0.0) == (ga > 0.0)) {
      a = m;
      ga = gm;
    } else {
      b = m;
    }
  }
  return std::sqrt(a * b);
}

}  // namespace

Poly poly_mul(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

Poly poly_add(const Poly& a, const Poly& b) {
  Poly r(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) r[r.size() - a.size() + i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) r[r.size() - b.size() + i] += b[i];
  return r;
}

Poly poly_scale(const Poly& a, double k) {
  Poly r(a);
  for (auto& c : r) c *= k;
  return r;
}

std::complex<double> poly_eval(const Poly& p, std::complex<double> s) {
  std::complex<double> acc{0.0, 0.0};
  for (double c : p) acc = acc * s + c;
  return acc;
}

std::vector<std::complex<double>> poly_roots(const Poly& p0) {
  const Poly p = trim(p0);
  const auto n = static_cast<Eigen::Index>(p.size()) - 1;
  if (n < 1) return {};
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) C(0, j) = -p[static_cast<std::size_t>(j + 1)] / p[0];
  for (Eigen::Index i = 1; i < n; ++i) C(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(C, false);
  std::vector<std::complex<double>> r;
  for (Eigen::Index i = 0; i < n; ++i) r.push_back(es.eigenvalues()(i));
  return r;
}

RationalTF::RationalTF(Poly n, Poly d) : num(trim(std::move(n))), den(trim(std::move(d))) {
  if (den.empty() || den.front() == 0.0) throw std::invalid_argument("denominator must be nonzero");
  for (double c : num)
    if (!std::isfinite(c)) throw std::invalid_argument("non-finite numerator coefficient");
  for (double c : den)
    if (!std::isfinite(c)) throw std::invalid_argument("non-finite denominator coefficient");
}

std::complex<double> RationalTF::operator()(std::complex<double> s) const {
  return poly_eval(num, s) / poly_eval(den, s);
}

RationalTF RationalTF::operator*(const RationalTF& o) const {
  return RationalTF(poly_mul(num, o.num), poly_mul(den, o.den));
}

RationalTF pade2(double T) {
  if (T < 0.0) throw std::domain_error("pade2: delay must be >= 0");
  if (T == 0.0) return RationalTF({1.0}, {1.0});
  return RationalTF({T * T, -6.0 * T, 12.0}, {T * T, 6.0 * T, 12.0});
}

void LoopModel::validate() const {
  pi.validate();
  if (!(compliance_est > 0.0) || !(true_stiffness > 0.0) || !(natural_frequency > 0.0) ||
      !(damping_ratio > 0.0) || delay < 0.0)
    throw std::invalid_argument("loop model parameters must be positive");
}

RationalTF compose_open_loop(const LoopModel& m) {
  m.validate();
  const double w2 = m.natural_frequency * m.natural_frequency;
  const RationalTF pi({m.pi.kp, m.pi.ki}, {1.0, 0.0});
  const RationalTF plant({m.compliance_est * m.true_stiffness * w2},
                         {1.0, 2.0 * m.damping_ratio * m.natural_frequency, w2});
  return pi * plant * pade2(m.delay);
}

std::vector<double> logspace(double f_lo, double f_hi, std::size_t points) {
  if (!(f_lo > 0.0) || !(f_hi > f_lo) || points < 2) throw std::invalid_argument("invalid sweep");
  std::vector<double> f(points);
  const double a = std::log10(f_lo), b = std::log10(f_hi);
  for (std::size_t i = 0; i < points; ++i)
    f[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  return f;
}

std::vector<BodePoint> bode(const RationalTF& tf, const std::vector<double>& freqs) {
  std::vector<BodePoint> out;
  out.reserve(freqs.size());
  double ref = 0.0;
  bool have_ref = false;
  for (double f : freqs) {
    if (!(f > 0.0)) throw std::invalid_argument("bode: frequencies must be > 0");
    const std::complex<double> s(0.0, 2.0 * kPi * f);
    const auto d = poly_eval(tf.den, s);
    const auto v = poly_eval(tf.num, s) / d;
    if (std::abs(d) < 1e-300 || !std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      out.push_back({f, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN(), false});
      continue;
    }
    double ph = std::arg(v) * 180.0 / kPi;
    if (have_ref) ph = wrap_near(ph, ref);
    ref = ph;
    have_ref = true;
    out.push_back({f, 20.0 * std::log10(std::abs(v)), ph, true});
  }
  return out;
}

MarginReport margins(const RationalTF& tf, const Sweep& sweep) {
  double lo = sweep.f_lo, hi = sweep.f_hi;
  MarginReport r;
  for (int expand = 0; expand <= 3; ++expand) {
    const auto pts = bode(tf, logspace(lo, hi, sweep.points));
    r = MarginReport{};
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const auto& a = pts[i];
      const auto& b = pts[i + 1];
      if (!a.valid || !b.valid) continue;
      if (!r.gain_crossover && (a.magnitude_db > 0.0) != (b.magnitude_db > 0.0)) {
        const double f = refine(a.f, b.f, [&](double x) { return std::log(mag(tf, x)); });
        r.gain_crossover = f;
        r.phase_margin_deg = 180.0 + phase_deg(tf, f, a.phase_deg);
      }
      if (!r.phase_crossover) {
        // Crossing of any odd multiple of -180 degrees.
        const double line = -180.0 + 360.0 * std::round((a.phase_deg + 180.0) / 360.0);
        const double ga = a.phase_deg - line, gb = b.phase_deg - line;
        if (ga != 0.0 && (ga > 0.0) != (gb > 0.0)) {
          double ref = a.phase_deg;
          const double f = refine(a.f, b.f, [&](double x) { return phase_deg(tf, x, ref) - line; });
          r.phase_crossover = f;
          r.gain_margin_db = -20.0 * std::log10(mag(tf, f));
        }
      }
    }
    if (r.gain_crossover && r.phase_crossover) break;
    lo = std::max(lo / 10.0, 1e-6);
    hi *= 10.0;
  }
  r.stable = (!r.gain_margin_db || *r.gain_margin_db > 0.0) &&
             (!r.phase_margin_deg || *r.phase_margin_deg > 0.0);
  return r;
}

std::vector<std::complex<double>> closed_loop_poles(const RationalTF& L) {
  return poly_roots(poly_add(L.num, L.den));
}

bool closed_loop_stable(const RationalTF& L) {
  for (const auto& p : closed_loop_poles(L))
    if (!(p.real() < 0.0)) return false;
  return true;
}

LoopModel with_ratio(const LoopModel& m, double ratio) {
  if (!(ratio > 0.0)) throw std::invalid_argument("ratio must be > 0");
  LoopModel r = m;
  r.compliance_est = 1.0 / (ratio * m.true_stiffness);
  return r;
}

std::vector<MarginRow> margin_sweep(const LoopModel& m, const std::vector<double>& ratios,
                                    const Sweep& sweep) {
  std::vector<MarginRow> rows;
  for (double q : ratios) rows.push_back({q, margins(compose_open_loop(with_ratio(m, q)), sweep)});
  return rows;
}

bool gain_margin_monotone(const std::vector<MarginRow>& rows) {
  auto gm = [](const MarginRow& r) {
    return r.report.gain_margin_db.value_or(std::numeric_limits<double>::infinity());
  };
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].ratio >= rows[i - 1].ratio && gm(rows[i]) < gm(rows[i - 1])) return false;
  return true;
}

double stability_boundary(const LoopModel& m, double lo, double hi, double rel_tol) {
  auto stable = [&](double q) { return margins(compose_open_loop(with_ratio(m, q))).stable; };
  if (stable(lo) || !stable(hi)) throw std::runtime_error("stability boundary not bracketed");
  while (hi / lo - 1.0 > rel_tol) {
    const double mid = std::sqrt(lo * hi);
    (stable(mid) ? hi : lo) = mid;
  }
  return hi;
}

namespace {

// Dominant closed-loop pole of the matched loop (C K_E = 1).
std::complex<double> dominant_pole(double kp, double ki, double w, double zeta, double delay) {
  LoopModel m;
  m.pi = {kp, ki, 1.0};
  m.compliance_est = 1.0;
  m.true_stiffness = 1.0;
  m.natural_frequency = w;
  m.damping_ratio = zeta;
  m.delay = delay;
  const auto poles = closed_loop_poles(compose_open_loop(m));
  return *std::max_element(poles.begin(), poles.end(),
                           [](auto a, auto b) { return a.real() < b.real(); });
}

bool dominant_real(double kp, double ki, double w, double zeta, double delay) {
  const auto p = dominant_pole(kp, ki, w, zeta, delay);
  return std::abs(p.imag()) <= 1e-7 * std::max(1.0, std::abs(p));
}

double critical_ki(double kp, double w, double zeta, double delay) {
  double lo = 1e-9, hi = 1.0;
  while (dominant_real(kp, hi, w, zeta, delay)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) return lo;
  }
  for (int i = 0; i < 80 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (dominant_real(kp, mid, w, zeta, delay) ? lo : hi) = mid;
  }
  return lo;
}

double decay(double kp, double w, double zeta, double delay) {
  const double ki = critical_ki(kp, w, zeta, delay);
  return -dominant_pole(kp, ki, w, zeta, delay).real();
}

}  // namespace

TunedGains tune_pi_critical(double w, double zeta, double delay, double integral_limit) {
  if (!(w > 0.0) || !(zeta > 0.0) || !(delay > 0.0))
    throw std::invalid_argument("tuning needs positive loop parameters");
  // Coarse grid in kp scaled by the delay, then golden-section refinement.
  const double span = 1.0;
  const int n = 100;
  double best_kp = 0.0, best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double kp = span * i / n;
    const double d = decay(kp, w, zeta, delay);
    if (d > best) {
      best = d;
      best_kp = kp;
    }
  }
  double a = std::max(0.0, best_kp - span / n), b = best_kp + span / n;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = decay(c, w, zeta, delay), fd = decay(d, w, zeta, delay);
  for (int i = 0; i < 60; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = decay(c, w, zeta, delay);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = decay(d, w, zeta, delay);
    }
  }
  double kp = 0.5 * (a + b);
  double rate = decay(kp, w, zeta, delay);
  if (best > rate) {
    kp = best_kp;
    rate = best;
  }
  return {{kp, critical_ki(kp, w, zeta, delay), integral_limit}, rate};
}

}  // namespace probeforce
