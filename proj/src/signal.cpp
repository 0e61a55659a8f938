#include "probeforce/signal.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace probeforce {

namespace {

constexpr double kPi = std::numbers::pi;

void check_order(std::size_t order) {
  if (order < 11 || order % 2 == 0)
    throw std::domain_error("FIR order must be odd and >= 11");
}

// Ideal lowpass impulse response at normalised cutoff fc (cycles/sample).
double sinc_lp(double fc, double n) {
  if (n == 0.0) return 2.0 * fc;
  return std::sin(2.0 * kPi * fc * n) / (kPi * n);
}

double hamming(std::size_t i, std::size_t n) {
  return 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1));
}

}  // namespace

FirSpec design_lowpass(double cutoff, double sample_rate, std::size_t order) {
  check_order(order);
  if (!(sample_rate > 0.0)) throw std::domain_error("sample rate must be positive");
  if (!(cutoff > 0.0) || !(cutoff < sample_rate / 2.0))
    throw std::domain_error("lowpass cutoff must lie in (0, Nyquist)");
  const double fc = cutoff / sample_rate;
  const double mid = static_cast<double>(order - 1) / 2.0;
  FirSpec s{std::vector<double>(order), sample_rate, FirKind::lowpass, 0.0, cutoff};
  for (std::size_t i = 0; i < order; ++i)
    s.taps[i] = sinc_lp(fc, static_cast<double>(i) - mid) * hamming(i, order);
  const double sum = std::accumulate(s.taps.begin(), s.taps.end(), 0.0);
  for (auto& t : s.taps) t /= sum;
  return s;
}

FirSpec design_bandpass(double f_lo, double f_hi, double sample_rate, std::size_t order) {
  check_order(order);
  if (!(sample_rate > 0.0)) throw std::domain_error("sample rate must be positive");
  if (!(f_lo > 0.0) || !(f_lo < f_hi) || !(f_hi < sample_rate / 2.0))
    throw std::domain_error("bandpass needs 0 < f_lo < f_hi < Nyquist");
  const double mid = static_cast<double>(order - 1) / 2.0;
  FirSpec s{std::vector<double>(order), sample_rate, FirKind::bandpass, f_lo, f_hi};
  for (std::size_t i = 0; i < order; ++i) {
    const double n = static_cast<double>(i) - mid;
    s.taps[i] = (sinc_lp(f_hi / sample_rate, n) - sinc_lp(f_lo / sample_rate, n)) * hamming(i, order);
  }
  // Truncation leaves a small DC leak; remove it in the window's shape.
  double sum = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < order; ++i) {
    sum += s.taps[i];
    wsum += hamming(i, order);
  }
  for (std::size_t i = 0; i < order; ++i) s.taps[i] -= sum * hamming(i, order) / wsum;
  // Unit gain at the band centre.
  const double g = frequency_response(s, 0.5 * (f_lo + f_hi)).magnitude;
  for (auto& t : s.taps) t /= g;
  return s;
}

FrequencyPoint frequency_response(const FirSpec& spec, double f) {
  if (f < 0.0 || f > spec.sample_rate / 2.0)
    throw std::domain_error("frequency must lie in [0, Nyquist]");
  const double w = 2.0 * kPi * f / spec.sample_rate;
  std::complex<double> h{0.0, 0.0};
  for (std::size_t i = 0; i < spec.taps.size(); ++i)
    h += spec.taps[i] * std::polar(1.0, -w * static_cast<double>(i));
  return {std::abs(h), std::arg(h)};
}

FirFilter::FirFilter(FirSpec spec) : spec_(std::move(spec)) {
  if (spec_.taps.empty()) throw std::invalid_argument("FIR filter needs taps");
  reversed_.assign(spec_.taps.rbegin(), spec_.taps.rend());
  buf_.assign(2 * spec_.taps.size(), 0.0);
}

double FirFilter::step(double x) {
  const std::size_t n = reversed_.size();
  buf_[head_] = x;
  buf_[head_ + n] = x;
  head_ = (head_ + 1) % n;
  ++pushed_;
  // buf_[head_ .. head_+n) holds x[k-n+1] .. x[k], oldest first.
  const double* h = buf_.data() + head_;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += reversed_[i] * h[i];
  return acc;
}

void FirFilter::reset() {
  std::fill(buf_.begin(), buf_.end(), 0.0);
  head_ = 0;
  pushed_ = 0;
}

double filter_step(FirFilter& state, double x) { return state.step(x); }

DelayLine::DelayLine(double delay, double sample_rate) : delay_(delay) {
  if (delay < 0.0 || !(sample_rate > 0.0)) throw std::domain_error("invalid delay line");
  const auto n = static_cast<std::size_t>(std::llround(delay * sample_rate));
  buf_.assign(std::max<std::size_t>(n, 1), 0.0);
}

double DelayLine::step(double x) {
  const double out = buf_[head_];
  buf_[head_] = x;
  head_ = (head_ + 1) % buf_.size();
  return out;
}

double delay_step(DelayLine& line, double x) { return line.step(x); }

std::vector<double> convolve(const std::vector<double>& taps, const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < taps.size() && i <= k; ++i) acc += taps[i] * x[k - i];
    y[k] = acc;
  }
  return y;
}

}  // namespace probeforce
