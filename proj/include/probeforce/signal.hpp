#pragma once

#include <cstddef>
#include <vector>

namespace probeforce {

enum class FirKind { lowpass, bandpass };

struct FirSpec {
  std::vector<double> taps;
  double sample_rate = 1000.0;
  FirKind kind = FirKind::lowpass;
  double f_lo = 0.0;  // 0 for lowpass
  double f_hi = 0.0;  // cutoff for lowpass

  std::size_t order() const { return taps.size(); }
  std::size_t group_delay_samples() const { return (taps.size() - 1) / 2; }
  double group_delay() const { return static_cast<double>(group_delay_samples()) / sample_rate; }
};

inline constexpr std::size_t kDefaultLowpassTaps = 201;
inline constexpr std::size_t kDefaultBandpassTaps = 301;

// Hamming-windowed sinc designs. Cutoffs are the -6 dB points.
FirSpec design_lowpass(double cutoff, double sample_rate,
                       std::size_t order = kDefaultLowpassTaps);
FirSpec design_bandpass(double f_lo, double f_hi, double sample_rate,
                        std::size_t order = kDefaultBandpassTaps);

struct FrequencyPoint {
  double magnitude;
  double phase;  // rad
};

FrequencyPoint frequency_response(const FirSpec& spec, double f);

// Streaming direct-form FIR. The history is stored twice so every output is
// one contiguous dot product.
class FirFilter {
 public:
  FirFilter() = default;
  explicit FirFilter(FirSpec spec);

  double step(double x);
  void reset();
  // True once `order()` samples have been pushed since the last reset.
  bool warmed_up() const { return pushed_ >= spec_.taps.size(); }
  const FirSpec& spec() const { return spec_; }

 private:
  FirSpec spec_;
  std::vector<double> reversed_;
  std::vector<double> buf_;
  std::size_t head_ = 0;
  std::size_t pushed_ = 0;
};

double filter_step(FirFilter& state, double x);

// Pure transport delay of round(delay * fs) samples (at least one).
class DelayLine {
 public:
  DelayLine() = default;
  DelayLine(double delay, double sample_rate);

  double step(double x);
  std::size_t length() const { return buf_.size(); }
  double delay() const { return delay_; }

 private:
  double delay_ = 0.0;
  std::vector<double> buf_;
  std::size_t head_ = 0;
};

double delay_step(DelayLine& line, double x);

std::vector<double> convolve(const std::vector<double>& taps, const std::vector<double>& x);

}  // namespace probeforce
