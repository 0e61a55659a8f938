#pragma once

#include "probeforce/sim.hpp"
#include "probeforce/stability.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace probeforce {

std::string version();

// Column names in TraceRecord order.
const std::vector<std::string>& trace_columns();

// "# " + metadata (single-line JSON) as the first line, then the header row.
void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace, const std::string& metadata);
void write_plot_csv(std::ostream& os, const std::vector<TraceRecord>& trace, std::size_t stride,
                    const std::string& metadata);
void write_probe_csv(std::ostream& os, const std::vector<ProbeSample>& samples, const std::string& metadata);

std::vector<TraceRecord> read_trace_csv(std::istream& is, std::string* metadata = nullptr);

struct EstimateRow {
  double t, K_hat, D_hat, mu, residual;
};
void write_estimates_csv(std::ostream& os, const std::vector<EstimateRow>& rows, const std::string& metadata);

struct SampleRow {
  double t, delta, force;
  bool valid = true;
};
// Columns t, delta, force and optionally valid; '#' lines are comments.
// Throws ConfigError naming the offending row.
std::vector<SampleRow> read_samples_csv(std::istream& is);

std::string format_number(double v);

}  // namespace probeforce
