#include "probeforce/io.hpp"

#include "probeforce/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace probeforce {

std::string version() { return PROBEFORCE_VERSION; }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols{
      "t", "x_e", "z_s", "delta", "F_raw", "F_filt", "F_d", "K_true", "K_hat", "D_hat",
      "mu", "residual", "events", "F_meas", "e", "dF", "x_ref", "K_hat_used", "pos_x", "pos_y"};
  return cols;
}

namespace {

void header(std::ostream& os, const std::string& metadata, const std::vector<std::string>& cols) {
  os << "# " << metadata << "\n";
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
}

void row(std::ostream& os, const TraceRecord& r) {
  const double v[] = {r.t, r.x_e, r.z_s, r.delta, r.F_raw, r.F_filt, r.F_d, r.K_true, r.K_hat, r.D_hat, r.mu, r.residual};
  for (std::size_t i = 0; i < std::size(v); ++i) os << (i ? "," : "") << format_number(v[i]);
  os << "," << r.events;
  const double w[] = {r.F_meas, r.e, r.dF, r.x_ref, r.K_hat_used, r.pos_x, r.pos_y};
  for (double x : w) os << "," << format_number(x);
  os << "\n";
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(std::string s, double& out) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  if (s.empty()) return false;
  if (s == "nan") {
    out = std::nan("");
    return true;
  }
  if (s == "inf" || s == "-inf") {
    out = s[0] == '-' ? -INFINITY : INFINITY;
    return true;
  }
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace, const std::string& metadata) {
  header(os, metadata, trace_columns());
  for (const auto& r : trace) row(os, r);
}

void write_plot_csv(std::ostream& os, const std::vector<TraceRecord>& trace, std::size_t stride,
                    const std::string& metadata) {
  header(os, metadata, {"t", "F_raw", "F_d", "K_true", "K_hat", "K_hat_used", "x_e", "z_s", "pos_x"});
  for (std::size_t i = 0; i < trace.size(); i += std::max<std::size_t>(stride, 1)) {
    const auto& r = trace[i];
    const double v[] = {r.t, r.F_raw, r.F_d, r.K_true, r.K_hat, r.K_hat_used, r.x_e, r.z_s, r.pos_x};
    for (std::size_t k = 0; k < std::size(v); ++k) os << (k ? "," : "") << format_number(v[k]);
    os << "\n";
  }
}

void write_probe_csv(std::ostream& os, const std::vector<ProbeSample>& samples, const std::string& metadata) {
  header(os, metadata, {"t", "delta", "force", "valid"});
  for (const auto& s : samples)
    os << format_number(s.t) << "," << format_number(s.displacement) << "," << format_number(s.force) << ","
       << (s.valid ? 1 : 0) << "\n";
}

std::vector<TraceRecord> read_trace_csv(std::istream& is, std::string* metadata) {
  std::string line;
  std::vector<TraceRecord> out;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.rfind("#", 0) == 0) {
      if (metadata && metadata->empty()) *metadata = line.size() > 2 ? line.substr(2) : "";
      continue;
    }
    if (!have_header) {
      have_header = true;
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != trace_columns().size())
      throw ConfigError("trace row " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " columns");
    double v[20];
    for (std::size_t i = 0; i < 20; ++i)
      if (!parse_double(cells[i], v[i])) throw ConfigError("trace row " + std::to_string(lineno) + " is malformed");
    TraceRecord r;
    r.t = v[0]; r.x_e = v[1]; r.z_s = v[2]; r.delta = v[3]; r.F_raw = v[4]; r.F_filt = v[5];
    r.F_d = v[6]; r.K_true = v[7]; r.K_hat = v[8]; r.D_hat = v[9]; r.mu = v[10]; r.residual = v[11];
    r.events = static_cast<std::uint32_t>(v[12]);
    r.F_meas = v[13]; r.e = v[14]; r.dF = v[15]; r.x_ref = v[16]; r.K_hat_used = v[17];
    r.pos_x = v[18]; r.pos_y = v[19];
    out.push_back(r);
  }
  return out;
}

void write_estimates_csv(std::ostream& os, const std::vector<EstimateRow>& rows, const std::string& metadata) {
  header(os, metadata, {"t", "K_hat", "D_hat", "mu", "residual"});
  for (const auto& r : rows)
    os << format_number(r.t) << "," << format_number(r.K_hat) << "," << format_number(r.D_hat) << ","
       << format_number(r.mu) << "," << format_number(r.residual) << "\n";
}

std::vector<SampleRow> read_samples_csv(std::istream& is) {
  std::string line;
  std::vector<SampleRow> out;
  int ti = -1, di = -1, fi = -1, vi = -1;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line);
    if (!have_header) {
      for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
        const auto& c = cells[static_cast<std::size_t>(i)];
        if (c == "t") ti = i;
        else if (c == "delta") di = i;
        else if (c == "force") fi = i;
        else if (c == "valid") vi = i;
      }
      if (ti < 0 || di < 0 || fi < 0) throw ConfigError("samples CSV header must name columns t, delta, force");
      have_header = true;
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max({ti, di, fi, vi}) + 1);
    SampleRow r{};
    double valid = 1.0;
    if (cells.size() < need || !parse_double(cells[static_cast<std::size_t>(ti)], r.t) ||
        !parse_double(cells[static_cast<std::size_t>(di)], r.delta) ||
        !parse_double(cells[static_cast<std::size_t>(fi)], r.force) ||
        (vi >= 0 && !parse_double(cells[static_cast<std::size_t>(vi)], valid)) || !std::isfinite(r.t))
      throw ConfigError("malformed CSV row " + std::to_string(lineno));
    if (!out.empty() && !(r.t > out.back().t))
      throw ConfigError("CSV row " + std::to_string(lineno) + ": timestamps must increase");
    r.valid = valid != 0.0;
    out.push_back(r);
  }
  if (!have_header) throw ConfigError("samples CSV is empty");
  return out;
}

}  // namespace probeforce
