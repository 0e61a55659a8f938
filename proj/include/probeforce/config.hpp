#pragma once

#include "probeforce/estimator.hpp"
#include "probeforce/sim.hpp"
#include "probeforce/stability.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace probeforce {

inline constexpr int kSchemaVersion = 1;

// Bad file, bad JSON, unknown key, wrong type or out-of-range value. The
// message names the file or the key path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text_file(const std::string& path);

// Overrides are "dotted.key=value"; value is parsed as JSON when it can be,
// otherwise taken as a string.
ScenarioConfig parse_scenario(const std::string& json_text,
                              const std::vector<std::string>& overrides = {});
ScenarioConfig load_scenario(const std::string& path,
                             const std::vector<std::string>& overrides = {});
std::string scenario_to_json(const ScenarioConfig& cfg, int indent = -1);

struct LoopFile {
  LoopModel model;
  bool auto_tune = true;  // kp/ki absent: tuned for critical damping
  Sweep sweep;
  std::vector<double> ratios{0.1, 0.5, 1.0, 2.0, 10.0};
};

LoopFile parse_loop(const std::string& json_text, const std::vector<std::string>& overrides = {});
LoopFile load_loop(const std::string& path, const std::vector<std::string>& overrides = {});
std::string loop_to_json(const LoopFile& f, int indent = -1);

// Estimator settings for offline replay; only "estimator.*" overrides apply.
RlsConfig parse_estimator_overrides(const std::vector<std::string>& overrides);
std::string estimator_to_json(const RlsConfig& c, int indent = -1);

// Single-line JSON embedded in every output of a run: tool, version, the
// resolved config, the gains in use and the filter specs.
std::string run_metadata(const ScenarioConfig& cfg, const std::optional<PiGains>& gains);
// Inverse: the scenario recorded in a run_metadata header.
ScenarioConfig scenario_from_metadata(const std::string& metadata);

}  // namespace probeforce
