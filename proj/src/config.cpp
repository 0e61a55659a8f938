#include "probeforce/config.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace probeforce {

using nlohmann::json;

namespace {

// Strict view of a JSON object: every key must be consumed before finish().
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("wrong type for key '" + child(key) + "'");
    }
  }

  template <class T>
  void get_opt(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  void mark(const std::string& key) { seen_.insert(key); }

  Reader sub(const std::string& key) {
    seen_.insert(key);
    return Reader(j_.at(key), child(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + child(k) + "'");
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "document" : "'" + path_ + "'"; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto rethrow_as_config(const std::string& ctx, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

void apply_override(json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + spec + "' is not key=value");
  const std::string key = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);
  json* node = &doc;
  std::string walked;
  std::size_t pos = 0;
  while (true) {
    const auto dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    walked += (walked.empty() ? "" : ".") + part;
    if (!node->is_object()) throw ConfigError("override key '" + key + "': '" + walked + "' is not an object");
    if (dot == std::string::npos) {
      json v;
      try {
        v = json::parse(value);
      } catch (const json::parse_error&) {
        v = value;
      }
      (*node)[part] = v;
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    pos = dot + 1;
  }
}

void check_schema(Reader& r) {
  int version = 0;
  r.get("schema_version", version);
  if (version != kSchemaVersion)
    throw ConfigError("schema_version must be " + std::to_string(kSchemaVersion) + " (got " + std::to_string(version) + ")");
}

Region read_region(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("'" + path + "' must be [x_min, x_max, y_min, y_max]");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  } catch (const json::exception&) {
    throw ConfigError("'" + path + "' must hold numbers");
  }
}

json region_json(const Region& r) { return json::array({r.x_min, r.x_max, r.y_min, r.y_max}); }

StiffnessField read_field(Reader r) {
  double blend = 0.002;
  r.get("blend_width", blend);
  std::optional<TemporalModulation> mod;
  if (r.has("modulation")) {
    Reader m = r.sub("modulation");
    TemporalModulation tm;
    m.get("depth", tm.depth);
    m.get("frequency", tm.frequency);
    m.finish();
    mod = tm;
  } else {
    r.mark("modulation");
  }
  const int kinds = int(r.has("patches")) + int(r.has("strips")) + int(r.has("ramp"));
  if (kinds != 1) throw ConfigError(r.where() + " needs exactly one of 'patches', 'strips', 'ramp'");
  StiffnessField f;
  if (r.has("patches")) {
    const json& arr = r.raw("patches");
    if (!arr.is_array() || arr.empty()) throw ConfigError("'" + r.child("patches") + "' must be a non-empty array");
    std::vector<Patch> patches;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Reader p(arr[i], r.child("patches") + "[" + std::to_string(i) + "]");
      Patch patch;
      patch.region = read_region(p.raw("region"), p.child("region"));
      p.get("stiffness", patch.params.stiffness);
      p.get("damping", patch.params.damping);
      p.finish();
      patches.push_back(patch);
    }
    f = rethrow_as_config(r.where(), [&] { return StiffnessField(patches, blend, mod); });
  } else if (r.has("strips")) {
    Reader s = r.sub("strips");
    std::vector<double> k;
    double x0 = 0.0, width = 0.03, y_min = -0.02, y_max = 0.02, damping = 0.0;
    s.get("stiffness", k);
    s.get("x0", x0);
    s.get("width", width);
    s.get("y_min", y_min);
    s.get("y_max", y_max);
    s.get("damping", damping);
    s.finish();
    if (k.empty()) throw ConfigError("'" + s.child("stiffness") + "' must be a non-empty array");
    std::vector<Patch> patches;
    for (std::size_t i = 0; i < k.size(); ++i) {
      const double lo = x0 + width * static_cast<double>(i);
      patches.push_back({Region{lo, lo + width, y_min, y_max}, {k[i], damping}});
    }
    f = rethrow_as_config(r.where(), [&] { return StiffnessField(patches, blend, mod); });
  } else {
    Reader s = r.sub("ramp");
    double k0 = 0, k1 = 0, x0 = 0, x1 = 0, damping = 0;
    s.get("k0", k0);
    s.get("k1", k1);
    s.get("x0", x0);
    s.get("x1", x1);
    s.get("damping", damping);
    const Region b = read_region(s.raw("bounds"), s.child("bounds"));
    s.finish();
    f = rethrow_as_config(r.where(), [&] { return StiffnessField::ramp(k0, k1, x0, x1, b, damping); });
  }
  r.finish();
  return f;
}

json field_json(const StiffnessField& f) {
  json j;
  j["blend_width"] = f.blend_width();
  if (f.modulation()) j["modulation"] = {{"depth", f.modulation()->depth}, {"frequency", f.modulation()->frequency}};
  if (const auto& rp = f.ramp_params()) {
    j["ramp"] = {{"k0", rp->k0}, {"k1", rp->k1}, {"x0", rp->x0}, {"x1", rp->x1},
                 {"damping", rp->damping}, {"bounds", region_json(f.bounds())}};
    return j;
  }
  json arr = json::array();
  for (const auto& p : f.patches())
    arr.push_back({{"region", region_json(p.region)}, {"stiffness", p.params.stiffness}, {"damping", p.params.damping}});
  j["patches"] = arr;
  return j;
}

json rls_json(const RlsConfig& c) {
  return {{"theta0", {c.theta0(0), c.theta0(1)}},
          {"p0", c.p0},
          {"g", c.g},
          {"g_max", c.g_max},
          {"J", {{c.J(0, 0), c.J(0, 1)}, {c.J(1, 0), c.J(1, 1)}}},
          {"innovation_scale", c.innovation_scale},
          {"adaptive_forgetting", c.adaptive_forgetting},
          {"fixed_lambda", c.fixed_lambda}};
}

RlsConfig read_rls(Reader r) {
  RlsConfig c;
  std::vector<double> th{c.theta0(0), c.theta0(1)};
  std::vector<std::vector<double>> J{{c.J(0, 0), c.J(0, 1)}, {c.J(1, 0), c.J(1, 1)}};
  r.get("theta0", th);
  r.get("p0", c.p0);
  r.get("g", c.g);
  r.get("g_max", c.g_max);
  r.get("J", J);
  r.get("innovation_scale", c.innovation_scale);
  r.get("adaptive_forgetting", c.adaptive_forgetting);
  r.get("fixed_lambda", c.fixed_lambda);
  r.finish();
  if (th.size() != 2) throw ConfigError("'" + r.child("theta0") + "' must have 2 entries");
  if (J.size() != 2 || J[0].size() != 2 || J[1].size() != 2) throw ConfigError("'" + r.child("J") + "' must be 2x2");
  c.theta0 = {th[0], th[1]};
  c.J << J[0][0], J[0][1], J[1][0], J[1][1];
  rethrow_as_config(r.where(), [&] {
    c.validate();
    return 0;
  });
  return c;
}

ScenarioConfig read_scenario(const json& doc) {
  Reader r(doc, "");
  check_schema(r);
  ScenarioConfig c;
  r.get("name", c.name);
  r.get("duration", c.duration);
  r.get("dt", c.dt);
  r.get("force_reference", c.force_reference);
  r.get("noise", c.noise);
  r.get("seed", c.seed);
  r.get("force_floor", c.force_floor);
  r.get("metrics_skip_fraction", c.metrics_skip_fraction);
  r.get("abort_factor", c.abort_factor);
  r.get("transition_pad", c.transition_pad);

  if (r.has("environment")) {
    Reader e = r.sub("environment");
    if (e.has("field")) c.environment.field = read_field(e.sub("field"));
    if (e.has("surface")) {
      Reader s = e.sub("surface");
      s.get("amplitude", c.environment.surface.amplitude);
      s.get("frequency", c.environment.surface.frequency);
      s.get("rest_height", c.environment.surface.rest_height);
      s.finish();
    }
    if (e.has("hertz")) {
      Reader h = e.sub("hertz");
      HertzParams hp;
      h.get("effective_radius", hp.effective_radius);
      h.get("young_modulus", hp.young_modulus);
      h.get("poisson_ratio", hp.poisson_ratio);
      h.finish();
      c.environment.hertz = hp;
    } else {
      e.mark("hertz");
    }
    e.get("unilateral", c.environment.unilateral);
    e.finish();
  }

  if (r.has("probe")) {
    Reader p = r.sub("probe");
    auto& pc = c.probe;
    std::vector<double> band{pc.band_lo, pc.band_hi};
    p.get("enabled", c.probe_enabled);
    p.get("frequency", pc.frequency);
    p.get("amplitude", pc.amplitude);
    p.get("probe_radius", pc.probe_radius);
    p.get("tool_radius", pc.tool_radius);
    p.get("band", band);
    p.get("taps", pc.taps);
    p.finish();
    if (band.size() != 2) throw ConfigError("'probe.band' must be [f_lo, f_hi]");
    pc.band_lo = band[0];
    pc.band_hi = band[1];
  }

  if (r.has("estimator")) c.estimator = read_rls(r.sub("estimator"));

  if (r.has("controller")) {
    Reader k = r.sub("controller");
    auto& cc = c.controller;
    std::optional<double> kp, ki;
    k.get("enabled", cc.enabled);
    k.get_opt("kp", kp);
    k.get_opt("ki", ki);
    k.get("integral_limit", cc.integral_limit);
    k.get("adaptation", cc.adaptation);
    k.get("fixed_stiffness", cc.fixed_stiffness);
    k.get_opt("initial_stiffness", cc.initial_stiffness);
    k.get("stiffness_floor", cc.stiffness_floor);
    k.get("slew_rate", cc.slew_rate);
    k.get("warmup", cc.warmup);
    k.get("accept_after", cc.accept_after);
    k.get("natural_frequency", cc.natural_frequency);
    k.get("damping_ratio", cc.damping_ratio);
    k.get("delay", cc.delay);
    k.get("lowpass", cc.lowpass);
    k.get("lowpass_cutoff", cc.lowpass_cutoff);
    k.get("lowpass_taps", cc.lowpass_taps);
    k.get("hold_depth", cc.hold_depth);
    k.finish();
    if (kp.has_value() != ki.has_value())
      throw ConfigError("'controller.kp' and 'controller.ki' must be given together (or both omitted to auto-tune)");
    if (kp) cc.gains = PiGains{*kp, *ki, cc.integral_limit};
  }

  if (r.has("traverse")) {
    Reader t = r.sub("traverse");
    std::vector<double> from{c.traverse.x0, c.traverse.y0}, to{c.traverse.x1, c.traverse.y1};
    t.get("from", from);
    t.get("to", to);
    t.get("speed", c.traverse.speed);
    t.get("start_time", c.traverse.start_time);
    t.finish();
    if (from.size() != 2 || to.size() != 2) throw ConfigError("'traverse.from' and 'traverse.to' must be [x, y]");
    c.traverse.x0 = from[0];
    c.traverse.y0 = from[1];
    c.traverse.x1 = to[0];
    c.traverse.y1 = to[1];
  }

  if (r.has("arm")) {
    Reader a = r.sub("arm");
    a.get("enabled", c.arm.enabled);
    a.get("q0", c.arm.q0);
    a.finish();
  }
  r.finish();
  rethrow_as_config("invalid scenario", [&] {
    c.validate();
    return 0;
  });
  return c;
}

json scenario_json(const ScenarioConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = c.name;
  j["duration"] = c.duration;
  j["dt"] = c.dt;
  j["force_reference"] = c.force_reference;
  j["noise"] = c.noise;
  j["seed"] = c.seed;
  j["force_floor"] = c.force_floor;
  j["metrics_skip_fraction"] = c.metrics_skip_fraction;
  j["abort_factor"] = c.abort_factor;
  j["transition_pad"] = c.transition_pad;
  const auto& e = c.environment;
  j["environment"] = {{"field", field_json(e.field)},
                      {"surface", {{"amplitude", e.surface.amplitude}, {"frequency", e.surface.frequency}, {"rest_height", e.surface.rest_height}}},
                      {"unilateral", e.unilateral}};
  if (e.hertz)
    j["environment"]["hertz"] = {{"effective_radius", e.hertz->effective_radius},
                                 {"young_modulus", e.hertz->young_modulus},
                                 {"poisson_ratio", e.hertz->poisson_ratio}};
  const auto& p = c.probe;
  j["probe"] = {{"enabled", c.probe_enabled}, {"frequency", p.frequency}, {"amplitude", p.amplitude},
                {"probe_radius", p.probe_radius}, {"tool_radius", p.tool_radius},
                {"band", {p.band_lo, p.band_hi}}, {"taps", p.taps}};
  j["estimator"] = rls_json(c.estimator);
  const auto& k = c.controller;
  json cj = {{"enabled", k.enabled}, {"integral_limit", k.integral_limit}, {"adaptation", k.adaptation},
             {"fixed_stiffness", k.fixed_stiffness}, {"stiffness_floor", k.stiffness_floor},
             {"slew_rate", k.slew_rate}, {"warmup", k.warmup}, {"accept_after", k.accept_after},
             {"natural_frequency", k.natural_frequency}, {"damping_ratio", k.damping_ratio},
             {"delay", k.delay}, {"lowpass", k.lowpass}, {"lowpass_cutoff", k.lowpass_cutoff},
             {"lowpass_taps", k.lowpass_taps}, {"hold_depth", k.hold_depth}};
  if (k.gains) {
    cj["kp"] = k.gains->kp;
    cj["ki"] = k.gains->ki;
  }
  if (k.initial_stiffness) cj["initial_stiffness"] = *k.initial_stiffness;
  j["controller"] = cj;
  j["traverse"] = {{"from", {c.traverse.x0, c.traverse.y0}}, {"to", {c.traverse.x1, c.traverse.y1}},
                   {"speed", c.traverse.speed}, {"start_time", c.traverse.start_time}};
  j["arm"] = {{"enabled", c.arm.enabled}, {"q0", c.arm.q0}};
  return j;
}

json apply_all(json doc, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) apply_override(doc, o);
  return doc;
}

LoopFile read_loop(const json& doc) {
  Reader r(doc, "");
  check_schema(r);
  LoopFile f;
  if (r.has("loop")) {
    Reader l = r.sub("loop");
    std::optional<double> kp, ki;
    l.get_opt("kp", kp);
    l.get_opt("ki", ki);
    l.get("integral_limit", f.model.pi.integral_limit);
    l.get("true_stiffness", f.model.true_stiffness);
    l.get("natural_frequency", f.model.natural_frequency);
    l.get("damping_ratio", f.model.damping_ratio);
    l.get("delay", f.model.delay);
    l.finish();
    if (kp.has_value() != ki.has_value()) throw ConfigError("'loop.kp' and 'loop.ki' must be given together");
    if (kp) {
      f.model.pi.kp = *kp;
      f.model.pi.ki = *ki;
      f.auto_tune = false;
    }
  }
  if (r.has("sweep")) {
    Reader s = r.sub("sweep");
    s.get("f_lo", f.sweep.f_lo);
    s.get("f_hi", f.sweep.f_hi);
    s.get("points", f.sweep.points);
    s.finish();
  }
  r.get("ratios", f.ratios);
  r.finish();
  if (!(f.sweep.f_lo > 0.0) || !(f.sweep.f_hi > f.sweep.f_lo) || f.sweep.points < 2)
    throw ConfigError("sweep must satisfy 0 < f_lo < f_hi and points >= 2");
  for (double q : f.ratios)
    if (!(q > 0.0)) throw ConfigError("ratios must be > 0");
  if (f.auto_tune) {
    rethrow_as_config("loop tuning", [&] {
      f.model.pi = tune_pi_critical(f.model.natural_frequency, f.model.damping_ratio, f.model.delay,
                                    f.model.pi.integral_limit).gains;
      return 0;
    });
  }
  f.model.compliance_est = 1.0 / f.model.true_stiffness;
  rethrow_as_config("invalid loop model", [&] {
    f.model.validate();
    return 0;
  });
  return f;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioConfig parse_scenario(const std::string& text, const std::vector<std::string>& overrides) {
  return read_scenario(apply_all(parse_text(text), overrides));
}

ScenarioConfig load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
  try {
    return parse_scenario(read_text_file(path), overrides);
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.find(path) != std::string::npos) throw;
    throw ConfigError(path + ": " + msg);
  }
}

std::string scenario_to_json(const ScenarioConfig& cfg, int indent) { return scenario_json(cfg).dump(indent); }

LoopFile parse_loop(const std::string& text, const std::vector<std::string>& overrides) {
  return read_loop(apply_all(parse_text(text), overrides));
}

LoopFile load_loop(const std::string& path, const std::vector<std::string>& overrides) {
  try {
    return parse_loop(read_text_file(path), overrides);
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.find(path) != std::string::npos) throw;
    throw ConfigError(path + ": " + msg);
  }
}

std::string loop_to_json(const LoopFile& f, int indent) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["loop"] = {{"integral_limit", f.model.pi.integral_limit}, {"true_stiffness", f.model.true_stiffness},
               {"natural_frequency", f.model.natural_frequency}, {"damping_ratio", f.model.damping_ratio},
               {"delay", f.model.delay}};
  if (!f.auto_tune) {
    j["loop"]["kp"] = f.model.pi.kp;
    j["loop"]["ki"] = f.model.pi.ki;
  }
  j["sweep"] = {{"f_lo", f.sweep.f_lo}, {"f_hi", f.sweep.f_hi}, {"points", f.sweep.points}};
  j["ratios"] = f.ratios;
  return j.dump(indent);
}

RlsConfig parse_estimator_overrides(const std::vector<std::string>& overrides) {
  json doc = {{"estimator", json::object()}};
  for (const auto& o : overrides) {
    if (o.rfind("estimator.", 0) != 0) throw ConfigError("override '" + o + "' does not apply to the estimator");
    apply_override(doc, o);
  }
  Reader r(doc, "");
  RlsConfig c = read_rls(r.sub("estimator"));
  r.finish();
  return c;
}

std::string estimator_to_json(const RlsConfig& c, int indent) { return rls_json(c).dump(indent); }

namespace {

json filter_json(const FirSpec& s) {
  return {{"kind", s.kind == FirKind::lowpass ? "lowpass" : "bandpass"},
          {"band", {s.f_lo, s.f_hi}},
          {"order", s.order()},
          {"fs", s.sample_rate}};
}

}  // namespace

std::string run_metadata(const ScenarioConfig& cfg, const std::optional<PiGains>& gains) {
  json meta = {{"tool", "probeforce"}, {"version", PROBEFORCE_VERSION}, {"command", "run"}};
  meta["config"] = json::parse(scenario_to_json(cfg));
  if (gains) meta["gains"] = {{"kp", gains->kp}, {"ki", gains->ki}, {"integral_limit", gains->integral_limit}};
  json filters = json::object();
  if (cfg.probe_enabled) {
    ProbeConfig pc = cfg.probe;
    pc.sample_rate = 1.0 / cfg.dt;
    filters["probe_bandpass"] = filter_json(pc.bandpass());
  }
  if (cfg.controller.enabled && cfg.controller.lowpass)
    filters["control_lowpass"] =
        filter_json(design_lowpass(cfg.controller.lowpass_cutoff, 1.0 / cfg.dt, cfg.controller.lowpass_taps));
  meta["filters"] = filters;
  return meta.dump();
}

ScenarioConfig scenario_from_metadata(const std::string& metadata) {
  const json meta = parse_text(metadata);
  if (!meta.is_object() || !meta.contains("config")) throw ConfigError("metadata has no 'config' object");
  return parse_scenario(meta.at("config").dump());
}

}  // namespace probeforce
