#include "doctest.h"

#include "probeforce/config.hpp"
#include "probeforce/io.hpp"

#include "json.hpp"

#include <cmath>
#include <sstream>

using namespace probeforce;
using nlohmann::json;

namespace {

const std::string kScenarios = std::string(PROBEFORCE_SOURCE_DIR) + "/data/scenarios/";

std::string error_of(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_scenario(text, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

json slider_json() { return json::parse(scenario_to_json(static_slider_defaults())); }

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("bundled scenario files load") {
    for (const char* name : {"static_slider", "pulsating", "estimation"}) {
      const auto c = load_scenario(kScenarios + name + ".json");
      CHECK(c.name == name);
    }
    const auto loop = load_loop(kScenarios + "loop.json");
    CHECK(loop.auto_tune);
    CHECK(loop.model.pi.kp == doctest::Approx(0.1155).epsilon(0.01));
    CHECK(loop.ratios == std::vector<double>{0.1, 0.5, 1.0, 2.0, 10.0});
  }

  TEST_CASE("round trip") {
    for (const auto& c : {static_slider_defaults(), pulsating_defaults(), estimation_defaults()}) {
      const std::string once = scenario_to_json(c);
      CHECK(scenario_to_json(parse_scenario(once)) == once);
    }
    ScenarioConfig r;
    r.environment.field = StiffnessField::ramp(2000, 4000, 0, 0.02, Region{-0.01, 0.03, -0.01, 0.01});
    r.environment.hertz = HertzParams{};
    r.controller.gains = PiGains{0.2, 3.0, 40.0};
    const std::string once = scenario_to_json(r);
    CHECK(scenario_to_json(parse_scenario(once)) == once);
  }

  TEST_CASE("unknown keys are rejected by path") {
    auto j = slider_json();
    j["controller"]["bogus"] = 1;
    CHECK(error_of(j.dump()).find("controller.bogus") != std::string::npos);
    auto k = slider_json();
    k["environment"]["field"]["patches"][2]["stifness"] = 5;
    CHECK(error_of(k.dump()).find("environment.field.patches[2].stifness") != std::string::npos);
    auto t = slider_json();
    t["top"] = true;
    CHECK(error_of(t.dump()).find("'top'") != std::string::npos);
  }

  TEST_CASE("schema version is checked") {
    auto j = slider_json();
    j["schema_version"] = 2;
    CHECK(error_of(j.dump()).find("schema_version") != std::string::npos);
    j.erase("schema_version");
    CHECK(error_of(j.dump()).find("schema_version") != std::string::npos);
  }

  TEST_CASE("type and value errors") {
    auto j = slider_json();
    j["duration"] = "long";
    CHECK(error_of(j.dump()).find("duration") != std::string::npos);
    auto k = slider_json();
    k["dt"] = -1.0;
    CHECK_FALSE(error_of(k.dump()).empty());
    CHECK(error_of("{ not json").find("invalid JSON") != std::string::npos);
    auto g = slider_json();
    g["controller"]["kp"] = 0.1;
    CHECK(error_of(g.dump()).find("kp") != std::string::npos);
  }

  TEST_CASE("overrides") {
    const std::string text = slider_json().dump();
    const auto c = parse_scenario(text, {"controller.adaptation=false", "seed=7", "traverse.speed=0.004",
                                         "environment.surface.amplitude=0.001"});
    CHECK_FALSE(c.controller.adaptation);
    CHECK(c.seed == 7);
    CHECK(c.traverse.speed == 0.004);
    CHECK(c.environment.surface.amplitude == 0.001);
    CHECK(error_of(text, {"controller.nope=1"}).find("controller.nope") != std::string::npos);
    CHECK(error_of(text, {"no_equals"}).find("key=value") != std::string::npos);
    CHECK(error_of(text, {"seed.x=1"}).find("not an object") != std::string::npos);
    CHECK(error_of(text, {"name=free text"}).empty());
  }

  TEST_CASE("missing file names the path") {
    try {
      load_scenario("/nonexistent/dir/scenario.json");
      FAIL("expected an error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("/nonexistent/dir/scenario.json") != std::string::npos);
    }
  }

  TEST_CASE("loop files") {
    const auto f = parse_loop(R"({"schema_version": 1, "loop": {"kp": 0.2, "ki": 2.0}, "ratios": [1, 3]})");
    CHECK_FALSE(f.auto_tune);
    CHECK(f.model.pi.kp == 0.2);
    CHECK(f.ratios == std::vector<double>{1.0, 3.0});
    CHECK_THROWS_AS(parse_loop(R"({"schema_version": 1, "loop": {"kp": 0.2}})"), ConfigError);
    CHECK_THROWS_AS(parse_loop(R"({"schema_version": 1, "ratios": [0, 1]})"), ConfigError);
    CHECK_THROWS_AS(parse_loop(R"({"schema_version": 1, "extra": 1})"), ConfigError);
    const auto again = parse_loop(loop_to_json(f));
    CHECK(loop_to_json(again) == loop_to_json(f));
  }

  TEST_CASE("estimator overrides") {
    const auto c = parse_estimator_overrides({"estimator.g=1e6", "estimator.adaptive_forgetting=false"});
    CHECK(c.g == 1e6);
    CHECK_FALSE(c.adaptive_forgetting);
    CHECK_THROWS_AS(parse_estimator_overrides({"controller.kp=1"}), ConfigError);
    CHECK_THROWS_AS(parse_estimator_overrides({"estimator.p0=-1"}), ConfigError);
  }

  TEST_CASE("run metadata carries the resolved config") {
    const auto c = pulsating_defaults();
    const std::string meta = run_metadata(c, PiGains{0.1, 4.0, 50.0});
    const auto j = json::parse(meta);
    CHECK(j["version"] == version());
    CHECK(j["gains"]["kp"] == 0.1);
    CHECK(j["filters"]["probe_bandpass"]["order"] == 301);
    CHECK(j["filters"]["probe_bandpass"]["band"][1] == 26.0);
    CHECK(j["filters"]["control_lowpass"]["kind"] == "lowpass");
    CHECK(scenario_to_json(scenario_from_metadata(meta)) == scenario_to_json(c));
    CHECK(meta.find('\n') == std::string::npos);
  }
}

TEST_SUITE("io") {
  TEST_CASE("number format") {
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_number(1.5) == "1.5");
    CHECK(format_number(1.0 / 3.0) == "0.333333333333");
    CHECK(format_number(1e-20) == "1e-20");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(-INFINITY) == "-inf");
  }

  TEST_CASE("trace round trip") {
    std::vector<TraceRecord> tr(3);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      auto& r = tr[i];
      r.t = 0.001 * i;
      r.F_raw = 5.0 + 1.0 / 3.0 * i;
      r.K_hat = 1234.5678901234;
      r.events = events::probe_invalid | events::no_estimate;
      r.pos_y = -0.02;
    }
    std::ostringstream os;
    write_trace_csv(os, tr, R"({"k":1})");
    const std::string text = os.str();
    CHECK(text.rfind("# {\"k\":1}\nt,x_e,z_s,delta,F_raw,F_filt,F_d,K_true,K_hat,D_hat,mu,residual,events,", 0) == 0);
    std::istringstream is(text);
    std::string meta;
    const auto back = read_trace_csv(is, &meta);
    CHECK(meta == R"({"k":1})");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back[i].F_raw == doctest::Approx(tr[i].F_raw).epsilon(1e-11));
      CHECK(back[i].K_hat == doctest::Approx(tr[i].K_hat).epsilon(1e-11));
      CHECK(back[i].events == tr[i].events);
      CHECK(back[i].pos_y == tr[i].pos_y);
    }
    CHECK(trace_columns().size() == 20);
  }

  TEST_CASE("plot stride") {
    std::vector<TraceRecord> tr(25);
    std::ostringstream os;
    write_plot_csv(os, tr, 10, "{}");
    std::size_t lines = 0;
    for (char c : os.str()) lines += c == '\n';
    CHECK(lines == 2 + 3);
  }

  TEST_CASE("sample files") {
    std::istringstream good("# meta\nt,delta,force,valid\n0,0.001,1,1\n0.001,0.002,2,0\n");
    const auto s = read_samples_csv(good);
    REQUIRE(s.size() == 2);
    CHECK(s[1].force == 2.0);
    CHECK_FALSE(s[1].valid);

    std::istringstream reordered("force,t,delta\n1,0,0.001\n");
    CHECK(read_samples_csv(reordered)[0].delta == 0.001);

    auto message = [](const std::string& text) {
      std::istringstream is(text);
      try {
        read_samples_csv(is);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message("t,delta,force\n0,1,1\n0.001,x,1\n").find("row 3") != std::string::npos);
    CHECK(message("t,delta,force\n0,1,1\n0.001,1\n").find("row 3") != std::string::npos);
    CHECK(message("t,delta,force\n0.1,1,1\n0.1,1,1\n").find("increase") != std::string::npos);
    CHECK(message("t,d,force\n").find("header") != std::string::npos);
    CHECK(message("").find("empty") != std::string::npos);
  }
}
