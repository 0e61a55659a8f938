#include "probeforce/cli.hpp"

#include "probeforce/config.hpp"
#include "probeforce/io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace probeforce::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& dir, const std::string& name, const std::string& content) {
  std::ofstream f(dir / name, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + (dir / name).string() + "'");
  f << content;
}

template <class F>
int guarded(std::ostream& err, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
}

json metadata_base(const std::string& command) {
  return {{"tool", "probeforce"}, {"version", version()}, {"command", command}};
}

}  // namespace

int cmd_run(const std::string& path, const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ScenarioConfig cfg = load_scenario(path, opt.overrides);
    if (opt.seed) cfg.seed = *opt.seed;
    const ScenarioResult res = run_named(cfg);

    const std::string m = run_metadata(cfg, res.gains_used);
    const json meta = json::parse(m);

    const fs::path dir = prepare_out(opt.out);
    std::ostringstream trace, plot, probe;
    write_trace_csv(trace, res.trace, m);
    write_file(dir, "trace.csv", trace.str());
    const auto stride = static_cast<std::size_t>(std::max(1.0, std::round(0.01 / cfg.dt)));
    write_plot_csv(plot, res.trace, stride, m);
    write_file(dir, "plot.csv", plot.str());
    if (cfg.probe_enabled) {
      write_probe_csv(probe, res.probe_samples, m);
      write_file(dir, "probe.csv", probe.str());
    }
    json metrics = {{"rms_force_error", res.metrics.rms_force_error},
                    {"max_overshoot", res.metrics.max_overshoot},
                    {"settling_time", optional_json(res.metrics.settling_time)},
                    {"estimate_rel_error_rms", optional_json(res.metrics.estimate_rel_error_rms)}};
    json doc = {{"metadata", meta},
                {"status", res.status == RunStatus::ok ? "ok" : "unstable"},
                {"diagnostic", res.diagnostic},
                {"metrics", metrics},
                {"extras", res.extras}};
    write_file(dir, "metrics.json", doc.dump(2) + "\n");

    if (!opt.quiet) {
      out << "scenario " << cfg.name << ": " << res.trace.size() << " steps, status "
          << (res.status == RunStatus::ok ? "ok" : "unstable") << "\n";
      out << "  rms_force_error " << res.metrics.rms_force_error << " N, max_overshoot "
          << res.metrics.max_overshoot << " N\n";
      for (const auto& [k, v] : res.extras) out << "  " << k << " " << v << "\n";
      out << "  wrote " << dir.string() << "\n";
    }
    if (res.status != RunStatus::ok) {
      err << "unstable run: " << res.diagnostic << "\n";
      return static_cast<int>(kUnstable);
    }
    return static_cast<int>(kOk);
  });
}

int cmd_margins(const std::string& path, const std::optional<std::vector<double>>& ratios,
                const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    LoopFile lf = load_loop(path, opt.overrides);
    if (ratios) lf.ratios = *ratios;
    if (lf.ratios.empty()) throw ConfigError("ratio grid is empty");
    for (double q : lf.ratios)
      if (!(q > 0.0)) throw ConfigError("ratios must be > 0");
    const auto rows = margin_sweep(lf.model, lf.ratios, lf.sweep);

    json meta = metadata_base("margins");
    meta["config"] = json::parse(loop_to_json(lf));
    meta["gains"] = {{"kp", lf.model.pi.kp}, {"ki", lf.model.pi.ki}, {"auto_tuned", lf.auto_tune}};
    const fs::path dir = prepare_out(opt.out);
    std::ostringstream bode_csv;
    bode_csv << "# " << meta.dump() << "\n" << "ratio,f,magnitude_db,phase_deg,valid\n";
    const auto freqs = logspace(lf.sweep.f_lo, lf.sweep.f_hi, lf.sweep.points);
    json jrows = json::array();
    for (const auto& r : rows) {
      for (const auto& p : bode(compose_open_loop(with_ratio(lf.model, r.ratio)), freqs))
        bode_csv << format_number(r.ratio) << "," << format_number(p.f) << "," << format_number(p.magnitude_db)
                 << "," << format_number(p.phase_deg) << "," << (p.valid ? 1 : 0) << "\n";
      jrows.push_back({{"ratio", r.ratio},
                       {"gain_margin_db", optional_json(r.report.gain_margin_db)},
                       {"phase_margin_deg", optional_json(r.report.phase_margin_deg)},
                       {"gain_crossover_hz", optional_json(r.report.gain_crossover)},
                       {"phase_crossover_hz", optional_json(r.report.phase_crossover)},
                       {"stable", r.report.stable}});
    }
    write_file(dir, "bode.csv", bode_csv.str());
    json doc = {{"metadata", meta}, {"rows", jrows}, {"gain_margin_monotone", gain_margin_monotone(rows)}};
    write_file(dir, "margins.json", doc.dump(2) + "\n");

    if (!opt.quiet) {
      out << "kp " << lf.model.pi.kp << "  ki " << lf.model.pi.ki << "\n";
      out << std::setw(8) << "ratio" << std::setw(12) << "GM [dB]" << std::setw(12) << "PM [deg]"
          << std::setw(10) << "stable" << "\n";
      auto cell = [](const std::optional<double>& v) {
        std::ostringstream s;
        if (v) s << std::fixed << std::setprecision(2) << *v;
        else s << "inf";
        return s.str();
      };
      for (const auto& r : rows)
        out << std::setw(8) << r.ratio << std::setw(12) << cell(r.report.gain_margin_db) << std::setw(12)
            << cell(r.report.phase_margin_deg) << std::setw(10) << (r.report.stable ? "yes" : "no") << "\n";
    }
    return static_cast<int>(kOk);
  });
}

int cmd_estimate(const std::string& path, const Options& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file '" + path + "'");
    const auto samples = read_samples_csv(in);
    if (samples.size() < 3) throw ConfigError("insufficient data: need at least 3 samples, got " + std::to_string(samples.size()));
    std::vector<double> dts;
    for (std::size_t i = 1; i < samples.size(); ++i) dts.push_back(samples[i].t - samples[i - 1].t);
    std::nth_element(dts.begin(), dts.begin() + static_cast<std::ptrdiff_t>(dts.size() / 2), dts.end());
    const double T = dts[dts.size() / 2];

    RlsConfig rc = parse_estimator_overrides(opt.overrides);
    rc.sample_period = T;
    ImpedanceEstimator est(rc);
    std::vector<EstimateRow> rows;
    std::vector<RegressorSample> regs;
    const SampleRow* prev = nullptr;
    for (const auto& s : samples) {
      if (auto e = est.update(s.t, s.delta, s.force, s.valid))
        rows.push_back({s.t, e->stiffness, e->damping, est.state().mu, e->residual});
      if (prev && prev->valid && s.valid)
        if (auto r = make_regressor(s.force, prev->force, s.delta, prev->delta)) regs.push_back(*r);
      prev = &s;
    }
    if (rows.empty()) throw ConfigError("insufficient data: no consecutive valid samples");
    const Eigen::Vector2d theta = batch_ls(regs);
    const auto batch = recover_impedance(theta, T);

    json meta = metadata_base("estimate");
    meta["input"] = path;
    meta["estimator"] = json::parse(estimator_to_json(rc));
    meta["sample_period"] = T;
    const fs::path dir = prepare_out(opt.out);
    std::ostringstream csv;
    write_estimates_csv(csv, rows, meta.dump());
    write_file(dir, "estimates.csv", csv.str());
    json doc = {{"metadata", meta},
                {"samples", samples.size()},
                {"regressors", regs.size()},
                {"batch", {{"A", theta(0)}, {"B", theta(1)}, {"stiffness", batch.stiffness}, {"damping", batch.damping}, {"physical", batch.physical}}},
                {"rls_final", {{"stiffness", rows.back().K_hat}, {"damping", rows.back().D_hat}}}};
    write_file(dir, "batch.json", doc.dump(2) + "\n");
    if (!opt.quiet) {
      out << "RLS final   K " << rows.back().K_hat << " N/m, D " << rows.back().D_hat << " N s/m\n";
      out << "batch LS    K " << batch.stiffness << " N/m, D " << batch.damping << " N s/m\n";
      out << "  wrote " << dir.string() << "\n";
    }
    return static_cast<int>(kOk);
  });
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probe-based impedance estimation and adaptive admittance force control"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());
  Options opt;
  std::string path;
  std::vector<double> ratios;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", opt.out, "Output directory")->capture_default_str();
    sub->add_option("--set", opt.overrides, "Config override key=value (repeatable)");
    sub->add_option("--seed", opt.seed, "Random seed override");
    sub->add_flag("--quiet", opt.quiet, "Suppress the summary");
  };
  auto* run = app.add_subcommand("run", "Run a scenario config");
  run->add_option("scenario", path, "Scenario JSON")->required();
  add_common(run);
  auto* mar = app.add_subcommand("margins", "Bode sweep and stability margins over K_hat/K ratios");
  mar->add_option("loop_config", path, "Loop model JSON")->required();
  auto* ratio_opt = mar->add_option("--ratios", ratios, "Ratios K_hat/K_E (comma separated)")->delimiter(',');
  add_common(mar);
  auto* estc = app.add_subcommand("estimate", "Replay recorded (t, delta, force) samples through RLS");
  estc->add_option("samples", path, "Samples CSV")->required();
  add_common(estc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << version() << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }
  if (*run) return cmd_run(path, opt, out, err);
  if (*mar) {
    std::optional<std::vector<double>> r;
    if (ratio_opt->count() > 0) {
      r = ratios;
      if (ratios.empty()) {
        err << "usage error: --ratios is empty\n";
        return kUsage;
      }
    }
    return cmd_margins(path, r, opt, out, err);
  }
  return cmd_estimate(path, opt, out, err);
}

}  // namespace probeforce::cli
