#include "probeforce/config.hpp"
#include "probeforce/contact.hpp"
#include "probeforce/estimator.hpp"
#include "probeforce/io.hpp"
#include "probeforce/signal.hpp"
#include "probeforce/sim.hpp"
#include "probeforce/stability.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace probeforce;

namespace {

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["rms_force_error"] = m.rms_force_error;
  d["max_overshoot"] = m.max_overshoot;
  d["settling_time"] = m.settling_time ? py::cast(*m.settling_time) : py::none();
  d["estimate_rel_error_rms"] = m.estimate_rel_error_rms ? py::cast(*m.estimate_rel_error_rms) : py::none();
  return d;
}

py::dict trace_dict(const std::vector<TraceRecord>& tr) {
  auto column = [&](auto member) {
    py::array_t<double> a(static_cast<py::ssize_t>(tr.size()));
    auto v = a.mutable_unchecked<1>();
    for (std::size_t i = 0; i < tr.size(); ++i) v(static_cast<py::ssize_t>(i)) = static_cast<double>(tr[i].*member);
    return a;
  };
  py::dict d;
  d["t"] = column(&TraceRecord::t);
  d["x_e"] = column(&TraceRecord::x_e);
  d["z_s"] = column(&TraceRecord::z_s);
  d["delta"] = column(&TraceRecord::delta);
  d["F_raw"] = column(&TraceRecord::F_raw);
  d["F_filt"] = column(&TraceRecord::F_filt);
  d["F_d"] = column(&TraceRecord::F_d);
  d["K_true"] = column(&TraceRecord::K_true);
  d["K_hat"] = column(&TraceRecord::K_hat);
  d["D_hat"] = column(&TraceRecord::D_hat);
  d["mu"] = column(&TraceRecord::mu);
  d["residual"] = column(&TraceRecord::residual);
  d["events"] = column(&TraceRecord::events);
  return d;
}

py::dict run_config(const ScenarioConfig& cfg) {
  ScenarioResult r;
  {
    py::gil_scoped_release release;
    r = run_named(cfg);
  }
  py::dict out;
  out["status"] = r.status == RunStatus::ok ? "ok" : "unstable";
  out["diagnostic"] = r.diagnostic;
  out["metrics"] = metrics_dict(r.metrics);
  out["extras"] = r.extras;
  out["metadata"] = run_metadata(cfg, r.gains_used);
  out["trace"] = trace_dict(r.trace);
  return out;
}

py::dict margin_dict(const MarginReport& m) {
  py::dict d;
  auto opt = [](const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); };
  d["gain_margin_db"] = opt(m.gain_margin_db);
  d["phase_margin_deg"] = opt(m.phase_margin_deg);
  d["gain_crossover"] = opt(m.gain_crossover);
  d["phase_crossover"] = opt(m.phase_crossover);
  d["stable"] = m.stable;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive force control with impedance probing";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("version", &version);

  m.def(
      "hertz_force",
      [](double depth, double radius, double young, double poisson) {
        return hertz_force(HertzParams{radius, young, poisson}, depth);
      },
      py::arg("depth"), py::arg("radius") = 0.01, py::arg("young_modulus") = 5e4, py::arg("poisson_ratio") = 0.5);
  m.def(
      "hertz_tangent_stiffness",
      [](double depth, double radius, double young, double poisson) {
        return hertz_tangent_stiffness(HertzParams{radius, young, poisson}, depth);
      },
      py::arg("depth"), py::arg("radius") = 0.01, py::arg("young_modulus") = 5e4, py::arg("poisson_ratio") = 0.5);

  m.def(
      "design_lowpass", [](double cutoff, double fs, std::size_t order) { return design_lowpass(cutoff, fs, order).taps; },
      py::arg("cutoff"), py::arg("sample_rate") = 1000.0, py::arg("order") = kDefaultLowpassTaps);
  m.def(
      "design_bandpass",
      [](double lo, double hi, double fs, std::size_t order) { return design_bandpass(lo, hi, fs, order).taps; },
      py::arg("f_lo"), py::arg("f_hi"), py::arg("sample_rate") = 1000.0, py::arg("order") = kDefaultBandpassTaps);
  m.def("convolve", &convolve, py::arg("taps"), py::arg("x"), "Causal FIR output, same length as x.");

  m.def("impedance_to_theta", &impedance_to_theta, py::arg("stiffness"), py::arg("damping"), py::arg("period"));
  m.def(
      "recover_impedance",
      [](const Eigen::Vector2d& theta, double T) {
        const auto e = recover_impedance(theta, T);
        return py::make_tuple(e.stiffness, e.damping);
      },
      py::arg("theta"), py::arg("period"));

  py::class_<ImpedanceEstimator>(m, "ImpedanceEstimator")
      .def(py::init([](double p0, double g, bool adaptive, double lambda, double period) {
             RlsConfig c;
             c.p0 = p0;
             c.g = g;
             c.adaptive_forgetting = adaptive;
             c.fixed_lambda = lambda;
             c.sample_period = period;
             c.validate();
             return ImpedanceEstimator(c);
           }),
           py::arg("p0") = 1e9, py::arg("g") = 1e7, py::arg("adaptive_forgetting") = true,
           py::arg("fixed_lambda") = 0.999, py::arg("sample_period") = 1e-3)
      .def(
          "update",
          [](ImpedanceEstimator& e, double t, double d, double F, bool valid) -> py::object {
            const auto est = e.update(t, d, F, valid);
            if (!est) return py::none();
            return py::make_tuple(est->stiffness, est->damping);
          },
          py::arg("t"), py::arg("displacement"), py::arg("force"), py::arg("valid") = true)
      .def_property_readonly("theta", [](const ImpedanceEstimator& e) { return Eigen::Vector2d(e.state().theta); })
      .def_property_readonly("updates", &ImpedanceEstimator::updates);

  m.def(
      "margins",
      [](double ratio, std::optional<double> kp, std::optional<double> ki) {
        LoopModel model;
        model.pi = (kp && ki) ? PiGains{*kp, *ki, 50.0}
                              : tune_pi_critical(model.natural_frequency, model.damping_ratio, model.delay).gains;
        return margin_dict(margins(compose_open_loop(with_ratio(model, ratio))));
      },
      py::arg("ratio") = 1.0, py::arg("kp") = py::none(), py::arg("ki") = py::none(),
      "Gain and phase margins of the default loop at a stiffness ratio K_hat / K_E.");
  m.def(
      "tune_pi",
      [](double w, double zeta, double delay) {
        const auto t = tune_pi_critical(w, zeta, delay);
        return py::make_tuple(t.gains.kp, t.gains.ki);
      },
      py::arg("natural_frequency") = 300.0, py::arg("damping_ratio") = 0.9, py::arg("delay") = 0.1);

  m.def(
      "run_scenario",
      [](const std::string& path, const std::vector<std::string>& overrides) {
        return run_config(load_scenario(path, overrides));
      },
      py::arg("path"), py::arg("overrides") = std::vector<std::string>{});
  m.def(
      "run_scenario_json",
      [](const std::string& text, const std::vector<std::string>& overrides) {
        return run_config(parse_scenario(text, overrides));
      },
      py::arg("text"), py::arg("overrides") = std::vector<std::string>{});
}
