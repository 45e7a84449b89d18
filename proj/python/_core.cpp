#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <optional>
#include <stdexcept>

#include "binar/calibration.hpp"
#include "binar/dataprep.hpp"
#include "binar/error.hpp"
#include "binar/estimation.hpp"
#include "binar/model.hpp"
#include "binar/monitoring.hpp"

namespace py = pybind11;
using namespace binar;

namespace {

SeriesSample make_series(std::vector<int> x, std::optional<Eigen::MatrixXd> w) {
  SeriesSample s;
  s.x = std::move(x);
  s.w = w ? *w : Eigen::MatrixXd(static_cast<Eigen::Index>(s.x.size()) - 1, 0);
  return s;
}

void bind_errors(py::module_& m) {
  auto base = py::register_exception<Error>(m, "BinarError", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<SeparationError>(m, "SeparationError", base.ptr());
  py::register_exception<SingularHessianError>(m, "SingularHessianError", base.ptr());
  py::register_exception<NonConvergenceError>(m, "NonConvergenceError", base.ptr());
  py::register_exception<MonitorTerminatedError>(m, "MonitorTerminatedError", base.ptr());
  py::register_exception<ThresholdUnavailableError>(m, "ThresholdUnavailableError",
                                                     base.ptr());
}

void bind_model(py::module_& m) {
  py::class_<ParamVector>(m, "ParamVector")
      .def(py::init<Eigen::VectorXd>(), py::arg("values"))
      .def(py::init<double, double, const std::vector<double>&>(), py::arg("phi0"),
           py::arg("phi1"), py::arg("gamma") = std::vector<double>{})
      .def_property_readonly("phi0", &ParamVector::phi0)
      .def_property_readonly("phi1", &ParamVector::phi1)
      .def_property_readonly("values", &ParamVector::values)
      .def("__len__", &ParamVector::size)
      .def("__repr__", [](const ParamVector& b) {
        return "ParamVector(" + py::repr(py::cast(b.values())).cast<std::string>() + ")";
      });
  py::implicitly_convertible<Eigen::VectorXd, ParamVector>();

  py::class_<ExogenousSpec>(m, "ExogenousSpec")
      .def(py::init<>())
      .def_readwrite("mean", &ExogenousSpec::mean)
      .def_readwrite("sd", &ExogenousSpec::sd)
      .def_readwrite("clamp_lo", &ExogenousSpec::clamp_lo)
      .def_readwrite("clamp_hi", &ExogenousSpec::clamp_hi)
      .def_readwrite("dim", &ExogenousSpec::dim);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init<>())
      .def_readwrite("n", &ModelSpec::n)
      .def_readwrite("beta", &ModelSpec::beta)
      .def_readwrite("exo", &ModelSpec::exo)
      .def_readwrite("burn_in", &ModelSpec::burn_in)
      .def_readwrite("box_bound", &ModelSpec::box_bound)
      .def("validate", &ModelSpec::validate);
  m.def("benchmark_spec", &benchmark_spec);

  py::class_<SeriesSample>(m, "SeriesSample")
      .def(py::init(&make_series), py::arg("x"), py::arg("w") = std::nullopt)
      .def_readwrite("x", &SeriesSample::x)
      .def_readwrite("w", &SeriesSample::w)
      .def_readwrite("seed", &SeriesSample::seed)
      .def_property_readonly("length", &SeriesSample::length)
      .def("regressor", &SeriesSample::regressor, py::arg("t"));

  m.def("link_eval", &link_eval, py::arg("mu"), py::arg("n"));
  m.def("inverse_link", &inverse_link, py::arg("eta"), py::arg("n"));
  m.def("success_prob", &success_prob, py::arg("beta"), py::arg("z"));
  m.def("build_regressor", &build_regressor, py::arg("x_prev"), py::arg("w"));
  m.def(
      "simulate_series",
      [](const ModelSpec& spec, int length, std::uint64_t seed, std::optional<int> init) {
        return simulate_series(spec, length, seed, init);
      },
      py::arg("spec"), py::arg("length"), py::arg("seed"), py::arg("init") = std::nullopt);
  m.def(
      "stationary_oracle",
      [](const ModelSpec& spec, int w_quadrature) {
        const auto r = stationary_oracle(spec, w_quadrature);
        return py::make_tuple(r.transition, r.pmf);
      },
      py::arg("spec"), py::arg("w_quadrature") = 64);
}

void bind_estimation(py::module_& m) {
  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("score_tol", &SolverConfig::score_tol)
      .def_readwrite("step_tol", &SolverConfig::step_tol)
      .def_readwrite("max_iter", &SolverConfig::max_iter)
      .def_readwrite("box_bound", &SolverConfig::box_bound);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("beta_hat", &FitResult::beta_hat)
      .def_readonly("covariance", &FitResult::covariance)
      .def_readonly("sigma0_hat", &FitResult::sigma0_hat)
      .def_readonly("log_pl", &FitResult::log_pl)
      .def_readonly("aic", &FitResult::aic)
      .def_readonly("m", &FitResult::m)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("hit_boundary", &FitResult::hit_boundary)
      .def("standard_errors", &FitResult::standard_errors);

  m.def("log_partial_likelihood", &log_partial_likelihood, py::arg("series"), py::arg("n"),
        py::arg("beta"));
  m.def("score", &score, py::arg("series"), py::arg("n"), py::arg("beta"));
  m.def("score_gradient", &score_gradient, py::arg("series"), py::arg("n"), py::arg("beta"));
  m.def("fit_mple", &fit_mple, py::arg("series"), py::arg("n"),
        py::arg("config") = SolverConfig{});
  m.def("estimate_sigma0", &estimate_sigma0, py::arg("series"), py::arg("n"), py::arg("beta"));
}

void bind_calibration(py::module_& m) {
  py::enum_<CalibrationWeighting>(m, "CalibrationWeighting")
      .value("inverse_sigma", CalibrationWeighting::inverse_sigma)
      .value("identity", CalibrationWeighting::identity)
      .value("supplied", CalibrationWeighting::supplied);

  py::class_<CalibrationConfig>(m, "CalibrationConfig")
      .def(py::init<>())
      .def_readwrite("sigma", &CalibrationConfig::sigma)
      .def_readwrite("weighting", &CalibrationConfig::weighting)
      .def_readwrite("A", &CalibrationConfig::A)
      .def_readwrite("horizon", &CalibrationConfig::horizon)
      .def_readwrite("grid_m", &CalibrationConfig::grid_m)
      .def_readwrite("reps", &CalibrationConfig::reps)
      .def_readwrite("gammas", &CalibrationConfig::gammas)
      .def_readwrite("alphas", &CalibrationConfig::alphas)
      .def_readwrite("master_seed", &CalibrationConfig::master_seed)
      .def_readwrite("threads", &CalibrationConfig::threads);

  py::class_<ThresholdTable>(m, "ThresholdTable")
      .def(py::init<>())
      .def("at", &ThresholdTable::at, py::arg("gamma"), py::arg("alpha"))
      .def_property_readonly("cells",
                             [](const ThresholdTable& t) {
                               py::list out;
                               for (const auto& c : t.cells) {
                                 out.append(py::make_tuple(c.gamma, c.alpha, c.c));
                               }
                               return out;
                             })
      .def_readonly("reps", &ThresholdTable::reps)
      .def_readonly("grid_m", &ThresholdTable::grid_m)
      .def_readonly("horizon", &ThresholdTable::horizon)
      .def_readonly("seed", &ThresholdTable::seed);

  m.def("sample_sup_functional", &sample_sup_functional, py::arg("config"), py::arg("gamma"),
        py::arg("rep"));
  m.def(
      "compute_threshold",
      [](const CalibrationConfig& config, double gamma, double alpha) {
        const auto est = compute_threshold(config, gamma, alpha);
        return py::make_tuple(est.c, est.unstable);
      },
      py::arg("config"), py::arg("gamma"), py::arg("alpha"));
  m.def("threshold_table", &threshold_table, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
}

void bind_monitoring(py::module_& m) {
  m.def("rho", &rho, py::arg("s"), py::arg("gamma"));
  m.def("weight", &weight, py::arg("m"), py::arg("k"), py::arg("gamma"));

  py::enum_<WeightingPolicy>(m, "WeightingPolicy")
      .value("inverse_sigma0", WeightingPolicy::inverse_sigma0)
      .value("identity", WeightingPolicy::identity)
      .value("supplied", WeightingPolicy::supplied);

  py::class_<Monitor>(m, "Monitor")
      .def(py::init([](int n, const ParamVector& beta_hat, int m, double horizon, double gamma,
                       double threshold, const Eigen::MatrixXd& A, int x_last) {
             MonitorConfig cfg;
             cfg.m = m;
             cfg.horizon = horizon;
             cfg.gamma = gamma;
             cfg.threshold = threshold;
             cfg.A = A;
             return Monitor(n, beta_hat, std::move(cfg), x_last);
           }),
           py::arg("n"), py::arg("beta_hat"), py::arg("m"), py::arg("horizon"), py::arg("gamma"),
           py::arg("threshold"), py::arg("A"), py::arg("x_last"))
      .def(
          "update",
          [](Monitor& mon, int x, std::optional<Eigen::VectorXd> w) {
            return mon.update(x, w ? *w : Eigen::VectorXd(0));
          },
          py::arg("x"), py::arg("w") = std::nullopt)
      .def_property_readonly("k", &Monitor::k)
      .def_property_readonly("max_k", [](const Monitor& mon) { return mon.config().max_k(); })
      .def_property_readonly("running_sum", &Monitor::running_sum)
      .def_property_readonly("history", &Monitor::history)
      .def_property_readonly("alarm_at", &Monitor::alarm_at)
      .def_property_readonly("terminated", &Monitor::terminated)
      .def_property_readonly("A", [](const Monitor& mon) { return mon.config().A; })
      .def_property_readonly("threshold",
                             [](const Monitor& mon) { return mon.config().threshold; });

  m.def(
      "monitor_init",
      [](const SeriesSample& training, int n, double horizon, double gamma, double alpha,
         WeightingPolicy weighting, py::object threshold,
         std::optional<Eigen::MatrixXd> supplied_A) {
        MonitorOptions opts;
        opts.horizon = horizon;
        opts.gamma = gamma;
        opts.alpha = alpha;
        opts.weighting = weighting;
        if (supplied_A) opts.supplied_A = *supplied_A;
        if (py::isinstance<ThresholdTable>(threshold)) {
          opts.threshold = threshold.cast<ThresholdTable>();
        } else if (!threshold.is_none()) {
          opts.threshold = threshold.cast<double>();
        }
        auto setup = monitor_init(training, n, opts);
        return py::make_tuple(setup.fit, setup.monitor);
      },
      py::arg("training"), py::arg("n"), py::arg("horizon") = 3.0, py::arg("gamma") = 0.0,
      py::arg("alpha") = 0.05, py::arg("weighting") = WeightingPolicy::inverse_sigma0,
      py::arg("threshold") = py::none(), py::arg("supplied_A") = std::nullopt);
}

void bind_dataprep(py::module_& m) {
  py::class_<IidBinomialFit>(m, "IidBinomialFit")
      .def_readonly("pi_hat", &IidBinomialFit::pi_hat)
      .def_readonly("log_lik", &IidBinomialFit::log_lik)
      .def_readonly("aic", &IidBinomialFit::aic)
      .def_readonly("boundary", &IidBinomialFit::boundary);

  py::class_<ModelComparison>(m, "ModelComparison")
      .def_readonly("simple", &ModelComparison::simple)
      .def_readonly("ar1", &ModelComparison::ar1)
      .def_readonly("aic_simple", &ModelComparison::aic_simple)
      .def_readonly("aic_ar1", &ModelComparison::aic_ar1)
      .def_readonly("lr_stat", &ModelComparison::lr_stat)
      .def_readonly("p_value", &ModelComparison::p_value);

  m.def(
      "fit_iid_binomial",
      [](const std::vector<int>& x, int n) { return fit_iid_binomial(x, n); },
      py::arg("x"), py::arg("n"));
  m.def(
      "model_comparison",
      [](const std::vector<int>& x, int n) {
        BinomialSeries s;
        s.x = x;
        s.n = n;
        return model_comparison(s);
      },
      py::arg("x"), py::arg("n"));
  m.def("chi_square_sf", &chi_square_sf, py::arg("x"), py::arg("df"));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Binomial AR(1) estimation and sequential change-point monitoring";
  bind_errors(m);
  bind_model(m);
  bind_estimation(m);
  bind_calibration(m);
  bind_monitoring(m);
  bind_dataprep(m);
}
