#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "prcd/calibration.hpp"
#include "prcd/datagen.hpp"
#include "prcd/evaluation.hpp"
#include "prcd/harness.hpp"
#include "prcd/io.hpp"
#include "prcd/objective.hpp"
#include "prcd/optimizer.hpp"
#include "prcd/prior.hpp"

namespace py = pybind11;
using namespace prcd;

namespace {

NoiseSpec noise_from_name(const std::string& name, double dof) {
  NoiseSpec n;
  if (name == "gaussian")
    n.family = NoiseSpec::Family::Gaussian;
  else if (name == "laplace")
    n.family = NoiseSpec::Family::Laplace;
  else if (name == "student_t")
    n.family = NoiseSpec::Family::StudentT;
  else if (name == "heteroscedastic")
    n.family = NoiseSpec::Family::Heteroscedastic;
  else
    throw ParameterError("unknown noise family: " + name);
  n.degrees_of_freedom = dof;
  return n;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "PRCD-MAP core: SVAR causal discovery with calibrated prior trust";

  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConstraintDomainError>(m, "ConstraintDomainError", PyExc_ArithmeticError);

  py::class_<WeightStack>(m, "WeightStack")
      .def(py::init<int, int>(), py::arg("lags"), py::arg("d"))
      .def_readwrite("w", &WeightStack::w)
      .def_property_readonly("lag_order", &WeightStack::lag_order)
      .def("instantaneous_masked", &WeightStack::instantaneous_masked);

  py::class_<TimeSeriesData>(m, "TimeSeriesData")
      .def(py::init([](const Matrix& obs, int k) {
             return TimeSeriesData{obs, k};
           }),
           py::arg("observations"), py::arg("lag_order"))
      .def_readwrite("observations", &TimeSeriesData::observations)
      .def_readwrite("lag_order", &TimeSeriesData::lag_order);

  py::class_<GroundTruth>(m, "GroundTruth")
      .def_readonly("adjacency_per_lag", &GroundTruth::adjacency_per_lag)
      .def_readonly("combined", &GroundTruth::combined)
      .def_readonly("weights", &GroundTruth::weights);

  py::class_<PriorMatrix>(m, "PriorMatrix")
      .def(py::init([](const Matrix& values, const std::string& prov) {
             PriorMatrix p;
             p.values = values.cwiseMax(0.0).cwiseMin(1.0);
             p.values.diagonal().setZero();
             p.provenance = prov;
             return p;
           }),
           py::arg("values"), py::arg("provenance") = "python")
      .def_readwrite("values", &PriorMatrix::values)
      .def_readonly("provenance", &PriorMatrix::provenance);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("weights", &FitResult::weights)
      .def_readonly("weights_raw", &FitResult::weights_raw)
      .def_readonly("tau_realized", &FitResult::tau_realized)
      .def_readonly("outer_iterations", &FitResult::outer_iterations)
      .def_readonly("final_h", &FitResult::final_h);

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("auroc", &MetricsReport::auroc)
      .def_readonly("best_f1", &MetricsReport::best_f1)
      .def_readonly("best_f1_threshold", &MetricsReport::best_f1_threshold)
      .def_readonly("shd", &MetricsReport::shd)
      .def_readonly("tau_mean", &MetricsReport::tau_mean)
      .def_readonly("prior_agreement", &MetricsReport::prior_agreement)
      .def_readonly("rho_cons", &MetricsReport::rho_cons);

  m.def(
      "generate_er_dag",
      [](int d, double edge_prob, uint64_t seed) {
        return generate_er_dag(d, edge_prob, WeightRange{}, seed);
      },
      py::arg("d"), py::arg("edge_prob"), py::arg("seed"));
  m.def("generate_ba_graph", &generate_ba_graph, py::arg("d"), py::arg("m"), py::arg("seed"));
  m.def(
      "generate_lag_matrices",
      [](const GroundTruth& t, int K, double density, double cap, uint64_t seed) {
        return generate_lag_matrices(t, K, density, cap, seed);
      },
      py::arg("truth"), py::arg("K"), py::arg("density"), py::arg("spectral_cap"), py::arg("seed"));
  m.def(
      "simulate_svar",
      [](const WeightStack& w, int T, const std::string& noise, double dof,
         const std::string& mechanism, uint64_t seed) {
        return simulate_svar(w, T, noise_from_name(noise, dof),
                             mechanism == "tanh" ? Mechanism::TanhNonlinear : Mechanism::Linear,
                             seed);
      },
      py::arg("weights"), py::arg("T"), py::arg("noise") = "gaussian", py::arg("dof") = 4.0,
      py::arg("mechanism") = "linear", py::arg("seed") = 0);
  m.def("simulate_lorenz96", &simulate_lorenz96, py::arg("d"), py::arg("T"),
        py::arg("forcing") = 8.0, py::arg("dt") = 0.05, py::arg("seed") = 0);
  m.def("standardize", &standardize);

  m.def(
      "make_prior",
      [](const GroundTruth& truth, const std::string& mode, double acc, double acc_hub,
         double acc_periph, int hub_count, uint64_t seed) {
        CorruptionSpec spec;
        if (mode == "random")
          spec.mode = CorruptionSpec::Mode::Random;
        else if (mode == "systematic")
          spec.mode = CorruptionSpec::Mode::Systematic;
        else if (mode == "adversarial")
          spec.mode = CorruptionSpec::Mode::Adversarial;
        else if (mode == "hub_peripheral")
          spec.mode = CorruptionSpec::Mode::HubPeripheral;
        else
          throw ParameterError("unknown corruption mode: " + mode);
        spec.accuracy = acc;
        spec.acc_hub = acc_hub;
        spec.acc_periph = acc_periph;
        spec.hub_count = hub_count;
        return make_prior(truth, spec, seed);
      },
      py::arg("truth"), py::arg("mode") = "random", py::arg("acc") = 0.9,
      py::arg("acc_hub") = 0.95, py::arg("acc_periph") = 0.2, py::arg("hub_count") = 4,
      py::arg("seed") = 0);
  m.def("load_prior", &load_prior, py::arg("path"), py::arg("expected_d") = -1);
  m.def("save_prior_csv", &save_prior_csv);
  m.def("group_edges_by_quantile", &group_edges_by_quantile, py::arg("prior"), py::arg("G"));

  m.def("huber_loss", &huber_loss, py::arg("residuals"), py::arg("delta") = 1.35);
  m.def(
      "calibrate_grouped",
      [](const PriorMatrix& prior, const Vector& tau, const IntMatrix& groups) {
        CalibratedPrior c = calibrate_grouped(prior, tau, groups);
        return py::make_tuple(c.p_hat, c.tau_realized);
      },
      py::arg("prior"), py::arg("tau"), py::arg("groups"));
  m.def(
      "l1_weights",
      [](const Matrix& p_hat) {
        CalibratedPrior c;
        c.p_hat = p_hat;
        return l1_weights(c);
      },
      py::arg("p_hat"));
  m.def(
      "precision_mask",
      [](const Matrix& p_hat) {
        CalibratedPrior c;
        c.p_hat = p_hat;
        return precision_mask(c);
      },
      py::arg("p_hat"));
  m.def(
      "spearman_precalibrate",
      [](const TimeSeriesData& data, const PriorMatrix& prior) {
        auto [tau, b] = spearman_precalibrate(data, prior);
        return py::make_tuple(tau, b);
      },
      py::arg("data"), py::arg("prior"));
  m.def(
      "dag_penalty",
      [](const Matrix& w0, double s) {
        DagPenalty p = dag_penalty(w0, s);
        return py::make_tuple(p.h, p.grad);
      },
      py::arg("w0_masked"), py::arg("s") = 1.0);

  m.def(
      "fit",
      [](const TimeSeriesData& data, const PriorMatrix& prior, const std::string& variant,
         double lambda1, double lambda2, uint64_t seed, int outer_iters, int inner_iters) {
        ObjectiveConfig ocfg;
        ocfg.lambda1 = lambda1;
        ocfg.lambda2 = lambda2;
        OptimizerConfig cfg;
        cfg.outer_iters = outer_iters;
        cfg.inner_iters = inner_iters;
        apply_variant(variant, ocfg, cfg);
        return fit(data, prior, ocfg, cfg, seed);
      },
      py::arg("data"), py::arg("prior"), py::arg("variant") = "learned_tau",
      py::arg("lambda1") = ObjectiveConfig{}.lambda1, py::arg("lambda2") = ObjectiveConfig{}.lambda2,
      py::arg("seed") = 0, py::arg("outer_iters") = 35, py::arg("inner_iters") = 400);

  m.def(
      "score",
      [](const FitResult& r, const GroundTruth& t, const PriorMatrix& p,
         const TimeSeriesData& d) { return score_fit(r, t, p, d); },
      py::arg("result"), py::arg("truth"), py::arg("prior"), py::arg("data"));
  m.def(
      "auroc",
      [](const Matrix& scores, const IntMatrix& truth) {
        return auroc(ScoredGraph{scores, truth});
      },
      py::arg("scores"), py::arg("truth"));
  m.def(
      "best_f1",
      [](const Matrix& scores, const IntMatrix& truth) {
        BestF1 b = best_f1(ScoredGraph{scores, truth});
        return py::make_tuple(b.f1, b.threshold);
      },
      py::arg("scores"), py::arg("truth"));
  m.def("shd", &shd, py::arg("predicted"), py::arg("truth"));
  m.def("rho_cons", &rho_cons_diagnostic, py::arg("prior"), py::arg("data"));

  m.attr("TAU_MIN") = kTauMin;
  m.attr("TAU_MAX") = kTauMax;
  m.attr("__version__") = build_id();
}
