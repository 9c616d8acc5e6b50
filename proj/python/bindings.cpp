// Python bindings for the taskarith core.
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "taskarith/analysis.hpp"
#include "taskarith/error.hpp"
#include "taskarith/harness.hpp"
#include "taskarith/parallel.hpp"
#include "taskarith/report.hpp"
#include "taskarith/serialize.hpp"
#include "taskarith/synth_data.hpp"
#include "taskarith/task_vector.hpp"
#include "taskarith/transformer.hpp"

namespace py = pybind11;
using namespace taskarith;

namespace {

std::string run_report(const std::string& config_json, const std::string& format) {
  const ExperimentConfig cfg = parse_config(Json::parse(config_json));
  const ReportFormat fmt = report_format_from_string(format);
  switch (cfg.kind) {
    case ExperimentKind::sweep: {
      const auto rows = run_sweep(cfg);
      return emit(to_table(std::span<const SweepRow>(rows)), fmt);
    }
    case ExperimentKind::ood_grid: {
      const auto r = run_ood_grid(cfg);
      return emit(to_table(std::span<const OodRow>(r.rows)), fmt);
    }
    case ExperimentKind::approx_compare: {
      const auto rows = run_approx_compare(cfg);
      return emit(to_table(std::span<const ApproxRow>(rows)), fmt);
    }
    case ExperimentKind::train_only: {
      const auto r = run_train_only(cfg);
      return emit(to_table(std::span<const TrainRow>(r.rows)), fmt);
    }
  }
  throw ConfigError("unhandled experiment kind");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Task arithmetic on a one-layer ReLU transformer";

  auto base = py::register_exception<Error>(m, "TaskArithError", PyExc_RuntimeError);
  // Exceptions are translated most-derived first, so register the concrete
  // kinds after the base.
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<CapacityError>(m, "CapacityError", base.ptr());
  py::register_exception<SamplingError>(m, "SamplingError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<ProvenanceError>(m, "ProvenanceError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<DegenerateEstimatorError>(m, "DegenerateEstimatorError", base.ptr());
  py::register_exception<NoSolutionError>(m, "NoSolutionError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def("set_thread_count", &set_thread_count, py::arg("n"));

  // data
  py::class_<TaskSpec>(m, "TaskSpec")
      .def_readonly("d", &TaskSpec::d)
      .def_readonly("P", &TaskSpec::P)
      .def_readonly("M", &TaskSpec::M)
      .def_readonly("mu", &TaskSpec::mu)
      .def_readonly("basis", &TaskSpec::basis)
      .def_readonly("delta_star", &TaskSpec::delta_star)
      .def_readonly("delta_hash", &TaskSpec::delta_hash)
      .def_readonly("seed", &TaskSpec::seed)
      .def("to_json", [](const TaskSpec& s) { return task_spec_to_json(s).dump(); })
      .def_static("from_json", [](const std::string& s) { return task_spec_from_json(Json::parse(s)); });

  py::class_<Sample>(m, "Sample")
      .def_readonly("X", &Sample::X)
      .def_readonly("y", &Sample::y)
      .def_readonly("token_ids", &Sample::token_ids);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("samples", &Dataset::samples)
      .def_readonly("acceptance_rate", &Dataset::acceptance_rate)
      .def("__len__", [](const Dataset& d) { return d.samples.size(); });

  m.def("make_task_spec", &make_task_spec, py::arg("d"), py::arg("M"), py::arg("P"), py::arg("delta_star"),
        py::arg("delta_hash"), py::arg("seed"));
  m.def("make_correlated_spec", &make_correlated_spec, py::arg("base"), py::arg("alpha"), py::arg("seed"));
  m.def(
      "make_ood_spec",
      [](const std::vector<TaskSpec>& sources, const std::vector<double>& gammas, double kappa, std::uint64_t seed) {
        return make_ood_spec(sources, gammas, kappa, seed);
      },
      py::arg("sources"), py::arg("gammas"), py::arg("kappa"), py::arg("seed"));
  m.def("sample_dataset", &sample_dataset, py::arg("spec"), py::arg("n"), py::arg("seed"));

  // model
  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("W", &ModelParams::W)
      .def_readwrite("V", &ModelParams::V)
      .def_readwrite("A", &ModelParams::A)
      .def("to_bytes", [](const ModelParams& p) { return py::bytes(params_to_binary(p)); })
      .def_static("from_bytes", [](const py::bytes& b) { return params_from_binary(std::string(b)); });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("eta", &TrainConfig::eta)
      .def_readwrite("batch", &TrainConfig::batch)
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("xi", &TrainConfig::xi)
      .def_readwrite("m", &TrainConfig::m)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<Gradient>(m, "Gradient").def_readonly("dW", &Gradient::dW).def_readonly("dV", &Gradient::dV);

  py::class_<ErrorPair>(m, "ErrorPair")
      .def_readonly("hinge", &ErrorPair::hinge)
      .def_readonly("zero_one", &ErrorPair::zero_one)
      .def("__repr__", [](const ErrorPair& e) {
        return "ErrorPair(hinge=" + std::to_string(e.hinge) + ", zero_one=" + std::to_string(e.zero_one) + ")";
      });

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_property_readonly("batch_loss", [](const TrainResult& r) { return r.log.batch_loss; });

  m.def("init_params", &init_params, py::arg("d"), py::arg("m"), py::arg("P"), py::arg("xi"), py::arg("seed"));
  m.def("forward", &forward, py::arg("params"), py::arg("X"));
  m.def("attention_map", &attention_map, py::arg("params"), py::arg("X"));
  m.def("hinge_loss", &hinge_loss, py::arg("f"), py::arg("y"));
  m.def(
      "grad", [](const ModelParams& p, const std::vector<Sample>& batch) { return grad(p, batch); },
      py::arg("params"), py::arg("batch"));
  m.def("sgd_finetune", &sgd_finetune, py::arg("params0"), py::arg("spec"), py::arg("cfg"),
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "eval_error", [](const ModelParams& p, const TaskSpec& s, int n, std::uint64_t seed) {
        return eval_error(p, s, n, seed);
      },
      py::arg("params"), py::arg("spec"), py::arg("n_samples"), py::arg("seed"));
  m.def(
      "eval_error_on", [](const ModelParams& p, const std::vector<Sample>& xs) { return eval_error(p, xs); },
      py::arg("params"), py::arg("samples"));

  // task vectors
  py::class_<Provenance>(m, "Provenance")
      .def(py::init<>())
      .def(py::init([](std::string a, std::string b, std::string c) {
             return Provenance{std::move(a), std::move(b), std::move(c)};
           }),
           py::arg("pretrained_id"), py::arg("finetuned_id"), py::arg("task_id"))
      .def_readwrite("pretrained_id", &Provenance::pretrained_id)
      .def_readwrite("finetuned_id", &Provenance::finetuned_id)
      .def_readwrite("task_id", &Provenance::task_id);

  py::class_<TaskVector>(m, "TaskVector")
      .def_readonly("dW", &TaskVector::dW)
      .def_readonly("dV", &TaskVector::dV)
      .def_readonly("provenance", &TaskVector::provenance)
      .def("to_json", [](const TaskVector& t) { return task_vector_to_json(t).dump(); });

  py::class_<Rank1Result>(m, "Rank1Result")
      .def_readonly("approx", &Rank1Result::approx)
      .def_readonly("residual_w", &Rank1Result::residual_w)
      .def_readonly("residual_v", &Rank1Result::residual_v)
      .def_readonly("sigma_w", &Rank1Result::sigma_w)
      .def_readonly("sigma_v", &Rank1Result::sigma_v);

  py::class_<PruneResult>(m, "PruneResult")
      .def_readonly("pruned", &PruneResult::pruned)
      .def_readonly("kept_fraction", &PruneResult::kept_fraction)
      .def_readonly("row_norms", &PruneResult::row_norms);

  m.def("extract", &extract, py::arg("finetuned"), py::arg("pretrained"), py::arg("provenance") = Provenance{});
  m.def(
      "merge",
      [](const ModelParams& base, const std::vector<std::pair<const TaskVector*, double>>& terms) {
        std::vector<MergeTerm> t;
        t.reserve(terms.size());
        for (const auto& [tv, lambda] : terms) t.push_back(MergeTerm{std::cref(*tv), lambda});
        return merge(base, std::span<const MergeTerm>(t));
      },
      py::arg("base"), py::arg("terms"), "base + sum of lambda * tau over (tau, lambda) pairs");
  m.def("rank1_approx", &rank1_approx, py::arg("tv"), py::arg("tol") = 1e-12, py::arg("max_iter") = 20000,
        py::arg("start_seed") = 0);
  m.def("prune_rows", &prune_rows, py::arg("tv"), py::arg("tau_rel"));

  // analysis
  py::class_<AnalysisConfig>(m, "AnalysisConfig")
      .def(py::init<>())
      .def_static("theory", &AnalysisConfig::theory, py::arg("beta"), py::arg("c"))
      .def_static("experimental", &AnalysisConfig::experimental, py::arg("beta"), py::arg("c"))
      .def_readwrite("beta", &AnalysisConfig::beta)
      .def_readwrite("c", &AnalysisConfig::c)
      .def_readwrite("margin", &AnalysisConfig::margin)
      .def_readwrite("alpha_zero_tol", &AnalysisConfig::alpha_zero_tol);

  py::class_<LambdaRegion>(m, "LambdaRegion")
      .def_property_readonly("kind", [](const LambdaRegion& r) { return std::string(to_string(r.kind)); })
      .def_readonly("lo", &LambdaRegion::lo)
      .def_readonly("hi", &LambdaRegion::hi)
      .def_readonly("rationale", &LambdaRegion::rationale)
      .def("contains", &LambdaRegion::contains, py::arg("lambda_"));

  py::class_<OodCheck>(m, "OodCheck")
      .def_readonly("verdict", &OodCheck::verdict)
      .def_readonly("cond1_slack", &OodCheck::cond1_slack)
      .def_readonly("cond2_slack", &OodCheck::cond2_slack)
      .def_readonly("cond3_slack", &OodCheck::cond3_slack)
      .def_readonly("existence", &OodCheck::existence);

  py::class_<ClosedFormLambdas>(m, "ClosedFormLambdas")
      .def_readonly("lambdas", &ClosedFormLambdas::lambdas)
      .def_readonly("sum_lambda_gamma", &ClosedFormLambdas::sum_lambda_gamma)
      .def_readonly("sum_lambda_gamma_sq", &ClosedFormLambdas::sum_lambda_gamma_sq)
      .def_readonly("rescale", &ClosedFormLambdas::rescale);

  m.def("true_alpha", &true_alpha, py::arg("a"), py::arg("b"));
  m.def(
      "alpha_hat",
      [](const ModelParams& m1, const ModelParams& m2, const std::vector<Sample>& d1, const std::vector<Sample>& d2) {
        return alpha_hat(m1, m2, d1, d2);
      },
      py::arg("model1"), py::arg("model2"), py::arg("d1"), py::arg("d2"));
  m.def("mtl_lambda_region", &mtl_lambda_region, py::arg("alpha"), py::arg("cfg"));
  m.def("unlearn_lambda_region", &unlearn_lambda_region, py::arg("alpha"), py::arg("cfg"));
  m.def(
      "ood_condition_check",
      [](const std::vector<double>& g, const std::vector<double>& l, const AnalysisConfig& cfg) {
        return ood_condition_check(g, l, cfg);
      },
      py::arg("gammas"), py::arg("lambdas"), py::arg("cfg"));
  m.def(
      "closed_form_lambdas",
      [](const std::vector<double>& g, double c, bool rescaled) { return closed_form_lambdas(g, c, rescaled); },
      py::arg("gammas"), py::arg("c"), py::arg("rescaled") = false);

  // experiments
  m.def("validate_config", [](const std::string& j) { return to_json(parse_config(Json::parse(j))).dump(); },
        py::arg("config_json"), "parse, validate and return the normalized config");
  m.def("run_experiment", &run_report, py::arg("config_json"), py::arg("format") = "json",
        py::call_guard<py::gil_scoped_release>(), "run a config and return its report text");
}
