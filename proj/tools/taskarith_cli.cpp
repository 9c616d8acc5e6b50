// taskarith command-line driver.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>

#include "taskarith/error.hpp"
#include "taskarith/harness.hpp"
#include "taskarith/parallel.hpp"
#include "taskarith/report.hpp"

using namespace taskarith;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string config;
  std::string out;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

void add_common(CLI::App* app, Common& c, bool needs_config) {
  auto* opt = app->add_option("--config", c.config, "experiment config (JSON)");
  if (needs_config) opt->required();
  app->add_option("--out", c.out, "output path (default: config output, else stdout)");
  app->add_option("--format", c.format, "report format")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--seed", c.seed, "override the config seed");
  app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig load(const Common& c, ExperimentKind kind) {
  ExperimentConfig cfg = load_config(c.config);
  if (cfg.kind != kind)
    throw ConfigError(std::string("config kind is ") + to_string(cfg.kind) + ", expected " + to_string(kind));
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

void write_out(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw IoError("cannot write to stdout");
  } else {
    write_file_atomic(path, text);
  }
}

void write_table(const Table& t, const std::string& path, ReportFormat format) {
  if (path.empty())
    write_out(emit(t, format), path);
  else
    emit_report(t, path, format);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t end = s.find(',', start);
    const std::string item = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("bad number '" + item + "' in list");
    out.push_back(v);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Task arithmetic on a one-layer transformer"};
  app.require_subcommand(1);

  Common common;
  auto* train = app.add_subcommand("train", "fine-tune one task and log the batch loss");
  add_common(train, common, true);
  std::string save_vector;
  train->add_option("--save-vector", save_vector, "write the task vector (JSON)");
  std::string save_params;
  train->add_option("--save-params", save_params, "write the fine-tuned parameters (binary)");

  auto* sweep = app.add_subcommand("sweep", "lambda sweep of Psi0 + tau1 + lambda tau2");
  add_common(sweep, common, true);
  auto* ood = app.add_subcommand("ood-grid", "(lambda1, lambda2) grid on an out-of-domain task");
  add_common(ood, common, true);
  auto* approx = app.add_subcommand("approx-compare", "full vs rank-1 vs pruned task vectors");
  add_common(approx, common, true);

  auto* check = app.add_subcommand("check-lambda", "evaluate the lambda region predicates");
  add_common(check, common, false);
  std::optional<double> alpha;
  std::string gammas_arg, lambdas_arg;
  std::optional<double> beta, c_arg;
  bool experimental = false;
  check->add_option("--alpha", alpha, "task correlation; prints the mtl and unlearn regions");
  check->add_option("--gammas", gammas_arg, "comma-separated OOD weights");
  check->add_option("--lambdas", lambdas_arg, "comma-separated merge weights to check against --gammas");
  check->add_option("--beta", beta, "interference slack");
  check->add_option("--c", c_arg, "margin headroom");
  check->add_flag("--experimental-margin", experimental, "use 0.2 + c instead of 1 + c");

  auto* report = app.add_subcommand("report", "convert or validate a report file");
  add_common(report, common, false);
  std::string in_path, in_format = "csv", kind_arg;
  report->add_option("--in", in_path, "input report")->required();
  report->add_option("--in-format", in_format, "input format")->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--kind", kind_arg, "experiment kind of a CSV input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  set_thread_count(common.threads);
  const ReportFormat format = report_format_from_string(common.format);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  if (*train) {
    const ExperimentConfig cfg = load(common, ExperimentKind::train_only);
    const TrainOnlyResult r = run_train_only(cfg);
    write_table(to_table(std::span<const TrainRow>(r.rows)), cfg.output, format);
    if (!save_vector.empty())
      write_file_atomic(save_vector,
                        task_vector_to_json(extract(r.finetuned, r.pretrained, {"psi0", "finetuned", "T1"})).dump());
    if (!save_params.empty()) write_file_atomic(save_params, params_to_binary(r.finetuned));
    std::fprintf(stderr, "eval hinge=%.6g zero_one=%.6g p_bar=%.4f aligned=%.4f (%.1fs)\n", r.eval.hinge,
                 r.eval.zero_one, r.diagnostics.p_bar, r.diagnostics.aligned_fraction, elapsed());
  } else if (*sweep) {
    const ExperimentConfig cfg = load(common, ExperimentKind::sweep);
    const auto rows = run_sweep(cfg);
    write_table(to_table(std::span<const SweepRow>(rows)), cfg.output, format);
    std::fprintf(stderr, "%zu rows (%.1fs)\n", rows.size(), elapsed());
  } else if (*ood) {
    const ExperimentConfig cfg = load(common, ExperimentKind::ood_grid);
    const OodGridResult r = run_ood_grid(cfg);
    write_table(to_table(std::span<const OodRow>(r.rows)), cfg.output, format);
    const auto& cf = r.closed_form;
    std::fprintf(stderr, "closed form lambda=(%.6g, %.6g) verdict=%d err_hinge=%.6g; %zu rows (%.1fs)\n",
                 cf.solution.lambdas[0], cf.solution.lambdas[1], cf.check.verdict ? 1 : 0, cf.err.hinge,
                 r.rows.size(), elapsed());
  } else if (*approx) {
    const ExperimentConfig cfg = load(common, ExperimentKind::approx_compare);
    const auto rows = run_approx_compare(cfg);
    write_table(to_table(std::span<const ApproxRow>(rows)), cfg.output, format);
    std::fprintf(stderr, "%zu rows (%.1fs)\n", rows.size(), elapsed());
  } else if (*check) {
    AnalysisConfig ac = AnalysisConfig::theory(0.05, 0.5);
    if (!common.config.empty()) ac = load_config(common.config).analysis;
    if (beta) ac.beta = *beta;
    if (c_arg) ac.c = *c_arg;
    if (c_arg || experimental) ac.margin = (experimental ? 0.2 : 1.0) + ac.c;
    try {
      ac.validate();
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
    Json out = Json::object();
    if (alpha) {
      out["alpha"] = *alpha;
      out["mtl"] = to_json(mtl_lambda_region(*alpha, ac));
      out["unlearn"] = to_json(unlearn_lambda_region(*alpha, ac));
    }
    if (!gammas_arg.empty()) {
      const auto gammas = parse_list(gammas_arg);
      if (lambdas_arg.empty()) {
        const ClosedFormLambdas cf = closed_form_lambdas(gammas, ac.c, true);
        out["closed_form"] = {{"lambdas", cf.lambdas},
                              {"sum_lambda_gamma", cf.sum_lambda_gamma},
                              {"sum_lambda_gamma_sq", cf.sum_lambda_gamma_sq},
                              {"rescale", cf.rescale}};
        out["check"] = to_json(ood_condition_check(gammas, cf.lambdas, ac));
      } else {
        out["check"] = to_json(ood_condition_check(gammas, parse_list(lambdas_arg), ac));
      }
    }
    if (out.empty()) throw ConfigError("check-lambda needs --alpha or --gammas");
    write_out(out.dump(2) + "\n", common.out);
  } else if (*report) {
    const ReportFormat in_fmt = report_format_from_string(in_format);
    if (in_fmt == ReportFormat::csv && kind_arg.empty()) throw ConfigError("--kind is required for CSV input");
    const ExperimentKind kind =
        kind_arg.empty() ? ExperimentKind::sweep : experiment_kind_from_string(kind_arg);
    const Table t = parse(read_file(in_path), in_fmt, kind);
    write_table(t, common.out, format);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "taskarith: %s: %s\n", to_string(e.kind()), e.what());
    switch (e.kind()) {
      case ErrorKind::config:
      case ErrorKind::parameter:
      case ErrorKind::shape:
      case ErrorKind::provenance:
      case ErrorKind::no_solution:
      case ErrorKind::sampling:
      case ErrorKind::capacity: return kExitConfig;
      case ErrorKind::io: return kExitIo;
      default: return kExitNumeric;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "taskarith: %s\n", e.what());
    return 1;
  }
}
