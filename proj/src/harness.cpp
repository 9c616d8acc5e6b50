#include "taskarith/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "taskarith/error.hpp"
#include "taskarith/random.hpp"

namespace taskarith {
namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) throw ConfigError("unknown config key '" + where + "." + item.key() + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError("bad value for '" + where + "." + key + "': " + e.what());
  }
}

GridAxis parse_axis(const Json& j, const std::string& where) {
  check_keys(j, {"lo", "hi", "step"}, where);
  GridAxis a;
  read(j, "lo", a.lo, where);
  read(j, "hi", a.hi, where);
  read(j, "step", a.step, where);
  return a;
}

Json axis_json(const GridAxis& a) { return {{"lo", a.lo}, {"hi", a.hi}, {"step", a.step}}; }

TaskVector combine(const TaskVector& a, const TaskVector& b, double lambda) {
  return TaskVector{a.dW + lambda * b.dW, a.dV + lambda * b.dV, {}};
}

ErrorPair nan_errors() {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {nan, nan};
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::sweep: return "sweep";
    case ExperimentKind::ood_grid: return "ood_grid";
    case ExperimentKind::approx_compare: return "approx_compare";
    case ExperimentKind::train_only: return "train_only";
  }
  return "sweep";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "sweep") return ExperimentKind::sweep;
  if (s == "ood_grid" || s == "ood-grid") return ExperimentKind::ood_grid;
  if (s == "approx_compare" || s == "approx-compare") return ExperimentKind::approx_compare;
  if (s == "train_only" || s == "train") return ExperimentKind::train_only;
  throw ConfigError("unknown experiment kind '" + s + "'");
}

std::vector<double> GridAxis::values() const {
  if (!(step > 0.0)) throw ConfigError("grid step must be positive");
  if (!(lo <= hi)) throw ConfigError("grid lo must not exceed hi");
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n + 1));
  for (long i = 0; i <= n; ++i) {
    // Snap to 12 decimals so 0.1-style steps print as written.
    const double v = lo + static_cast<double>(i) * step;
    out.push_back(std::round(v * 1e12) / 1e12);
  }
  return out;
}

void ExperimentConfig::validate() const {
  (void)lambda.values();
  (void)lambda2.values();
  if (eval_samples < 1) throw ConfigError("eval_samples must be >= 1");
  if (task.M < 1 || task.P < 1 || task.d < task.M + 2) throw ConfigError("task requires M >= 1, P >= 1, d >= M + 2");
  if (!(task.delta_hash >= 0.0 && task.delta_hash < task.delta_star && task.delta_star + task.delta_hash <= 1.0))
    throw ConfigError("task fractions require 0 <= delta_hash < delta_star, delta_star + delta_hash <= 1");
  if (!(task.alpha >= -1.0 && task.alpha <= 1.0)) throw ConfigError("task.alpha must lie in [-1, 1]");
  if (kind == ExperimentKind::ood_grid) {
    if (task.gammas.size() != 2) throw ConfigError("ood_grid needs exactly two gammas (one per source task)");
    double norm = task.kappa * task.kappa;
    for (double g : task.gammas) norm += g * g;
    if (std::abs(norm - 1.0) > 1e-8) throw ConfigError("sum(gamma^2) + kappa^2 must equal 1");
  }
  for (double t : approx.tau_rel)
    if (!(t >= 0.0 && t < 1.0)) throw ConfigError("approx.tau_rel entries must lie in [0, 1)");
  if (!(approx.rank1_tol > 0.0) || approx.rank1_max_iter < 1) throw ConfigError("bad rank-1 options");
  if (diagnostics.samples < 1 || !(diagnostics.cos_threshold > 0.0 && diagnostics.cos_threshold < 1.0))
    throw ConfigError("bad diagnostics options");
  try {
    train.validate();
    analysis.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig parse_config(const Json& j) {
  check_keys(j, {"schema_version", "kind", "seed", "task", "train", "grid", "eval_samples", "analysis", "approx",
                 "diagnostics", "output"},
             "config");
  if (!j.contains("schema_version")) throw ConfigError("config is missing schema_version");
  int version = 0;
  read(j, "schema_version", version, "config");
  if (version != kSchemaVersion) throw ConfigError("unsupported schema_version " + std::to_string(version));
  if (!j.contains("kind")) throw ConfigError("config is missing kind");

  ExperimentConfig cfg;
  std::string kind;
  read(j, "kind", kind, "config");
  cfg.kind = experiment_kind_from_string(kind);
  read(j, "seed", cfg.seed, "config");
  read(j, "eval_samples", cfg.eval_samples, "config");
  read(j, "output", cfg.output, "config");

  if (j.contains("task")) {
    const Json& t = j.at("task");
    check_keys(t, {"d", "M", "P", "delta_star", "delta_hash", "alpha", "gammas", "kappa"}, "task");
    read(t, "d", cfg.task.d, "task");
    read(t, "M", cfg.task.M, "task");
    read(t, "P", cfg.task.P, "task");
    read(t, "delta_star", cfg.task.delta_star, "task");
    read(t, "delta_hash", cfg.task.delta_hash, "task");
    read(t, "alpha", cfg.task.alpha, "task");
    read(t, "gammas", cfg.task.gammas, "task");
    read(t, "kappa", cfg.task.kappa, "task");
  }
  if (j.contains("train")) {
    const Json& t = j.at("train");
    check_keys(t, {"eta", "batch", "iterations", "xi", "m"}, "train");
    read(t, "eta", cfg.train.eta, "train");
    read(t, "batch", cfg.train.batch, "train");
    read(t, "iterations", cfg.train.iterations, "train");
    read(t, "xi", cfg.train.xi, "train");
    read(t, "m", cfg.train.m, "train");
  }
  if (j.contains("grid")) {
    const Json& g = j.at("grid");
    check_keys(g, {"lambda", "lambda2"}, "grid");
    if (g.contains("lambda")) cfg.lambda = parse_axis(g.at("lambda"), "grid.lambda");
    if (g.contains("lambda2")) cfg.lambda2 = parse_axis(g.at("lambda2"), "grid.lambda2");
  }
  if (j.contains("analysis")) {
    const Json& a = j.at("analysis");
    check_keys(a, {"beta", "c", "margin", "experimental_margin", "k_neg", "k_poly", "poly_exponent",
                   "eta_delta_star", "alpha_zero_tol"},
               "analysis");
    AnalysisConfig& ac = cfg.analysis;
    read(a, "beta", ac.beta, "analysis");
    read(a, "c", ac.c, "analysis");
    bool experimental = false;
    read(a, "experimental_margin", experimental, "analysis");
    ac.margin = experimental ? 0.2 + ac.c : 1.0 + ac.c;
    if (a.contains("margin") && a.contains("experimental_margin"))
      throw ConfigError("analysis.margin and analysis.experimental_margin are mutually exclusive");
    read(a, "margin", ac.margin, "analysis");
    read(a, "k_neg", ac.constants.k_neg, "analysis");
    read(a, "k_poly", ac.constants.k_poly, "analysis");
    read(a, "poly_exponent", ac.constants.poly_exponent, "analysis");
    read(a, "eta_delta_star", ac.constants.eta_delta_star, "analysis");
    read(a, "alpha_zero_tol", ac.alpha_zero_tol, "analysis");
  }
  if (j.contains("approx")) {
    const Json& a = j.at("approx");
    check_keys(a, {"tau_rel", "rank1_tol", "rank1_max_iter", "lambda"}, "approx");
    read(a, "tau_rel", cfg.approx.tau_rel, "approx");
    read(a, "rank1_tol", cfg.approx.rank1_tol, "approx");
    read(a, "rank1_max_iter", cfg.approx.rank1_max_iter, "approx");
    read(a, "lambda", cfg.approx.lambda, "approx");
  }
  if (j.contains("diagnostics")) {
    const Json& d = j.at("diagnostics");
    check_keys(d, {"samples", "cos_threshold"}, "diagnostics");
    read(d, "samples", cfg.diagnostics.samples, "diagnostics");
    read(d, "cos_threshold", cfg.diagnostics.cos_threshold, "diagnostics");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  const std::string text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return parse_config(j);
}

Json to_json(const ExperimentConfig& cfg) {
  const AnalysisConfig& a = cfg.analysis;
  return {{"schema_version", kSchemaVersion},
          {"kind", to_string(cfg.kind)},
          {"seed", cfg.seed},
          {"task",
           {{"d", cfg.task.d},
            {"M", cfg.task.M},
            {"P", cfg.task.P},
            {"delta_star", cfg.task.delta_star},
            {"delta_hash", cfg.task.delta_hash},
            {"alpha", cfg.task.alpha},
            {"gammas", cfg.task.gammas},
            {"kappa", cfg.task.kappa}}},
          {"train",
           {{"eta", cfg.train.eta},
            {"batch", cfg.train.batch},
            {"iterations", cfg.train.iterations},
            {"xi", cfg.train.xi},
            {"m", cfg.train.m}}},
          {"grid", {{"lambda", axis_json(cfg.lambda)}, {"lambda2", axis_json(cfg.lambda2)}}},
          {"eval_samples", cfg.eval_samples},
          {"analysis",
           {{"beta", a.beta},
            {"c", a.c},
            {"margin", a.margin},
            {"k_neg", a.constants.k_neg},
            {"k_poly", a.constants.k_poly},
            {"poly_exponent", a.constants.poly_exponent},
            {"eta_delta_star", a.constants.eta_delta_star},
            {"alpha_zero_tol", a.alpha_zero_tol}}},
          {"approx",
           {{"tau_rel", cfg.approx.tau_rel},
            {"rank1_tol", cfg.approx.rank1_tol},
            {"rank1_max_iter", cfg.approx.rank1_max_iter},
            {"lambda", cfg.approx.lambda}}},
          {"diagnostics", {{"samples", cfg.diagnostics.samples}, {"cos_threshold", cfg.diagnostics.cos_threshold}}},
          {"output", cfg.output}};
}

SeedPlan SeedPlan::from(std::uint64_t base) {
  SeedPlan s{};
  s.spec1 = mix_seed(base, 1);
  s.spec2 = mix_seed(base, 2);
  s.spec_ood = mix_seed(base, 3);
  s.init = mix_seed(base, 10);
  s.train1 = mix_seed(base, 21);
  s.train2 = mix_seed(base, 22);
  s.eval1 = mix_seed(base, 31);
  s.eval2 = mix_seed(base, 32);
  s.eval_ood = mix_seed(base, 33);
  s.diagnostics = mix_seed(base, 40);
  return s;
}

std::uint64_t SeedPlan::row(std::size_t i) const { return mix_seed(diagnostics, i); }

TaskPair train_task_pair(const ExperimentConfig& cfg, double alpha) {
  const SeedPlan seeds = SeedPlan::from(cfg.seed);
  const TaskParams& tp = cfg.task;
  TaskPair pair;
  pair.t1 = make_task_spec(tp.d, tp.M, tp.P, tp.delta_star, tp.delta_hash, seeds.spec1);
  pair.t2 = make_correlated_spec(pair.t1, alpha, seeds.spec2);
  pair.base = init_params(tp.d, cfg.train.m, tp.P, cfg.train.xi, seeds.init);

  TrainConfig c1 = cfg.train;
  c1.seed = seeds.train1;
  TrainResult r1 = sgd_finetune(pair.base, pair.t1, c1);
  TrainConfig c2 = cfg.train;
  c2.seed = seeds.train2;
  TrainResult r2 = sgd_finetune(pair.base, pair.t2, c2);

  pair.tv1 = extract(r1.params, pair.base, {"psi0", "finetuned-T1", "T1"});
  pair.tv2 = extract(r2.params, pair.base, {"psi0", "finetuned-T2", "T2"});
  pair.log1 = std::move(r1.log);
  pair.log2 = std::move(r2.log);
  pair.eval1 = sample_dataset(pair.t1, cfg.eval_samples, seeds.eval1);
  pair.eval2 = sample_dataset(pair.t2, cfg.eval_samples, seeds.eval2);
  return pair;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const TaskPair& pair) {
  cfg.validate();
  const SeedPlan seeds = SeedPlan::from(cfg.seed);
  const double alpha = std::clamp(true_alpha(pair.t1, pair.t2), -1.0, 1.0);
  const LambdaRegion mtl = mtl_lambda_region(alpha, cfg.analysis);
  const LambdaRegion unlearn = unlearn_lambda_region(alpha, cfg.analysis);

  const std::vector<double> grid = cfg.lambda.values();
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double lambda = grid[i];
    const ModelParams merged = merge(pair.base, {MergeTerm{pair.tv1, 1.0}, MergeTerm{pair.tv2, lambda}});
    SweepRow row;
    row.lambda = lambda;
    row.err1 = eval_error(merged, pair.eval1.samples);
    row.err2 = eval_error(merged, pair.eval2.samples);
    row.in_mtl_region = mtl.contains(lambda);
    row.in_unlearn_region = unlearn.contains(lambda);
    row.seed = seeds.row(i);
    const DiagnosticReport diag = diagnostics(combine(pair.tv1, pair.tv2, lambda), pair.base, pair.t2,
                                              cfg.diagnostics.samples, cfg.diagnostics.cos_threshold, row.seed);
    row.p_bar = diag.p_bar;
    row.aligned_fraction = diag.aligned_fraction;
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.kind != ExperimentKind::sweep) throw ConfigError("run_sweep needs kind = sweep");
  return run_sweep(cfg, train_task_pair(cfg, cfg.task.alpha));
}

OodGridResult run_ood_grid(const ExperimentConfig& cfg, const TaskPair& pair) {
  cfg.validate();
  if (std::abs(true_alpha(pair.t1, pair.t2)) > 1e-10)
    throw ParameterError("out-of-domain grid needs orthogonal source tasks");
  const SeedPlan seeds = SeedPlan::from(cfg.seed);
  const std::vector<TaskSpec> sources{pair.t1, pair.t2};
  const std::vector<double>& gammas = cfg.task.gammas;

  OodGridResult out;
  out.target = make_ood_spec(sources, gammas, cfg.task.kappa, seeds.spec_ood);
  const Dataset eval = sample_dataset(out.target, cfg.eval_samples, seeds.eval_ood);

  const std::vector<double> g1 = cfg.lambda.values();
  const std::vector<double> g2 = cfg.lambda2.values();
  out.rows.reserve(g1.size() * g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) {
    for (std::size_t k = 0; k < g2.size(); ++k) {
      OodRow row;
      row.lambda1 = g1[i];
      row.lambda2 = g2[k];
      const ModelParams merged = merge(pair.base, {MergeTerm{pair.tv1, row.lambda1}, MergeTerm{pair.tv2, row.lambda2}});
      row.err = eval_error(merged, eval.samples);
      const std::vector<double> lambdas{row.lambda1, row.lambda2};
      row.check = ood_condition_check(gammas, lambdas, cfg.analysis);
      row.seed = seeds.row(i * g2.size() + k);
      out.rows.push_back(row);
    }
  }

  ClosedFormPoint& cf = out.closed_form;
  cf.solution = closed_form_lambdas(gammas, cfg.analysis.c, true);
  cf.check = ood_condition_check(gammas, cf.solution.lambdas, cfg.analysis);
  const ModelParams merged = merge(pair.base, {MergeTerm{pair.tv1, cf.solution.lambdas[0]},
                                                MergeTerm{pair.tv2, cf.solution.lambdas[1]}});
  cf.err = eval_error(merged, eval.samples);
  return out;
}

OodGridResult run_ood_grid(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.kind != ExperimentKind::ood_grid) throw ConfigError("run_ood_grid needs kind = ood_grid");
  return run_ood_grid(cfg, train_task_pair(cfg, 0.0));
}

std::vector<ApproxRow> run_approx_compare(const ExperimentConfig& cfg, const TaskPair& pair) {
  cfg.validate();
  const SeedPlan seeds = SeedPlan::from(cfg.seed);
  const double lambda = cfg.approx.lambda;
  std::vector<ApproxRow> rows;

  auto evaluate = [&](ApproxRow& row, const TaskVector& a, const TaskVector& b) {
    const ModelParams merged = merge(pair.base, {MergeTerm{a, 1.0}, MergeTerm{b, lambda}});
    row.err1 = eval_error(merged, pair.eval1.samples);
    row.err2 = eval_error(merged, pair.eval2.samples);
  };
  auto next_row = [&](std::string variant, double tau) {
    ApproxRow row;
    row.variant = std::move(variant);
    row.tau_rel = tau;
    row.lambda = lambda;
    row.seed = seeds.row(rows.size());
    return row;
  };

  {
    ApproxRow row = next_row("full", 0.0);
    evaluate(row, pair.tv1, pair.tv2);
    rows.push_back(row);
  }
  {
    ApproxRow row = next_row("rank1", 0.0);
    try {
      const Rank1Result r1 = rank1_approx(pair.tv1, cfg.approx.rank1_tol, cfg.approx.rank1_max_iter, row.seed);
      const Rank1Result r2 =
          rank1_approx(pair.tv2, cfg.approx.rank1_tol, cfg.approx.rank1_max_iter, mix_seed(row.seed, 2));
      evaluate(row, r1.approx, r2.approx);
      row.residual_w = std::hypot(r1.residual_w, r2.residual_w);
      row.residual_v = std::hypot(r1.residual_v, r2.residual_v);
    } catch (const ConvergenceError& e) {
      row.status = "convergence_error";
      row.err1 = nan_errors();
      row.err2 = nan_errors();
      row.residual_w = e.last_residual();
      row.residual_v = e.last_residual();
    }
    rows.push_back(row);
  }
  for (double tau : cfg.approx.tau_rel) {
    ApproxRow row = next_row("prune", tau);
    const PruneResult p1 = prune_rows(pair.tv1, tau);
    const PruneResult p2 = prune_rows(pair.tv2, tau);
    evaluate(row, p1.pruned, p2.pruned);
    row.kept_fraction = 0.5 * (p1.kept_fraction + p2.kept_fraction);
    row.residual_v = std::hypot((pair.tv1.dV - p1.pruned.dV).norm(), (pair.tv2.dV - p2.pruned.dV).norm());
    rows.push_back(row);
  }
  return rows;
}

std::vector<ApproxRow> run_approx_compare(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.kind != ExperimentKind::approx_compare) throw ConfigError("run_approx_compare needs kind = approx_compare");
  return run_approx_compare(cfg, train_task_pair(cfg, cfg.task.alpha));
}

TrainOnlyResult run_train_only(const ExperimentConfig& cfg) {
  cfg.validate();
  const SeedPlan seeds = SeedPlan::from(cfg.seed);
  const TaskParams& tp = cfg.task;
  const TaskSpec spec = make_task_spec(tp.d, tp.M, tp.P, tp.delta_star, tp.delta_hash, seeds.spec1);

  TrainOnlyResult out;
  out.pretrained = init_params(tp.d, cfg.train.m, tp.P, cfg.train.xi, seeds.init);
  TrainConfig tc = cfg.train;
  tc.seed = seeds.train1;
  TrainResult r = sgd_finetune(out.pretrained, spec, tc);
  out.finetuned = std::move(r.params);
  out.rows.reserve(r.log.batch_loss.size());
  for (std::size_t t = 0; t < r.log.batch_loss.size(); ++t)
    out.rows.push_back({static_cast<int>(t), r.log.batch_loss[t]});
  out.eval = eval_error(out.finetuned, spec, cfg.eval_samples, seeds.eval1);
  out.diagnostics = diagnostics(extract(out.finetuned, out.pretrained), out.pretrained, spec,
                                cfg.diagnostics.samples, cfg.diagnostics.cos_threshold, seeds.diagnostics);
  return out;
}

double jaccard_overlap(const std::vector<OodRow>& rows, double error_threshold) {
  std::size_t both = 0;
  std::size_t either = 0;
  for (const OodRow& r : rows) {
    const bool good = r.err.hinge <= error_threshold;
    const bool predicted = r.check.verdict;
    if (good && predicted) ++both;
    if (good || predicted) ++either;
  }
  return either == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(either);
}

}  // namespace taskarith
