#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taskarith/analysis.hpp"
#include "taskarith/serialize.hpp"
#include "taskarith/synth_data.hpp"
#include "taskarith/task_vector.hpp"
#include "taskarith/transformer.hpp"

namespace taskarith {

enum class ExperimentKind { sweep, ood_grid, approx_compare, train_only };

const char* to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);

inline constexpr int kSchemaVersion = 1;

struct GridAxis {
  double lo = -1.0;
  double hi = 2.0;
  double step = 0.5;

  /// lo, lo + step, ..., up to hi (inclusive within 1e-9 step).
  std::vector<double> values() const;
};

struct TaskParams {
  int d = 24;
  int M = 8;
  int P = 20;
  double delta_star = 0.4;
  double delta_hash = 0.2;
  double alpha = 0.0;                      ///< correlation of task 2 with task 1
  std::vector<double> gammas{0.8, -0.6};   ///< OOD target weights on the sources
  double kappa = 0.0;
};

struct ApproxOptions {
  std::vector<double> tau_rel{0.0, 0.1};
  double rank1_tol = 1e-12;
  int rank1_max_iter = 20000;
  double lambda = 1.0;  ///< weight of task 2 in the merged model
};

struct DiagnosticOptions {
  int samples = 200;
  double cos_threshold = 0.9;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::sweep;
  std::uint64_t seed = 1;
  TaskParams task;
  TrainConfig train;  ///< train.seed is ignored; per-task seeds derive from `seed`
  GridAxis lambda;
  GridAxis lambda2;
  int eval_samples = 2000;
  AnalysisConfig analysis = AnalysisConfig::theory(0.05, 0.5);
  ApproxOptions approx;
  DiagnosticOptions diagnostics;
  std::string output;

  void validate() const;
};

/// Parses a config document. Unknown keys, a missing `kind` or a wrong
/// schema_version raise ConfigError.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::string& path);
Json to_json(const ExperimentConfig& cfg);

/// Seeds used by every experiment, all derived from the config seed.
struct SeedPlan {
  std::uint64_t spec1, spec2, spec_ood, init, train1, train2, eval1, eval2, eval_ood, diagnostics;
  static SeedPlan from(std::uint64_t base);
  /// Seed recorded on grid row i.
  std::uint64_t row(std::size_t i) const;
};

/// Two tasks fine-tuned from the same pre-trained model.
struct TaskPair {
  TaskSpec t1;
  TaskSpec t2;
  ModelParams base;
  TaskVector tv1;
  TaskVector tv2;
  TrainLog log1;
  TrainLog log2;
  Dataset eval1;
  Dataset eval2;
};

/// Builds T1 and T2 = correlated(T1, alpha), fine-tunes both from one
/// pre-trained model and draws their evaluation sets.
TaskPair train_task_pair(const ExperimentConfig& cfg, double alpha);

struct SweepRow {
  double lambda = 0;
  ErrorPair err1;
  ErrorPair err2;
  bool in_mtl_region = false;
  bool in_unlearn_region = false;
  double p_bar = 0;
  double aligned_fraction = 0;
  std::uint64_t seed = 0;
};

struct OodRow {
  double lambda1 = 0;
  double lambda2 = 0;
  ErrorPair err;
  OodCheck check;
  std::uint64_t seed = 0;
};

struct ClosedFormPoint {
  ClosedFormLambdas solution;
  OodCheck check;
  ErrorPair err;
};

struct OodGridResult {
  std::vector<OodRow> rows;
  ClosedFormPoint closed_form;
  TaskSpec target;
};

struct ApproxRow {
  std::string variant;  ///< "full", "rank1" or "prune"
  double tau_rel = 0;
  double lambda = 1;
  ErrorPair err1;
  ErrorPair err2;
  double kept_fraction = 1;
  double residual_w = 0;
  double residual_v = 0;
  std::string status = "ok";
  std::uint64_t seed = 0;
};

struct TrainRow {
  int iteration = 0;
  double batch_loss = 0;
};

struct TrainOnlyResult {
  std::vector<TrainRow> rows;
  ModelParams pretrained;
  ModelParams finetuned;
  ErrorPair eval;
  DiagnosticReport diagnostics;
};

/// Psi0 + tau1 + lambda tau2 over the lambda grid, evaluated on both tasks.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg);
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const TaskPair& pair);

/// Psi0 + lambda1 tau1 + lambda2 tau2 on the out-of-domain target task.
/// The pair must have orthogonal patterns.
OodGridResult run_ood_grid(const ExperimentConfig& cfg);
OodGridResult run_ood_grid(const ExperimentConfig& cfg, const TaskPair& pair);

/// Full, rank-1 and pruned task vectors merged at cfg.approx.lambda.
std::vector<ApproxRow> run_approx_compare(const ExperimentConfig& cfg);
std::vector<ApproxRow> run_approx_compare(const ExperimentConfig& cfg, const TaskPair& pair);

TrainOnlyResult run_train_only(const ExperimentConfig& cfg);

/// |good ∩ predicted| / |good ∪ predicted| where good means hinge error <= threshold.
double jaccard_overlap(const std::vector<OodRow>& rows, double error_threshold);

}  // namespace taskarith
