#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "taskarith/synth_data.hpp"
#include "taskarith/transformer.hpp"

namespace taskarith {

struct Provenance {
  std::string pretrained_id;
  std::string finetuned_id;
  std::string task_id;
};

/// Fine-tuned minus pre-trained parameters. A is frozen and has no delta.
struct TaskVector {
  Eigen::MatrixXd dW;  ///< d x d
  Eigen::MatrixXd dV;  ///< m x d
  Provenance provenance;
};

struct MergeTerm {
  std::reference_wrapper<const TaskVector> vector;
  double lambda;
};

struct Rank1Result {
  TaskVector approx;
  double residual_w = 0;  ///< ||dW - dW_LR||_F
  double residual_v = 0;  ///< ||dV - dV_LR||_F
  double sigma_w = 0;
  double sigma_v = 0;
  int iterations_w = 0;
  int iterations_v = 0;
};

struct PruneResult {
  TaskVector pruned;
  double kept_fraction = 1;
  std::vector<double> row_norms;  ///< dV row norms before pruning
};

struct DiagnosticReport {
  double p_bar = 0;      ///< mean of p_n / (|S1| + |S2|)
  double p_raw = 0;      ///< mean of the unnormalized p_n
  double aligned_fraction = 0;
  double kept_fraction = 0;  ///< fraction of non-zero dV rows
  std::vector<double> row_norms;
  double residual = 0;   ///< mean squared projection of dV rows onto span{v_k}
  double zeta_min = 0;   ///< debug: min |dV_i . mu| over aligned rows
};

/// finetuned - pretrained. Throws ProvenanceError when the frozen head
/// weights differ (the models are not fine-tuning relatives).
TaskVector extract(const ModelParams& finetuned, const ModelParams& pretrained, Provenance provenance = {});

/// base + sum_i lambda_i * tau_i. A is copied from base.
ModelParams merge(const ModelParams& base, std::span<const MergeTerm> terms);
ModelParams merge(const ModelParams& base, std::initializer_list<MergeTerm> terms);

/// Top singular pair of a matrix by power iteration on its Gram matrix.
struct TopSingular {
  double sigma = 0;
  Eigen::VectorXd left;   ///< unit, rows-sized
  Eigen::VectorXd right;  ///< unit, cols-sized
  int iterations = 0;
};

/// Converges when successive Rayleigh quotients differ by less than tol.
/// Throws ConvergenceError after max_iter iterations.
TopSingular top_singular(const Eigen::MatrixXd& m, double tol, int max_iter, std::uint64_t start_seed = 0);

/// Replaces dW and dV by their best rank-1 approximations.
Rank1Result rank1_approx(const TaskVector& tv, double tol, int max_iter, std::uint64_t start_seed = 0);

/// Zeroes rows of dV whose norm is below tau_rel * (max row norm).
PruneResult prune_rows(const TaskVector& tv, double tau_rel);

/// Structural statistics of a fine-tuned task vector. Attention is taken
/// from the merged model base + tv; the aligned-row statistics from tv.dV.
DiagnosticReport diagnostics(const TaskVector& tv, const ModelParams& base, const TaskSpec& spec, int n_samples,
                             double cos_threshold, std::uint64_t seed);

/// p_n / (|S1| + |S2|) for one sample under attention map S.
double attention_concentration(const Eigen::MatrixXd& S, const Sample& sample);

}  // namespace taskarith
