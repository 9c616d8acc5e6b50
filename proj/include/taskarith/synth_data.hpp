#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace taskarith {

/// A binary discriminative-pattern task.
///
/// Every input is a d x P matrix whose columns are drawn from the token
/// vocabulary {+mu, -mu, v_1, ..., v_M}. The label is carried by whichever
/// of +mu / -mu is in the strict majority; the v_k are label-irrelevant.
struct TaskSpec {
  int d = 0;
  int P = 0;
  int M = 0;
  Eigen::VectorXd mu;     ///< unit discriminative pattern
  Eigen::MatrixXd basis;  ///< d x M, orthonormal columns, each orthogonal to mu
  double delta_star = 0;  ///< mean fraction of label-relevant tokens
  double delta_hash = 0;  ///< mean fraction of confusion tokens
  std::uint64_t seed = 0;
};

/// Vocabulary index of a token: 0 = +mu, 1 = -mu, k + 1 = v_k (k = 1..M).
using TokenId = int;

struct TokenCounts {
  int relevant = 0;             ///< tokens equal to y * mu
  int confusion = 0;            ///< tokens equal to -y * mu
  std::vector<int> irrelevant;  ///< per v_k
};

struct Sample {
  Eigen::MatrixXd X;  ///< d x P token columns
  int y = 1;
  std::vector<TokenId> token_ids;
  TokenCounts counts;
};

struct Dataset {
  std::vector<Sample> samples;
  double acceptance_rate = 1.0;  ///< accepted / attempted draws
};

TaskSpec make_task_spec(int d, int M, int P, double delta_star, double delta_hash,
                        std::uint64_t seed);

/// Same vocabulary as `base`, pattern alpha * mu + sqrt(1 - alpha^2) * mu_perp.
TaskSpec make_correlated_spec(const TaskSpec& base, double alpha, std::uint64_t seed);

/// Out-of-domain target: sum_i gammas[i] * sources[i].mu + kappa * mu_perp', with
/// mu_perp' orthogonal to every source pattern and to the shared basis.
TaskSpec make_ood_spec(std::span<const TaskSpec> sources, std::span<const double> gammas,
                       double kappa, std::uint64_t seed);

/// Draws n labelled samples. Tokens are i.i.d. categorical; a whole sample is
/// redrawn until the relevant count strictly exceeds the confusion count.
Dataset sample_dataset(const TaskSpec& spec, int n, std::uint64_t seed);

/// Column for a token id.
Eigen::VectorXd token_vector(const TaskSpec& spec, TokenId id);

/// Rebuilds a sample from its label and token ids.
Sample make_sample(const TaskSpec& spec, int y, std::vector<TokenId> token_ids);

/// Checks the TaskSpec invariants; throws ParameterError on violation.
void validate(const TaskSpec& spec);

}  // namespace taskarith
