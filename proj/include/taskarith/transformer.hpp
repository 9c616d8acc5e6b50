#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "taskarith/synth_data.hpp"

namespace taskarith {

/// One-layer, single-head attention model with merged parameterization.
///
///   f(X) = (1/P) sum_l a_(l)^T ReLU(V X softmax_l(X^T W x_l))
///
/// W plays the role of W_K^T W_Q and V of W_O W_V. A holds the per-position
/// head vectors a_(l) as rows and is never trained.
struct ModelParams {
  Eigen::MatrixXd W;  ///< d x d
  Eigen::MatrixXd V;  ///< m x d
  Eigen::MatrixXd A;  ///< P x m, entries +-1/sqrt(m)

  int d() const { return static_cast<int>(W.rows()); }
  int m() const { return static_cast<int>(V.rows()); }
  int P() const { return static_cast<int>(A.rows()); }
};

/// Magnitude of every head weight.
inline double head_magnitude(int m) { return 1.0 / std::sqrt(static_cast<double>(m)); }

struct TrainConfig {
  double eta = 0.2;
  int batch = 64;
  int iterations = 600;
  double xi = 0.01;
  std::uint64_t seed = 0;
  int m = 512;

  void validate() const;
};

struct TrainLog {
  std::vector<double> batch_loss;  ///< mean hinge loss of batch t, before step t
  int iterations = 0;
};

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

struct Gradient {
  Eigen::MatrixXd dW;
  Eigen::MatrixXd dV;
};

struct ErrorPair {
  double hinge = 0;
  double zero_one = 0;
};

/// W, V ~ N(0, xi^2) entrywise, A uniform on {+-1/sqrt(m)}.
ModelParams init_params(int d, int m, int P, double xi, std::uint64_t seed);

/// Throws ShapeError when W, V, A disagree.
void check_shapes(const ModelParams& params);

/// P x P matrix; column l is the softmax over keys s of x_s^T W x_l.
Eigen::MatrixXd attention_map(const ModelParams& params, const Eigen::MatrixXd& X);

double forward(const ModelParams& params, const Eigen::MatrixXd& X);

double hinge_loss(double f_value, int y);

/// Batch-mean gradient of the hinge loss with respect to W and V.
///
/// Subgradient conventions: ReLU'(0) = 1 and the hinge contributes nothing
/// once 1 - y f <= 0.
Gradient grad(const ModelParams& params, std::span<const Sample> batch);

/// Same as grad(), also returning the batch-mean hinge loss.
Gradient grad(const ModelParams& params, std::span<const Sample> batch, double& mean_loss);

/// Online SGD: iteration t draws a fresh batch of cfg.batch samples from
/// `spec` with seed mix_seed(cfg.seed, t).
TrainResult sgd_finetune(const ModelParams& params0, const TaskSpec& spec, const TrainConfig& cfg);

/// Monte-Carlo hinge and zero-one error. sign(0) counts as an error.
ErrorPair eval_error(const ModelParams& params, const TaskSpec& spec, int n_samples, std::uint64_t seed);
ErrorPair eval_error(const ModelParams& params, std::span<const Sample> samples);

/// Model outputs for each sample, in order.
std::vector<double> outputs(const ModelParams& params, std::span<const Sample> samples);

}  // namespace taskarith
