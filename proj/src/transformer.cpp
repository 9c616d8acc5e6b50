#include "taskarith/transformer.hpp"

#include <algorithm>
#include <string>

#include "taskarith/error.hpp"
#include "taskarith/parallel.hpp"
#include "taskarith/random.hpp"

namespace taskarith {
namespace {

struct ForwardCache {
  Eigen::MatrixXd S;  // P x P attention, column per query
  Eigen::MatrixXd Z;  // d x P attended values
  Eigen::MatrixXd H;  // m x P pre-activations
  double f = 0;
};

void softmax_columns(Eigen::MatrixXd& logits) {
  for (Eigen::Index l = 0; l < logits.cols(); ++l) {
    auto col = logits.col(l);
    const double peak = col.maxCoeff();
    col = (col.array() - peak).exp();
    col /= col.sum();
  }
}

void check_input(const ModelParams& params, const Eigen::MatrixXd& X) {
  if (X.rows() != params.W.rows() || X.cols() != params.A.rows())
    throw ShapeError("input is " + std::to_string(X.rows()) + "x" + std::to_string(X.cols()) + ", model expects " +
                     std::to_string(params.W.rows()) + "x" + std::to_string(params.A.rows()));
  if (!X.allFinite()) throw NumericError("non-finite entry in input");
}

ForwardCache run_forward(const ModelParams& params, const Eigen::MatrixXd& X) {
  ForwardCache c;
  c.S = X.transpose() * (params.W * X);
  softmax_columns(c.S);
  c.Z = X * c.S;
  c.H = params.V * c.Z;
  const double P = static_cast<double>(X.cols());
  c.f = (params.A.transpose().array() * c.H.array().max(0.0)).sum() / P;
  return c;
}

struct SampleGradient {
  Eigen::MatrixXd dW;
  Eigen::MatrixXd dV;
  double loss = 0;
  bool active = false;
};

SampleGradient sample_gradient(const ModelParams& params, const Sample& s) {
  check_input(params, s.X);
  const ForwardCache c = run_forward(params, s.X);
  SampleGradient out;
  out.loss = hinge_loss(c.f, s.y);
  if (1.0 - s.y * c.f <= 0.0) return out;
  out.active = true;

  const double P = static_cast<double>(s.X.cols());
  const double scale = -static_cast<double>(s.y) / P;
  // Gate: head weight where the unit is on (ReLU'(0) = 1).
  const Eigen::MatrixXd gate = (c.H.array() >= 0.0).select(params.A.transpose(), 0.0);

  out.dV.noalias() = scale * gate * c.Z.transpose();

  // d f / d z_l, one column per query position.
  const Eigen::MatrixXd gz = scale * (params.V.transpose() * gate);
  // d f / d logit(s, l) = S(s, l) * g_l . (x_s - z_l)
  Eigen::MatrixXd dlogit = s.X.transpose() * gz;
  for (Eigen::Index l = 0; l < dlogit.cols(); ++l) {
    dlogit.col(l).array() -= c.Z.col(l).dot(gz.col(l));
  }
  dlogit.array() *= c.S.array();
  out.dW.noalias() = s.X * dlogit * s.X.transpose();
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ParameterError("eta must be finite and non-negative");
  if (batch < 1) throw ParameterError("batch >= 1 violated");
  if (iterations < 1) throw ParameterError("iterations >= 1 violated");
  if (m < 1) throw ParameterError("m >= 1 violated");
  if (!(xi > 0.0) || xi > head_magnitude(m)) throw ParameterError("0 < xi <= 1/sqrt(m) violated");
}

ModelParams init_params(int d, int m, int P, double xi, std::uint64_t seed) {
  if (d < 1 || m < 1 || P < 1) throw ParameterError("d, m, P must be positive");
  if (!(xi > 0.0) || xi > head_magnitude(m)) throw ParameterError("0 < xi <= 1/sqrt(m) violated");

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, xi);
  std::bernoulli_distribution coin(0.5);
  const double a = head_magnitude(m);

  ModelParams p;
  p.W.resize(d, d);
  p.V.resize(m, d);
  p.A.resize(P, m);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) p.W(r, c) = normal(rng);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < d; ++c) p.V(r, c) = normal(rng);
  for (int r = 0; r < P; ++r)
    for (int c = 0; c < m; ++c) p.A(r, c) = coin(rng) ? a : -a;
  return p;
}

void check_shapes(const ModelParams& params) {
  if (params.W.rows() != params.W.cols()) throw ShapeError("W must be square");
  if (params.V.cols() != params.W.rows()) throw ShapeError("V must have d columns");
  if (params.A.cols() != params.V.rows()) throw ShapeError("A must have m columns");
}

Eigen::MatrixXd attention_map(const ModelParams& params, const Eigen::MatrixXd& X) {
  check_input(params, X);
  Eigen::MatrixXd S = X.transpose() * (params.W * X);
  softmax_columns(S);
  return S;
}

double forward(const ModelParams& params, const Eigen::MatrixXd& X) {
  check_input(params, X);
  return run_forward(params, X).f;
}

double hinge_loss(double f_value, int y) { return std::max(1.0 - y * f_value, 0.0); }

Gradient grad(const ModelParams& params, std::span<const Sample> batch, double& mean_loss) {
  if (batch.empty()) throw ParameterError("gradient needs a non-empty batch");
  check_shapes(params);

  std::vector<SampleGradient> terms(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) { terms[i] = sample_gradient(params, batch[i]); });

  Gradient g;
  g.dW = Eigen::MatrixXd::Zero(params.W.rows(), params.W.cols());
  g.dV = Eigen::MatrixXd::Zero(params.V.rows(), params.V.cols());
  double loss = 0;
  for (const SampleGradient& t : terms) {
    loss += t.loss;
    if (!t.active) continue;
    g.dW += t.dW;
    g.dV += t.dV;
  }
  const double n = static_cast<double>(batch.size());
  g.dW /= n;
  g.dV /= n;
  mean_loss = loss / n;
  return g;
}

Gradient grad(const ModelParams& params, std::span<const Sample> batch) {
  double unused = 0;
  return grad(params, batch, unused);
}

TrainResult sgd_finetune(const ModelParams& params0, const TaskSpec& spec, const TrainConfig& cfg) {
  cfg.validate();
  check_shapes(params0);
  if (params0.m() != cfg.m) throw ShapeError("model width differs from TrainConfig.m");
  if (params0.d() != spec.d || params0.P() != spec.P) throw ShapeError("model d / P differ from the task spec");

  TrainResult out{params0, {}};
  out.log.batch_loss.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int t = 0; t < cfg.iterations; ++t) {
    const Dataset batch = sample_dataset(spec, cfg.batch, mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    double loss = 0;
    const Gradient g = grad(out.params, batch.samples, loss);
    if (!std::isfinite(loss))
      throw DivergenceError("non-finite loss at iteration " + std::to_string(t), static_cast<std::size_t>(t));
    out.params.W -= cfg.eta * g.dW;
    out.params.V -= cfg.eta * g.dV;
    if (!out.params.W.allFinite() || !out.params.V.allFinite())
      throw DivergenceError("non-finite parameters after iteration " + std::to_string(t), static_cast<std::size_t>(t));
    out.log.batch_loss.push_back(loss);
  }
  out.log.iterations = cfg.iterations;
  return out;
}

std::vector<double> outputs(const ModelParams& params, std::span<const Sample> samples) {
  check_shapes(params);
  std::vector<double> f(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { f[i] = forward(params, samples[i].X); });
  return f;
}

ErrorPair eval_error(const ModelParams& params, std::span<const Sample> samples) {
  if (samples.empty()) throw ParameterError("n_samples >= 1 violated");
  const std::vector<double> f = outputs(params, samples);
  ErrorPair e;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int y = samples[i].y;
    e.hinge += hinge_loss(f[i], y);
    if (!(y * f[i] > 0.0)) e.zero_one += 1.0;
  }
  const double n = static_cast<double>(samples.size());
  e.hinge /= n;
  e.zero_one /= n;
  return e;
}

ErrorPair eval_error(const ModelParams& params, const TaskSpec& spec, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ParameterError("n_samples >= 1 violated");
  const Dataset data = sample_dataset(spec, n_samples, seed);
  return eval_error(params, data.samples);
}

}  // namespace taskarith
