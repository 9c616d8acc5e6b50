#pragma once

#include <span>
#include <string>
#include <vector>

#include "taskarith/synth_data.hpp"
#include "taskarith/transformer.hpp"

namespace taskarith {

/// Constants that the theory leaves as Theta(.) / poly(.). Defaults are 1
/// with a linear poly(eta * delta_star).
struct RegionConstants {
  double k_neg = 1.0;            ///< constant inside -Theta(alpha^-2)
  double k_poly = 1.0;           ///< leading constant of poly(eta * delta_star)
  double poly_exponent = 1.0;    ///< exponent of poly(eta * delta_star)
  double eta_delta_star = 0.08;  ///< the product eta * delta_star fed to poly(.)
};

struct AnalysisConfig {
  double beta = 0.05;  ///< cross-task interference slack
  double c = 0.5;      ///< margin headroom, in (0, 1)
  double margin = 1.5; ///< replaces 1 + c in the OOD conditions
  RegionConstants constants;
  double alpha_zero_tol = 1e-9;  ///< |alpha| below this is treated as alpha = 0

  /// margin = 1 + c (hinge theory).
  static AnalysisConfig theory(double beta, double c);
  /// margin = 0.2 + c (practical classification margin).
  static AnalysisConfig experimental(double beta, double c);

  void validate() const;
};

struct LambdaRegion {
  enum class Kind { interval, half_line, empty };
  Kind kind = Kind::empty;
  double lo = 0;  ///< may be -inf
  double hi = 0;  ///< may be +inf
  std::string rationale;

  bool contains(double lambda) const;
};

const char* to_string(LambdaRegion::Kind kind);

struct OodCheck {
  bool verdict = false;
  double cond1_slack = 0;  ///< sum lambda_i gamma_i - margin
  double cond2_slack = 0;  ///< sum lambda_i gamma_i^2 - margin
  double cond3_slack = 0;  ///< c - max_i |lambda_i| beta
  bool existence = false;  ///< some gamma_i != 0
  bool lambdas_nonzero = false;
};

struct ClosedFormLambdas {
  std::vector<double> lambdas;
  double sum_lambda_gamma = 0;
  double sum_lambda_gamma_sq = 0;
  double c_gamma = 0;  ///< including the rescale factor
  double rescale = 1;
  bool second_condition_short = false;  ///< sum lambda gamma^2 < 1 + c
};

enum class AlphaHatMode { pearson, sign };

double true_alpha(const TaskSpec& a, const TaskSpec& b);

/// Averaged agreement of centred model outputs over two test sets.
double alpha_hat(const ModelParams& model1, const ModelParams& model2, std::span<const Sample> d1,
                 std::span<const Sample> d2, AlphaHatMode mode = AlphaHatMode::pearson);

/// Same estimator from precomputed outputs: y1_dj are model 1's outputs on Dj.
double alpha_hat_from_outputs(std::span<const double> y1_d1, std::span<const double> y2_d1,
                              std::span<const double> y1_d2, std::span<const double> y2_d2, AlphaHatMode mode);

/// Lambdas for which Psi0 + tau1 + lambda tau2 learns both tasks.
LambdaRegion mtl_lambda_region(double alpha, const AnalysisConfig& cfg);

/// Lambdas for which Psi0 + tau1 + lambda tau2 forgets task 2 and keeps task 1.
LambdaRegion unlearn_lambda_region(double alpha, const AnalysisConfig& cfg);

OodCheck ood_condition_check(std::span<const double> gammas, std::span<const double> lambdas,
                             const AnalysisConfig& cfg);

/// lambda_i = C * (gamma_i / sqrt(S2) + gamma_i^2 / sqrt(S4)), with C chosen so
/// that sum lambda_i gamma_i = 1 + c. With `rescaled`, C is multiplied by
/// max(1, sqrt(S2 / S4)) so that both weighted sums reach 1 + c.
ClosedFormLambdas closed_form_lambdas(std::span<const double> gammas, double c, bool rescaled = false);

struct BetaConstants {
  double k_poly = 1.0;
  double poly_exponent = 1.0;
  double k_eps = 1.0;
};

/// k_poly (eta delta_star)^e + k_eps * epsilon * sqrt(M), clamped below 1.
double beta_estimate(double eta, double delta_star, double epsilon, int M, const BetaConstants& k = {});

}  // namespace taskarith
