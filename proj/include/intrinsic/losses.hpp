#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "intrinsic/image.hpp"

namespace intrinsic::losses {

/// Scalar loss plus its gradient with respect to each named input. Scalar
/// inputs (the discriminator logit) carry a 1x1x1 gradient raster. The value
/// is kept in extended precision so that central differences at eps = 1e-6
/// still resolve gradient entries near 1e-8.
struct LossEval {
  long double value = 0.0L;
  std::map<std::string, Image> grad;

  const Image& at(const std::string& name) const { return grad.at(name); }
};

struct LossWeights {
  double lambda_r = 1.0;
  double lambda_s = 1.0;
  double lambda_ad = 0.1;
  double lambda_grad = 0.1;

  /// Throws ParameterError on a negative weight.
  void check() const;
};

/// Shading discriminator as seen by the generator losses: a logit and,
/// on request, its gradient with respect to the input shading.
struct CriticOutput {
  long double logit = 0.0L;
  Image logit_grad;
};

class ShadingCritic {
 public:
  virtual ~ShadingCritic() = default;
  virtual CriticOutput evaluate(const Image& shading, bool want_grad) const = 0;
};

/// Logistic link.
double sigmoid(double z);
long double sigmoid(long double z);

/// Scale-invariant MSE over the whole raster with one jointly fitted alpha.
/// With `with_alpha_grad` the gradient differentiates through the closed-form
/// alpha; otherwise alpha is held fixed. Both agree at the optimum. Gradient
/// key: "x_hat".
LossEval si_mse_loss(const Image& x_hat, const Image& x, bool with_alpha_grad = true);

/// si-MSE on the raster plus si-MSE on its forward-difference field (gx and gy
/// stacked as channels, one alpha). Gradient key: "x_hat".
LossEval regression_loss(const Image& x_hat, const Image& x);

/// (1/N) sum (I - R*S)^2 over all N elements of I; S may broadcast.
/// Gradient keys: "r_hat", "s_hat".
LossEval reconstruction_loss(const Image& image, const Image& r_hat, const Image& s_hat);

/// lambda_r * L_R + lambda_s * L_S + L_reconstruct. Keys: "r_hat", "s_hat".
LossEval direct_loss(const Image& image, const Image& r_hat, const Image& s_hat, const Image& r_gt,
                     const Image& s_gt, const LossWeights& weights);

inline constexpr double kBceClamp = 1e-7;

/// Negative log-likelihood -[y ln p + (1-y) ln(1-p)] with p clamped to
/// [1e-7, 1 - 1e-7]. Gradient key: "y_hat" (zero where the clamp is active).
LossEval bce(double y_hat, double y);

/// Same loss on a pre-sigmoid logit, evaluated stably; gradient
/// sigmoid(z) - y under key "logit".
LossEval bce_with_logit(long double logit, double y);

/// BCE(D(s_hat), 1), chained through the critic's input gradient.
/// Gradient key: "s_hat".
LossEval adversarial_loss(const Image& s_hat, const ShadingCritic& critic);

/// (1/P) sum_p (grad R(p) . grad S(p))^2 over the P pixels; a 1-channel S is
/// dotted with every channel of R and the products summed.
/// Keys: "r_hat", "s_hat".
LossEval grad_constraint_loss(const Image& r_hat, const Image& s_hat);

/// L_direct + lambda_ad * L_ad + lambda_grad * L_grad. Keys: "r_hat", "s_hat".
LossEval generator_loss(const Image& image, const Image& r_hat, const Image& s_hat, const Image& r_gt,
                        const Image& s_gt, const LossWeights& weights, const ShadingCritic& critic);

using Inputs = std::map<std::string, Image>;
using LossFn = std::function<LossEval(const Inputs&)>;

struct GradCheckOptions {
  double eps = 1e-6;
  /// Coordinates sampled per input; inputs with fewer elements are checked
  /// exhaustively. Never fewer than 64.
  std::size_t coords = 96;
  double abs_floor = 1e-8;
  std::uint64_t seed = 0;
};

/// Max over sampled coordinates of |analytic - central difference| /
/// max(|analytic|, |numeric|, abs_floor). Every input must have a gradient
/// of matching shape in the evaluated LossEval.
double finite_diff_check(const LossFn& loss, const Inputs& inputs, const GradCheckOptions& options = {});

}  // namespace intrinsic::losses
