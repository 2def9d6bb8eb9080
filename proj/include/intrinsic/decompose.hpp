#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "intrinsic/annotation.hpp"
#include "intrinsic/image.hpp"
#include "intrinsic/losses.hpp"

namespace intrinsic::decompose {

/// Lower bound applied before taking logs and when dividing by estimates.
inline constexpr double kLogFloor = 1e-4;

struct Decomposition {
  Image reflectance;  ///< 3 or 1 channel, matching the source image
  Image shading;      ///< 1 channel
  double residual = 0.0;  ///< max |I - R*S| over all elements
};

/// Starting point of the energy solver. `identity` is (R, S) = (I, 1);
/// `luminance` is (I / lum(I), lum(I)); `split` is (I / sqrt(lum I), sqrt(lum I));
/// `blur` takes S from a Gaussian blur of lum(I); `retinex` starts from
/// retinex_decompose; `soft` reconstructs R from log-gradients weighted by
/// sigmoid((|g| - init_threshold) / init_width).
enum class EnergyInit { identity, luminance, split, blur, retinex, soft };

struct SolverConfig {
  double retinex_threshold = 0.1;  ///< on per-pixel log-luminance gradient magnitude
  double cg_tolerance = 1e-8;
  int cg_max_iterations = 20000;

  double step_size = 0.5;
  double momentum = 0.9;
  int iterations = 100;
  int max_halvings = 20;
  double smoothness = 1e-3;  ///< mu, weight on mean ||grad S||^2
  EnergyInit init = EnergyInit::soft;
  double init_threshold = 0.3;
  double init_width = 0.05;
  losses::LossWeights weights{};

  /// Throws ParameterError on out-of-range values.
  void check() const;
};

std::string to_json(const SolverConfig& config);
/// Missing keys keep their defaults; unknown keys and bad values throw ParseError.
SolverConfig solver_config_from_json(const std::string& text);

/// max |I - R*S| with S broadcast over channels.
double reconstruction_residual(const Image& image, const Image& r, const Image& s);

/// Least-squares field whose forward-difference gradient best matches
/// `target`, shifted so its mean equals `mean_anchor`. Conjugate gradient on
/// the normal equations; throws ConvergenceError when the relative residual
/// does not reach `tolerance` within `max_iterations`.
Image poisson_solve(const GradientField& target, double mean_anchor, double tolerance = 1e-8,
                    int max_iterations = 20000);

/// Per-component attribution of log-luminance gradients to reflectance.
struct Attribution {
  PixelSet x;  ///< forward x-differences kept in reflectance
  PixelSet y;
};

/// Threshold rule: both components of a pixel go to reflectance when its
/// log-gradient magnitude exceeds t_r.
Attribution threshold_attribution(const GradientField& log_grad, double t_r);

/// Reconstruct (R, S) from the kept reflectance log-gradients; chroma goes to
/// reflectance and S = lum(I) / lum(R), so the split is exact.
Decomposition reconstruct(const Image& image, const Attribution& attribution, const SolverConfig& config);

/// Same, with reflectance log-gradients given directly.
Decomposition reconstruct(const Image& image, const GradientField& log_r_grad, const SolverConfig& config);

/// Forward-difference gradient of ln(max(lum(I), 1e-4)).
GradientField log_luminance_gradient(const Image& image);

Decomposition retinex_decompose(const Image& image, const SolverConfig& config = {});

/// E_R pixels go to reflectance; E_S pixels and differences that stay inside
/// one annotated region go to shading; everything else falls back to the
/// Retinex threshold. Throws ValidationError when the document does not
/// validate against the image.
Decomposition edge_prior_decompose(const Image& image, const annotation::AnnotationDoc& doc,
                                   const SolverConfig& config = {});

inline constexpr int kHistogramBins = 16;
inline constexpr int kFeatureCount = kHistogramBins + 2;
using Features = std::array<double, kFeatureCount>;

/// 16-bin soft histogram of log(1 + ||grad S~||) over [0, log 2] with a
/// triangular kernel between bin centres, then mean and variance of S~, where
/// S~ = S / mean(S). A non-positive mean leaves S~ at zero.
Features featurize(const Image& shading);

/// Gradient of sum_k weights[k] * features[k] with respect to the input.
Image featurize_vjp(const Image& shading, const Features& weights);

struct TrainOptions {
  std::uint64_t seed = 0;
  int epochs = 500;
  double learning_rate = 1.0;
};

/// Logistic model on standardised features; implements the critic interface
/// used by the adversarial loss.
class DiscriminatorModel : public losses::ShadingCritic {
 public:
  Features feature_mean{};
  Features feature_scale{};  ///< standard deviation; 1 for constant features
  Features weights{};
  double bias = 0.0;
  TrainOptions training{};
  double final_loss = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;

  /// Zero weights, identity standardisation: scores 0.5 everywhere.
  static DiscriminatorModel uninformative();

  double logit_of_features(const Features& f) const;
  /// sigma(logit) in (0, 1).
  double score(const Image& shading) const;
  losses::CriticOutput evaluate(const Image& shading, bool want_grad) const override;

  std::string to_json() const;
  static DiscriminatorModel from_json(const std::string& text);
};

/// Full-batch gradient descent on mean BCE over precomputed features (label 1
/// for positives). Throws ParameterError when either class is empty.
DiscriminatorModel train_on_features(const std::vector<Features>& positives,
                                     const std::vector<Features>& negatives, const TrainOptions& options = {});

DiscriminatorModel discriminator_train(const std::vector<Image>& positives, const std::vector<Image>& negatives,
                                       const TrainOptions& options = {});

/// Equal parts of `textured` and `generated` (shuffled with `seed`), `count`
/// in total. When one list is empty the other is used alone.
std::vector<Image> mix_negatives(const std::vector<Image>& textured, const std::vector<Image>& generated,
                                 std::size_t count, std::uint64_t seed);

struct EnergyTerms {
  double reconstruction = 0.0;
  double adversarial = 0.0;
  double grad_constraint = 0.0;
  double smoothness = 0.0;
  double total = 0.0;
};

/// L_rec + lambda_ad * (-ln D(S)) + lambda_grad * L_grad + mu * mean ||grad S||^2.
EnergyTerms energy_terms(const Image& image, const Image& r, const Image& s, const losses::ShadingCritic& critic,
                         const SolverConfig& config);

/// First-order descent with momentum and step halving on the energy above.
/// `trace`, when given, receives the energy before the first step and after
/// every accepted step. Throws DivergenceError on a non-finite energy.
Decomposition energy_decompose(const Image& image, const losses::ShadingCritic& critic,
                               const SolverConfig& config = {}, std::vector<double>* trace = nullptr);

}  // namespace intrinsic::decompose
