#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "intrinsic/annotation.hpp"
#include "intrinsic/image.hpp"

namespace intrinsic::metrics {

struct MetricConfig {
  /// Gradient-magnitude threshold on mean-normalized rasters.
  double tau = 0.05;
  /// Weight on the entangled-edge accuracy in each F score.
  double w1 = 3.0;
  double w2 = 1.0;
  /// Relative shading residual tolerated without penalty.
  double deadband = 0.05;

  /// Throws ParameterError unless tau, w1, w2 > 0 and 0 <= deadband < 1.
  void check() const;
  friend bool operator==(const MetricConfig&, const MetricConfig&) = default;
};

/// Correct-pixel tallies behind the four edge accuracies.
struct EdgeCounts {
  std::size_t e_r = 0;
  std::size_t e_s = 0;
  std::size_t r_es = 0;  // E_S pixels where reflectance stays flat
  std::size_t r_er = 0;  // E_R pixels where reflectance changes
  std::size_t s_er = 0;  // E_R pixels where shading stays flat
  std::size_t s_es = 0;  // E_S pixels where shading changes
};

struct EdgeAccuracies {
  double acc_r_es = 0.0;
  double acc_r_er = 0.0;
  double acc_s_er = 0.0;
  double acc_s_es = 0.0;
  EdgeCounts counts;
};

struct FScores {
  double f_r = 0.0;
  double f_s = 0.0;
};

struct MetricReport {
  double acc_r_es = 0.0;
  double acc_r_er = 0.0;
  double acc_s_er = 0.0;
  double acc_s_es = 0.0;
  double f_r = 0.0;
  double f_s = 0.0;
  double region_error_r = 0.0;
  double region_error_s = 0.0;
  EdgeCounts counts;
  std::size_t regions = 0;
  std::size_t region_pixels = 0;
  std::size_t images = 1;
  MetricConfig config;
};

/// Region reflectance error: each region is normalized to mean 1 per channel
/// and the mean squared deviation from 1 is averaged over regions with equal
/// weight. Throws DegenerateRegionError naming the region when its mean is
/// not positive.
double region_error_reflectance(const Image& r_hat, std::span<const PixelSet> regions,
                                std::span<const int> ids = {});
double region_error_reflectance(const Image& r_hat, const annotation::RegionAnnotation& regions);

/// Closed-form least-squares scale of x_hat onto x over the mask (0 when
/// x_hat vanishes there).
double si_mse_alpha(const Image& x_hat, const Image& x, const PixelSet& mask);

/// (1/|mask|) * sum ||alpha * x_hat - x||^2 with the optimal alpha.
/// Throws ParameterError on an empty mask, DimensionError on shape mismatch.
double si_mse(const Image& x_hat, const Image& x, const PixelSet& mask);

/// Relative region shading error with a per-pixel deadband. The reference
/// shading in each region is the image luminance there; a 3-channel s_hat
/// is reduced to luminance first.
double region_error_shading(const Image& s_hat, const Image& image, std::span<const PixelSet> regions,
                            const MetricConfig& config, std::span<const int> ids = {});
double region_error_shading(const Image& s_hat, const Image& image,
                            const annotation::RegionAnnotation& regions, const MetricConfig& config);

/// Four edge accuracies of predictions normalized over `eval_mask`. Values
/// exactly at tau fail both strict comparisons. Throws
/// UndefinedAccuracyError when either edge set is empty.
EdgeAccuracies edge_accuracies(const Image& r_hat, const Image& s_hat, const EdgeSet& e_r,
                               const EdgeSet& e_s, const PixelSet& eval_mask,
                               const MetricConfig& config);

/// Weighted harmonic means; a zero accuracy yields F = 0.
FScores f_scores(const EdgeAccuracies& acc, const MetricConfig& config);

/// Normalization support for the edge metric: regions ∪ E_R ∪ E_S, dilated
/// by one pixel.
PixelSet evaluation_mask(const PixelSet& region_union, const EdgeSet& e_r, const EdgeSet& e_s);

/// Full report with precomputed edge sets.
MetricReport evaluate(const Image& r_hat, const Image& s_hat, const Image& image,
                      std::span<const PixelSet> regions, const EdgeSet& e_r, const EdgeSet& e_s,
                      const MetricConfig& config);

/// Full report; E_S is recomputed from the image under the document's Canny
/// parameters.
MetricReport evaluate(const Image& r_hat, const Image& s_hat, const Image& image,
                      const annotation::AnnotationDoc& doc, const MetricConfig& config);

/// Dataset-level report: accuracies micro-averaged over pooled edge pixels,
/// region errors macro-averaged over images, F recomputed from the pooled
/// accuracies. Throws ParameterError on an empty list or mixed configs.
MetricReport aggregate(std::span<const MetricReport> reports);

/// Fixed-key-order JSON.
std::string to_json(const MetricReport& report, int indent = 2);

/// Fixed-width table, columns in the order Acc_R^(E_S), Acc_R^(E_R),
/// Acc_S^(E_R), Acc_S^(E_S), F_R, F_S, RegionError_R, RegionError_S.
std::string table_header();
std::string table_row(const MetricReport& report, const std::string& label = {});

}  // namespace intrinsic::metrics
