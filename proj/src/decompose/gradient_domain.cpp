#include <algorithm>
#include <cmath>

#include "intrinsic/decompose.hpp"
#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"

namespace intrinsic::decompose {

namespace {

/// Geometric-mean shading the reconstructed split is pinned to.
constexpr double kShadingLevel = 0.8;

Image log_luminance(const Image& image) {
  Image l = floored(to_luminance(image), kLogFloor);
  for (double& v : l.data()) v = std::log(v);
  return l;
}

}  // namespace

double reconstruction_residual(const Image& image, const Image& r, const Image& s) {
  return max_abs_diff(image, hadamard(r, s));
}

Attribution threshold_attribution(const GradientField& log_grad, double t_r) {
  const int w = log_grad.gx.width(), h = log_grad.gx.height();
  Attribution a{PixelSet(w, h), PixelSet(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (std::hypot(log_grad.gx.at(x, y), log_grad.gy.at(x, y)) > t_r) {
        a.x.insert(x, y);
        a.y.insert(x, y);
      }
    }
  }
  return a;
}

GradientField log_luminance_gradient(const Image& image) { return gradient(log_luminance(image)); }

Decomposition reconstruct(const Image& image, const Attribution& attribution, const SolverConfig& config) {
  GradientField g = log_luminance_gradient(image);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!attribution.x.contains(x, y)) g.gx.at(x, y) = 0.0;
      if (!attribution.y.contains(x, y)) g.gy.at(x, y) = 0.0;
    }
  }
  return reconstruct(image, g, config);
}

Decomposition reconstruct(const Image& image, const GradientField& g, const SolverConfig& config) {
  if (!g.gx.same_extent(image) || g.gx.channels() != 1) throw DimensionError("log-gradient field does not match");
  const Image lum = floored(to_luminance(image), kLogFloor);
  const Image log_lum = log_luminance(image);
  const Image log_r =
      poisson_solve(g, mean(log_lum) - std::log(kShadingLevel), config.cg_tolerance, config.cg_max_iterations);

  Decomposition d;
  const int nc = image.channels();
  d.reflectance = Image(image.width(), image.height(), nc);
  d.shading = Image(image.width(), image.height(), 1);
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    const double r_lum = std::exp(log_r[p]);
    d.shading[p] = lum[p] / r_lum;
    for (int c = 0; c < nc; ++c) {
      const std::size_t i = p * nc + c;
      d.reflectance[i] = std::max(image[i], 0.0) / lum[p] * r_lum;
    }
  }
  d.residual = reconstruction_residual(image, d.reflectance, d.shading);
  return d;
}

Decomposition retinex_decompose(const Image& image, const SolverConfig& config) {
  config.check();
  return reconstruct(image, threshold_attribution(gradient(log_luminance(image)), config.retinex_threshold), config);
}

Decomposition edge_prior_decompose(const Image& image, const annotation::AnnotationDoc& doc,
                                   const SolverConfig& config) {
  config.check();
  const auto violations = annotation::validate(doc, image);
  if (!violations.empty()) {
    throw ValidationError("annotation does not match the image: " + violations.front().code + " (" +
                          violations.front().message + ")");
  }
  const int w = image.width(), h = image.height();
  const std::vector<PixelSet> regions = doc.regions.rasterize(w, h);
  std::vector<int> label(image.pixel_count(), -1);
  for (std::size_t k = 0; k < regions.size(); ++k) {
    for (std::size_t i : regions[k].indices()) label[i] = static_cast<int>(k);
  }
  const EdgeSet e_s = annotation::derive_shading_edges(annotation::canny_for(doc, image), doc.regions);
  const EdgeSet& e_r = doc.edges.e_r;

  const GradientField g = gradient(log_luminance(image));
  const Attribution fallback = threshold_attribution(g, config.retinex_threshold);
  Attribution a{PixelSet(w, h), PixelSet(w, h)};
  auto same_region = [&](int x0, int y0, int x1, int y1) {
    const int l = label[static_cast<std::size_t>(y0) * w + x0];
    return l >= 0 && x1 < w && y1 < h && l == label[static_cast<std::size_t>(y1) * w + x1];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (e_r.contains(x, y)) {
        a.x.insert(x, y);
        a.y.insert(x, y);
        continue;
      }
      if (e_s.contains(x, y)) continue;
      if (!same_region(x, y, x + 1, y) && fallback.x.contains(x, y)) a.x.insert(x, y);
      if (!same_region(x, y, x, y + 1) && fallback.y.contains(x, y)) a.y.insert(x, y);
    }
  }
  return reconstruct(image, a, config);
}

}  // namespace intrinsic::decompose
