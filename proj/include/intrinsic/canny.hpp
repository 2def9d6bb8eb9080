#pragma once

#include "intrinsic/image.hpp"

namespace intrinsic {

struct CannyParams {
  double sigma = 1.4;
  double low = 0.05;
  double high = 0.15;
  friend bool operator==(const CannyParams&, const CannyParams&) = default;
};

/// Sobel gradient magnitude (normalized to a per-pixel derivative estimate)
/// of the Gaussian-blurred 1-channel image.
Image blurred_sobel_magnitude(const Image& luminance, double sigma);

/// Gaussian blur, Sobel, non-maximum suppression along the quantized
/// gradient direction, then double threshold with 8-connected hysteresis.
/// Input must be single-channel; throws ParameterError unless
/// 0 < low < high.
///
/// Along a step edge the suppression keeps the pixel on the lower-coordinate
/// side, which is where forward differences register the jump.
EdgeSet canny(const Image& luminance, const CannyParams& params = {});

}  // namespace intrinsic
