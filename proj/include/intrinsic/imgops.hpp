#pragma once

#include <span>

#include "intrinsic/image.hpp"

namespace intrinsic {

/// Rec.709 luminance weights.
inline constexpr double kLumaR = 0.2126;
inline constexpr double kLumaG = 0.7152;
inline constexpr double kLumaB = 0.0722;

/// Single-channel luminance; 1-channel input is returned unchanged.
Image to_luminance(const Image& img);

/// Forward differences per channel; the last column of gx and the last row of
/// gy are zero (replicate boundary).
GradientField gradient(const Image& img);

/// Adjoint of `gradient`: for fields u, v returns Dx^T u + Dy^T v, so that
/// <gradient(f), (u, v)> = <f, gradient_adjoint(u, v)>.
Image gradient_adjoint(const Image& u, const Image& v);

/// sqrt(sum over channels of gx^2 + gy^2), one channel.
Image gradient_magnitude(const GradientField& gf);

/// Per-pixel product R * S. S may have one channel (broadcast) or match R.
Image hadamard(const Image& reflectance, const Image& shading);

/// Scale factor that brings the channel-averaged mean of `img` over `support`
/// to 1. Throws DegenerateRegionError on an empty support or non-positive mean.
double normalization_scale(const Image& img, const PixelSet& support);

/// img * normalization_scale(img, support).
Image mean_normalize(const Image& img, const PixelSet& support);

/// Separable Gaussian blur with replicate borders; sigma <= 0 is the identity.
Image gaussian_blur(const Image& img, double sigma);

Image scaled(const Image& img, double factor);

/// Elementwise max(v, floor).
Image floored(const Image& img, double floor);

/// Broadcast a 1-channel image to `channels` channels.
Image broadcast(const Image& img, int channels);

/// Mean over all elements.
double mean(const Image& img);

/// Max |a - b| over elements; shapes must match.
double max_abs_diff(const Image& a, const Image& b);

}  // namespace intrinsic
