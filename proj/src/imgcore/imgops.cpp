#include "intrinsic/imgops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "intrinsic/error.hpp"

namespace intrinsic {

Image to_luminance(const Image& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) {
    throw DimensionError("luminance needs 1 or 3 channels, got " +
                         std::to_string(img.channels()));
  }
  Image out(img.width(), img.height(), 1);
  const auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    dst[i] = kLumaR * src[3 * i] + kLumaG * src[3 * i + 1] + kLumaB * src[3 * i + 2];
  }
  return out;
}

GradientField gradient(const Image& img) {
  const int w = img.width(), h = img.height(), nc = img.channels();
  GradientField gf{Image(w, h, nc), Image(w, h, nc)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        const double v = img.at(x, y, c);
        if (x + 1 < w) gf.gx.at(x, y, c) = img.at(x + 1, y, c) - v;
        if (y + 1 < h) gf.gy.at(x, y, c) = img.at(x, y + 1, c) - v;
      }
    }
  }
  return gf;
}

Image gradient_adjoint(const Image& u, const Image& v) {
  if (!u.same_shape(v)) throw DimensionError("adjoint fields differ in shape");
  const int w = u.width(), h = u.height(), nc = u.channels();
  Image out(w, h, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        if (x + 1 < w) acc -= u.at(x, y, c);
        if (x >= 1) acc += u.at(x - 1, y, c);
        if (y + 1 < h) acc -= v.at(x, y, c);
        if (y >= 1) acc += v.at(x, y - 1, c);
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

Image gradient_magnitude(const GradientField& gf) {
  if (!gf.gx.same_shape(gf.gy)) throw DimensionError("gradient components differ");
  const int nc = gf.gx.channels();
  Image out(gf.gx.width(), gf.gx.height(), 1);
  const auto gx = gf.gx.data();
  const auto gy = gf.gy.data();
  for (std::size_t p = 0; p < out.size(); ++p) {
    double acc = 0.0;
    for (int c = 0; c < nc; ++c) {
      const std::size_t i = p * nc + c;
      acc += gx[i] * gx[i] + gy[i] * gy[i];
    }
    out[p] = std::sqrt(acc);
  }
  return out;
}

Image hadamard(const Image& reflectance, const Image& shading) {
  if (!reflectance.same_extent(shading)) {
    throw DimensionError("hadamard operands differ in extent");
  }
  const int nc = reflectance.channels();
  if (shading.channels() != 1 && shading.channels() != nc) {
    throw DimensionError("shading must have 1 channel or match reflectance");
  }
  Image out(reflectance.width(), reflectance.height(), nc);
  const bool bc = shading.channels() == 1 && nc != 1;
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    for (int c = 0; c < nc; ++c) {
      const std::size_t i = p * nc + c;
      out[i] = reflectance[i] * (bc ? shading[p] : shading[i]);
    }
  }
  return out;
}

double normalization_scale(const Image& img, const PixelSet& support) {
  if (support.width() != img.width() || support.height() != img.height()) {
    throw DimensionError("normalization support does not match image extent");
  }
  if (support.empty()) throw DegenerateRegionError("empty normalization support");
  const int nc = img.channels();
  double sum = 0.0;
  for (std::size_t p : support.indices()) {
    for (int c = 0; c < nc; ++c) sum += img[p * nc + c];
  }
  const double mean = sum / (static_cast<double>(support.count()) * nc);
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw DegenerateRegionError("non-positive mean over normalization support");
  }
  return 1.0 / mean;
}

Image mean_normalize(const Image& img, const PixelSet& support) {
  return scaled(img, normalization_scale(img, support));
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    norm += k[i + radius];
  }
  for (double& v : k) v /= norm;

  const int w = img.width(), h = img.height(), nc = img.channels();
  Image tmp(w, h, nc);
  Image out(w, h, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += k[i + radius] * img.at(std::clamp(x + i, 0, w - 1), y, c);
        }
        tmp.at(x, y, c) = acc;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += k[i + radius] * tmp.at(x, std::clamp(y + i, 0, h - 1), c);
        }
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

Image scaled(const Image& img, double factor) {
  Image out = img;
  for (double& v : out.data()) v *= factor;
  return out;
}

Image floored(const Image& img, double floor) {
  Image out = img;
  for (double& v : out.data()) v = std::max(v, floor);
  return out;
}

Image broadcast(const Image& img, int channels) {
  if (img.channels() == channels) return img;
  if (img.channels() != 1) throw DimensionError("can only broadcast 1-channel images");
  Image out(img.width(), img.height(), channels);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    for (int c = 0; c < channels; ++c) out[p * channels + c] = img[p];
  }
  return out;
}

double mean(const Image& img) {
  if (img.empty()) return 0.0;
  double s = 0.0;
  for (double v : img.data()) s += v;
  return s / static_cast<double>(img.size());
}

double max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace intrinsic
