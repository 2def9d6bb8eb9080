#include "intrinsic/canny.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"

namespace intrinsic {

namespace {

struct Sobel {
  Image gx;
  Image gy;
  Image mag;
};

Sobel sobel(const Image& blurred) {
  const int w = blurred.width(), h = blurred.height();
  Sobel s{Image(w, h, 1), Image(w, h, 1), Image(w, h, 1)};
  auto px = [&](int x, int y) {
    return blurred.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1) -
                         px(x - 1, y - 1) - 2.0 * px(x - 1, y) - px(x - 1, y + 1)) /
                        8.0;
      const double gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1) -
                         px(x - 1, y - 1) - 2.0 * px(x, y - 1) - px(x + 1, y - 1)) /
                        8.0;
      s.gx.at(x, y) = gx;
      s.gy.at(x, y) = gy;
      s.mag.at(x, y) = std::hypot(gx, gy);
    }
  }
  return s;
}

void require_luminance(const Image& img) {
  if (img.channels() != 1) {
    throw DimensionError("canny expects a 1-channel image; call to_luminance first");
  }
}

}  // namespace

Image blurred_sobel_magnitude(const Image& luminance, double sigma) {
  require_luminance(luminance);
  return sobel(gaussian_blur(luminance, sigma)).mag;
}

EdgeSet canny(const Image& luminance, const CannyParams& params) {
  require_luminance(luminance);
  if (!(params.low > 0.0) || !(params.low < params.high)) {
    throw ParameterError("canny thresholds must satisfy 0 < low < high");
  }
  const int w = luminance.width(), h = luminance.height();
  const Sobel s = sobel(gaussian_blur(luminance, params.sigma));

  auto mag = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return s.mag.at(x, y);
  };

  // 0: strong, 1: weak candidate, 2: suppressed.
  std::vector<std::uint8_t> cls(static_cast<std::size_t>(w) * h, 2);
  std::vector<Pixel> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = s.mag.at(x, y);
      if (!(m > params.low)) continue;
      double angle = std::atan2(s.gy.at(x, y), s.gx.at(x, y)) * 180.0 / std::numbers::pi;
      if (angle < 0.0) angle += 180.0;
      int dx = 1, dy = 0;
      if (angle >= 22.5 && angle < 67.5) {
        dx = 1, dy = 1;
      } else if (angle >= 67.5 && angle < 112.5) {
        dx = 0, dy = 1;
      } else if (angle >= 112.5 && angle < 157.5) {
        dx = -1, dy = 1;
      }
      const double prev = mag(x - dx, y - dy);
      const double next = mag(x + dx, y + dy);
      const double tol = 1e-9 * m;
      if (!(m > prev + tol && m >= next - tol)) continue;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (m > params.high) {
        cls[i] = 0;
        stack.push_back({x, y});
      } else {
        cls[i] = 1;
      }
    }
  }

  EdgeSet edges(w, h);
  for (const Pixel& p : stack) edges.insert(p);
  while (!stack.empty()) {
    const Pixel p = stack.back();
    stack.pop_back();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = p.x + dx, ny = p.y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t i = static_cast<std::size_t>(ny) * w + nx;
        if (cls[i] == 1) {
          cls[i] = 0;
          edges.insert(nx, ny);
          stack.push_back({nx, ny});
        }
      }
    }
  }
  return edges;
}

}  // namespace intrinsic
