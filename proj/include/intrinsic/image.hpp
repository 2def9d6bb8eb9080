#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace intrinsic {

/// Dense row-major raster with interleaved channels. Used for I, R, S, their
/// predictions, and for signed intermediate fields such as gradients.
///
/// Intensity images are expected to be finite and non-negative; that is a
/// property of the data, checked by `is_valid_intensity`, not enforced here,
/// since gradient components share this type.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);
  Image(int width, int height, int channels, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }
  double& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const noexcept {
    return data_[index(x, y, c)];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }
  bool same_extent(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  /// Finite, non-negative, channels in {1, 3}.
  bool is_valid_intensity() const noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Forward-difference gradient of an image, one component raster per axis.
struct GradientField {
  Image gx;
  Image gy;
};

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel& a, const Pixel& b) {
    if (a.y != b.y) return a.y <=> b.y;
    return a.x <=> b.x;
  }
};

/// Set of pixel coordinates on a fixed raster, stored as a membership mask.
/// Iteration via `pixels()` is in row-major order.
class PixelSet {
 public:
  PixelSet() = default;
  PixelSet(int width, int height);
  /// Out-of-range coordinates are rejected with ParameterError.
  PixelSet(int width, int height, std::span<const Pixel> pixels);
  static PixelSet full(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_ &&
           mask_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  bool contains(Pixel p) const noexcept { return contains(p.x, p.y); }
  bool contains_index(std::size_t i) const noexcept { return mask_[i] != 0; }

  /// Returns false when the coordinate is out of bounds.
  bool insert(int x, int y) noexcept;
  bool insert(Pixel p) noexcept { return insert(p.x, p.y); }
  void erase(int x, int y) noexcept;
  void erase(Pixel p) noexcept { erase(p.x, p.y); }

  std::size_t count() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }
  std::vector<Pixel> pixels() const;
  std::vector<std::size_t> indices() const;

  bool same_extent(const PixelSet& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }

  PixelSet united(const PixelSet& o) const;
  PixelSet intersected(const PixelSet& o) const;
  PixelSet subtracted(const PixelSet& o) const;
  bool is_subset_of(const PixelSet& o) const;
  /// 3x3 (8-neighbourhood) dilation, `radius` times.
  PixelSet dilated(int radius = 1) const;

  friend bool operator==(const PixelSet& a, const PixelSet& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.mask_ == b.mask_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::size_t count_ = 0;
  std::vector<std::uint8_t> mask_;
};

/// Edge pixel sets (E_Canny, E_R, E_S) are plain pixel sets.
using EdgeSet = PixelSet;

}  // namespace intrinsic
