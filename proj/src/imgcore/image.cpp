#include "intrinsic/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "intrinsic/error.hpp"

namespace intrinsic {

namespace {

void check_dims(int width, int height, int channels) {
  if (width < 0 || height < 0 || channels < 0) {
    throw DimensionError("negative image dimension");
  }
}

}  // namespace

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height, channels);
  data_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

Image::Image(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_dims(width, height, channels);
  if (data_.size() != pixel_count() * static_cast<std::size_t>(channels)) {
    throw DimensionError("image data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(width) + "x" +
                         std::to_string(height) + "x" + std::to_string(channels));
  }
}

bool Image::is_valid_intensity() const noexcept {
  if (channels_ != 1 && channels_ != 3) return false;
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  return true;
}

PixelSet::PixelSet(int width, int height) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw DimensionError("negative raster dimension");
  mask_.assign(static_cast<std::size_t>(width) * height, 0);
}

PixelSet::PixelSet(int width, int height, std::span<const Pixel> pixels)
    : PixelSet(width, height) {
  for (const Pixel& p : pixels) {
    if (!insert(p)) {
      throw ParameterError("pixel (" + std::to_string(p.x) + ", " +
                           std::to_string(p.y) + ") outside " +
                           std::to_string(width) + "x" + std::to_string(height));
    }
  }
}

PixelSet PixelSet::full(int width, int height) {
  PixelSet s(width, height);
  std::fill(s.mask_.begin(), s.mask_.end(), std::uint8_t{1});
  s.count_ = s.mask_.size();
  return s;
}

bool PixelSet::insert(int x, int y) noexcept {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return false;
  auto& m = mask_[static_cast<std::size_t>(y) * width_ + x];
  if (m == 0) {
    m = 1;
    ++count_;
  }
  return true;
}

void PixelSet::erase(int x, int y) noexcept {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  auto& m = mask_[static_cast<std::size_t>(y) * width_ + x];
  if (m != 0) {
    m = 0;
    --count_;
  }
}

std::vector<Pixel> PixelSet::pixels() const {
  std::vector<Pixel> out;
  out.reserve(count_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (mask_[static_cast<std::size_t>(y) * width_ + x]) out.push_back({x, y});
    }
  }
  return out;
}

std::vector<std::size_t> PixelSet::indices() const {
  std::vector<std::size_t> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (mask_[i]) out.push_back(i);
  }
  return out;
}

namespace {

void require_same_extent(const PixelSet& a, const PixelSet& b) {
  if (!a.same_extent(b)) throw DimensionError("pixel sets on different rasters");
}

}  // namespace

PixelSet PixelSet::united(const PixelSet& o) const {
  require_same_extent(*this, o);
  PixelSet r(width_, height_);
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (mask_[i] || o.mask_[i]) {
      r.mask_[i] = 1;
      ++r.count_;
    }
  }
  return r;
}

PixelSet PixelSet::intersected(const PixelSet& o) const {
  require_same_extent(*this, o);
  PixelSet r(width_, height_);
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (mask_[i] && o.mask_[i]) {
      r.mask_[i] = 1;
      ++r.count_;
    }
  }
  return r;
}

PixelSet PixelSet::subtracted(const PixelSet& o) const {
  require_same_extent(*this, o);
  PixelSet r(width_, height_);
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (mask_[i] && !o.mask_[i]) {
      r.mask_[i] = 1;
      ++r.count_;
    }
  }
  return r;
}

bool PixelSet::is_subset_of(const PixelSet& o) const {
  require_same_extent(*this, o);
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (mask_[i] && !o.mask_[i]) return false;
  }
  return true;
}

PixelSet PixelSet::dilated(int radius) const {
  PixelSet cur = *this;
  for (int r = 0; r < radius; ++r) {
    PixelSet next(width_, height_);
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        if (!cur.contains(x, y)) continue;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) next.insert(x + dx, y + dy);
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace intrinsic
