#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "intrinsic/image.hpp"

namespace intrinsic {

using Bytes = std::vector<std::uint8_t>;

enum class Colorspace { srgb, linear };

/// Inverse sRGB transfer for one value in [0, 1].
double srgb_to_linear(double v);

/// Decodes an 8- or 16-bit grayscale/RGB PNG (alpha dropped, palettes
/// expanded) into [0, 1], linearizing when `colorspace` is srgb.
/// Throws DecodeError on malformed data, FormatError on sub-byte depths.
Image load_image(std::span<const std::uint8_t> png, Colorspace colorspace);

/// Encodes a 1- or 3-channel image as PNG with values clamp(v * exposure, 0, 1)
/// quantized to `bit_depth` (8 or 16). No colorspace conversion is applied.
Bytes encode_png(const Image& img, int bit_depth = 16, double exposure = 1.0);

/// Lossless float exchange: "CIIF", u32 width, u32 height, u32 channels (all
/// little-endian), then width*height*channels float32 values.
Bytes encode_ciif(const Image& img);
Image decode_ciif(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, const std::string& text);

/// Loads a raster by extension: ".ciif" is decoded losslessly, anything else
/// is treated as PNG.
Image load_raster(const std::filesystem::path& path, Colorspace colorspace);
/// Writes ".ciif" losslessly, anything else as 16-bit PNG.
void save_raster(const std::filesystem::path& path, const Image& img, double exposure = 1.0);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace intrinsic
