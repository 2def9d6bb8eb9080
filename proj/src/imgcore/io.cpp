#include "intrinsic/io.hpp"

#include <png.h>
#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

#include "intrinsic/error.hpp"

namespace intrinsic {

double srgb_to_linear(double v) {
  if (v <= 0.04045) return v / 12.92;
  return std::pow((v + 0.055) / 1.055, 2.4);
}

namespace {

struct ReadState {
  std::span<const std::uint8_t> data;
  std::size_t offset = 0;
  char message[256] = {0};
};

void read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* st = static_cast<ReadState*>(png_get_io_ptr(png));
  if (st->offset + n > st->data.size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, st->data.data() + st->offset, n);
  st->offset += n;
}

void error_cb(png_structp png, png_const_charp msg) {
  auto* st = static_cast<ReadState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof(st->message), "%s", msg);
  png_longjmp(png, 1);
}

void warning_cb(png_structp, png_const_charp) {}

struct Decoded {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> raw;
};

// Returns 0 on success, 1 on decode failure, 2 on unsupported depth. Keeps
// non-trivial objects out of the setjmp frame.
int decode_raw(ReadState& st, Decoded& out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st, error_cb, warning_cb);
  if (!png) return 1;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return 1;
  }
  std::vector<png_bytep>* rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete rows;
    png_destroy_read_struct(&png, &info, nullptr);
    return 1;
  }
  png_set_read_fn(png, &st, read_cb);
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  } else if (depth < 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    return 2;
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.raw.assign(stride * out.height, 0);
  rows = new std::vector<png_bytep>(out.height);
  for (std::uint32_t y = 0; y < out.height; ++y) (*rows)[y] = out.raw.data() + y * stride;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  delete rows;
  png_destroy_read_struct(&png, &info, nullptr);
  return 0;
}

struct WriteState {
  Bytes* out = nullptr;
  char message[256] = {0};
};

void write_cb(png_structp png, png_bytep data, png_size_t n) {
  auto* st = static_cast<WriteState*>(png_get_io_ptr(png));
  st->out->insert(st->out->end(), data, data + n);
}

void flush_cb(png_structp) {}

void write_error_cb(png_structp png, png_const_charp msg) {
  auto* st = static_cast<WriteState*>(png_get_error_ptr(png));
  std::snprintf(st->message, sizeof(st->message), "%s", msg);
  png_longjmp(png, 1);
}

int encode_raw(WriteState& st, std::uint32_t w, std::uint32_t h, int channels,
               int depth, std::vector<std::uint8_t>& raw) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st, write_error_cb, warning_cb);
  if (!png) return 1;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return 1;
  }
  std::vector<png_bytep>* rows = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete rows;
    png_destroy_write_struct(&png, &info);
    return 1;
  }
  png_set_write_fn(png, &st, write_cb, flush_cb);
  png_set_IHDR(png, info, w, h, depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(w) * channels * (depth / 8);
  rows = new std::vector<png_bytep>(h);
  for (std::uint32_t y = 0; y < h; ++y) (*rows)[y] = raw.data() + y * stride;
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  delete rows;
  png_destroy_write_struct(&png, &info);
  return 0;
}

void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

bool has_extension(const std::filesystem::path& p, const char* ext) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

}  // namespace

Image load_image(std::span<const std::uint8_t> png, Colorspace colorspace) {
  if (png.size() < 8 || png_sig_cmp(png.data(), 0, 8) != 0) {
    throw DecodeError("not a PNG stream");
  }
  ReadState st;
  st.data = png;
  Decoded d;
  const int rc = decode_raw(st, d);
  if (rc == 2) throw FormatError("unsupported PNG bit depth (need 8 or 16)");
  if (rc != 0) throw DecodeError(std::string("PNG decode failed: ") + st.message);
  if (d.channels != 1 && d.channels != 3) {
    throw FormatError("unsupported PNG channel layout");
  }

  Image img(static_cast<int>(d.width), static_cast<int>(d.height), d.channels);
  const std::size_t n = img.size();
  auto out = img.data();
  if (d.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = (static_cast<unsigned>(d.raw[2 * i]) << 8) | d.raw[2 * i + 1];
      out[i] = v / 65535.0;
    }
  } else if (d.bit_depth == 8) {
    for (std::size_t i = 0; i < n; ++i) out[i] = d.raw[i] / 255.0;
  } else {
    throw FormatError("unsupported PNG bit depth");
  }
  if (colorspace == Colorspace::srgb) {
    for (double& v : out) v = srgb_to_linear(v);
  }
  return img;
}

Bytes encode_png(const Image& img, int bit_depth, double exposure) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw FormatError("PNG export needs 1 or 3 channels");
  }
  if (bit_depth != 8 && bit_depth != 16) throw ParameterError("bit depth must be 8 or 16");
  if (img.width() <= 0 || img.height() <= 0) throw DimensionError("empty image");
  const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<std::uint8_t> raw(img.size() * (bit_depth / 8));
  const auto src = img.data();
  for (std::size_t i = 0; i < img.size(); ++i) {
    double v = src[i] * exposure;
    v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    const auto q = static_cast<unsigned>(std::lround(v * maxv));
    if (bit_depth == 16) {
      raw[2 * i] = static_cast<std::uint8_t>(q >> 8);
      raw[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    } else {
      raw[i] = static_cast<std::uint8_t>(q);
    }
  }
  Bytes out;
  WriteState st;
  st.out = &out;
  if (encode_raw(st, img.width(), img.height(), img.channels(), bit_depth, raw) != 0) {
    throw IoError(std::string("PNG encode failed: ") + st.message);
  }
  return out;
}

Bytes encode_ciif(const Image& img) {
  Bytes b{'C', 'I', 'I', 'F'};
  b.reserve(16 + 4 * img.size());
  put_u32(b, static_cast<std::uint32_t>(img.width()));
  put_u32(b, static_cast<std::uint32_t>(img.height()));
  put_u32(b, static_cast<std::uint32_t>(img.channels()));
  for (double v : img.data()) put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return b;
}

Image decode_ciif(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "CIIF", 4) != 0) {
    throw DecodeError("missing CIIF header");
  }
  const std::uint32_t w = get_u32(bytes, 4), h = get_u32(bytes, 8), c = get_u32(bytes, 12);
  if (c != 1 && c != 3) throw FormatError("CIIF channel count must be 1 or 3");
  const std::uint64_t n = static_cast<std::uint64_t>(w) * h * c;
  if (bytes.size() != 16 + 4 * n) throw DecodeError("CIIF payload length mismatch");
  std::vector<double> data(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
  }
  return Image(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c), std::move(data));
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Image load_raster(const std::filesystem::path& path, Colorspace colorspace) {
  const Bytes b = read_file(path);
  if (has_extension(path, ".ciif")) return decode_ciif(b);
  return load_image(b, colorspace);
}

void save_raster(const std::filesystem::path& path, const Image& img, double exposure) {
  if (has_extension(path, ".ciif")) {
    write_file(path, encode_ciif(img));
  } else {
    write_file(path, encode_png(img, 16, exposure));
  }
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    s.push_back(kHex[md[i] >> 4]);
    s.push_back(kHex[md[i] & 0xf]);
  }
  return s;
}

}  // namespace intrinsic
