#include <algorithm>
#include <chrono>
#include <cstdint>
#include <string>

#include <openssl/evp.h>

#include "intrinsic/annotation.hpp"
#include "intrinsic/decompose.hpp"
#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"
#include "intrinsic/metrics.hpp"
#include "intrinsic/service.hpp"
#include "json.hpp"

namespace intrinsic::service {

using ojson = nlohmann::ordered_json;

namespace {

/// Request rejected before any computation.
struct HttpError {
  int status;
  std::string code;
  std::string message;
  nlohmann::ordered_json violations = nullptr;
};

bool is_b64_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' ||
         c == '/';
}

Response json_response(int status, const ojson& j) { return {status, j.dump(), 0.0}; }

Response error_response(int status, const std::string& code, const std::string& message) {
  ojson j;
  j["error"] = code;
  j["message"] = message;
  return json_response(status, j);
}

ojson parse_body(std::string_view body) {
  ojson j = ojson::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded()) throw HttpError{400, "malformed_body", "request body is not valid JSON"};
  if (!j.is_object()) throw HttpError{400, "malformed_body", "request body must be a JSON object"};
  return j;
}

const ojson& field(const ojson& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw HttpError{400, "malformed_body", std::string("missing field '") + key + "'"};
  return *it;
}

std::string string_field(const ojson& j, const char* key) {
  const ojson& v = field(j, key);
  if (!v.is_string()) throw HttpError{400, "malformed_body", std::string("field '") + key + "' must be a string"};
  return v.get<std::string>();
}

double number(const ojson& j, const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw HttpError{400, "malformed_body", std::string("field '") + key + "' must be a number"};
  return it->get<double>();
}

Colorspace colorspace_of(const ojson& j) {
  auto it = j.find("colorspace");
  if (it == j.end()) return Colorspace::linear;
  if (*it == "linear") return Colorspace::linear;
  if (*it == "srgb") return Colorspace::srgb;
  throw HttpError{400, "malformed_body", "colorspace must be 'linear' or 'srgb'"};
}

/// Width and height from the IHDR chunk, read before decoding so oversize
/// images are refused without allocating them.
void check_png_size(const Bytes& png, int max_side) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (png.size() < 24 || !std::equal(sig, sig + 8, png.begin()) ||
      !std::equal(png.begin() + 12, png.begin() + 16, "IHDR")) {
    throw HttpError{400, "malformed_image", "image is not a PNG"};
  }
  auto be32 = [&](std::size_t o) {
    return (std::uint64_t{png[o]} << 24) | (std::uint64_t{png[o + 1]} << 16) |
           (std::uint64_t{png[o + 2]} << 8) | png[o + 3];
  };
  const std::uint64_t w = be32(16), h = be32(20);
  if (w > static_cast<std::uint64_t>(max_side) || h > static_cast<std::uint64_t>(max_side)) {
    throw HttpError{413, "image_too_large",
                    "image is " + std::to_string(w) + "x" + std::to_string(h) + ", limit is " +
                        std::to_string(max_side) + " per side"};
  }
}

struct DecodedImage {
  Image image;
  std::string sha256;
};

DecodedImage image_field(const ojson& j, const char* key, Colorspace cs, int max_side) {
  Bytes png;
  try {
    png = base64_decode(string_field(j, key));
  } catch (const ParameterError& e) {
    throw HttpError{400, "malformed_image", std::string("field '") + key + "': " + e.what()};
  }
  check_png_size(png, max_side);
  try {
    return {load_image(png, cs), sha256_hex(png)};
  } catch (const Error& e) {
    throw HttpError{400, "malformed_image", std::string("field '") + key + "': " + e.what()};
  }
}

annotation::AnnotationDoc annotation_field(const ojson& j) {
  const ojson& a = field(j, "annotation");
  try {
    return annotation::parse(a.is_string() ? a.get<std::string>() : a.dump());
  } catch (const ParseError& e) {
    throw HttpError{400, "malformed_annotation", e.what()};
  }
}

CannyParams canny_field(const ojson& j) {
  CannyParams p;
  auto it = j.find("canny");
  if (it == j.end()) return p;
  if (!it->is_object()) throw HttpError{400, "malformed_body", "field 'canny' must be an object"};
  for (auto kv = it->begin(); kv != it->end(); ++kv) {
    if (kv.key() != "sigma" && kv.key() != "low" && kv.key() != "high") {
      throw HttpError{400, "malformed_body", "unknown canny parameter '" + kv.key() + "'"};
    }
  }
  p.sigma = number(*it, "sigma", p.sigma);
  p.low = number(*it, "low", p.low);
  p.high = number(*it, "high", p.high);
  return p;
}

metrics::MetricConfig metric_field(const ojson& j) {
  metrics::MetricConfig c;
  auto it = j.find("metrics");
  if (it == j.end()) return c;
  if (!it->is_object()) throw HttpError{400, "malformed_body", "field 'metrics' must be an object"};
  for (auto kv = it->begin(); kv != it->end(); ++kv) {
    if (kv.key() != "tau" && kv.key() != "w1" && kv.key() != "w2" && kv.key() != "deadband") {
      throw HttpError{400, "malformed_body", "unknown metric parameter '" + kv.key() + "'"};
    }
  }
  c.tau = number(*it, "tau", c.tau);
  c.w1 = number(*it, "w1", c.w1);
  c.w2 = number(*it, "w2", c.w2);
  c.deadband = number(*it, "deadband", c.deadband);
  return c;
}

decompose::SolverConfig solver_field(const ojson& j) {
  auto it = j.find("config");
  if (it == j.end()) return {};
  try {
    return decompose::solver_config_from_json(it->dump());
  } catch (const ParseError& e) {
    throw HttpError{400, "malformed_config", e.what()};
  }
}

ojson violations_json(const std::vector<annotation::Violation>& vs) {
  ojson arr = ojson::array();
  for (const auto& v : vs) {
    ojson e;
    e["code"] = v.code;
    e["message"] = v.message;
    e["pixel"] = v.pixel ? ojson::array({v.pixel->x, v.pixel->y}) : ojson();
    e["region_id"] = v.region_id;
    arr.push_back(std::move(e));
  }
  return arr;
}

void require_valid(const annotation::AnnotationDoc& doc, const DecodedImage& img) {
  const auto vs = annotation::validate(doc, img.image, img.sha256);
  if (vs.empty()) return;
  throw HttpError{422, "validation", std::to_string(vs.size()) + " annotation violation(s)", violations_json(vs)};
}

/// Encodes at an exposure mapping the maximum to at most 1.
std::pair<std::string, double> preview(const Image& img) {
  double hi = 0.0;
  for (double v : img.data()) hi = std::max(hi, v);
  const double exposure = hi > 1.0 ? 1.0 / hi : 1.0;
  return {base64_encode(encode_png(img, 16, exposure)), exposure};
}

Image overlay(const Image& image, const EdgeSet& edges) {
  const Image lum = to_luminance(image);
  Image out(image.width(), image.height(), 3);
  for (std::size_t p = 0; p < lum.size(); ++p) {
    const double g = 0.6 * std::clamp(lum[p], 0.0, 1.0);
    const bool e = edges.contains_index(p);
    out[3 * p] = e ? 1.0 : g;
    out[3 * p + 1] = e ? 1.0 : g;
    out[3 * p + 2] = e ? 0.0 : g;
  }
  return out;
}

template <class F>
Response guarded(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Response r;
  try {
    r = f();
  } catch (const HttpError& e) {
    r = error_response(e.status, e.code, e.message);
    if (!e.violations.is_null()) {
      ojson j = ojson::parse(r.body);
      j["violations"] = e.violations;
      r.body = j.dump();
    }
  } catch (const ConvergenceError& e) {
    ojson j;
    j["error"] = "convergence";
    j["message"] = e.what();
    j["residual"] = e.residual();
    r = json_response(500, j);
  } catch (const DivergenceError& e) {
    r = error_response(500, "divergence", e.what());
  } catch (const UndefinedAccuracyError& e) {
    r = error_response(422, "undefined_accuracy", e.what());
  } catch (const DegenerateRegionError& e) {
    r = error_response(422, "degenerate_region", e.what());
  } catch (const ValidationError& e) {
    r = error_response(422, "validation", e.what());
  } catch (const Error& e) {
    r = error_response(400, "bad_request", e.what());
  } catch (const std::exception& e) {
    r = error_response(500, "internal", e.what());
  }
  r.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

void ServiceConfig::check() const {
  if (port < 0 || port > 65535) throw ParameterError("port must be in 0..65535");
  if (max_concurrent_solves < 1) throw ParameterError("max_concurrent_solves must be at least 1");
  if (max_side < 1 || max_body_bytes == 0) throw ParameterError("size limits must be positive");
  if (threads < 0) throw ParameterError("threads must be non-negative");
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ParameterError("base64 length is not a multiple of 4");
  std::size_t pad = 0;
  while (pad < 2 && pad < text.size() && text[text.size() - 1 - pad] == '=') ++pad;
  for (std::size_t i = 0; i + pad < text.size(); ++i) {
    if (!is_b64_char(text[i])) throw ParameterError("invalid base64 character at offset " + std::to_string(i));
  }
  Bytes out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ParameterError("invalid base64");
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

Handler::Handler(ServiceConfig config)
    : config_(std::move(config)),
      solve_slots_(std::make_unique<std::counting_semaphore<>>(config_.max_concurrent_solves)) {
  config_.check();
}

Response Handler::health() const {
  ojson j;
  j["status"] = "ok";
  j["version"] = std::string(kVersion);
  return json_response(200, j);
}

Response Handler::canny(std::string_view body) const {
  return guarded([&] {
    const ojson req = parse_body(body);
    const DecodedImage img = image_field(req, "image", colorspace_of(req), config_.max_side);
    const CannyParams params = canny_field(req);
    const EdgeSet edges = intrinsic::canny(to_luminance(img.image), params);
    ojson j;
    j["width"] = img.image.width();
    j["height"] = img.image.height();
    j["canny"] = {{"sigma", params.sigma}, {"low", params.low}, {"high", params.high}};
    j["count"] = edges.count();
    ojson coords = ojson::array();
    for (const Pixel& p : edges.pixels()) coords.push_back(ojson::array({p.x, p.y}));
    j["edges"] = std::move(coords);
    j["overlay"] = base64_encode(encode_png(overlay(img.image, edges), 8));
    return json_response(200, j);
  });
}

Response Handler::solve(std::string_view body) {
  return guarded([&] {
    const ojson req = parse_body(body);
    const DecodedImage img = image_field(req, "image", colorspace_of(req), config_.max_side);
    const annotation::AnnotationDoc doc = annotation_field(req);
    const decompose::SolverConfig cfg = solver_field(req);
    require_valid(doc, img);
    solve_slots_->acquire();
    decompose::Decomposition d;
    try {
      d = decompose::edge_prior_decompose(img.image, doc, cfg);
    } catch (...) {
      solve_slots_->release();
      throw;
    }
    solve_slots_->release();
    const auto [r_png, r_exp] = preview(d.reflectance);
    const auto [s_png, s_exp] = preview(d.shading);
    ojson j;
    j["width"] = img.image.width();
    j["height"] = img.image.height();
    j["reflectance"] = r_png;
    j["reflectance_exposure"] = r_exp;
    j["shading"] = s_png;
    j["shading_exposure"] = s_exp;
    j["residual"] = d.residual;
    return json_response(200, j);
  });
}

Response Handler::evaluate(std::string_view body) const {
  return guarded([&] {
    const ojson req = parse_body(body);
    const DecodedImage img = image_field(req, "image", colorspace_of(req), config_.max_side);
    const annotation::AnnotationDoc doc = annotation_field(req);
    const metrics::MetricConfig mc = metric_field(req);
    mc.check();
    require_valid(doc, img);
    const Image r = image_field(req, "reflectance", Colorspace::linear, config_.max_side).image;
    const Image s = image_field(req, "shading", Colorspace::linear, config_.max_side).image;
    if (r.width() != img.image.width() || r.height() != img.image.height() || s.width() != r.width() ||
        s.height() != r.height()) {
      throw HttpError{400, "dimension_mismatch", "predictions must match the image dimensions"};
    }
    return Response{200, metrics::to_json(metrics::evaluate(r, s, img.image, doc, mc), -1), 0.0};
  });
}

}  // namespace intrinsic::service
