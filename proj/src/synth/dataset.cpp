#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"
#include "intrinsic/io.hpp"
#include "intrinsic/synth.hpp"
#include "json.hpp"

namespace intrinsic::synth {

using json = nlohmann::ordered_json;

std::string to_string(Pattern p) {
  switch (p) {
    case Pattern::stripes: return "stripes";
    case Pattern::checks: return "checks";
    case Pattern::dots: return "dots";
    case Pattern::blocks: return "blocks";
    case Pattern::flat: return "flat";
    case Pattern::mixed: return "mixed";
  }
  return "mixed";
}

Pattern pattern_from_string(const std::string& name) {
  for (Pattern p : {Pattern::stripes, Pattern::checks, Pattern::dots, Pattern::blocks, Pattern::flat, Pattern::mixed}) {
    if (to_string(p) == name) return p;
  }
  throw ParameterError("unknown pattern '" + name + "'");
}

namespace {

json config_json(const SynthConfig& c) {
  json j;
  j["size"] = c.size;
  j["pattern"] = to_string(c.pattern);
  j["wrinkles"] = {c.wrinkles_min, c.wrinkles_max};
  j["wrinkle_amplitude"] = c.wrinkle_amplitude;
  j["lights"] = {c.lights_min, c.lights_max};
  j["tau"] = c.tau;
  j["canny"] = {{"sigma", c.canny.sigma}, {"low", c.canny.low}, {"high", c.canny.high}};
  j["max_attempts"] = c.max_attempts;
  return j;
}

SynthConfig config_from(const nlohmann::json& j, const std::string& where) {
  SynthConfig c;
  try {
    if (!j.is_object()) throw ParseError("synth config must be an object", where);
    for (const auto& [k, v] : j.items()) {
      if (k == "size") c.size = v.get<int>();
      else if (k == "pattern") c.pattern = pattern_from_string(v.get<std::string>());
      else if (k == "wrinkles") c.wrinkles_min = v.at(0).get<int>(), c.wrinkles_max = v.at(1).get<int>();
      else if (k == "wrinkle_amplitude") c.wrinkle_amplitude = v.get<double>();
      else if (k == "lights") c.lights_min = v.at(0).get<int>(), c.lights_max = v.at(1).get<int>();
      else if (k == "tau") c.tau = v.get<double>();
      else if (k == "canny") {
        c.canny.sigma = v.at("sigma").get<double>();
        c.canny.low = v.at("low").get<double>();
        c.canny.high = v.at("high").get<double>();
      } else if (k == "max_attempts") c.max_attempts = v.get<int>();
      else throw ParseError("unknown synth option '" + k + "'", where + "/" + k);
    }
    c.check();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synth config: ") + e.what(), where);
  } catch (const ParameterError& e) {
    throw ParseError(e.what(), where);
  }
  return c;
}

}  // namespace

std::string to_json(const SynthConfig& config) { return config_json(config).dump(2); }

SynthConfig synth_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("synth config: ") + e.what(), "byte " + std::to_string(e.byte));
  }
  return config_from(j, "");
}

std::string to_json(const Manifest& m) {
  json j;
  j["base_seed"] = m.base_seed;
  j["config"] = config_json(m.config);
  j["scenes"] = json::array();
  for (const SceneFiles& s : m.scenes) {
    j["scenes"].push_back({{"seed", s.seed},
                           {"files",
                            {{"r", s.r},
                             {"s", s.s},
                             {"i", s.i},
                             {"annotation", s.annotation},
                             {"r_png", s.r_png},
                             {"s_png", s.s_png},
                             {"i_png", s.i_png}}}});
  }
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("manifest: ") + e.what(), "byte " + std::to_string(e.byte));
  }
  Manifest m;
  try {
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.config = config_from(j.at("config"), "/config");
    const auto& scenes = j.at("scenes");
    for (std::size_t k = 0; k < scenes.size(); ++k) {
      const auto& f = scenes[k].at("files");
      SceneFiles s;
      s.seed = scenes[k].at("seed").get<std::uint64_t>();
      s.r = f.at("r").get<std::string>();
      s.s = f.at("s").get<std::string>();
      s.i = f.at("i").get<std::string>();
      s.annotation = f.at("annotation").get<std::string>();
      s.r_png = f.value("r_png", "");
      s.s_png = f.value("s_png", "");
      s.i_png = f.value("i_png", "");
      m.scenes.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what(), "/scenes");
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  Manifest m = manifest_from_json(std::string(b.begin(), b.end()));
  const auto dir = path.parent_path();
  auto resolve = [&](std::string& f) {
    if (!f.empty() && std::filesystem::path(f).is_relative()) f = (dir / f).string();
  };
  for (SceneFiles& s : m.scenes) {
    for (std::string* f : {&s.r, &s.s, &s.i, &s.annotation, &s.r_png, &s.s_png, &s.i_png}) resolve(*f);
  }
  return m;
}

Manifest gen_dataset(std::size_t n, const std::filesystem::path& out_dir, std::uint64_t base_seed,
                     const SynthConfig& config, int threads) {
  config.check();
  Manifest m;
  m.base_seed = base_seed;
  m.config = config;
  m.scenes.resize(n);
  if (n == 0) return m;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  auto work = [&](std::size_t k) {
    const std::uint64_t seed = base_seed + k;
    const SynthScene sc = gen_scene(seed, config);
    char stem[32];
    std::snprintf(stem, sizeof stem, "scene_%04zu", k);
    SceneFiles f;
    f.seed = seed;
    f.r = std::string(stem) + "_r.ciif";
    f.s = std::string(stem) + "_s.ciif";
    f.i = std::string(stem) + "_i.ciif";
    f.r_png = std::string(stem) + "_r.png";
    f.s_png = std::string(stem) + "_s.png";
    f.i_png = std::string(stem) + "_i.png";
    f.annotation = std::string(stem) + "_annotation.json";
    write_file(out_dir / f.r, encode_ciif(sc.reflectance));
    write_file(out_dir / f.s, encode_ciif(sc.shading));
    write_file(out_dir / f.i, encode_ciif(sc.composite));
    write_file(out_dir / f.r_png, encode_png(sc.reflectance));
    write_file(out_dir / f.s_png, encode_png(sc.shading));
    const Bytes ipng = encode_png(sc.composite);
    write_file(out_dir / f.i_png, ipng);
    annotation::AnnotationDoc doc = sc.annotation;
    doc.image.file = f.i_png;
    doc.image.sha256 = sha256_hex(ipng);
    write_file(out_dir / f.annotation, annotation::serialize(doc) + "\n");
    m.scenes[k] = std::move(f);
  };

  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) work(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < n; k = next++) {
          try {
            work(k);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  write_file(out_dir / "manifest.json", to_json(m));
  return m;
}

std::string to_string(Corruption c) {
  switch (c) {
    case Corruption::texture_copy: return "texture_copy";
    case Corruption::shading_leak: return "shading_leak";
    case Corruption::blur: return "blur";
    case Corruption::swap: return "swap";
  }
  return "texture_copy";
}

Corruption corruption_from_string(const std::string& name) {
  for (Corruption c : {Corruption::texture_copy, Corruption::shading_leak, Corruption::blur, Corruption::swap}) {
    if (to_string(c) == name) return c;
  }
  throw ParameterError("unknown corruption mode '" + name + "'");
}

std::pair<Image, Image> corrupt(const SynthScene& scene, Corruption mode, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ParameterError("corruption strength must lie in [0, 1]");
  const Image& r = scene.reflectance;
  const Image& s = scene.shading;
  const Image& img = scene.composite;
  if (beta == 0.0) return {r, s};
  constexpr double kFloor = 1e-4;
  const int nc = img.channels();

  // r_hat = I / s_hat with the floor applied to the divisor.
  auto divide_out = [&](const Image& s_hat) {
    Image out(img.width(), img.height(), nc);
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      for (int c = 0; c < nc; ++c) out[p * nc + c] = img[p * nc + c] / std::max(s_hat[p], kFloor);
    }
    return out;
  };

  Image s_hat;
  switch (mode) {
    case Corruption::texture_copy: {
      const Image lr = to_luminance(r);
      const double m = std::max(mean(lr), kFloor);
      s_hat = s;
      for (std::size_t p = 0; p < s.size(); ++p) s_hat[p] = s[p] * std::pow(std::max(lr[p], kFloor) / m, beta);
      break;
    }
    case Corruption::shading_leak: {
      const double m = std::max(mean(s), kFloor);
      Image r_hat = r;
      for (std::size_t p = 0; p < s.pixel_count(); ++p) {
        const double k = std::pow(std::max(s[p], kFloor) / m, beta);
        for (int c = 0; c < nc; ++c) r_hat[p * nc + c] *= k;
      }
      const Image li = to_luminance(img), lr = to_luminance(r_hat);
      s_hat = Image(s.width(), s.height(), 1);
      for (std::size_t p = 0; p < s.size(); ++p) s_hat[p] = li[p] / std::max(lr[p], kFloor);
      return {std::move(r_hat), std::move(s_hat)};
    }
    case Corruption::blur:
      s_hat = gaussian_blur(s, 4.0 * beta);
      break;
    case Corruption::swap: {
      const Image lr = to_luminance(r);
      s_hat = s;
      for (std::size_t p = 0; p < s.size(); ++p) {
        s_hat[p] = std::pow(std::max(s[p], kFloor), 1.0 - beta) * std::pow(std::max(lr[p], kFloor), beta);
      }
      break;
    }
  }
  for (double& v : s_hat.data()) v = std::max(v, kFloor);
  return {divide_out(s_hat), std::move(s_hat)};
}

}  // namespace intrinsic::synth
