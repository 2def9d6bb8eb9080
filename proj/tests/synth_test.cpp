#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"
#include "intrinsic/io.hpp"
#include "intrinsic/metrics.hpp"
#include "intrinsic/synth.hpp"

using namespace intrinsic;
using namespace intrinsic::synth;
namespace fs = std::filesystem;

namespace {

SynthConfig small(int size = 64) {
  SynthConfig c;
  c.size = size;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("intrinsic_synth_test_" + name);
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::string> tree_hashes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = sha256_hex(read_file(e.path()));
  return out;
}

}  // namespace

TEST_CASE("scenes are deterministic and exactly composed") {
  for (std::uint64_t seed : {0ull, 3ull, 77ull}) {
    const SynthScene a = gen_scene(seed), b = gen_scene(seed);
    CHECK(a.reflectance == b.reflectance);
    CHECK(a.shading == b.shading);
    CHECK(annotation::serialize(a.annotation) == annotation::serialize(b.annotation));
    CHECK(a.composite == hadamard(a.reflectance, a.shading));
    CHECK(a.reflectance.channels() == 3);
    CHECK(a.shading.channels() == 1);
    CHECK(a.composite.is_valid_intensity());
  }
  CHECK_FALSE(gen_scene(1).shading == gen_scene(2).shading);
}

TEST_CASE("generated annotations validate and respect the edge margins") {
  const metrics::MetricConfig mc;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    CAPTURE(seed);
    const SynthScene sc = gen_scene(seed);
    CHECK(annotation::validate(sc.annotation, sc.composite).empty());
    const int n = sc.composite.width();
    const PixelSet regions = sc.annotation.regions.union_mask(n, n);
    const EdgeSet e_s = annotation::derive_shading_edges(annotation::canny_for(sc.annotation, sc.composite), regions);
    const EdgeSet& e_r = sc.annotation.edges.e_r;
    REQUIRE_FALSE(e_r.empty());
    REQUIRE_FALSE(e_s.empty());
    const PixelSet mask = metrics::evaluation_mask(regions, e_r, e_s);
    const Image mr = gradient_magnitude(gradient(mean_normalize(sc.reflectance, mask)));
    const Image ms = gradient_magnitude(gradient(mean_normalize(sc.shading, mask)));
    const double tau = mc.tau;
    for (std::size_t p : e_r.indices()) {
      CHECK(mr[p] > 2 * tau);
      CHECK(ms[p] < tau / 2);
    }
    for (std::size_t p : e_s.indices()) {
      CHECK(ms[p] > 2 * tau);
      CHECK(mr[p] < tau / 2);
    }
    const metrics::MetricReport rep = metrics::evaluate(sc.reflectance, sc.shading, sc.composite, sc.annotation, mc);
    CHECK(rep.f_r >= 0.95);
    CHECK(rep.f_s >= 0.95);
  }
}

TEST_CASE("flat pattern has no reflectance edges") {
  SynthConfig c;
  c.pattern = Pattern::flat;
  const SynthScene sc = gen_scene(4, c);
  CHECK(sc.annotation.edges.e_r.empty());
  REQUIRE(sc.annotation.regions.size() == 1);
  const PixelSet reg = sc.annotation.regions.union_mask(c.size, c.size);
  const EdgeSet cn = annotation::canny_for(sc.annotation, sc.composite);
  CHECK(reg.count() * 2 > static_cast<std::size_t>(c.size * c.size));
  CHECK(cn.intersected(reg) == sc.annotation.edges.e_s);
  const Image lr = to_luminance(sc.reflectance);
  for (double v : lr.data()) CHECK(v == doctest::Approx(lr[0]).epsilon(1e-6));
}

TEST_CASE("zero wrinkle amplitude gives constant shading") {
  SynthConfig c = small();
  c.wrinkle_amplitude = 0.0;
  const SynthScene sc = gen_scene(9, c);
  for (double v : sc.shading.data()) CHECK(v == sc.shading[0]);
  CHECK(sc.annotation.edges.e_s.empty());
  CHECK_FALSE(sc.annotation.edges.e_r.empty());
}

TEST_CASE("every pattern family generates") {
  for (Pattern p : {Pattern::stripes, Pattern::checks, Pattern::dots, Pattern::blocks, Pattern::flat}) {
    CAPTURE(to_string(p));
    SynthConfig c = small(96);
    c.pattern = p;
    const SynthScene sc = gen_scene(11, c);
    CHECK(sc.pattern == p);
    CHECK(annotation::validate(sc.annotation, sc.composite).empty());
    CHECK(pattern_from_string(to_string(p)) == p);
  }
  CHECK_THROWS_AS(pattern_from_string("paisley"), ParameterError);
}

TEST_CASE("synth config validation and JSON") {
  SynthConfig c;
  c.lights_max = 21;
  CHECK_THROWS_AS(c.check(), ParameterError);
  c = {};
  c.lights_min = 9;
  CHECK_THROWS_AS(gen_scene(0, c), ParameterError);
  c = {};
  c.size = 96;
  c.pattern = Pattern::dots;
  c.canny.low = 0.015;
  CHECK(synth_config_from_json(to_json(c)) == c);
  CHECK(synth_config_from_json("{}") == SynthConfig{});
  CHECK_THROWS_AS(synth_config_from_json("{\"lights\": [5, 8]}"), ParseError);
  CHECK_THROWS_AS(synth_config_from_json("{\"colour\": 1}"), ParseError);
}

TEST_CASE("empty dataset writes nothing") {
  const fs::path dir = scratch("empty");
  const Manifest m = gen_dataset(0, dir, 5);
  CHECK(m.scenes.empty());
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("datasets are reproducible and self-consistent") {
  const fs::path a = scratch("a"), b = scratch("b");
  const Manifest ma = gen_dataset(3, a, 40, small());
  gen_dataset(3, b, 40, small(), 2);
  CHECK(tree_hashes(a) == tree_hashes(b));
  CHECK(tree_hashes(a).size() == 3 * 7 + 1);

  const Manifest loaded = load_manifest(a / "manifest.json");
  REQUIRE(loaded.scenes.size() == 3);
  CHECK(loaded.config == small());
  CHECK(loaded.base_seed == 40);
  for (std::size_t k = 0; k < 3; ++k) {
    const SceneFiles& f = loaded.scenes[k];
    CHECK(f.seed == 40 + k);
    const SynthScene sc = gen_scene(f.seed, small());
    CHECK(load_raster(f.r, Colorspace::linear) == sc.reflectance);
    CHECK(load_raster(f.s, Colorspace::linear) == sc.shading);
    const Image i = load_raster(f.i, Colorspace::linear);
    CHECK(max_abs_diff(i, sc.composite) < 1e-7);
    const Bytes doc_bytes = read_file(f.annotation);
    const annotation::AnnotationDoc doc = annotation::parse(std::string(doc_bytes.begin(), doc_bytes.end()));
    CHECK(doc.image.sha256 == sha256_hex(read_file(f.i_png)));
    CHECK(annotation::validate(doc, i, sha256_hex(read_file(f.i_png))).empty());
    CHECK(annotation::validate(doc, load_raster(f.i_png, Colorspace::linear)).empty());
  }
  CHECK(manifest_from_json(to_json(ma)).scenes.size() == 3);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("corruptions preserve the composite") {
  const SynthScene sc = gen_scene(6, small());
  for (Corruption mode : {Corruption::texture_copy, Corruption::shading_leak, Corruption::blur, Corruption::swap}) {
    CAPTURE(to_string(mode));
    const auto [r0, s0] = corrupt(sc, mode, 0.0);
    CHECK(r0 == sc.reflectance);
    CHECK(s0 == sc.shading);
    for (double beta : {0.25, 0.5, 0.75, 1.0}) {
      const auto [r, s] = corrupt(sc, mode, beta);
      CHECK(s.channels() == 1);
      CHECK(max_abs_diff(to_luminance(hadamard(r, s)), to_luminance(sc.composite)) <= 1e-6);
    }
    CHECK(corruption_from_string(to_string(mode)) == mode);
  }
  CHECK_THROWS_AS(corrupt(sc, Corruption::blur, 1.5), ParameterError);
  CHECK_THROWS_AS(corruption_from_string("smear"), ParameterError);
}

TEST_CASE("texture copying lowers shading accuracy on reflectance edges") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    CAPTURE(seed);
    const SynthScene sc = gen_scene(seed);
    double prev = 2.0;
    for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const auto [r, s] = corrupt(sc, Corruption::texture_copy, beta);
      const double acc = metrics::evaluate(r, s, sc.composite, sc.annotation, {}).acc_s_er;
      CHECK(acc <= prev);
      prev = acc;
    }
    CHECK(prev < 1.0);
  }
}
