#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "intrinsic/annotation.hpp"
#include "intrinsic/canny.hpp"
#include "intrinsic/image.hpp"

namespace intrinsic::synth {

/// `mixed` draws one of the four textured families per scene.
enum class Pattern { stripes, checks, dots, blocks, flat, mixed };

std::string to_string(Pattern p);
/// Throws ParameterError on an unknown name.
Pattern pattern_from_string(const std::string& name);

struct SynthConfig {
  int size = 128;
  Pattern pattern = Pattern::mixed;
  int wrinkles_min = 3;
  int wrinkles_max = 8;
  /// Scales every wrinkle and bump height; 0 gives flat geometry.
  double wrinkle_amplitude = 1.0;
  int lights_min = 10;
  int lights_max = 20;
  /// Edge threshold the separation margins are built around: labelled edges
  /// keep their own gradient above 2 tau and the other layer's below tau / 2.
  double tau = 0.05;
  CannyParams canny{1.0, 0.01, 0.03};
  int max_attempts = 10;

  /// Throws ParameterError on invalid values.
  void check() const;
  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

std::string to_json(const SynthConfig& config);
/// Missing keys keep defaults; throws ParseError on bad input.
SynthConfig synth_config_from_json(const std::string& text);

struct SynthScene {
  Image reflectance;  ///< 3 channels, piecewise constant
  Image shading;      ///< 1 channel
  Image composite;    ///< reflectance * shading
  annotation::AnnotationDoc annotation;
  std::uint64_t seed = 0;
  /// Regeneration attempt that met the margins; 0 for the requested seed.
  int attempt = 0;
  Pattern pattern = Pattern::flat;
  SynthConfig params;
};

/// Pure function of (seed, config). Throws ValidationError when no attempt
/// satisfies the separation margins.
SynthScene gen_scene(std::uint64_t seed, const SynthConfig& config = {});

struct SceneFiles {
  std::uint64_t seed = 0;
  std::string r, s, i, annotation;  ///< CIIF rasters and annotation JSON
  std::string r_png, s_png, i_png;  ///< 16-bit display PNGs
};

struct Manifest {
  std::uint64_t base_seed = 0;
  SynthConfig config;
  std::vector<SceneFiles> scenes;
};

std::string to_json(const Manifest& manifest);
Manifest manifest_from_json(const std::string& text);
/// Resolves manifest-relative file names.
Manifest load_manifest(const std::filesystem::path& path);

/// Scene k uses seed base_seed + k. Writes files relative to `out_dir` plus
/// manifest.json, and returns the manifest. `threads` <= 1 runs serially.
Manifest gen_dataset(std::size_t n, const std::filesystem::path& out_dir, std::uint64_t base_seed,
                     const SynthConfig& config = {}, int threads = 1);

enum class Corruption { texture_copy, shading_leak, blur, swap };

std::string to_string(Corruption c);
Corruption corruption_from_string(const std::string& name);

/// Planted artifact of strength beta in [0, 1]; beta = 0 returns (R, S).
/// Divisions are floored at 1e-4.
std::pair<Image, Image> corrupt(const SynthScene& scene, Corruption mode, double beta);

}  // namespace intrinsic::synth
