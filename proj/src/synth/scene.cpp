#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"
#include "intrinsic/synth.hpp"

namespace intrinsic::synth {

namespace {

constexpr double kFlatShading = 0.8;
constexpr std::array<double, 4> kLevels{0.2, 0.35, 0.55, 0.8};

/// Portable draws on top of mt19937_64, so scenes do not depend on the
/// standard library's distribution algorithms.
struct Rng {
  std::mt19937_64 g;
  explicit Rng(std::uint64_t seed) : g(seed) {}
  double uniform(double a, double b) { return a + (b - a) * (static_cast<double>(g() >> 11) * 0x1p-53); }
  int integer(int lo, int hi) { return lo + static_cast<int>(g() % static_cast<std::uint64_t>(hi - lo + 1)); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

/// Relabels to 0..K-1 in row-major order of first appearance.
std::vector<int> compact(const std::vector<long long>& raw, int& count) {
  std::map<long long, int> ids;
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto [it, fresh] = ids.try_emplace(raw[i], static_cast<int>(ids.size()));
    out[i] = it->second;
  }
  count = static_cast<int>(ids.size());
  return out;
}

std::vector<int> make_cells(Pattern pattern, int n, Rng& rng, int& count) {
  std::vector<long long> raw(static_cast<std::size_t>(n) * n, 0);
  const double c = n / 2.0;
  auto at = [&](int x, int y) -> long long& { return raw[static_cast<std::size_t>(y) * n + x]; };
  switch (pattern) {
    case Pattern::stripes: {
      const double th = rng.uniform(0.0, std::numbers::pi);
      const double dx = std::cos(th), dy = std::sin(th);
      std::vector<double> bounds;
      for (double u = -n + rng.uniform(0.0, 10.0); u < n; u += rng.uniform(7.0, 18.0)) bounds.push_back(u);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const double u = (x + 0.5 - c) * dx + (y + 0.5 - c) * dy;
          at(x, y) = std::upper_bound(bounds.begin(), bounds.end(), u) - bounds.begin();
        }
      }
      break;
    }
    case Pattern::checks: {
      const double th = rng.chance(0.5) ? 0.0 : rng.uniform(0.0, std::numbers::pi / 2);
      const double dx = std::cos(th), dy = std::sin(th);
      const double w = rng.uniform(10.0, 22.0), h = rng.uniform(10.0, 22.0);
      const double ou = rng.uniform(0.0, w), ov = rng.uniform(0.0, h);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const double px = x + 0.5 - c, py = y + 0.5 - c;
          const auto i = static_cast<long long>(std::floor((px * dx + py * dy + ou) / w));
          const auto j = static_cast<long long>(std::floor((-px * dy + py * dx + ov) / h));
          at(x, y) = (i + 1000) * 4096 + (j + 1000);
        }
      }
      break;
    }
    case Pattern::dots: {
      const double g = rng.uniform(18.0, 28.0);
      const double r = rng.uniform(4.0, 0.38 * g);
      const double slack = std::max(0.0, g / 2 - r - 1.5);
      const double ox = rng.uniform(0.0, g), oy = rng.uniform(0.0, g);
      long long id = 1;
      for (double cy = oy - g; cy < n + g; cy += g) {
        for (double cx = ox - g; cx < n + g; cx += g, ++id) {
          const double jx = cx + rng.uniform(-slack, slack), jy = cy + rng.uniform(-slack, slack);
          const int x0 = std::max(0, static_cast<int>(jx - r - 1)), x1 = std::min(n - 1, static_cast<int>(jx + r + 1));
          const int y0 = std::max(0, static_cast<int>(jy - r - 1)), y1 = std::min(n - 1, static_cast<int>(jy + r + 1));
          for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
              if (std::hypot(x + 0.5 - jx, y + 0.5 - jy) <= r) at(x, y) = id;
            }
          }
        }
      }
      break;
    }
    case Pattern::blocks: {
      struct Rect {
        int x0, y0, x1, y1;
      };
      const int min_side = 10;
      std::vector<Rect> todo{{0, 0, n, n}}, done;
      while (!todo.empty()) {
        const Rect r = todo.back();
        todo.pop_back();
        const int w = r.x1 - r.x0, h = r.y1 - r.y0;
        const bool can_x = w >= 2 * min_side, can_y = h >= 2 * min_side;
        if ((!can_x && !can_y) || (w * h < 48 * 48 && !rng.chance(0.7))) {
          done.push_back(r);
          continue;
        }
        if (can_x && (!can_y || w >= h)) {
          const int s = rng.integer(r.x0 + min_side, r.x1 - min_side);
          todo.push_back({r.x0, r.y0, s, r.y1});
          todo.push_back({s, r.y0, r.x1, r.y1});
        } else {
          const int s = rng.integer(r.y0 + min_side, r.y1 - min_side);
          todo.push_back({r.x0, r.y0, r.x1, s});
          todo.push_back({r.x0, s, r.x1, r.y1});
        }
      }
      for (std::size_t k = 0; k < done.size(); ++k) {
        for (int y = done[k].y0; y < done[k].y1; ++y) {
          for (int x = done[k].x0; x < done[k].x1; ++x) at(x, y) = static_cast<long long>(k);
        }
      }
      break;
    }
    case Pattern::flat:
    case Pattern::mixed:
      break;
  }
  return compact(raw, count);
}

std::array<double, 3> cell_color(double level, Rng& rng) {
  const double h = rng.uniform(0.0, 6.0), s = rng.uniform(0.15, 0.6);
  const double f = h - std::floor(h);
  const double p = 1 - s, q = 1 - s * f, t = 1 - s * (1 - f);
  std::array<double, 3> rgb;
  switch (static_cast<int>(h) % 6) {
    case 0: rgb = {1, t, p}; break;
    case 1: rgb = {q, 1, p}; break;
    case 2: rgb = {p, 1, t}; break;
    case 3: rgb = {p, q, 1}; break;
    case 4: rgb = {t, p, 1}; break;
    default: rgb = {1, p, q}; break;
  }
  const double lum = kLumaR * rgb[0] + kLumaG * rgb[1] + kLumaB * rgb[2];
  for (double& v : rgb) v *= level / lum;
  // Pull toward gray until every channel fits in [0, 1]; luminance is kept.
  double k = 1.0;
  for (double v : rgb) {
    if (v > 1.0) k = std::min(k, (1.0 - level) / (v - level));
  }
  for (double& v : rgb) v = round_f32(std::clamp(level + k * (v - level), 0.0, 1.0));
  return rgb;
}

Image paint(const std::vector<int>& cells, int count, int n, Rng& rng) {
  std::vector<std::set<int>> adj(count);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int a = cells[static_cast<std::size_t>(y) * n + x];
      for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dy == 0 && dx <= 0) || x + dx < 0 || x + dx >= n || y + dy >= n) continue;
          const int b = cells[static_cast<std::size_t>(y + dy) * n + x + dx];
          if (a != b) adj[a].insert(b), adj[b].insert(a);
        }
      }
    }
  }
  std::vector<int> level(count, -1);
  std::vector<std::array<double, 3>> color(count);
  for (int k = 0; k < count; ++k) {
    std::vector<int> free;
    for (int l = 0; l < static_cast<int>(kLevels.size()); ++l) {
      bool used = false;
      for (int b : adj[k]) used = used || level[b] == l;
      if (!used) free.push_back(l);
    }
    level[k] = free.empty() ? rng.integer(0, static_cast<int>(kLevels.size()) - 1)
                            : free[rng.integer(0, static_cast<int>(free.size()) - 1)];
    color[k] = cell_color(kLevels[level[k]], rng);
  }
  Image r(n, n, 3);
  for (std::size_t p = 0; p < cells.size(); ++p) {
    for (int c = 0; c < 3; ++c) r[p * 3 + c] = color[cells[p]][c];
  }
  return r;
}

struct Wrinkle {
  double cx, cy, dx, dy, wavelength, amplitude, phase, along, across;
};
struct Bump {
  double cx, cy, height, sigma;
};

struct Heightfield {
  std::vector<Wrinkle> wrinkles;
  std::vector<Bump> bumps;

  double operator()(double x, double y) const {
    double h = 0.0;
    for (const Wrinkle& w : wrinkles) {
      const double a = (x - w.cx) * w.dx + (y - w.cy) * w.dy;
      const double b = -(x - w.cx) * w.dy + (y - w.cy) * w.dx;
      const double env = std::exp(-0.5 * (a * a / (w.along * w.along) + b * b / (w.across * w.across)));
      h += w.amplitude * env * std::sin(2 * std::numbers::pi * b / w.wavelength + w.phase);
    }
    for (const Bump& b : bumps) {
      const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
      h += b.height * std::exp(-0.5 * d2 / (b.sigma * b.sigma));
    }
    return h;
  }
};

Image render_shading(int n, const SynthConfig& cfg, Rng& rng) {
  Heightfield hf;
  const int nw = rng.integer(cfg.wrinkles_min, cfg.wrinkles_max);
  for (int k = 0; k < nw; ++k) {
    const double th = rng.uniform(0.0, std::numbers::pi);
    hf.wrinkles.push_back({rng.uniform(0.1 * n, 0.9 * n), rng.uniform(0.1 * n, 0.9 * n), std::cos(th),
                           std::sin(th), rng.uniform(9.0, 18.0), cfg.wrinkle_amplitude * rng.uniform(0.8, 2.0),
                           rng.uniform(0.0, 2 * std::numbers::pi), rng.uniform(12.0, 30.0), rng.uniform(6.0, 14.0)});
  }
  const int nb = rng.integer(2, 4);
  for (int k = 0; k < nb; ++k) {
    hf.bumps.push_back({rng.uniform(0.0, n), rng.uniform(0.0, n), cfg.wrinkle_amplitude * rng.uniform(-6.0, 6.0),
                        rng.uniform(18.0, 40.0)});
  }

  struct Light {
    double x, y, z, intensity;
  };
  const int nl = rng.integer(cfg.lights_min, cfg.lights_max);
  std::vector<Light> lights;
  double direct_flat = 0.0;
  for (int k = 0; k < nl; ++k) {
    const double z = rng.uniform(0.05, 1.0), phi = rng.uniform(0.0, 2 * std::numbers::pi);
    const double rho = std::sqrt(1 - z * z);
    lights.push_back({rho * std::cos(phi), rho * std::sin(phi), z, rng.uniform(0.2, 1.0)});
    direct_flat += lights.back().intensity * z;
  }
  const double ambient = rng.uniform(0.25, 0.5) * direct_flat;
  const double norm = kFlatShading / (ambient + direct_flat);

  Image s(n, n, 1);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double hx = hf(px + 0.5, py) - hf(px - 0.5, py);
      const double hy = hf(px, py + 0.5) - hf(px, py - 0.5);
      const double len = std::sqrt(hx * hx + hy * hy + 1.0);
      const double nx = -hx / len, ny = -hy / len, nz = 1.0 / len;
      double v = ambient * 0.5 * (1.0 + nz);
      for (const Light& l : lights) v += l.intensity * std::max(0.0, nx * l.x + ny * l.y + nz * l.z);
      s.at(x, y) = round_f32(std::clamp(norm * v, 0.0, 1.0));
    }
  }
  return s;
}

/// Pixels whose 8-neighbourhood (inside the raster) lies in their own cell.
std::vector<PixelSet> eroded_cells(const std::vector<int>& cells, int count, int n) {
  std::vector<PixelSet> out(count, PixelSet(n, n));
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int a = cells[static_cast<std::size_t>(y) * n + x];
      bool interior = true;
      for (int dy = -1; dy <= 1 && interior; ++dy) {
        for (int dx = -1; dx <= 1 && interior; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= n || yy >= n) continue;
          interior = cells[static_cast<std::size_t>(yy) * n + xx] == a;
        }
      }
      if (interior) out[a].insert(x, y);
    }
  }
  return out;
}

/// Composite as it reads back from each on-disk encoding.
std::array<Image, 3> composite_variants(const Image& composite) {
  Image f32 = composite, q16 = composite;
  for (double& v : f32.data()) v = round_f32(v);
  for (double& v : q16.data()) v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0)) / 65535.0;
  return {composite, f32, q16};
}

struct Labels {
  std::vector<PixelSet> regions;
  EdgeSet e_r;
  EdgeSet e_s;
};

Labels derive_labels(const Image& r, const Image& s, const Image& composite, const std::vector<int>& cells,
                     int count, const SynthConfig& cfg) {
  const int n = cfg.size;
  const double tau = cfg.tau;
  std::array<EdgeSet, 3> cn;
  const auto variants = composite_variants(composite);
  for (std::size_t k = 0; k < 3; ++k) cn[k] = canny(to_luminance(variants[k]), cfg.canny);
  const EdgeSet c_union = cn[0].united(cn[1]).united(cn[2]);
  const EdgeSet c_inter = cn[0].intersected(cn[1]).intersected(cn[2]);

  PixelSet disc(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int a = cells[static_cast<std::size_t>(y) * n + x];
      if ((x + 1 < n && cells[static_cast<std::size_t>(y) * n + x + 1] != a) ||
          (y + 1 < n && cells[static_cast<std::size_t>(y + 1) * n + x] != a)) {
        disc.insert(x, y);
      }
    }
  }
  const Image mr = gradient_magnitude(gradient(r));
  const Image ms = gradient_magnitude(gradient(s));

  Labels out;
  out.regions = eroded_cells(cells, count, n);
  PixelSet mask = PixelSet::full(n, n);
  for (int round = 0; round < 32; ++round) {
    const double kr = normalization_scale(r, mask), ks = normalization_scale(s, mask);
    PixelSet region_union(n, n);
    for (PixelSet& reg : out.regions) {
      for (const Pixel& p : c_union.intersected(reg).pixels()) {
        const std::size_t i = static_cast<std::size_t>(p.y) * n + p.x;
        if (!(ks * ms[i] > 2 * tau && kr * mr[i] < tau / 2)) reg.erase(p);
      }
      region_union = region_union.united(reg);
    }
    EdgeSet e_r(n, n);
    for (const Pixel& p : c_inter.intersected(disc).pixels()) {
      const std::size_t i = static_cast<std::size_t>(p.y) * n + p.x;
      if (kr * mr[i] > 2 * tau && ks * ms[i] < tau / 2) e_r.insert(p);
    }
    const EdgeSet e_s = annotation::derive_shading_edges(cn[0], region_union);
    const PixelSet next = region_union.united(e_r).united(e_s).dilated(1);
    const bool stable = next == mask && e_r == out.e_r && e_s == out.e_s;
    out.e_r = e_r;
    out.e_s = e_s;
    mask = next;
    if (stable) break;
  }
  return out;
}

}  // namespace

void SynthConfig::check() const {
  if (size < 16 || size > 4096) throw ParameterError("synth size must lie in [16, 4096]");
  if (wrinkles_min < 0 || wrinkles_max < wrinkles_min) throw ParameterError("bad wrinkle count range");
  if (!(wrinkle_amplitude >= 0.0) || !std::isfinite(wrinkle_amplitude)) {
    throw ParameterError("wrinkle amplitude must be non-negative");
  }
  if (lights_min < 10 || lights_max > 20 || lights_max < lights_min) {
    throw ParameterError("light count range must lie within [10, 20]");
  }
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  if (!(canny.low > 0.0 && canny.low < canny.high)) throw ParameterError("Canny thresholds need 0 < low < high");
  if (max_attempts < 1) throw ParameterError("max_attempts must be at least 1");
}

SynthScene gen_scene(std::uint64_t seed, const SynthConfig& config) {
  config.check();
  const int n = config.size;
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    Rng rng(attempt == 0 ? seed : splitmix64(seed ^ (0xD1B54A32D192ED03ull * static_cast<std::uint64_t>(attempt))));
    Pattern pattern = config.pattern;
    if (pattern == Pattern::mixed) {
      constexpr std::array<Pattern, 4> textured{Pattern::stripes, Pattern::checks, Pattern::dots, Pattern::blocks};
      pattern = textured[rng.integer(0, 3)];
    }
    int count = 0;
    const std::vector<int> cells = make_cells(pattern, n, rng, count);
    SynthScene sc;
    sc.reflectance = paint(cells, count, n, rng);
    sc.shading = render_shading(n, config, rng);
    sc.composite = hadamard(sc.reflectance, sc.shading);

    const Labels lab = derive_labels(sc.reflectance, sc.shading, sc.composite, cells, count, config);
    const bool need_er = pattern != Pattern::flat;
    const bool need_es = config.wrinkle_amplitude > 0.0;
    if ((need_er && lab.e_r.empty()) || (need_es && lab.e_s.empty())) continue;

    auto& doc = sc.annotation;
    doc = annotation::empty_doc({"i.png", n, n, ""}, config.canny);
    for (const PixelSet& reg : lab.regions) {
      if (!reg.empty()) {
        doc.regions.regions.push_back(
            annotation::region_from_pixels(static_cast<int>(doc.regions.regions.size()) + 1, reg));
      }
    }
    doc.edges.e_r = lab.e_r;
    doc.edges.e_s = lab.e_s;
    doc.annotator = "synth";
    doc.notes = "seed " + std::to_string(seed) + ", attempt " + std::to_string(attempt) + ", pattern " +
                to_string(pattern);
    sc.seed = seed;
    sc.attempt = attempt;
    sc.pattern = pattern;
    sc.params = config;
    return sc;
  }
  throw ValidationError("scene " + std::to_string(seed) + " failed the edge separation margins after " +
                        std::to_string(config.max_attempts) + " attempts");
}

}  // namespace intrinsic::synth
