#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"
#include "intrinsic/metrics.hpp"
#include "test_util.hpp"

using namespace intrinsic;
using namespace intrinsic::metrics;
using intrinsic::test::gray;
using intrinsic::test::random_image;

namespace {

PixelSet row_set(int w, std::initializer_list<int> xs) {
  PixelSet s(w, 1);
  for (int x : xs) s.insert(x, 0);
  return s;
}

// Brute-force oracle: minimize over a fine alpha grid.
double si_mse_grid(const Image& xh, const Image& x, const PixelSet& m, double lo, double hi, double step) {
  double best = 1e300;
  for (double a = lo; a <= hi; a += step) {
    double acc = 0;
    for (std::size_t p : m.indices())
      for (int c = 0; c < x.channels(); ++c) {
        const double d = a * xh[p * x.channels() + c] - x[p * x.channels() + c];
        acc += d * d;
      }
    best = std::min(best, acc / m.count());
  }
  return best;
}

}  // namespace

TEST_CASE("region_error_reflectance") {
  const PixelSet all = PixelSet::full(3, 1);
  const std::vector<PixelSet> one{all};
  CHECK(region_error_reflectance(gray(3, 1, {1, 1, 3}), one) == doctest::Approx(0.32));
  CHECK(region_error_reflectance(Image(3, 1, 1, 0.7), one) == doctest::Approx(0.0));

  // constant color per region, different colors across regions
  Image rgb(4, 1, 3);
  for (int c = 0; c < 3; ++c) {
    rgb.at(0, 0, c) = rgb.at(1, 0, c) = 0.2 + 0.3 * c;
    rgb.at(2, 0, c) = rgb.at(3, 0, c) = 0.9 - 0.2 * c;
  }
  const std::vector<PixelSet> halves{row_set(4, {0, 1}), row_set(4, {2, 3})};
  CHECK(region_error_reflectance(rgb, halves) == doctest::Approx(0.0).epsilon(1e-15));

  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const Image r = random_image(5, 4, 3, rng);
    const std::vector<PixelSet> regs{PixelSet::full(5, 4)};
    const double base = region_error_reflectance(r, regs);
    CHECK(region_error_reflectance(scaled(r, 0.01 + t * 7.3), regs) == doctest::Approx(base).epsilon(1e-12));
  }
  const std::vector<int> ids{7};
  try {
    region_error_reflectance(Image(3, 1, 1, 0.0), one, ids);
    FAIL("expected degenerate region");
  } catch (const DegenerateRegionError& e) {
    CHECK(e.region_id() == 7);
  }
}

TEST_CASE("si_mse closed form against a grid sweep") {
  const PixelSet m = PixelSet::full(2, 1);
  const Image a = gray(2, 1, {1, 0}), b = gray(2, 1, {0, 1});
  CHECK(si_mse_alpha(a, b, m) == 0.0);
  CHECK(si_mse(a, b, m) == doctest::Approx(0.5));
  CHECK(si_mse_grid(a, b, m, -2, 2, 1e-4) == doctest::Approx(0.5).epsilon(1e-9));

  std::mt19937_64 rng(31);
  for (int t = 0; t < 10; ++t) {
    const Image xh = random_image(3, 2, 3, rng), x = random_image(3, 2, 3, rng);
    const PixelSet full = PixelSet::full(3, 2);
    const double grid = si_mse_grid(xh, x, full, 0.0, 3.0, 1e-5);
    CHECK(si_mse(xh, x, full) <= grid + 1e-12);
    CHECK(si_mse(xh, x, full) == doctest::Approx(grid).epsilon(1e-6));
  }
  const Image x = gray(2, 1, {0.3, 0.8});
  CHECK(si_mse(x, x, m) == doctest::Approx(0.0));
  CHECK(si_mse(scaled(x, 2.0), x, m) == doctest::Approx(0.0));
  CHECK_THROWS_AS(si_mse(x, x, PixelSet(2, 1)), ParameterError);
  CHECK_THROWS_AS(si_mse(x, Image(2, 1, 3), m), DimensionError);
}

TEST_CASE("si_mse is scale invariant and bounded by the zero predictor") {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> cdist(1e-2, 1e2);
  for (int t = 0; t < 1000; ++t) {
    const Image xh = random_image(4, 4, 1 + 2 * (t % 2), rng), x = random_image(4, 4, xh.channels(), rng);
    PixelSet mask(4, 4);
    for (int k = 0; k < 6; ++k) mask.insert(static_cast<int>(rng() % 4), static_cast<int>(rng() % 4));
    const double base = si_mse(xh, x, mask);
    CHECK(std::abs(si_mse(scaled(xh, cdist(rng)), x, mask) - base) <= 1e-9 * std::max(1.0, base));
    double zero = 0;
    for (std::size_t p : mask.indices())
      for (int c = 0; c < x.channels(); ++c) zero += x[p * x.channels() + c] * x[p * x.channels() + c];
    CHECK(base <= zero / mask.count() + 1e-15);
  }
}

TEST_CASE("region_error_shading") {
  const MetricConfig cfg;
  std::mt19937_64 rng(4);
  const Image refl = random_image(6, 6, 3, rng, 0.3, 0.9);
  Image shading = random_image(6, 6, 1, rng, 0.2, 1.0);
  // two constant-reflectance regions
  Image img(6, 6, 3);
  PixelSet left(6, 6), right(6, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      const int src = x < 3 ? 0 : 5;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = refl.at(src, 0, c) * shading.at(x, y);
      (x < 3 ? left : right).insert(x, y);
    }
  const std::vector<PixelSet> regs{left, right};
  CHECK(region_error_shading(scaled(shading, 3.7), img, regs, cfg) == doctest::Approx(0.0));
  CHECK(region_error_shading(Image(6, 6, 1, 0.0), img, regs, cfg) == doctest::Approx(1.0));

  // residuals held within +-3% after the alpha fit fall in the 5% deadband
  Image wobble = shading;
  for (std::size_t i = 0; i < wobble.size(); ++i) wobble[i] *= (i % 2 ? 1.03 : 0.97);
  CHECK(region_error_shading(wobble, img, regs, cfg) == 0.0);
  MetricConfig strict = cfg;
  strict.deadband = 0.0;
  CHECK(region_error_shading(wobble, img, regs, strict) > 0.0);

  // 3-channel prediction compared through luminance
  CHECK(region_error_shading(broadcast(shading, 3), img, regs, cfg) == doctest::Approx(0.0));
  CHECK_THROWS_AS(region_error_shading(shading, Image(6, 6, 3, 0.0), regs, cfg), DegenerateRegionError);
}

TEST_CASE("edge_accuracies counts below and above tau") {
  MetricConfig cfg;
  cfg.tau = 0.05;
  // R~ equals r_hat because the mask is a single pixel of value 1.
  const Image r = gray(9, 1, {1.0, 1.01, 1.01, 1.21, 1.21, 1.24, 1.24, 1.28, 1.28});
  const EdgeSet es = row_set(9, {0, 2, 4, 6});
  const EdgeSet er = row_set(9, {8});
  const PixelSet mask = row_set(9, {0});
  const EdgeAccuracies a = edge_accuracies(r, Image(9, 1, 1, 1.0), er, es, mask, cfg);
  CHECK(a.acc_r_es == doctest::Approx(0.75));
  CHECK(a.counts.r_es == 3);

  const Image flat(9, 1, 1, 0.4);
  const EdgeAccuracies c = edge_accuracies(flat, flat, er, es, mask, cfg);
  CHECK(c.acc_r_es == 1.0);
  CHECK(c.acc_r_er == 0.0);

  // exactly tau fails both strict comparisons
  const Image tie = gray(3, 1, {1.0, 1.5, 1.5});
  MetricConfig half;
  half.tau = 0.5;
  const EdgeAccuracies t = edge_accuracies(tie, tie, row_set(3, {0}), row_set(3, {0}), row_set(3, {0}), half);
  CHECK(t.acc_r_es == 0.0);
  CHECK(t.acc_r_er == 0.0);
  CHECK(t.acc_s_er == 0.0);
  CHECK(t.acc_s_es == 0.0);

  CHECK_THROWS_AS(edge_accuracies(r, r, EdgeSet(9, 1), es, mask, cfg), UndefinedAccuracyError);
  CHECK_THROWS_AS(edge_accuracies(r, r, er, EdgeSet(9, 1), mask, cfg), UndefinedAccuracyError);
}

TEST_CASE("f_scores") {
  const MetricConfig cfg;
  EdgeAccuracies a{1, 1, 1, 1, {}};
  CHECK(f_scores(a, cfg).f_r == 1.0);
  CHECK(f_scores(a, cfg).f_s == 1.0);
  a.acc_r_es = 0.6;
  CHECK(f_scores(a, cfg).f_r == doctest::Approx(2.0 / 3.0));
  a.acc_r_es = 0.0;
  CHECK(f_scores(a, cfg).f_r == 0.0);

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1), w(0.1, 10);
  for (int t = 0; t < 500; ++t) {
    EdgeAccuracies r{u(rng), u(rng), u(rng), u(rng), {}};
    MetricConfig c;
    c.w1 = w(rng);
    c.w2 = w(rng);
    const FScores f = f_scores(r, c);
    CHECK(f.f_r >= std::min(r.acc_r_es, r.acc_r_er) - 1e-15);
    CHECK(f.f_r <= std::max(r.acc_r_es, r.acc_r_er) + 1e-15);
    CHECK(f.f_s >= std::min(r.acc_s_er, r.acc_s_es) - 1e-15);
    CHECK(f.f_s <= std::max(r.acc_s_er, r.acc_s_es) + 1e-15);
  }
}

TEST_CASE("aggregate pools counts") {
  MetricReport a, b;
  a.counts.e_s = 10;
  a.counts.r_es = 8;
  a.counts.e_r = 5;
  a.counts.r_er = 5;
  a.region_error_r = 0.1;
  b.counts.e_s = 30;
  b.counts.r_es = 15;
  b.counts.e_r = 5;
  b.counts.r_er = 5;
  b.region_error_r = 0.3;
  const std::vector<MetricReport> both{a, b};
  const MetricReport m = aggregate(both);
  CHECK(m.acc_r_es == doctest::Approx(0.575));
  CHECK(m.region_error_r == doctest::Approx(0.2));
  CHECK(m.images == 2);
  const std::vector<MetricReport> swapped{b, a};
  CHECK(to_json(aggregate(swapped)) == to_json(m));

  const std::vector<MetricReport> single{m};
  CHECK(to_json(aggregate(single)) == to_json(m));
  CHECK_THROWS_AS(aggregate(std::vector<MetricReport>{}), ParameterError);
  MetricReport c = a;
  c.config.tau = 0.1;
  CHECK_THROWS_AS(aggregate(std::vector<MetricReport>{a, c}), ParameterError);
}

TEST_CASE("evaluate degenerate all-reflectance prediction") {
  // two-cell scene with a smooth shading ramp that crosses tau inside the region
  const int w = 20, h = 10;
  Image refl(w, h, 3), shade(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) refl.at(x, y, c) = x < 10 ? 0.3 : 0.8;
      shade.at(x, y) = x < 14 ? 0.5 : 0.5 + 0.1 * (x - 13);
    }
  const Image img = hadamard(refl, shade);
  PixelSet region(w, h), er(w, h), es(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 11; x < w; ++x) region.insert(x, y);
    er.insert(9, y);
    es.insert(15, y);
  }
  const std::vector<PixelSet> regs{region};
  const MetricReport gt = evaluate(refl, shade, img, regs, er, es, MetricConfig{});
  CHECK(gt.f_r == 1.0);
  CHECK(gt.f_s == 1.0);
  CHECK(gt.region_error_r == doctest::Approx(0.0));
  CHECK(gt.region_error_s == doctest::Approx(0.0));
  const MetricReport copy = evaluate(img, Image(w, h, 1, 1.0), img, regs, er, es, MetricConfig{});
  CHECK(copy.acc_s_es == 0.0);
  CHECK(copy.f_s == 0.0);
  const std::string js = to_json(copy, -1);
  CHECK(js.find("\"acc_r_es\"") < js.find("\"acc_r_er\""));
  CHECK(js.find("\"region_error_s\"") < js.find("\"counts\""));
  CHECK(table_header().find("Acc_R^(E_S)") < table_header().find("Acc_S^(E_S)"));
}
