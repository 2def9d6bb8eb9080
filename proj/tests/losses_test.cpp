#include <cmath>
#include <random>

#include "doctest.h"
#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"
#include "intrinsic/losses.hpp"
#include "test_util.hpp"

using namespace intrinsic;
using namespace intrinsic::losses;
using intrinsic::test::random_image;

namespace {

/// logit = b + sum_p w_p * S_p / mean(S); nonlinear in S through the mean.
class MeanNormalizedLinearCritic : public ShadingCritic {
 public:
  MeanNormalizedLinearCritic(Image w, double b) : w_(std::move(w)), b_(b) {}

  CriticOutput evaluate(const Image& s, bool want_grad) const override {
    const double m = mean(s);
    const double n = static_cast<double>(s.size());
    CriticOutput out;
    double wt = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) wt += w_[i] * s[i] / m;
    out.logit = b_ + wt;
    if (want_grad) {
      out.logit_grad = Image(s.width(), s.height(), s.channels());
      for (std::size_t i = 0; i < s.size(); ++i) out.logit_grad[i] = (w_[i] - wt / n) / m;
    }
    return out;
  }

 private:
  Image w_;
  double b_;
};

class ConstantCritic : public ShadingCritic {
 public:
  CriticOutput evaluate(const Image& s, bool) const override {
    return {0.0, Image(s.width(), s.height(), s.channels())};
  }
};

}  // namespace

TEST_CASE("reconstruction loss on a single pixel") {
  const LossEval l = reconstruction_loss(Image(1, 1, 1, 1.0), Image(1, 1, 1, 1.0), Image(1, 1, 1, 0.5));
  CHECK(l.value == doctest::Approx(0.25));
  CHECK(l.at("r_hat")[0] == doctest::Approx(-0.5));
  CHECK(l.at("s_hat")[0] == doctest::Approx(-1.0));
}

TEST_CASE("reconstruction loss is zero on an exact factorisation") {
  std::mt19937_64 rng(2);
  const Image r = random_image(5, 4, 3, rng), s = random_image(5, 4, 1, rng);
  const LossEval l = reconstruction_loss(hadamard(r, s), r, s);
  CHECK(l.value == doctest::Approx(0.0));
  CHECK(max_abs_diff(l.at("s_hat"), Image(5, 4, 1)) < 1e-15);
}

TEST_CASE("gradient constraint on a two-pixel raster") {
  const Image r(2, 1, 1, std::vector<double>{0.0, 1.0});
  const Image s(2, 1, 1, std::vector<double>{0.0, 2.0});
  CHECK(grad_constraint_loss(r, s).value == doctest::Approx(2.0));
}

TEST_CASE("gradient constraint is symmetric for single-channel inputs") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const Image a = random_image(6, 5, 1, rng), b = random_image(6, 5, 1, rng);
    CHECK(grad_constraint_loss(a, b).value == doctest::Approx(grad_constraint_loss(b, a).value).epsilon(1e-12));
  }
}

TEST_CASE("binary cross-entropy values") {
  CHECK(bce(0.5, 1.0).value == doctest::Approx(std::log(2.0)));
  CHECK(bce(0.5, 0.0).value == doctest::Approx(std::log(2.0)));
  CHECK(bce(0.0, 1.0).value == doctest::Approx(-std::log(kBceClamp)));
  CHECK(std::isfinite(bce(1.0, 0.0).value));
  CHECK(bce(0.0, 1.0).at("y_hat")[0] == 0.0);
  CHECK(bce(0.25, 1.0).at("y_hat")[0] == doctest::Approx(-4.0));
  for (double z : {-30.0, -3.0, -0.2, 0.0, 0.7, 4.0, 30.0}) {
    for (double y : {0.0, 1.0}) {
      const double p = sigmoid(z);
      if (p > kBceClamp && p < 1 - kBceClamp) {
        CHECK(bce_with_logit(z, y).value == doctest::Approx(bce(p, y).value).epsilon(1e-9));
      }
      CHECK(bce_with_logit(z, y).at("logit")[0] == doctest::Approx(p - y));
    }
  }
  CHECK(bce_with_logit(800.0, 0.0).value == doctest::Approx(800.0));
  CHECK(bce_with_logit(-800.0, 0.0).value == doctest::Approx(0.0));
}

TEST_CASE("si-MSE loss matches a brute-force alpha search") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 10; ++t) {
    const Image xh = random_image(3, 3, 3, rng), x = random_image(3, 3, 3, rng);
    double best = 1e300;
    for (int k = 0; k <= 40000; ++k) {
      const double a = k * 1e-4;
      double v = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) v += (a * xh[i] - x[i]) * (a * xh[i] - x[i]);
      best = std::min(best, v / 9.0);
    }
    const double got = si_mse_loss(xh, x).value;
    CHECK(got <= best + 1e-12);
    CHECK(got == doctest::Approx(best).epsilon(1e-5));
  }
}

TEST_CASE("si-MSE loss is scale invariant and handles a zero prediction") {
  std::mt19937_64 rng(10);
  const Image xh = random_image(8, 8, 3, rng), x = random_image(8, 8, 3, rng);
  const double base = si_mse_loss(xh, x).value;
  for (double c : {0.01, 0.5, 3.0, 250.0}) {
    CHECK(si_mse_loss(scaled(xh, c), x).value == doctest::Approx(base).epsilon(1e-10));
  }
  const LossEval z = si_mse_loss(Image(8, 8, 3), x);
  double sq = 0.0;
  for (double v : x.data()) sq += v * v;
  CHECK(z.value == doctest::Approx(sq / 64.0));
  CHECK(max_abs_diff(z.at("x_hat"), Image(8, 8, 3)) == 0.0);
}

TEST_CASE("alpha term of the si-MSE gradient vanishes") {
  // At the closed-form alpha the residual is orthogonal to x_hat, so the
  // detached and full gradients coincide.
  std::mt19937_64 rng(11);
  const Image xh = random_image(7, 5, 3, rng), x = random_image(7, 5, 3, rng);
  CHECK(max_abs_diff(si_mse_loss(xh, x, true).at("x_hat"), si_mse_loss(xh, x, false).at("x_hat")) < 1e-14);
}

TEST_CASE("analytic gradients agree with central differences") {
  const GradCheckOptions opt{.eps = 1e-6, .coords = 96, .abs_floor = 1e-8, .seed = 3};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed);
    const Image r = random_image(8, 8, 3, rng, 0.1, 1.0);
    const Image s = random_image(8, 8, 1, rng, 0.1, 1.0);
    const Image rgt = random_image(8, 8, 3, rng, 0.1, 1.0);
    const Image sgt = random_image(8, 8, 1, rng, 0.1, 1.0);
    const Image img = hadamard(rgt, sgt);

    CHECK(finite_diff_check([&](const Inputs& in) { return regression_loss(in.at("x_hat"), rgt); },
                            {{"x_hat", r}}, opt) < 1e-5);
    CHECK(finite_diff_check([&](const Inputs& in) { return si_mse_loss(in.at("x_hat"), rgt); }, {{"x_hat", r}},
                            opt) < 1e-5);
    CHECK(finite_diff_check([&](const Inputs& in) { return si_mse_loss(in.at("x_hat"), rgt, false); },
                            {{"x_hat", r}}, opt) < 1e-5);
    CHECK(finite_diff_check(
              [&](const Inputs& in) { return reconstruction_loss(img, in.at("r_hat"), in.at("s_hat")); },
              {{"r_hat", r}, {"s_hat", s}}, opt) < 1e-5);
    CHECK(finite_diff_check([&](const Inputs& in) { return grad_constraint_loss(in.at("r_hat"), in.at("s_hat")); },
                            {{"r_hat", r}, {"s_hat", s}}, opt) < 1e-5);
    CHECK(finite_diff_check(
              [&](const Inputs& in) {
                return direct_loss(img, in.at("r_hat"), in.at("s_hat"), rgt, sgt, LossWeights{});
              },
              {{"r_hat", r}, {"s_hat", s}}, opt) < 1e-5);
    CHECK(finite_diff_check([&](const Inputs& in) { return bce_with_logit(in.at("logit")[0], 1.0); },
                            {{"logit", Image(1, 1, 1, std::normal_distribution<double>(0, 2)(rng))}},
                            opt) < 1e-5);
  }
}

TEST_CASE("adversarial and generator gradients with a linear-feature critic") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(100 + seed);
    const MeanNormalizedLinearCritic critic(random_image(8, 8, 1, rng, -0.3, 0.3), 0.2);
    const Image r = random_image(8, 8, 3, rng), s = random_image(8, 8, 1, rng);
    const Image rgt = random_image(8, 8, 3, rng), sgt = random_image(8, 8, 1, rng);
    const Image img = hadamard(rgt, sgt);
    const GradCheckOptions opt{.seed = seed};
    CHECK(finite_diff_check([&](const Inputs& in) { return adversarial_loss(in.at("s_hat"), critic); },
                            {{"s_hat", s}}, opt) < 1e-5);
    CHECK(finite_diff_check(
              [&](const Inputs& in) {
                return generator_loss(img, in.at("r_hat"), in.at("s_hat"), rgt, sgt, LossWeights{}, critic);
              },
              {{"r_hat", r}, {"s_hat", s}}, opt) < 1e-5);
  }
}

TEST_CASE("adversarial loss against an uninformative critic") {
  const ConstantCritic critic;
  const LossEval l = adversarial_loss(Image(4, 4, 1, 0.6), critic);
  CHECK(l.value == doctest::Approx(std::log(2.0)));
  CHECK(max_abs_diff(l.at("s_hat"), Image(4, 4, 1)) == 0.0);
}

TEST_CASE("generator loss composes its terms") {
  std::mt19937_64 rng(77);
  const MeanNormalizedLinearCritic critic(random_image(6, 6, 1, rng, -0.3, 0.3), -0.1);
  const Image r = random_image(6, 6, 3, rng), s = random_image(6, 6, 1, rng);
  const Image rgt = random_image(6, 6, 3, rng), sgt = random_image(6, 6, 1, rng);
  const Image img = hadamard(rgt, sgt);
  LossWeights w;
  const double expect = regression_loss(r, rgt).value + regression_loss(s, sgt).value +
                        reconstruction_loss(img, r, s).value + 0.1 * adversarial_loss(s, critic).value +
                        0.1 * grad_constraint_loss(r, s).value;
  CHECK(generator_loss(img, r, s, rgt, sgt, w, critic).value == doctest::Approx(expect).epsilon(1e-12));
  w.lambda_r = -1;
  CHECK_THROWS_AS(generator_loss(img, r, s, rgt, sgt, w, critic), ParameterError);
}

TEST_CASE("finite-difference check flags a perturbed gradient") {
  std::mt19937_64 rng(1);
  const Image r = random_image(8, 8, 3, rng), rgt = random_image(8, 8, 3, rng);
  const double err = finite_diff_check(
      [&](const Inputs& in) {
        LossEval l = regression_loss(in.at("r_hat"), rgt);
        for (double& v : l.grad.at("x_hat").data()) v *= 1.01;
        l.grad["r_hat"] = l.grad.at("x_hat");
        return l;
      },
      {{"r_hat", r}});
  CHECK(err > 9e-3);
  CHECK_THROWS_AS(finite_diff_check([&](const Inputs& in) { return regression_loss(in.at("r_hat"), rgt); },
                                    {{"r_hat", r}}),
                  ParameterError);
}

TEST_CASE("shape mismatches are rejected") {
  CHECK_THROWS_AS(si_mse_loss(Image(2, 2, 1), Image(2, 2, 3)), DimensionError);
  CHECK_THROWS_AS(reconstruction_loss(Image(2, 2, 3), Image(2, 2, 3), Image(2, 2, 2)), DimensionError);
  CHECK_THROWS_AS(grad_constraint_loss(Image(2, 2, 3), Image(3, 2, 1)), DimensionError);
}

TEST_CASE("finite-difference check is exact on a quadratic") {
  std::mt19937_64 rng(6);
  const Image x = random_image(8, 8, 3, rng, -1.0, 1.0);
  const double err = finite_diff_check(
      [](const Inputs& in) {
        LossEval l;
        const Image& v = in.at("x");
        for (double e : v.data()) l.value += static_cast<long double>(e) * e;
        l.grad.emplace("x", scaled(v, 2.0));
        return l;
      },
      {{"x", x}});
  CHECK(err < 1e-9);
}
