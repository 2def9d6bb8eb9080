#include "intrinsic/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"

namespace intrinsic::losses {

void LossWeights::check() const {
  if (lambda_r < 0 || lambda_s < 0 || lambda_ad < 0 || lambda_grad < 0) {
    throw ParameterError("loss weights must be non-negative");
  }
}

long double sigmoid(long double z) {
  if (z >= 0) return 1.0L / (1.0L + std::exp(-z));
  const long double e = std::exp(z);
  return e / (1.0L + e);
}

double sigmoid(double z) { return static_cast<double>(sigmoid(static_cast<long double>(z))); }

namespace {

void require_same(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": shape mismatch");
}

/// gx and gy stacked along channels: [gx_0 .. gx_{C-1}, gy_0 .. gy_{C-1}].
Image stacked_gradient(const Image& img) {
  const GradientField g = gradient(img);
  const int nc = img.channels();
  Image out(img.width(), img.height(), 2 * nc);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    for (int c = 0; c < nc; ++c) {
      out[p * 2 * nc + c] = g.gx[p * nc + c];
      out[p * 2 * nc + nc + c] = g.gy[p * nc + c];
    }
  }
  return out;
}

/// Adjoint of stacked_gradient.
Image stacked_gradient_adjoint(const Image& field) {
  const int nc = field.channels() / 2;
  Image u(field.width(), field.height(), nc), v(field.width(), field.height(), nc);
  for (std::size_t p = 0; p < u.pixel_count(); ++p) {
    for (int c = 0; c < nc; ++c) {
      u[p * nc + c] = field[p * 2 * nc + c];
      v[p * nc + c] = field[p * 2 * nc + nc + c];
    }
  }
  return gradient_adjoint(u, v);
}

void accumulate(Image& into, const Image& g, double weight) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += weight * g[i];
}

}  // namespace

LossEval si_mse_loss(const Image& x_hat, const Image& x, bool with_alpha_grad) {
  require_same(x_hat, x, "si_mse_loss");
  const std::size_t n = x.size();
  const double pixels = static_cast<double>(x.pixel_count());
  long double sxy = 0.0L, sxx = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += x_hat[i] * x[i];
    sxx += x_hat[i] * x_hat[i];
  }
  const double alpha = sxx > 0.0L ? static_cast<double>(sxy / sxx) : 0.0;

  LossEval out;
  Image g(x.width(), x.height(), x.channels());
  long double value = 0.0L, res_dot_xhat = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const long double r = static_cast<long double>(alpha) * x_hat[i] - x[i];
    value += r * r;
    res_dot_xhat += r * x_hat[i];
  }
  out.value = value / pixels;
  const double rdx = static_cast<double>(res_dot_xhat);
  const double sxx_d = static_cast<double>(sxx);
  if (sxx > 0.0L) {
    for (std::size_t i = 0; i < n; ++i) {
      const double r = alpha * x_hat[i] - x[i];
      double gi = alpha * r;
      if (with_alpha_grad) gi += rdx * (x[i] - 2.0 * alpha * x_hat[i]) / sxx_d;
      g[i] = 2.0 * gi / pixels;
    }
  }
  out.grad.emplace("x_hat", std::move(g));
  return out;
}

LossEval regression_loss(const Image& x_hat, const Image& x) {
  require_same(x_hat, x, "regression_loss");
  LossEval raster = si_mse_loss(x_hat, x);
  const LossEval field = si_mse_loss(stacked_gradient(x_hat), stacked_gradient(x));
  raster.value += field.value;
  accumulate(raster.grad.at("x_hat"), stacked_gradient_adjoint(field.at("x_hat")), 1.0);
  return raster;
}

LossEval reconstruction_loss(const Image& image, const Image& r_hat, const Image& s_hat) {
  require_same(image, r_hat, "reconstruction_loss");
  if (!s_hat.same_extent(r_hat) || (s_hat.channels() != 1 && s_hat.channels() != r_hat.channels())) {
    throw DimensionError("reconstruction_loss: shading does not broadcast over reflectance");
  }
  const int nc = r_hat.channels();
  const bool bc = s_hat.channels() == 1;
  const double n = static_cast<double>(image.size());
  LossEval out;
  Image gr(r_hat.width(), r_hat.height(), nc);
  Image gs(s_hat.width(), s_hat.height(), s_hat.channels());
  long double value = 0.0L;
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    for (int c = 0; c < nc; ++c) {
      const std::size_t i = p * nc + c;
      const std::size_t si = bc ? p : i;
      const double e = image[i] - r_hat[i] * s_hat[si];
      value += static_cast<long double>(e) * e;
      gr[i] = -2.0 * e * s_hat[si] / n;
      gs[si] += -2.0 * e * r_hat[i] / n;
    }
  }
  out.value = value / n;
  out.grad.emplace("r_hat", std::move(gr));
  out.grad.emplace("s_hat", std::move(gs));
  return out;
}

LossEval direct_loss(const Image& image, const Image& r_hat, const Image& s_hat, const Image& r_gt,
                     const Image& s_gt, const LossWeights& weights) {
  weights.check();
  const LossEval lr = regression_loss(r_hat, r_gt);
  const LossEval ls = regression_loss(s_hat, s_gt);
  LossEval out = reconstruction_loss(image, r_hat, s_hat);
  out.value += weights.lambda_r * lr.value + weights.lambda_s * ls.value;
  accumulate(out.grad.at("r_hat"), lr.at("x_hat"), weights.lambda_r);
  accumulate(out.grad.at("s_hat"), ls.at("x_hat"), weights.lambda_s);
  return out;
}

LossEval bce(double y_hat, double y) {
  const double p = std::clamp(y_hat, kBceClamp, 1.0 - kBceClamp);
  const long double pl = p;
  LossEval out;
  out.value = -(y * std::log(pl) + (1.0L - y) * std::log(1.0L - pl));
  const bool clamped = y_hat != p;
  out.grad.emplace("y_hat", Image(1, 1, 1, clamped ? 0.0 : -(y / p) + (1.0 - y) / (1.0 - p)));
  return out;
}

LossEval bce_with_logit(long double logit, double y) {
  LossEval out;
  // max(z, 0) - z*y + log(1 + exp(-|z|))
  out.value = std::max(logit, 0.0L) - logit * y + std::log1p(std::exp(-std::abs(logit)));
  out.grad.emplace("logit", Image(1, 1, 1, static_cast<double>(sigmoid(logit) - y)));
  return out;
}

LossEval adversarial_loss(const Image& s_hat, const ShadingCritic& critic) {
  const CriticOutput d = critic.evaluate(s_hat, true);
  const LossEval b = bce_with_logit(d.logit, 1.0);
  if (!std::isfinite(b.value)) throw DivergenceError("discriminator produced a non-finite logit");
  LossEval out;
  out.value = b.value;
  const double dz = b.at("logit")[0];
  Image g(s_hat.width(), s_hat.height(), s_hat.channels());
  if (!d.logit_grad.empty()) {
    require_same(d.logit_grad, s_hat, "discriminator gradient");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = dz * d.logit_grad[i];
  }
  out.grad.emplace("s_hat", std::move(g));
  return out;
}

LossEval grad_constraint_loss(const Image& r_hat, const Image& s_hat) {
  if (!r_hat.same_extent(s_hat)) throw DimensionError("grad_constraint_loss: extents differ");
  const int rc = r_hat.channels(), sc = s_hat.channels();
  if (sc != 1 && sc != rc) throw DimensionError("grad_constraint_loss: shading channels do not broadcast");
  const GradientField gr = gradient(r_hat);
  const GradientField gs = gradient(s_hat);
  const double pixels = static_cast<double>(r_hat.pixel_count());

  Image ur(r_hat.width(), r_hat.height(), rc), vr(r_hat.width(), r_hat.height(), rc);
  Image us(s_hat.width(), s_hat.height(), sc), vs(s_hat.width(), s_hat.height(), sc);
  long double value = 0.0L;
  for (std::size_t p = 0; p < r_hat.pixel_count(); ++p) {
    double dot = 0.0;
    for (int c = 0; c < rc; ++c) {
      const std::size_t s = sc == 1 ? p : p * rc + c;
      dot += gr.gx[p * rc + c] * gs.gx[s] + gr.gy[p * rc + c] * gs.gy[s];
    }
    value += static_cast<long double>(dot) * dot;
    const double k = 2.0 * dot / pixels;
    for (int c = 0; c < rc; ++c) {
      const std::size_t r = p * rc + c;
      const std::size_t s = sc == 1 ? p : r;
      ur[r] = k * gs.gx[s];
      vr[r] = k * gs.gy[s];
      us[s] += k * gr.gx[r];
      vs[s] += k * gr.gy[r];
    }
  }
  LossEval out;
  out.value = value / pixels;
  out.grad.emplace("r_hat", gradient_adjoint(ur, vr));
  out.grad.emplace("s_hat", gradient_adjoint(us, vs));
  return out;
}

LossEval generator_loss(const Image& image, const Image& r_hat, const Image& s_hat, const Image& r_gt,
                        const Image& s_gt, const LossWeights& weights, const ShadingCritic& critic) {
  LossEval out = direct_loss(image, r_hat, s_hat, r_gt, s_gt, weights);
  if (weights.lambda_ad != 0.0) {
    const LossEval ad = adversarial_loss(s_hat, critic);
    out.value += weights.lambda_ad * ad.value;
    accumulate(out.grad.at("s_hat"), ad.at("s_hat"), weights.lambda_ad);
  }
  if (weights.lambda_grad != 0.0) {
    const LossEval gc = grad_constraint_loss(r_hat, s_hat);
    out.value += weights.lambda_grad * gc.value;
    accumulate(out.grad.at("r_hat"), gc.at("r_hat"), weights.lambda_grad);
    accumulate(out.grad.at("s_hat"), gc.at("s_hat"), weights.lambda_grad);
  }
  return out;
}

double finite_diff_check(const LossFn& loss, const Inputs& inputs, const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw ParameterError("finite-difference step must be positive");
  const LossEval base = loss(inputs);
  std::mt19937_64 rng(options.seed);
  const std::size_t want = std::max<std::size_t>(options.coords, 64);
  double worst = 0.0;
  for (const auto& [name, value] : inputs) {
    auto it = base.grad.find(name);
    if (it == base.grad.end()) throw ParameterError("loss reports no gradient for input '" + name + "'");
    if (!it->second.same_shape(value)) {
      throw DimensionError("gradient for '" + name + "' does not match the input shape");
    }
    std::vector<std::size_t> coords(value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > want) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(want);
    }
    Inputs probe = inputs;
    Image& x = probe.at(name);
    for (std::size_t i : coords) {
      const double x0 = x[i];
      x[i] = x0 + options.eps;
      const long double fp = loss(probe).value;
      x[i] = x0 - options.eps;
      const long double fm = loss(probe).value;
      x[i] = x0;
      const double numeric = static_cast<double>((fp - fm) / (2.0L * options.eps));
      const double analytic = it->second[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace intrinsic::losses
