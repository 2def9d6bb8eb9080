#include <algorithm>
#include <cmath>

#include "intrinsic/decompose.hpp"
#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"

namespace intrinsic::decompose {

namespace {

struct EnergyEval {
  EnergyTerms terms;
  Image grad_r;
  Image grad_s;
};

EnergyEval evaluate_energy(const Image& image, const Image& r, const Image& s, const losses::ShadingCritic& critic,
                           const SolverConfig& config, bool want_grad) {
  const auto& w = config.weights;
  EnergyEval e;
  const losses::LossEval rec = losses::reconstruction_loss(image, r, s);
  e.terms.reconstruction = static_cast<double>(rec.value);
  if (want_grad) {
    e.grad_r = rec.at("r_hat");
    e.grad_s = rec.at("s_hat");
  }
  auto add = [](Image& into, const Image& g, double k) {
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += k * g[i];
  };
  if (w.lambda_ad != 0.0) {
    const losses::LossEval ad = losses::adversarial_loss(s, critic);
    e.terms.adversarial = static_cast<double>(ad.value);
    if (want_grad) add(e.grad_s, ad.at("s_hat"), w.lambda_ad);
  }
  if (w.lambda_grad != 0.0) {
    const losses::LossEval gc = losses::grad_constraint_loss(r, s);
    e.terms.grad_constraint = static_cast<double>(gc.value);
    if (want_grad) {
      add(e.grad_r, gc.at("r_hat"), w.lambda_grad);
      add(e.grad_s, gc.at("s_hat"), w.lambda_grad);
    }
  }
  if (config.smoothness != 0.0) {
    const GradientField g = gradient(s);
    const double n = static_cast<double>(s.pixel_count());
    long double sq = 0.0L;
    for (std::size_t i = 0; i < s.size(); ++i) {
      sq += static_cast<long double>(g.gx[i]) * g.gx[i] + static_cast<long double>(g.gy[i]) * g.gy[i];
    }
    e.terms.smoothness = static_cast<double>(sq / n);
    if (want_grad) add(e.grad_s, gradient_adjoint(g.gx, g.gy), 2.0 * config.smoothness / n);
  }
  e.terms.total = e.terms.reconstruction + w.lambda_ad * e.terms.adversarial +
                  w.lambda_grad * e.terms.grad_constraint + config.smoothness * e.terms.smoothness;
  if (!std::isfinite(e.terms.total)) {
    throw DivergenceError("energy became non-finite; retry with a smaller step size");
  }
  return e;
}

void initialize(const Image& image, const SolverConfig& config, Image& r, Image& s) {
  const EnergyInit init = config.init;
  const Image floored_image = floored(image, kLogFloor);
  const Image lum = floored(to_luminance(floored_image), kLogFloor);
  switch (init) {
    case EnergyInit::identity:
      r = floored_image;
      s = Image(image.width(), image.height(), 1, 1.0);
      return;
    case EnergyInit::luminance:
      s = lum;
      break;
    case EnergyInit::split:
      s = lum;
      for (double& v : s.data()) v = std::sqrt(v);
      break;
    case EnergyInit::blur:
      s = floored(gaussian_blur(lum, 4.0), kLogFloor);
      break;
    case EnergyInit::soft: {
      GradientField g = log_luminance_gradient(floored_image);
      for (std::size_t p = 0; p < g.gx.size(); ++p) {
        const double m = std::hypot(g.gx[p], g.gy[p]);
        const double w = losses::sigmoid((m - config.init_threshold) / config.init_width);
        g.gx[p] *= w;
        g.gy[p] *= w;
      }
      Decomposition d = reconstruct(floored_image, g, config);
      r = floored(d.reflectance, kLogFloor);
      s = floored(d.shading, kLogFloor);
      return;
    }
    case EnergyInit::retinex: {
      Decomposition d = retinex_decompose(floored_image, config);
      r = floored(d.reflectance, kLogFloor);
      s = floored(d.shading, kLogFloor);
      return;
    }
  }
  r = floored_image;
  const int nc = r.channels();
  for (std::size_t p = 0; p < r.pixel_count(); ++p) {
    for (int c = 0; c < nc; ++c) r[p * nc + c] /= s[p];
  }
}

void project(Image& img) {
  for (double& v : img.data()) v = std::max(v, kLogFloor);
}

}  // namespace

EnergyTerms energy_terms(const Image& image, const Image& r, const Image& s, const losses::ShadingCritic& critic,
                         const SolverConfig& config) {
  return evaluate_energy(image, r, s, critic, config, false).terms;
}

Decomposition energy_decompose(const Image& image, const losses::ShadingCritic& critic, const SolverConfig& config,
                               std::vector<double>* trace) {
  config.check();
  for (double v : image.data()) {
    if (!std::isfinite(v)) throw ParameterError("energy solver input has non-finite values");
  }
  Image r, s;
  initialize(image, config, r, s);
  const double scale = static_cast<double>(image.pixel_count());
  EnergyEval cur = evaluate_energy(image, r, s, critic, config, true);
  if (trace) trace->assign(1, cur.terms.total);

  Image vr(r.width(), r.height(), r.channels()), vs(s.width(), s.height(), 1);
  double step = config.step_size;
  for (int it = 0; it < config.iterations; ++it) {
    bool accepted = false;
    for (int h = 0; h <= config.max_halvings && !accepted; ++h) {
      Image nvr = vr, nvs = vs, nr = r, ns = s;
      for (std::size_t i = 0; i < r.size(); ++i) {
        nvr[i] = config.momentum * vr[i] - step * scale * cur.grad_r[i];
        nr[i] += nvr[i];
      }
      for (std::size_t i = 0; i < s.size(); ++i) {
        nvs[i] = config.momentum * vs[i] - step * scale * cur.grad_s[i];
        ns[i] += nvs[i];
      }
      project(nr);
      project(ns);
      EnergyEval next = evaluate_energy(image, nr, ns, critic, config, true);
      if (next.terms.total <= cur.terms.total) {
        r = std::move(nr);
        s = std::move(ns);
        vr = std::move(nvr);
        vs = std::move(nvs);
        cur = std::move(next);
        accepted = true;
      } else {
        step *= 0.5;
        std::fill(vr.data().begin(), vr.data().end(), 0.0);
        std::fill(vs.data().begin(), vs.data().end(), 0.0);
      }
    }
    if (!accepted) break;
    if (trace) trace->push_back(cur.terms.total);
  }

  Decomposition d;
  d.reflectance = std::move(r);
  d.shading = std::move(s);
  d.residual = reconstruction_residual(image, d.reflectance, d.shading);
  return d;
}

}  // namespace intrinsic::decompose
