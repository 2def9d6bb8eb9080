#include <algorithm>
#include <functional>
#include <random>

#include "intrinsic/decompose.hpp"
#include "intrinsic/error.hpp"
#include "intrinsic/gradcheck.hpp"
#include "intrinsic/imgops.hpp"
#include "json.hpp"

namespace intrinsic::gradcheck {

using losses::Inputs;
using losses::LossEval;
using losses::LossFn;

namespace {

Image uniform(int w, int h, int c, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(w, h, c);
  for (double& v : img.data()) v = u(rng);
  return img;
}

LossFn faulty(LossFn f, double scale) {
  if (scale == 1.0) return f;
  return [f = std::move(f), scale](const Inputs& in) {
    LossEval e = f(in);
    for (auto& [name, g] : e.grad) g = scaled(g, scale);
    return e;
  };
}

/// Critic trained on smooth versus speckled rasters of the suite's size.
decompose::DiscriminatorModel trained_critic(int w, int h) {
  std::mt19937_64 rng(4242);
  std::vector<Image> pos, neg;
  for (int k = 0; k < 8; ++k) {
    Image s(w, h, 1);
    const double fx = 0.2 + 0.05 * k, fy = 0.3 - 0.02 * k;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) s.at(x, y) = 0.7 + 0.2 * std::sin(fx * x) * std::cos(fy * y);
    }
    pos.push_back(s);
    neg.push_back(uniform(w, h, 1, rng, 0.2, 1.0));
  }
  return decompose::discriminator_train(pos, neg, {.seed = 1, .epochs = 200});
}

}  // namespace

MeanNormalizedLinearCritic::MeanNormalizedLinearCritic(Image w, double b) : w_(std::move(w)), b_(b) {}

losses::CriticOutput MeanNormalizedLinearCritic::evaluate(const Image& s, bool want_grad) const {
  if (s.size() != w_.size()) throw DimensionError("critic weights do not match the shading");
  long double m = 0.0L;
  for (double v : s.data()) m += v;
  m /= static_cast<long double>(s.size());
  long double wt = 0.0L;
  for (std::size_t i = 0; i < s.size(); ++i) wt += w_[i] * s[i] / m;
  losses::CriticOutput out;
  out.logit = b_ + wt;
  if (want_grad) {
    const long double n = static_cast<long double>(s.size());
    out.logit_grad = Image(s.width(), s.height(), s.channels());
    for (std::size_t i = 0; i < s.size(); ++i) out.logit_grad[i] = static_cast<double>((w_[i] - wt / n) / m);
  }
  return out;
}

std::vector<CaseResult> run_suite(const SuiteOptions& o) {
  if (o.seeds < 1 || o.width < 2 || o.height < 2) throw ParameterError("gradcheck needs seeds >= 1 and a 2x2 raster");
  const int w = o.width, h = o.height;
  const decompose::DiscriminatorModel model = trained_critic(w, h);
  std::vector<std::pair<std::string, double>> worst;
  auto record = [&](const std::string& name, double err) {
    auto it = std::find_if(worst.begin(), worst.end(), [&](const auto& p) { return p.first == name; });
    if (it == worst.end()) worst.emplace_back(name, err);
    else it->second = std::max(it->second, err);
  };

  for (int seed = 0; seed < o.seeds; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const Image r = uniform(w, h, 3, rng, 0.1, 1.0), s = uniform(w, h, 1, rng, 0.1, 1.0);
    const Image rgt = uniform(w, h, 3, rng, 0.1, 1.0), sgt = uniform(w, h, 1, rng, 0.1, 1.0);
    const Image img = hadamard(rgt, sgt);
    const MeanNormalizedLinearCritic critic(uniform(w, h, 1, rng, -0.3, 0.3), 0.2);
    const double p = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    const double z = std::normal_distribution<double>(0.0, 2.0)(rng);
    const double label = static_cast<double>(rng() & 1);
    losses::GradCheckOptions fd = o.fd;
    fd.seed = o.fd.seed + static_cast<std::uint64_t>(seed);
    const Inputs rs{{"r_hat", r}, {"s_hat", s}};

    auto check = [&](const std::string& name, LossFn f, const Inputs& in) {
      record(name, losses::finite_diff_check(faulty(std::move(f), o.fault_scale), in, fd));
    };
    check("si_mse", [&](const Inputs& in) { return losses::si_mse_loss(in.at("x_hat"), rgt); }, {{"x_hat", r}});
    check("si_mse_fixed_alpha", [&](const Inputs& in) { return losses::si_mse_loss(in.at("x_hat"), rgt, false); },
          {{"x_hat", r}});
    check("regression", [&](const Inputs& in) { return losses::regression_loss(in.at("x_hat"), sgt); },
          {{"x_hat", s}});
    check("reconstruction",
          [&](const Inputs& in) { return losses::reconstruction_loss(img, in.at("r_hat"), in.at("s_hat")); }, rs);
    check("direct",
          [&](const Inputs& in) {
            return losses::direct_loss(img, in.at("r_hat"), in.at("s_hat"), rgt, sgt, losses::LossWeights{});
          },
          rs);
    check("bce", [&](const Inputs& in) { return losses::bce(in.at("y_hat")[0], label); },
          {{"y_hat", Image(1, 1, 1, p)}});
    check("bce_with_logit", [&](const Inputs& in) { return losses::bce_with_logit(in.at("logit")[0], label); },
          {{"logit", Image(1, 1, 1, z)}});
    check("adversarial", [&](const Inputs& in) { return losses::adversarial_loss(in.at("s_hat"), critic); },
          {{"s_hat", s}});
    check("grad_constraint",
          [&](const Inputs& in) { return losses::grad_constraint_loss(in.at("r_hat"), in.at("s_hat")); }, rs);
    check("generator",
          [&](const Inputs& in) {
            return losses::generator_loss(img, in.at("r_hat"), in.at("s_hat"), rgt, sgt, losses::LossWeights{},
                                          critic);
          },
          rs);
    const Image smooth = gaussian_blur(s, 1.0);
    check("discriminator_logit",
          [&](const Inputs& in) {
            const losses::CriticOutput out = model.evaluate(in.at("s_hat"), true);
            LossEval e;
            e.value = out.logit;
            e.grad.emplace("s_hat", out.logit_grad);
            return e;
          },
          {{"s_hat", smooth}});
  }

  std::vector<CaseResult> out;
  for (const auto& [name, err] : worst) out.push_back({name, err, err < o.tolerance});
  return out;
}

std::string to_json(const std::vector<CaseResult>& results, int indent) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const CaseResult& r : results) {
    nlohmann::ordered_json j;
    j["loss_name"] = r.loss_name;
    j["max_rel_err"] = r.max_rel_err;
    j["pass"] = r.pass;
    arr.push_back(std::move(j));
  }
  return arr.dump(indent);
}

}  // namespace intrinsic::gradcheck
