#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "intrinsic/decompose.hpp"
#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"
#include "json.hpp"

namespace intrinsic::decompose {

namespace {

const double kLogTwo = std::log(2.0);
const double kBinWidth = kLogTwo / kHistogramBins;

double bin_center(int k) { return (k + 0.5) * kBinWidth; }

struct FeatureState {
  double m = 0.0;
  Image normalized;
  GradientField grad;
  Image magnitude;
};

FeatureState prepare(const Image& shading) {
  if (shading.channels() != 1) throw DimensionError("discriminator input must be single-channel");
  if (shading.empty()) throw DimensionError("discriminator input is empty");
  FeatureState st;
  st.m = mean(shading);
  st.normalized = st.m > 0.0 ? scaled(shading, 1.0 / st.m) : Image(shading.width(), shading.height(), 1);
  st.grad = gradient(st.normalized);
  st.magnitude = gradient_magnitude(st.grad);
  return st;
}

/// Position on the bin axis, clamped to the outer centres; `interior` is false
/// where the clamp is active and the histogram has zero derivative.
double bin_position(double magnitude, bool& interior) {
  const double u = std::log1p(magnitude);
  const double lo = bin_center(0), hi = bin_center(kHistogramBins - 1);
  interior = u > lo && u < hi;
  return (std::clamp(u, lo, hi) - lo) / kBinWidth;
}

}  // namespace

Features featurize(const Image& shading) {
  const FeatureState st = prepare(shading);
  const double n = static_cast<double>(shading.pixel_count());
  Features f{};
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t p = 0; p < shading.pixel_count(); ++p) {
    bool interior = false;
    const double t = bin_position(st.magnitude[p], interior);
    const int k = std::min(static_cast<int>(t), kHistogramBins - 2);
    const double frac = t - k;
    f[k] += (1.0 - frac) / n;
    f[k + 1] += frac / n;
    sum += st.normalized[p];
    sum2 += st.normalized[p] * st.normalized[p];
  }
  const double mu = sum / n;
  f[kHistogramBins] = mu;
  f[kHistogramBins + 1] = std::max(0.0, sum2 / n - mu * mu);
  return f;
}

Image featurize_vjp(const Image& shading, const Features& weights) {
  const FeatureState st = prepare(shading);
  const int w = shading.width(), h = shading.height();
  const double n = static_cast<double>(shading.pixel_count());
  Image out(w, h, 1);
  if (!(st.m > 0.0)) return out;

  Image u(w, h, 1), v(w, h, 1);
  double mu = 0.0;
  for (std::size_t p = 0; p < shading.pixel_count(); ++p) mu += st.normalized[p];
  mu /= n;
  for (std::size_t p = 0; p < shading.pixel_count(); ++p) {
    bool interior = false;
    const double t = bin_position(st.magnitude[p], interior);
    if (!interior) continue;
    const int k = std::min(static_cast<int>(t), kHistogramBins - 2);
    const double d_pos = (weights[k + 1] - weights[k]) / kBinWidth / n;
    const double mag = st.magnitude[p];
    const double beta = d_pos / (1.0 + mag) / mag;
    u[p] = beta * st.grad.gx[p];
    v[p] = beta * st.grad.gy[p];
  }
  Image g = gradient_adjoint(u, v);
  for (std::size_t p = 0; p < shading.pixel_count(); ++p) {
    g[p] += weights[kHistogramBins] / n + weights[kHistogramBins + 1] * 2.0 * (st.normalized[p] - mu) / n;
  }
  double proj = 0.0;
  for (std::size_t p = 0; p < shading.pixel_count(); ++p) proj += g[p] * st.normalized[p];
  proj /= n;
  for (std::size_t p = 0; p < shading.pixel_count(); ++p) out[p] = (g[p] - proj) / st.m;
  return out;
}

DiscriminatorModel DiscriminatorModel::uninformative() {
  DiscriminatorModel m;
  m.feature_scale.fill(1.0);
  return m;
}

double DiscriminatorModel::logit_of_features(const Features& f) const {
  double z = bias;
  for (int k = 0; k < kFeatureCount; ++k) z += weights[k] * (f[k] - feature_mean[k]) / feature_scale[k];
  return z;
}

double DiscriminatorModel::score(const Image& shading) const {
  return losses::sigmoid(logit_of_features(featurize(shading)));
}

losses::CriticOutput DiscriminatorModel::evaluate(const Image& shading, bool want_grad) const {
  losses::CriticOutput out;
  out.logit = logit_of_features(featurize(shading));
  if (want_grad) {
    Features a{};
    for (int k = 0; k < kFeatureCount; ++k) a[k] = weights[k] / feature_scale[k];
    out.logit_grad = featurize_vjp(shading, a);
  }
  return out;
}

std::string DiscriminatorModel::to_json() const {
  nlohmann::ordered_json j;
  j["type"] = "logistic-features";
  j["feature_spec"] = {{"histogram_bins", kHistogramBins},
                       {"range", {0.0, kLogTwo}},
                       {"kernel", "triangular"},
                       {"extra", {"mean", "variance"}},
                       {"mean", feature_mean},
                       {"scale", feature_scale}};
  j["weights"] = weights;
  j["bias"] = bias;
  j["training"] = {{"seed", training.seed},         {"epochs", training.epochs},
                   {"learning_rate", training.learning_rate}, {"final_loss", final_loss},
                   {"positives", positives},         {"negatives", negatives}};
  return j.dump(2);
}

DiscriminatorModel DiscriminatorModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("discriminator model: ") + e.what(), "byte " + std::to_string(e.byte));
  }
  DiscriminatorModel m;
  try {
    if (j.at("type") != "logistic-features") throw ParseError("unsupported discriminator type", "/type");
    const auto& spec = j.at("feature_spec");
    if (spec.at("histogram_bins").get<int>() != kHistogramBins) {
      throw ParseError("unsupported histogram size", "/feature_spec/histogram_bins");
    }
    m.feature_mean = spec.at("mean").get<Features>();
    m.feature_scale = spec.at("scale").get<Features>();
    m.weights = j.at("weights").get<Features>();
    m.bias = j.at("bias").get<double>();
    const auto& t = j.at("training");
    m.training.seed = t.at("seed").get<std::uint64_t>();
    m.training.epochs = t.at("epochs").get<int>();
    m.training.learning_rate = t.at("learning_rate").get<double>();
    m.final_loss = t.at("final_loss").get<double>();
    m.positives = t.at("positives").get<std::size_t>();
    m.negatives = t.at("negatives").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("discriminator model: ") + e.what(), "/");
  }
  for (int k = 0; k < kFeatureCount; ++k) {
    if (!std::isfinite(m.weights[k]) || !std::isfinite(m.feature_mean[k]) || !(m.feature_scale[k] > 0.0)) {
      throw ParseError("discriminator model has invalid parameters", "/weights/" + std::to_string(k));
    }
  }
  if (!std::isfinite(m.bias)) throw ParseError("discriminator model has a non-finite bias", "/bias");
  return m;
}

DiscriminatorModel train_on_features(const std::vector<Features>& positives,
                                     const std::vector<Features>& negatives, const TrainOptions& options) {
  if (positives.empty() || negatives.empty()) {
    throw ParameterError("discriminator training needs at least one positive and one negative");
  }
  if (options.epochs < 0 || !(options.learning_rate > 0.0)) {
    throw ParameterError("discriminator training: bad epochs or learning rate");
  }
  std::vector<const Features*> xs;
  std::vector<double> ys;
  for (const auto& f : positives) xs.push_back(&f), ys.push_back(1.0);
  for (const auto& f : negatives) xs.push_back(&f), ys.push_back(0.0);
  const double n = static_cast<double>(xs.size());

  DiscriminatorModel m;
  m.training = options;
  m.positives = positives.size();
  m.negatives = negatives.size();
  for (int k = 0; k < kFeatureCount; ++k) {
    double s = 0.0, s2 = 0.0;
    for (const Features* f : xs) s += (*f)[k];
    const double mu = s / n;
    for (const Features* f : xs) s2 += ((*f)[k] - mu) * ((*f)[k] - mu);
    const double sd = std::sqrt(s2 / n);
    m.feature_mean[k] = mu;
    m.feature_scale[k] = sd > 1e-12 ? sd : 1.0;
  }
  std::vector<Features> z(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (int k = 0; k < kFeatureCount; ++k) z[i][k] = ((*xs[i])[k] - m.feature_mean[k]) / m.feature_scale[k];
  }

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> init(0.0, 0.01);
  for (double& w : m.weights) w = init(rng);
  m.bias = 0.0;

  auto loss_and_grad = [&](Features* gw, double* gb) {
    long double loss = 0.0L;
    if (gw) gw->fill(0.0);
    if (gb) *gb = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      double logit = m.bias;
      for (int k = 0; k < kFeatureCount; ++k) logit += m.weights[k] * z[i][k];
      const losses::LossEval l = losses::bce_with_logit(logit, ys[i]);
      loss += l.value;
      const double d = l.at("logit")[0] / n;
      if (gw) {
        for (int k = 0; k < kFeatureCount; ++k) (*gw)[k] += d * z[i][k];
      }
      if (gb) *gb += d;
    }
    return static_cast<double>(loss / n);
  };

  Features gw{};
  double gb = 0.0;
  for (int e = 0; e < options.epochs; ++e) {
    loss_and_grad(&gw, &gb);
    for (int k = 0; k < kFeatureCount; ++k) m.weights[k] -= options.learning_rate * gw[k];
    m.bias -= options.learning_rate * gb;
  }
  m.final_loss = loss_and_grad(nullptr, nullptr);
  return m;
}

DiscriminatorModel discriminator_train(const std::vector<Image>& positives, const std::vector<Image>& negatives,
                                       const TrainOptions& options) {
  if (positives.empty() || negatives.empty()) {
    throw ParameterError("discriminator training needs at least one positive and one negative");
  }
  std::vector<Features> fp, fn;
  for (const Image& s : positives) fp.push_back(featurize(s));
  for (const Image& s : negatives) fn.push_back(featurize(s));
  return train_on_features(fp, fn, options);
}

std::vector<Image> mix_negatives(const std::vector<Image>& textured, const std::vector<Image>& generated,
                                 std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto shuffled = [&](const std::vector<Image>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
  };
  const auto it = shuffled(textured), ig = shuffled(generated);
  std::size_t take_g = std::min(generated.size(), textured.empty() ? count : count / 2);
  std::size_t take_t = std::min(textured.size(), count - take_g);
  take_g = std::min(generated.size(), count - take_t);
  std::vector<Image> out;
  for (std::size_t i = 0; i < take_t; ++i) out.push_back(textured[it[i]]);
  for (std::size_t i = 0; i < take_g; ++i) out.push_back(generated[ig[i]]);
  return out;
}

}  // namespace intrinsic::decompose
