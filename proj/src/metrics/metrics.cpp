#include "intrinsic/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"
#include "json.hpp"

namespace intrinsic::metrics {

void MetricConfig::check() const {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  if (!(w1 > 0.0) || !(w2 > 0.0)) throw ParameterError("F-score weights must be positive");
  if (!(deadband >= 0.0 && deadband < 1.0)) throw ParameterError("deadband must lie in [0, 1)");
}

namespace {

int region_id(std::span<const int> ids, std::size_t i) {
  return i < ids.size() ? ids[i] : static_cast<int>(i) + 1;
}

void require_extent(const Image& img, const PixelSet& s, const char* what) {
  if (img.width() != s.width() || img.height() != s.height()) {
    throw DimensionError(std::string(what) + " raster does not match image extent");
  }
}

std::vector<int> ids_of(const annotation::RegionAnnotation& regions) {
  std::vector<int> ids;
  for (const auto& r : regions.regions) ids.push_back(r.id);
  return ids;
}

}  // namespace

double region_error_reflectance(const Image& r_hat, std::span<const PixelSet> regions,
                                std::span<const int> ids) {
  if (regions.empty()) throw ParameterError("region reflectance error needs at least one region");
  const int nc = r_hat.channels();
  double total = 0.0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const PixelSet& reg = regions[i];
    require_extent(r_hat, reg, "region");
    const int id = region_id(ids, i);
    if (reg.empty()) throw DegenerateRegionError("region " + std::to_string(id) + " is empty", id);
    const std::vector<std::size_t> px = reg.indices();
    std::vector<double> sum(nc, 0.0);
    for (std::size_t p : px)
      for (int c = 0; c < nc; ++c) sum[c] += r_hat[p * nc + c];
    double all = 0.0;
    for (double s : sum) all += s;
    if (!(all > 0.0)) {
      throw DegenerateRegionError("region " + std::to_string(id) + " has non-positive mean", id);
    }
    const double n = static_cast<double>(px.size());
    double acc = 0.0;
    for (int c = 0; c < nc; ++c) {
      // an all-zero channel is constant and contributes no deviation
      if (!(sum[c] > 0.0)) continue;
      const double scale = n / sum[c];
      for (std::size_t p : px) {
        const double d = r_hat[p * nc + c] * scale - 1.0;
        acc += d * d;
      }
    }
    total += acc / (n * nc);
  }
  return total / static_cast<double>(regions.size());
}

double region_error_reflectance(const Image& r_hat, const annotation::RegionAnnotation& regions) {
  const auto raster = regions.rasterize(r_hat.width(), r_hat.height());
  const auto ids = ids_of(regions);
  return region_error_reflectance(r_hat, raster, ids);
}

double si_mse_alpha(const Image& x_hat, const Image& x, const PixelSet& mask) {
  if (!x_hat.same_shape(x)) throw DimensionError("si-MSE operands differ in shape");
  require_extent(x, mask, "mask");
  const int nc = x.channels();
  double num = 0.0, den = 0.0;
  for (std::size_t p : mask.indices()) {
    for (int c = 0; c < nc; ++c) {
      const std::size_t i = p * nc + c;
      num += x_hat[i] * x[i];
      den += x_hat[i] * x_hat[i];
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

double si_mse(const Image& x_hat, const Image& x, const PixelSet& mask) {
  if (mask.empty()) throw ParameterError("si-MSE over an empty mask");
  const double alpha = si_mse_alpha(x_hat, x, mask);
  const int nc = x.channels();
  double acc = 0.0;
  for (std::size_t p : mask.indices()) {
    for (int c = 0; c < nc; ++c) {
      const std::size_t i = p * nc + c;
      const double d = alpha * x_hat[i] - x[i];
      acc += d * d;
    }
  }
  return acc / static_cast<double>(mask.count());
}

double region_error_shading(const Image& s_hat, const Image& image, std::span<const PixelSet> regions,
                            const MetricConfig& config, std::span<const int> ids) {
  config.check();
  if (regions.empty()) throw ParameterError("region shading error needs at least one region");
  if (!s_hat.same_extent(image)) throw DimensionError("shading and image differ in extent");
  const Image pred = to_luminance(s_hat);
  const Image ref = to_luminance(image);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const PixelSet& reg = regions[i];
    require_extent(image, reg, "region");
    const int id = region_id(ids, i);
    if (reg.empty()) throw DegenerateRegionError("region " + std::to_string(id) + " is empty", id);
    const std::vector<std::size_t> px = reg.indices();
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t p : px) {
      sxy += pred[p] * ref[p];
      sxx += pred[p] * pred[p];
      syy += ref[p] * ref[p];
    }
    if (!(syy > 0.0)) {
      throw DegenerateRegionError("region " + std::to_string(id) + " has zero image intensity", id);
    }
    const double alpha = sxx > 0.0 ? sxy / sxx : 0.0;
    double err = 0.0;
    for (std::size_t p : px) {
      const double r = alpha * pred[p] - ref[p];
      if (std::abs(r) > config.deadband * ref[p]) err += r * r;
    }
    const double n = static_cast<double>(px.size());
    num += err / n;
    den += syy / n;
  }
  return num / den;
}

double region_error_shading(const Image& s_hat, const Image& image,
                            const annotation::RegionAnnotation& regions, const MetricConfig& config) {
  const auto raster = regions.rasterize(image.width(), image.height());
  const auto ids = ids_of(regions);
  return region_error_shading(s_hat, image, raster, config, ids);
}

EdgeAccuracies edge_accuracies(const Image& r_hat, const Image& s_hat, const EdgeSet& e_r,
                               const EdgeSet& e_s, const PixelSet& eval_mask,
                               const MetricConfig& config) {
  config.check();
  if (!r_hat.same_extent(s_hat)) throw DimensionError("reflectance and shading differ in extent");
  require_extent(r_hat, e_r, "E_R");
  require_extent(r_hat, e_s, "E_S");
  if (e_r.empty()) throw UndefinedAccuracyError("E_R is empty; reflectance-edge accuracies undefined");
  if (e_s.empty()) throw UndefinedAccuracyError("E_S is empty; shading-edge accuracies undefined");
  const Image mr = gradient_magnitude(gradient(mean_normalize(r_hat, eval_mask)));
  const Image ms = gradient_magnitude(gradient(mean_normalize(s_hat, eval_mask)));
  const double tau = config.tau;

  EdgeAccuracies a;
  EdgeCounts& k = a.counts;
  k.e_r = e_r.count();
  k.e_s = e_s.count();
  for (std::size_t p : e_s.indices()) {
    if (mr[p] < tau) ++k.r_es;
    if (ms[p] > tau) ++k.s_es;
  }
  for (std::size_t p : e_r.indices()) {
    if (mr[p] > tau) ++k.r_er;
    if (ms[p] < tau) ++k.s_er;
  }
  a.acc_r_es = static_cast<double>(k.r_es) / k.e_s;
  a.acc_s_es = static_cast<double>(k.s_es) / k.e_s;
  a.acc_r_er = static_cast<double>(k.r_er) / k.e_r;
  a.acc_s_er = static_cast<double>(k.s_er) / k.e_r;
  return a;
}

namespace {

double weighted_harmonic(double entangled, double own, double w1, double w2) {
  if (!(entangled > 0.0) || !(own > 0.0)) return 0.0;
  return (w1 + w2) / (w1 / entangled + w2 / own);
}

}  // namespace

FScores f_scores(const EdgeAccuracies& acc, const MetricConfig& config) {
  config.check();
  return {weighted_harmonic(acc.acc_r_es, acc.acc_r_er, config.w1, config.w2),
          weighted_harmonic(acc.acc_s_er, acc.acc_s_es, config.w1, config.w2)};
}

PixelSet evaluation_mask(const PixelSet& region_union, const EdgeSet& e_r, const EdgeSet& e_s) {
  return region_union.united(e_r).united(e_s).dilated(1);
}

MetricReport evaluate(const Image& r_hat, const Image& s_hat, const Image& image,
                      std::span<const PixelSet> regions, const EdgeSet& e_r, const EdgeSet& e_s,
                      const MetricConfig& config) {
  config.check();
  if (!r_hat.same_extent(image) || !s_hat.same_extent(image)) {
    throw DimensionError("predictions and image differ in extent");
  }
  PixelSet region_union(image.width(), image.height());
  std::size_t region_pixels = 0;
  for (const PixelSet& r : regions) {
    region_union = region_union.united(r);
    region_pixels += r.count();
  }
  MetricReport rep;
  rep.config = config;
  rep.regions = regions.size();
  rep.region_pixels = region_pixels;
  rep.region_error_r = region_error_reflectance(r_hat, regions);
  rep.region_error_s = region_error_shading(s_hat, image, regions, config);
  const EdgeAccuracies acc =
      edge_accuracies(r_hat, s_hat, e_r, e_s, evaluation_mask(region_union, e_r, e_s), config);
  const FScores f = f_scores(acc, config);
  rep.acc_r_es = acc.acc_r_es;
  rep.acc_r_er = acc.acc_r_er;
  rep.acc_s_er = acc.acc_s_er;
  rep.acc_s_es = acc.acc_s_es;
  rep.counts = acc.counts;
  rep.f_r = f.f_r;
  rep.f_s = f.f_s;
  return rep;
}

MetricReport evaluate(const Image& r_hat, const Image& s_hat, const Image& image,
                      const annotation::AnnotationDoc& doc, const MetricConfig& config) {
  if (doc.image.width != image.width() || doc.image.height != image.height()) {
    throw DimensionError("annotation does not match image size");
  }
  const auto regions = doc.regions.rasterize(image.width(), image.height());
  PixelSet region_union(image.width(), image.height());
  for (const PixelSet& r : regions) region_union = region_union.united(r);
  const EdgeSet e_s =
      annotation::derive_shading_edges(annotation::canny_for(doc, image), region_union);
  return evaluate(r_hat, s_hat, image, regions, doc.edges.e_r, e_s, config);
}

MetricReport aggregate(std::span<const MetricReport> reports) {
  if (reports.empty()) throw ParameterError("cannot aggregate an empty report list");
  MetricReport out;
  out.config = reports.front().config;
  out.images = 0;
  double err_r = 0.0, err_s = 0.0;
  for (const MetricReport& r : reports) {
    if (!(r.config == out.config)) throw ParameterError("reports use different metric configs");
    out.counts.e_r += r.counts.e_r;
    out.counts.e_s += r.counts.e_s;
    out.counts.r_es += r.counts.r_es;
    out.counts.r_er += r.counts.r_er;
    out.counts.s_er += r.counts.s_er;
    out.counts.s_es += r.counts.s_es;
    out.regions += r.regions;
    out.region_pixels += r.region_pixels;
    out.images += r.images;
    err_r += r.region_error_r * static_cast<double>(r.images);
    err_s += r.region_error_s * static_cast<double>(r.images);
  }
  out.region_error_r = err_r / static_cast<double>(out.images);
  out.region_error_s = err_s / static_cast<double>(out.images);
  const EdgeCounts& k = out.counts;
  EdgeAccuracies acc;
  acc.acc_r_es = k.e_s ? static_cast<double>(k.r_es) / k.e_s : 0.0;
  acc.acc_s_es = k.e_s ? static_cast<double>(k.s_es) / k.e_s : 0.0;
  acc.acc_r_er = k.e_r ? static_cast<double>(k.r_er) / k.e_r : 0.0;
  acc.acc_s_er = k.e_r ? static_cast<double>(k.s_er) / k.e_r : 0.0;
  const FScores f = f_scores(acc, out.config);
  out.acc_r_es = acc.acc_r_es;
  out.acc_r_er = acc.acc_r_er;
  out.acc_s_er = acc.acc_s_er;
  out.acc_s_es = acc.acc_s_es;
  out.f_r = f.f_r;
  out.f_s = f.f_s;
  return out;
}

std::string to_json(const MetricReport& r, int indent) {
  nlohmann::ordered_json j;
  j["acc_r_es"] = r.acc_r_es;
  j["acc_r_er"] = r.acc_r_er;
  j["acc_s_er"] = r.acc_s_er;
  j["acc_s_es"] = r.acc_s_es;
  j["f_r"] = r.f_r;
  j["f_s"] = r.f_s;
  j["region_error_r"] = r.region_error_r;
  j["region_error_s"] = r.region_error_s;
  j["counts"] = {{"e_r", r.counts.e_r},
                 {"e_s", r.counts.e_s},
                 {"regions", r.regions},
                 {"region_pixels", r.region_pixels},
                 {"images", r.images},
                 {"correct", {{"r_es", r.counts.r_es},
                              {"r_er", r.counts.r_er},
                              {"s_er", r.counts.s_er},
                              {"s_es", r.counts.s_es}}}};
  j["config"] = {{"tau", r.config.tau},
                 {"w1", r.config.w1},
                 {"w2", r.config.w2},
                 {"deadband", r.config.deadband}};
  return j.dump(indent);
}

std::string table_header() {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %11s %11s %11s %11s %8s %8s %13s %13s", "image",
                "Acc_R^(E_S)", "Acc_R^(E_R)", "Acc_S^(E_R)", "Acc_S^(E_S)", "F_R", "F_S",
                "RegionError_R", "RegionError_S");
  return buf;
}

std::string table_row(const MetricReport& r, const std::string& label) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %11.4f %11.4f %11.4f %11.4f %8.4f %8.4f %13.4f %13.4f",
                label.c_str(), r.acc_r_es, r.acc_r_er, r.acc_s_er, r.acc_s_es, r.f_r, r.f_s,
                r.region_error_r, r.region_error_s);
  return buf;
}

}  // namespace intrinsic::metrics
