#include "intrinsic/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "intrinsic/error.hpp"
#include "intrinsic/imgops.hpp"

namespace intrinsic::annotation {

PixelSet rasterize_polygon(const Polygon& poly, int width, int height) {
  PixelSet out(width, height);
  const std::size_t n = poly.size();
  if (n < 3) return out;
  int ymin = poly[0].y, ymax = poly[0].y;
  for (const Pixel& v : poly) {
    ymin = std::min(ymin, v.y);
    ymax = std::max(ymax, v.y);
  }
  std::vector<double> xs;
  for (int y = std::max(ymin, 0); y < std::min(ymax, height); ++y) {
    const double yc = y + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Pixel& a = poly[i];
      const Pixel& b = poly[(i + 1) % n];
      if ((a.y <= yc) == (b.y <= yc)) continue;
      xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / static_cast<double>(b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // centers x + 0.5 strictly inside (xs[k], xs[k+1])
      const int x0 = std::max(0, static_cast<int>(std::floor(xs[k] - 0.5)) + 1);
      const int x1 = std::min(width - 1, static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
      for (int x = x0; x <= x1; ++x) out.insert(x, y);
    }
  }
  return out;
}

PixelSet rasterize(const Region& region, int width, int height) {
  PixelSet out(width, height);
  for (const Polygon& poly : region.polygons) out = out.united(rasterize_polygon(poly, width, height));
  for (const Pixel& p : region.points) {
    if (!out.insert(p)) {
      throw DimensionError("region " + std::to_string(region.id) + " point (" +
                           std::to_string(p.x) + ", " + std::to_string(p.y) +
                           ") outside the image");
    }
  }
  return out;
}

Region region_from_pixels(int id, const PixelSet& pixels) {
  Region r;
  r.id = id;
  for (int y = 0; y < pixels.height(); ++y) {
    int x = 0;
    while (x < pixels.width()) {
      if (!pixels.contains(x, y)) {
        ++x;
        continue;
      }
      const int start = x;
      while (x < pixels.width() && pixels.contains(x, y)) ++x;
      r.polygons.push_back({{start, y}, {x, y}, {x, y + 1}, {start, y + 1}});
    }
  }
  return r;
}

std::vector<PixelSet> RegionAnnotation::rasterize(int width, int height) const {
  std::vector<PixelSet> out;
  out.reserve(regions.size());
  for (const Region& r : regions) out.push_back(annotation::rasterize(r, width, height));
  return out;
}

PixelSet RegionAnnotation::union_mask(int width, int height) const {
  PixelSet u(width, height);
  for (const PixelSet& s : rasterize(width, height)) u = u.united(s);
  return u;
}

AnnotationDoc empty_doc(ImageRef image, CannyParams canny) {
  AnnotationDoc doc;
  doc.edges.e_r = EdgeSet(image.width, image.height);
  doc.edges.e_s = EdgeSet(image.width, image.height);
  doc.edges.canny = canny;
  doc.image = std::move(image);
  return doc;
}

EdgeSet derive_shading_edges(const EdgeSet& canny, const PixelSet& region_union) {
  if (!canny.same_extent(region_union)) {
    throw DimensionError("canny set and regions are on different rasters");
  }
  return canny.intersected(region_union);
}

EdgeSet derive_shading_edges(const EdgeSet& canny, const RegionAnnotation& regions) {
  return derive_shading_edges(canny, regions.union_mask(canny.width(), canny.height()));
}

EdgeSet canny_for(const AnnotationDoc& doc, const Image& image) {
  return canny(to_luminance(image), doc.edges.canny);
}

void derive_edges(AnnotationDoc& doc, const Image& image) {
  doc.edges.e_s = derive_shading_edges(canny_for(doc, image), doc.regions);
}

namespace {

double segment_distance(Stroke::Point p, Stroke::Point a, Stroke::Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

}  // namespace

EdgeSet rasterize_scribbles(std::span<const Stroke> strokes, const EdgeSet& canny) {
  EdgeSet out(canny.width(), canny.height());
  for (const Stroke& s : strokes) {
    if (!(s.radius >= 0.5)) throw ParameterError("scribble radius must be at least 0.5 px");
  }
  const std::vector<Pixel> candidates = canny.pixels();
  for (const Stroke& s : strokes) {
    if (s.points.empty()) continue;
    for (const Pixel& px : candidates) {
      const Stroke::Point c{px.x + 0.5, px.y + 0.5};
      bool hit = false;
      if (s.points.size() == 1) {
        hit = segment_distance(c, s.points[0], s.points[0]) <= s.radius;
      }
      for (std::size_t i = 0; !hit && i + 1 < s.points.size(); ++i) {
        hit = segment_distance(c, s.points[i], s.points[i + 1]) <= s.radius;
      }
      if (hit) out.insert(px);
    }
  }
  return out;
}

namespace {

std::string join_nonempty(const std::string& a, const std::string& b, const char* sep) {
  if (a.empty()) return b;
  if (b.empty() || a == b) return a;
  return a + sep + b;
}

}  // namespace

AnnotationDoc merge_annotations(const AnnotationDoc& a, const AnnotationDoc& b) {
  if (!(a.image == b.image)) throw MergeConflictError("annotations reference different images");
  if (!(a.edges.canny == b.edges.canny)) {
    throw MergeConflictError("annotations use different Canny parameters");
  }
  const int w = a.image.width, h = a.image.height;
  const std::vector<PixelSet> ra = a.regions.rasterize(w, h);
  const std::vector<PixelSet> rb = b.regions.rasterize(w, h);
  PixelSet ua(w, h), ub(w, h);
  for (const auto& s : ra) ua = ua.united(s);
  for (const auto& s : rb) ub = ub.united(s);
  const PixelSet contested = ua.intersected(ub);

  AnnotationDoc out = empty_doc(a.image, a.edges.canny);
  out.schema_version = a.schema_version;
  out.annotator = join_nonempty(a.annotator, b.annotator, "+");
  out.notes = join_nonempty(a.notes, b.notes, "\n");

  int next_id = 1;
  auto take = [&](const std::vector<Region>& src, const std::vector<PixelSet>& raster) {
    for (std::size_t i = 0; i < src.size(); ++i) {
      const PixelSet kept = raster[i].subtracted(contested);
      if (kept.empty()) continue;
      if (kept.count() == raster[i].count()) {
        Region r = src[i];
        r.id = next_id++;
        out.regions.regions.push_back(std::move(r));
      } else {
        out.regions.regions.push_back(region_from_pixels(next_id++, kept));
      }
    }
  };
  take(a.regions.regions, ra);
  take(b.regions.regions, rb);

  const EdgeSet er_a = a.edges.e_r.width() == w ? a.edges.e_r : EdgeSet(w, h);
  const EdgeSet er_b = b.edges.e_r.width() == w ? b.edges.e_r : EdgeSet(w, h);
  out.edges.e_r = er_a.united(er_b);
  // Both e_s sets are E_Canny ∩ own regions on the same image, so their union
  // restricted to the merged regions is E_Canny ∩ merged regions.
  const EdgeSet es_a = a.edges.e_s.width() == w ? a.edges.e_s : EdgeSet(w, h);
  const EdgeSet es_b = b.edges.e_s.width() == w ? b.edges.e_s : EdgeSet(w, h);
  out.edges.e_s = es_a.united(es_b).intersected(out.regions.union_mask(w, h));
  return out;
}

std::vector<Violation> validate(const AnnotationDoc& doc, const Image& image,
                                std::string_view image_sha256) {
  std::vector<Violation> v;
  const int w = image.width(), h = image.height();
  if (doc.schema_version != kSchemaVersion) {
    v.push_back({"schema_version", "unsupported schema version " + doc.schema_version, {}, 0});
  }
  if (doc.image.width != w || doc.image.height != h) {
    v.push_back({"image_size",
                 "annotation is for " + std::to_string(doc.image.width) + "x" +
                     std::to_string(doc.image.height) + ", image is " + std::to_string(w) +
                     "x" + std::to_string(h),
                 {}, 0});
    return v;
  }
  if (!image_sha256.empty() && !doc.image.sha256.empty() && doc.image.sha256 != image_sha256) {
    v.push_back({"image_hash", "image content hash does not match annotation", {}, 0});
  }
  if (!(doc.edges.canny.low > 0.0 && doc.edges.canny.low < doc.edges.canny.high)) {
    v.push_back({"canny_params", "canny thresholds must satisfy 0 < low < high", {}, 0});
    return v;
  }

  const int c = static_cast<int>(doc.regions.size());
  std::set<int> seen;
  for (const Region& r : doc.regions.regions) {
    if (!seen.insert(r.id).second) {
      v.push_back({"duplicate_region_id", "region id " + std::to_string(r.id) + " used twice", {}, r.id});
    } else if (r.id < 1 || r.id > c) {
      v.push_back({"region_id_range",
                   "region id " + std::to_string(r.id) + " outside 1.." + std::to_string(c), {}, r.id});
    }
  }

  std::vector<PixelSet> raster;
  raster.reserve(doc.regions.size());
  for (const Region& r : doc.regions.regions) {
    PixelSet s(w, h);
    for (const Polygon& poly : r.polygons) s = s.united(rasterize_polygon(poly, w, h));
    for (const Pixel& p : r.points) {
      if (!s.insert(p)) {
        v.push_back({"region_out_of_bounds", "region point outside the image", p, r.id});
      }
    }
    if (s.empty()) v.push_back({"empty_region", "region covers no pixels", {}, r.id});
    raster.push_back(std::move(s));
  }
  PixelSet regions_union(w, h);
  for (std::size_t i = 0; i < raster.size(); ++i) {
    const std::size_t overlap = regions_union.intersected(raster[i]).count();
    if (overlap > 0) {
      v.push_back({"region_overlap",
                   "region " + std::to_string(doc.regions.regions[i].id) + " shares " +
                       std::to_string(overlap) + " pixels with earlier regions",
                   {}, doc.regions.regions[i].id});
    }
    regions_union = regions_union.united(raster[i]);
  }

  const EdgeSet& er = doc.edges.e_r;
  const EdgeSet& es = doc.edges.e_s;
  if (!er.empty() && !(er.width() == w && er.height() == h)) {
    v.push_back({"edge_raster", "e_r raster size does not match the image", {}, 0});
    return v;
  }
  const EdgeSet cn = canny_for(doc, image);
  for (const Pixel& p : er.pixels()) {
    if (!cn.contains(p)) v.push_back({"e_r_not_canny", "reflectance edge pixel is not a Canny edge", p, 0});
    if (regions_union.contains(p)) {
      v.push_back({"e_r_in_region", "reflectance edge pixel lies inside a constant-reflectance region", p, 0});
    }
  }
  if (!es.empty() && es.width() == w && es.height() == h) {
    for (const Pixel& p : es.pixels()) {
      if (!cn.contains(p)) v.push_back({"e_s_not_canny", "shading edge pixel is not a Canny edge", p, 0});
      if (er.contains(p)) v.push_back({"e_r_e_s_overlap", "pixel labeled as both edge kinds", p, 0});
    }
  }
  return v;
}

}  // namespace intrinsic::annotation
