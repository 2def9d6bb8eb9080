#include <string>

#include "intrinsic/annotation.hpp"
#include "intrinsic/error.hpp"
#include "json.hpp"

namespace intrinsic::annotation {

using ojson = nlohmann::ordered_json;

namespace {

ojson pixel_json(const Pixel& p) { return ojson::array({p.x, p.y}); }

const ojson& member(const ojson& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ParseError("expected object", path.empty() ? "/" : path);
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing key '") + key + "'", path.empty() ? "/" : path);
  return *it;
}

int as_int(const ojson& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError("expected integer", path);
  return j.get<int>();
}

double as_double(const ojson& j, const std::string& path) {
  if (!j.is_number()) throw ParseError("expected number", path);
  return j.get<double>();
}

std::string as_string(const ojson& j, const std::string& path) {
  if (!j.is_string()) throw ParseError("expected string", path);
  return j.get<std::string>();
}

const ojson& as_array(const ojson& j, const std::string& path) {
  if (!j.is_array()) throw ParseError("expected array", path);
  return j;
}

Pixel as_pixel(const ojson& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw ParseError("expected [x, y]", path);
  return {as_int(j[0], path + "/0"), as_int(j[1], path + "/1")};
}

}  // namespace

std::string serialize(const AnnotationDoc& doc) {
  ojson j;
  j["schema_version"] = doc.schema_version;
  j["image"] = {{"file", doc.image.file},
                {"width", doc.image.width},
                {"height", doc.image.height},
                {"sha256", doc.image.sha256}};
  j["canny"] = {{"sigma", doc.edges.canny.sigma},
                {"low", doc.edges.canny.low},
                {"high", doc.edges.canny.high}};
  ojson regions = ojson::array();
  for (const Region& r : doc.regions.regions) {
    ojson polys = ojson::array();
    for (const Polygon& poly : r.polygons) {
      ojson verts = ojson::array();
      for (const Pixel& v : poly) verts.push_back(pixel_json(v));
      polys.push_back(std::move(verts));
    }
    ojson pts = ojson::array();
    for (const Pixel& p : r.points) pts.push_back(pixel_json(p));
    ojson jr;
    jr["id"] = r.id;
    jr["polygons"] = std::move(polys);
    jr["points"] = std::move(pts);
    regions.push_back(std::move(jr));
  }
  j["regions"] = std::move(regions);
  ojson er = ojson::array();
  for (const Pixel& p : doc.edges.e_r.pixels()) er.push_back(pixel_json(p));
  j["edges_r"] = std::move(er);
  j["annotator"] = doc.annotator;
  j["notes"] = doc.notes;
  return j.dump();
}

AnnotationDoc parse(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), "byte " + std::to_string(e.byte));
  }

  AnnotationDoc doc;
  doc.schema_version = as_string(member(j, "schema_version", ""), "/schema_version");
  if (doc.schema_version != kSchemaVersion) {
    throw ParseError("unknown schema_version '" + doc.schema_version + "'", "/schema_version");
  }
  const ojson& img = member(j, "image", "");
  doc.image.file = as_string(member(img, "file", "/image"), "/image/file");
  doc.image.width = as_int(member(img, "width", "/image"), "/image/width");
  doc.image.height = as_int(member(img, "height", "/image"), "/image/height");
  doc.image.sha256 = as_string(member(img, "sha256", "/image"), "/image/sha256");
  if (doc.image.width < 0 || doc.image.height < 0) throw ParseError("negative image size", "/image");

  const ojson& cn = member(j, "canny", "");
  doc.edges.canny.sigma = as_double(member(cn, "sigma", "/canny"), "/canny/sigma");
  doc.edges.canny.low = as_double(member(cn, "low", "/canny"), "/canny/low");
  doc.edges.canny.high = as_double(member(cn, "high", "/canny"), "/canny/high");

  const ojson& regions = as_array(member(j, "regions", ""), "/regions");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::string rp = "/regions/" + std::to_string(i);
    Region r;
    r.id = as_int(member(regions[i], "id", rp), rp + "/id");
    const ojson& polys = as_array(member(regions[i], "polygons", rp), rp + "/polygons");
    for (std::size_t k = 0; k < polys.size(); ++k) {
      const std::string pp = rp + "/polygons/" + std::to_string(k);
      Polygon poly;
      const ojson& verts = as_array(polys[k], pp);
      for (std::size_t m = 0; m < verts.size(); ++m) {
        poly.push_back(as_pixel(verts[m], pp + "/" + std::to_string(m)));
      }
      r.polygons.push_back(std::move(poly));
    }
    const ojson& pts = as_array(member(regions[i], "points", rp), rp + "/points");
    for (std::size_t k = 0; k < pts.size(); ++k) {
      r.points.push_back(as_pixel(pts[k], rp + "/points/" + std::to_string(k)));
    }
    doc.regions.regions.push_back(std::move(r));
  }

  doc.edges.e_r = EdgeSet(doc.image.width, doc.image.height);
  doc.edges.e_s = EdgeSet(doc.image.width, doc.image.height);
  const ojson& er = as_array(member(j, "edges_r", ""), "/edges_r");
  for (std::size_t k = 0; k < er.size(); ++k) {
    const std::string ep = "/edges_r/" + std::to_string(k);
    if (!doc.edges.e_r.insert(as_pixel(er[k], ep))) throw ParseError("edge pixel outside image", ep);
  }
  doc.annotator = as_string(member(j, "annotator", ""), "/annotator");
  doc.notes = as_string(member(j, "notes", ""), "/notes");
  return doc;
}

}  // namespace intrinsic::annotation
