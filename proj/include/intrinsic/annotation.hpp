#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intrinsic/canny.hpp"
#include "intrinsic/image.hpp"

namespace intrinsic::annotation {

inline constexpr std::string_view kSchemaVersion = "1";

/// Closed vertex loop in pixel-corner coordinates: pixel (x, y) covers
/// [x, x+1) x [y, y+1). The closing edge back to the first vertex is implied.
using Polygon = std::vector<Pixel>;

/// One constant-reflectance region R_c.
struct Region {
  int id = 0;
  std::vector<Polygon> polygons;
  std::vector<Pixel> points;
  friend bool operator==(const Region&, const Region&) = default;
};

/// Pixels whose centers fall inside the polygon by the even-odd rule.
/// Parts outside the raster are clipped.
PixelSet rasterize_polygon(const Polygon& poly, int width, int height);

/// Union of the region's polygon fills and its points. Points outside the
/// raster throw DimensionError.
PixelSet rasterize(const Region& region, int width, int height);

/// Region covering exactly `pixels`, expressed as one rectangle polygon per
/// horizontal run.
Region region_from_pixels(int id, const PixelSet& pixels);

struct RegionAnnotation {
  std::vector<Region> regions;

  std::size_t size() const noexcept { return regions.size(); }
  bool empty() const noexcept { return regions.empty(); }
  /// Rasterized pixel set per region, in order.
  std::vector<PixelSet> rasterize(int width, int height) const;
  /// Union of all rasterized regions.
  PixelSet union_mask(int width, int height) const;

  friend bool operator==(const RegionAnnotation&, const RegionAnnotation&) = default;
};

struct EdgeAnnotation {
  EdgeSet e_r;
  /// Derived as E_Canny ∩ regions; never serialized, empty after parse until
  /// recomputed with `derive_edges`.
  EdgeSet e_s;
  CannyParams canny;
  friend bool operator==(const EdgeAnnotation&, const EdgeAnnotation&) = default;
};

struct ImageRef {
  std::string file;
  int width = 0;
  int height = 0;
  /// Hex SHA-256 of the referenced image file; empty when unknown.
  std::string sha256;
  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct AnnotationDoc {
  std::string schema_version{kSchemaVersion};
  ImageRef image;
  RegionAnnotation regions;
  EdgeAnnotation edges;
  std::string annotator;
  std::string notes;
  friend bool operator==(const AnnotationDoc&, const AnnotationDoc&) = default;
};

/// Empty document (no regions, no edges) for an image of the given size.
AnnotationDoc empty_doc(ImageRef image, CannyParams canny = {});

/// E_S = canny ∩ union(regions).
EdgeSet derive_shading_edges(const EdgeSet& canny, const RegionAnnotation& regions);
EdgeSet derive_shading_edges(const EdgeSet& canny, const PixelSet& region_union);

/// Canny set of the image under the document's parameters.
EdgeSet canny_for(const AnnotationDoc& doc, const Image& image);

/// Recomputes doc.edges.e_s against the image.
void derive_edges(AnnotationDoc& doc, const Image& image);

struct Stroke {
  struct Point {
    double x = 0.0;
    double y = 0.0;
  };
  /// Polyline in continuous pixel coordinates (pixel (x, y) has its center at
  /// (x + 0.5, y + 0.5)). A single vertex is a dab.
  std::vector<Point> points;
  double radius = 2.0;
};

/// Canny pixels whose centers lie within `radius` of any stroke segment.
/// Throws ParameterError for radius < 0.5.
EdgeSet rasterize_scribbles(std::span<const Stroke> strokes, const EdgeSet& canny);

/// Combines two annotators' passes over the same image: e_r by union, regions
/// concatenated and renumbered (a's first), pixels claimed by regions of both
/// documents removed from both, and e_s recomputed on the merged regions.
/// Regions that lose pixels are re-expressed as run polygons; regions left
/// empty are dropped. Throws MergeConflictError on differing image refs or
/// Canny parameters.
AnnotationDoc merge_annotations(const AnnotationDoc& a, const AnnotationDoc& b);

struct Violation {
  std::string code;
  std::string message;
  std::optional<Pixel> pixel;
  int region_id = 0;
};

/// Empty iff the document is consistent with the image: dimensions (and hash,
/// when `image_sha256` is given and the doc carries one), unique region ids in
/// 1..C, in-bounds disjoint regions, e_r and e_s within the recomputed Canny
/// set, e_r disjoint from e_s, and no e_r pixel inside a region.
std::vector<Violation> validate(const AnnotationDoc& doc, const Image& image,
                                std::string_view image_sha256 = {});

/// Canonical JSON, keys in schema order, coordinates as integers.
std::string serialize(const AnnotationDoc& doc);
/// Throws ParseError (with byte offset or JSON pointer) on malformed input or
/// an unknown schema version. The returned doc has an empty e_s.
AnnotationDoc parse(std::string_view json);

}  // namespace intrinsic::annotation
