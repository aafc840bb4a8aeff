#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dnp/image.hpp"
#include "dnp/regionlet.hpp"

namespace dnp {

struct Annotation {
  PixelRect box;
  std::string label = "target";
  bool difficult = false;
};

struct GroundTruth {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Annotation> boxes;
};

struct ManifestEntry {
  std::string image;  // path relative to the manifest root
  std::string split;  // "train" or "test"
  GroundTruth gt;
};

/// A dataset directory: `annotations.jsonl` (one image per line) next to
/// the image files it references.
struct DatasetManifest {
  std::string root;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split(const std::string& name) const;
  std::string image_path(const ManifestEntry& e) const;
};

/// JSON-lines record `{"id", "width", "height", "image", "split",
/// "boxes": [{"l","t","r","b","label","difficult"}]}`.
std::string to_json_line(const ManifestEntry& entry);
ManifestEntry parse_json_line(const std::string& line);

void save_manifest(const DatasetManifest& manifest);
/// Checks that ids are unique and every referenced image exists.
DatasetManifest load_manifest(const std::string& root);

// --- synthetic data ------------------------------------------------------------------

struct SynthSpec {
  int width = 320;
  int height = 320;
  int min_targets = 1;
  int max_targets = 3;
  int max_distractors = 5;
  int min_size = 36;  // bounding-box side range for every shape
  int max_size = 88;
};

enum class ShapeKind { ellipse, rectangle, triangle };

/// Geometry of one rendered shape. Ellipses are axis-aligned with center
/// (cx, cy) and semi-axes (rx, ry); rectangles span [x0, x1) x [y0, y1);
/// triangles use the three vertices.
struct SynthShape {
  ShapeKind kind = ShapeKind::ellipse;
  bool target = false;
  double cx = 0, cy = 0, rx = 0, ry = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double vx[3] = {0, 0, 0};
  double vy[3] = {0, 0, 0};
};

/// Pixel (x, y) belongs to the ellipse when its center (x+0.5, y+0.5) does.
bool ellipse_contains(const SynthShape& s, int x, int y);

struct SyntheticImage {
  Image image;
  GroundTruth gt;
  std::vector<SynthShape> shapes;
};

/// Deterministic images of filled target ellipses among rectangle and
/// triangle distractors on a textured noise background. Image k depends
/// only on (seed, first_index + k). `forced_targets` >= 0 fixes the count.
std::vector<SyntheticImage> synthesize(std::uint64_t seed, int count, const SynthSpec& spec,
                                       int first_index = 0, int forced_targets = -1);

/// Writes `n_train + n_test` synthetic images and their manifest under
/// `root`, creating the directory.
DatasetManifest generate_synthetic(std::uint64_t seed, int n_train, int n_test,
                                   const SynthSpec& spec, const std::string& root);

}  // namespace dnp
