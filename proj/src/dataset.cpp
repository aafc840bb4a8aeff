#include "dnp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace dnp {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<const ManifestEntry*> DatasetManifest::split(const std::string& name) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (name.empty() || e.split == name) out.push_back(&e);
  return out;
}

std::string DatasetManifest::image_path(const ManifestEntry& e) const {
  return (fs::path(root) / e.image).string();
}

std::string to_json_line(const ManifestEntry& entry) {
  json boxes = json::array();
  for (const auto& a : entry.gt.boxes)
    boxes.push_back({{"l", a.box.left},
                     {"t", a.box.top},
                     {"r", a.box.right},
                     {"b", a.box.bottom},
                     {"label", a.label},
                     {"difficult", a.difficult}});
  const json j = {{"id", entry.gt.image_id}, {"width", entry.gt.width},
                  {"height", entry.gt.height}, {"image", entry.image},
                  {"split", entry.split},      {"boxes", boxes}};
  return j.dump();
}

ManifestEntry parse_json_line(const std::string& line) {
  const json j = json::parse(line);
  ManifestEntry e;
  e.gt.image_id = j.at("id").get<std::string>();
  e.gt.width = j.at("width").get<int>();
  e.gt.height = j.at("height").get<int>();
  e.image = j.value("image", e.gt.image_id + ".ppm");
  e.split = j.value("split", "");
  for (const auto& b : j.at("boxes")) {
    Annotation a;
    a.box = {b.at("l").get<double>(), b.at("t").get<double>(), b.at("r").get<double>(),
             b.at("b").get<double>()};
    a.label = b.value("label", "target");
    a.difficult = b.value("difficult", false);
    if (a.box.left < 0 || a.box.top < 0 || a.box.right > e.gt.width ||
        a.box.bottom > e.gt.height || !(a.box.width() > 0) || !(a.box.height() > 0))
      throw std::invalid_argument("annotation for '" + e.gt.image_id + "' outside image bounds");
    e.gt.boxes.push_back(a);
  }
  return e;
}

void save_manifest(const DatasetManifest& manifest) {
  fs::create_directories(manifest.root);
  std::ofstream out(fs::path(manifest.root) / "annotations.jsonl");
  if (!out) throw std::runtime_error("cannot write manifest under '" + manifest.root + "'");
  for (const auto& e : manifest.entries) out << to_json_line(e) << '\n';
}

DatasetManifest load_manifest(const std::string& root) {
  const fs::path path = fs::path(root) / "annotations.jsonl";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest '" + path.string() + "'");
  DatasetManifest m;
  m.root = root;
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ManifestEntry e = parse_json_line(line);
    if (!ids.insert(e.gt.image_id).second)
      throw std::invalid_argument("duplicate image id '" + e.gt.image_id + "'");
    if (!fs::exists(fs::path(root) / e.image))
      throw std::runtime_error("manifest references missing file '" + e.image + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

// --- synthetic data ------------------------------------------------------------------

bool ellipse_contains(const SynthShape& s, int x, int y) {
  const double dx = (x + 0.5 - s.cx) / s.rx, dy = (y + 0.5 - s.cy) / s.ry;
  return dx * dx + dy * dy <= 1.0;
}

namespace {

bool triangle_contains(const SynthShape& s, int x, int y) {
  const double px = x + 0.5, py = y + 0.5;
  double sign = 0;
  for (int k = 0; k < 3; ++k) {
    const int n = (k + 1) % 3;
    const double cross = (s.vx[n] - s.vx[k]) * (py - s.vy[k]) - (s.vy[n] - s.vy[k]) * (px - s.vx[k]);
    if (cross != 0) {
      if (sign != 0 && (cross > 0) != (sign > 0)) return false;
      sign = cross;
    }
  }
  return true;
}

bool shape_contains(const SynthShape& s, int x, int y) {
  switch (s.kind) {
    case ShapeKind::ellipse: return ellipse_contains(s, x, y);
    case ShapeKind::rectangle: return x >= s.x0 && x < s.x1 && y >= s.y0 && y < s.y1;
    case ShapeKind::triangle: return triangle_contains(s, x, y);
  }
  return false;
}

struct Box {
  int x0, y0, x1, y1;
  bool overlaps(const Box& o, int margin) const {
    return x0 - margin < o.x1 && o.x0 - margin < x1 && y0 - margin < o.y1 && o.y0 - margin < y1;
  }
};

SyntheticImage render_one(std::uint64_t seed, int index, const SynthSpec& spec,
                          int forced_targets) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto unr = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const int w = spec.width, h = spec.height;
  SyntheticImage out;
  std::ostringstream id;
  id << "img" << std::setw(6) << std::setfill('0') << index;
  out.gt.image_id = id.str();
  out.gt.width = w;
  out.gt.height = h;

  // Place boxes first: targets never overlap anything else.
  std::vector<Box> placed;
  auto place = [&](int margin) -> std::optional<Box> {
    const int max_side = std::min({spec.max_size, w, h});
    for (int attempt = 0; attempt < 200; ++attempt) {
      const int bw = uni(spec.min_size, max_side), bh = uni(spec.min_size, max_side);
      const Box b{uni(0, w - bw), uni(0, h - bh), 0, 0};
      const Box box{b.x0, b.y0, b.x0 + bw, b.y0 + bh};
      if (std::none_of(placed.begin(), placed.end(),
                       [&](const Box& o) { return box.overlaps(o, margin); })) {
        placed.push_back(box);
        return box;
      }
    }
    return std::nullopt;
  };

  const int n_targets = forced_targets >= 0 ? forced_targets : uni(spec.min_targets, spec.max_targets);
  std::vector<SynthShape> targets;
  for (int k = 0; k < n_targets; ++k) {
    const auto box = place(4);
    if (!box) break;
    SynthShape s;
    s.kind = ShapeKind::ellipse;
    s.target = true;
    s.cx = (box->x0 + box->x1) / 2.0;
    s.cy = (box->y0 + box->y1) / 2.0;
    s.rx = (box->x1 - box->x0) / 2.0;
    s.ry = (box->y1 - box->y0) / 2.0;
    targets.push_back(s);
  }
  const int n_distractors = uni(0, spec.max_distractors);
  for (int k = 0; k < n_distractors; ++k) {
    const auto box = place(2);
    if (!box) break;
    SynthShape s;
    s.kind = uni(0, 1) == 0 ? ShapeKind::rectangle : ShapeKind::triangle;
    s.x0 = box->x0, s.y0 = box->y0, s.x1 = box->x1, s.y1 = box->y1;
    if (s.kind == ShapeKind::triangle) {
      // Apex on the top edge, base along the bottom edge.
      s.vx[0] = unr(box->x0, box->x1), s.vy[0] = box->y0;
      s.vx[1] = box->x0, s.vy[1] = box->y1;
      s.vx[2] = box->x1, s.vy[2] = box->y1;
    }
    out.shapes.push_back(s);
  }
  out.shapes.insert(out.shapes.end(), targets.begin(), targets.end());

  // Background: per-channel base level, a low-frequency wave and pixel noise.
  out.image = Image(w, h, 3);
  double base[3], amp[3], phase[3];
  for (int c = 0; c < 3; ++c) base[c] = unr(70, 180), amp[c] = unr(5, 25), phase[c] = unr(0, 6.283);
  const double fx = unr(0.02, 0.12), fy = unr(0.02, 0.12);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = base[c] + amp[c] * std::sin(fx * x + fy * y + phase[c]) + unr(-22, 22);
        out.image.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }

  for (const auto& s : out.shapes) {
    double fill[3];
    for (double& f : fill) f = unr(0, 255);
    const int bx0 = s.kind == ShapeKind::ellipse ? static_cast<int>(std::floor(s.cx - s.rx)) : s.x0;
    const int by0 = s.kind == ShapeKind::ellipse ? static_cast<int>(std::floor(s.cy - s.ry)) : s.y0;
    const int bx1 = s.kind == ShapeKind::ellipse ? static_cast<int>(std::ceil(s.cx + s.rx)) : s.x1;
    const int by1 = s.kind == ShapeKind::ellipse ? static_cast<int>(std::ceil(s.cy + s.ry)) : s.y1;
    int mx0 = w, my0 = h, mx1 = -1, my1 = -1;
    for (int y = std::max(by0, 0); y < std::min(by1, h); ++y)
      for (int x = std::max(bx0, 0); x < std::min(bx1, w); ++x) {
        if (!shape_contains(s, x, y)) continue;
        for (int c = 0; c < 3; ++c)
          out.image.at(x, y, c) =
              static_cast<std::uint8_t>(std::clamp(std::lround(fill[c] + unr(-10, 10)), 0L, 255L));
        mx0 = std::min(mx0, x), my0 = std::min(my0, y);
        mx1 = std::max(mx1, x), my1 = std::max(my1, y);
      }
    if (s.target && mx1 >= 0)
      out.gt.boxes.push_back(
          {{double(mx0), double(my0), double(mx1 + 1), double(my1 + 1)}, "target", false});
  }
  return out;
}

}  // namespace

std::vector<SyntheticImage> synthesize(std::uint64_t seed, int count, const SynthSpec& spec,
                                       int first_index, int forced_targets) {
  if (count < 1) throw std::invalid_argument("synthesize: count must be >= 1");
  if (spec.min_size < 4 || spec.min_size > spec.max_size)
    throw std::invalid_argument("synthesize: bad shape size range");
  std::vector<SyntheticImage> images;
  for (int k = 0; k < count; ++k)
    images.push_back(render_one(seed, first_index + k, spec, forced_targets));
  return images;
}

DatasetManifest generate_synthetic(std::uint64_t seed, int n_train, int n_test,
                                   const SynthSpec& spec, const std::string& root) {
  DatasetManifest m;
  m.root = root;
  fs::create_directories(fs::path(root) / "images");
  const auto images = synthesize(seed, n_train + n_test, spec);
  for (int k = 0; k < n_train + n_test; ++k) {
    const auto& s = images[k];
    ManifestEntry e;
    e.gt = s.gt;
    e.split = k < n_train ? "train" : "test";
    e.image = "images/" + s.gt.image_id + ".ppm";
    write_pnm(m.image_path(e), s.image);
    m.entries.push_back(std::move(e));
  }
  save_manifest(m);
  return m;
}

}  // namespace dnp
