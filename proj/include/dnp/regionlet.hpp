#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dnp/dense.hpp"

namespace dnp {

/// Rectangle in coordinates normalized to a detection window, [0, 1]^2.
struct Rect {
  double left = 0, top = 0, right = 1, bottom = 1;
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Rectangle in image pixels. Width and height are right - left, bottom - top.
struct PixelRect {
  double left = 0, top = 0, right = 0, bottom = 0;
  double width() const { return right - left; }
  double height() const { return bottom - top; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Maps a window-normalized rect into pixels of `window`.
PixelRect to_pixels(const PixelRect& window, const Rect& r);

enum class FamilyKind { dnp, hog };

/// A dense feature family: DNPs of one network layer, or HOG.
struct Family {
  FamilyKind kind = FamilyKind::dnp;
  int layer = 0;  // only meaningful for dnp

  std::string name() const;
  static Family parse(const std::string& token);
  static Family hog() { return {FamilyKind::hog, 0}; }
  static Family dnp(int layer) { return {FamilyKind::dnp, layer}; }
  friend auto operator<=>(const Family&, const Family&) = default;
};

struct RegionletConfig {
  Family family;
  int dim = 0;
  Rect region;
  std::vector<Rect> regionlets;
  friend bool operator==(const RegionletConfig&, const RegionletConfig&) = default;
};

enum class Normalizer { l0, l1 };

/// Average of the grid vectors whose centers fall in `r` (half-open in both
/// axes) after mapping into `window`. Zero vector when no point is covered.
/// Throws std::invalid_argument for a rect with empty pixel area.
Eigen::VectorXd pool_regionlet(const FeatureGrid& grid, const PixelRect& window, const Rect& r);

/// v divided by its count of nonzero entries; zero maps to zero.
Eigen::VectorXd normalize_l0(const Eigen::VectorXd& v);
Eigen::VectorXd normalize_l1(const Eigen::VectorXd& v);
Eigen::VectorXd normalize(const Eigen::VectorXd& v, Normalizer n);

/// Grid index range [first, last) of lattice points x0 + k*stride with
/// lo <= coordinate < hi.
std::pair<int, int> covered_points(int origin, int stride, int count, double lo, double hi);

/// Dense grids of one image, keyed by family, with per-dimension integral
/// counts of nonzero entries so L0 normalization does not need the full
/// pooled vector.
class FeatureSet {
 public:
  void add(const Family& family, FeatureGrid grid);
  bool contains(const Family& family) const { return entries_.count(family) != 0; }
  const FeatureGrid& grid(const Family& family) const;
  std::vector<Family> families() const;

  /// Number of dimensions with at least one nonzero value among grid points
  /// [u0,u1) x [v0,v1). Only valid for grids with no negative entries.
  int nonzero_dims(const Family& family, int u0, int u1, int v0, int v1) const;
  bool nonnegative(const Family& family) const;

 private:
  struct Entry {
    FeatureGrid grid;
    bool nonnegative = true;
    std::vector<std::uint16_t> nonzero_integral;  // (rows+1) x (cols+1) x dim
  };
  const Entry& entry(const Family& family) const;
  std::map<Family, Entry> entries_;
};

/// Max over the config's regionlets of the normalized pooled value in
/// dimension `cfg.dim`.
double region_feature(const FeatureSet& features, const PixelRect& window,
                      const RegionletConfig& cfg, Normalizer normalizer = Normalizer::l0);

/// Reference evaluation through the full pooled vectors; region_feature
/// takes a shortcut for nonnegative grids that must agree with it exactly.
double region_feature_reference(const FeatureSet& features, const PixelRect& window,
                                const RegionletConfig& cfg,
                                Normalizer normalizer = Normalizer::l0);

struct FamilyDim {
  Family family;
  int dim = 0;
};

/// Uniform samples of the family x dimension x regionlet layout space.
/// Region corners lie on a 1/16 lattice of the window, regionlet corners on
/// a 1/16 lattice of their region.
std::vector<RegionletConfig> sample_configurations(std::uint64_t seed, int count,
                                                   const std::vector<FamilyDim>& families,
                                                   int k_max = 3);

/// `family dim R.l R.t R.r R.b K r1.l r1.t r1.r r1.b ...`, 6 decimals.
std::string format_config(const RegionletConfig& cfg);
RegionletConfig parse_config(const std::string& line);
void write_configs(std::ostream& out, const std::vector<RegionletConfig>& pool);
std::vector<RegionletConfig> read_configs(std::istream& in);

}  // namespace dnp
