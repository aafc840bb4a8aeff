#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dnp/detector.hpp"
#include "dnp/geometry.hpp"
#include "dnp/image.hpp"

namespace dnp {

/// Model-convolution counts for one image: dense extraction runs the net
/// once per crop of the tiling plan, the per-region baseline once per
/// resized proposal.
struct BenchReport {
  int image_width = 0;
  int image_height = 0;
  int layer = 0;
  int proposals = 0;
  int dense = 0;
  int per_region = 0;
  double ratio = 0.0;
  // Wall-clock seconds on this machine; informational only.
  std::optional<double> dense_seconds;
  std::optional<double> per_region_seconds;
};

BenchReport bench_convolutions(int width, int height, int proposals, const NetSpec& net,
                               int layer, TilingMode mode = TilingMode::covering);

/// Times one dense extraction of a noise image, and `samples` single-crop
/// forwards scaled up to the proposal count.
void time_bench(BenchReport& report, const NetSpec& net, const WeightSet& weights,
                TilingMode mode = TilingMode::covering, int samples = 3);

void print_bench(std::ostream& out, const BenchReport& r);
void print_bench_csv(std::ostream& out, const std::vector<BenchReport>& reports);

struct DimCount {
  Family family;
  int dim = 0;
  int count = 0;
};

struct Patch {
  std::string image_id;
  int center_x = 0;
  int center_y = 0;
  double value = 0.0;
  Image pixels;  // side x side, zero outside the source image
};

struct PatternReport {
  std::vector<DimCount> histogram;  // descending count, ties by (family, dim)
  std::vector<Patch> patches;       // descending value
  int side = 0;
};

struct PatternSource {
  std::string image_id;
  const Image* image = nullptr;
  const FeatureSet* features = nullptr;
};

/// Counts the DNP dimensions picked by the cascade's weak classifiers, then
/// ranks every grid point of the most frequent one across `sources` and
/// cuts receptive-field-sized patches around the top `k`.
PatternReport visualize_top_patterns(const Cascade& cascade, const NetSpec& net,
                                     const std::vector<PatternSource>& sources, int k);

/// Writes `patch_NNN.ppm` files plus `index.tsv` and `histogram.tsv`.
void write_pattern_report(const std::string& dir, const PatternReport& report);

/// Calls fn(i) for i in [0, n) from `workers` threads pulling from a shared
/// counter. The first exception is rethrown after all workers stop.
void for_each_index(int n, int workers, const std::function<void(int)>& fn);

}  // namespace dnp
