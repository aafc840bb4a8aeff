#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "dnp/cnn.hpp"
#include "dnp/geometry.hpp"
#include "dnp/image.hpp"

namespace dnp {

/// Regular lattice of D-dimensional feature vectors in image pixel
/// coordinates. Point (u, v) sits at (origin_x + u*stride, origin_y + v*stride).
struct FeatureGrid {
  int origin_x = 0;
  int origin_y = 0;
  int stride = 1;
  int cols = 0;
  int rows = 0;
  int dim = 0;
  /// dim x (cols*rows); column v*cols + u holds point (u, v).
  Eigen::MatrixXf data;

  FeatureGrid() = default;
  FeatureGrid(int ox, int oy, int s, int c, int r, int d)
      : origin_x(ox), origin_y(oy), stride(s), cols(c), rows(r), dim(d),
        data(Eigen::MatrixXf::Zero(d, static_cast<Eigen::Index>(c) * r)) {}

  Eigen::Index index(int u, int v) const { return static_cast<Eigen::Index>(v) * cols + u; }
  auto point(int u, int v) { return data.col(index(u, v)); }
  auto point(int u, int v) const { return data.col(index(u, v)); }
  int x(int u) const { return origin_x + u * stride; }
  int y(int v) const { return origin_y + v * stride; }
  bool empty() const { return cols == 0 || rows == 0; }
};

bool bitwise_equal(const FeatureGrid& a, const FeatureGrid& b);

enum class TilingMode {
  /// The point lattice covers the whole image; crops may overhang the
  /// border and read zeros there.
  covering,
  /// Crops stay inside the image; the last crop per axis is clamped to
  /// the border and contributes only points not covered yet.
  clamped,
};

/// One network evaluation: crop origin in image pixels, the run of map cells
/// kept along each axis, and where the first kept cell lands in the grid.
struct CropPlacement {
  int x = 0;
  int y = 0;
  CellRange cols;
  CellRange rows;
  int grid_u = 0;
  int grid_v = 0;
};

struct TilingPlan {
  int layer = 0;
  int span = 0;        // retained cells per full crop, per axis
  int shift = 0;       // span * layer stride
  int crops_x = 0;
  int crops_y = 0;
  int origin_x = 0;    // pixel coordinate of grid point (0, 0)
  int origin_y = 0;
  int stride = 0;
  int cols = 0;
  int rows = 0;
  std::vector<CropPlacement> crops;

  int crop_count() const { return static_cast<int>(crops.size()); }
};

TilingPlan plan_tiling(int image_w, int image_h, const NetSpec& net, int layer,
                       TilingMode mode = TilingMode::covering);

/// Features of the retained block of one crop whose top-left corner is at
/// (crop_x, crop_y) in `image`; pixels outside the image read as zero.
FeatureGrid extract_crop_features(const NetSpec& net, const WeightSet& weights,
                                  const Tensor& image, int crop_x, int crop_y, int layer);

FeatureGrid network_convolution(const NetSpec& net, const WeightSet& weights,
                                const Tensor& image, int layer,
                                TilingMode mode = TilingMode::covering);

/// Throws std::out_of_range for coordinates off the lattice.
Eigen::VectorXf feature_vector_at(const FeatureGrid& grid, int x, int y);

/// Unnormalized 9-bin orientation histograms of 8x8 cells, 9 x (cells_x*cells_y).
Eigen::MatrixXf hog_cell_histograms(const Image& image, int* cells_x = nullptr,
                                    int* cells_y = nullptr);

/// HOG: 8x8 cells, 9 unsigned bins, 2x2-cell blocks with clipped L2
/// normalization. One 36-d point per block, stride 8.
FeatureGrid hog_extract(const Image& image);

/// Grid file: "DNPG", version, origin (2 x i32), stride (i32),
/// cols/rows/D (u32), f32 data point-major.
void save_grid(const std::string& path, const FeatureGrid& grid);
FeatureGrid load_grid(const std::string& path);

}  // namespace dnp
