#include "dnp/dense.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "binary_io.hpp"

namespace dnp {

bool bitwise_equal(const FeatureGrid& a, const FeatureGrid& b) {
  if (a.origin_x != b.origin_x || a.origin_y != b.origin_y || a.stride != b.stride ||
      a.cols != b.cols || a.rows != b.rows || a.dim != b.dim)
    return false;
  return std::equal(a.data.data(), a.data.data() + a.data.size(), b.data.data(),
                    [](float x, float y) {
                      return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
                    });
}

namespace {

struct AxisCrop {
  int origin = 0;
  CellRange cells;
  int grid_first = 0;
};

struct AxisPlan {
  int origin = 0;
  int count = 0;
  std::vector<AxisCrop> crops;
};

int floor_mod(int a, int m) { return ((a % m) + m) % m; }

/// Pixel center (exact convention) of the first retained cell at layer L.
int first_retained_center(const NetSpec& net, int layer, const CellRange& retained) {
  const Coord c = top_left_center(net, layer, Convention::exact) +
                  Coord(retained.first) * layer_stride(net, layer);
  if (c.denominator() != 1)
    throw std::invalid_argument("dense extraction needs integer feature centers at layer " +
                                std::to_string(layer));
  return static_cast<int>(c.numerator());
}

AxisPlan plan_axis(int size, int input, int center, int stride, const CellRange& retained,
                   TilingMode mode) {
  const int span = retained.size();
  AxisPlan plan;
  if (mode == TilingMode::covering) {
    plan.origin = floor_mod(center, stride);
    plan.count = size - 1 >= plan.origin ? (size - 1 - plan.origin) / stride + 1 : 0;
    for (int g = 0; g < plan.count; g += span) {
      const int n = std::min(span, plan.count - g);
      plan.crops.push_back({plan.origin + g * stride - center,
                            {retained.first, retained.first + n - 1}, g});
    }
  } else {
    const int padded = std::max(size, input);
    plan.origin = center;
    int covered = 0;
    for (int o = 0; o + input <= padded; o += span * stride) {
      plan.crops.push_back({o, retained, o / stride});
      covered = o / stride + span;
    }
    const int last_aligned = (padded - input) / stride * stride;
    if (last_aligned > plan.crops.back().origin) {
      const int g0 = last_aligned / stride;
      plan.crops.push_back({last_aligned, {retained.first + covered - g0, retained.last}, covered});
      covered = g0 + span;
    }
    const int inside = size - 1 >= center ? (size - 1 - center) / stride + 1 : 0;
    plan.count = std::min(covered, inside);
    std::erase_if(plan.crops, [&](const AxisCrop& c) { return c.grid_first >= plan.count; });
    for (auto& c : plan.crops)
      c.cells.last = std::min(c.cells.last, c.cells.first + plan.count - c.grid_first - 1);
  }
  if (plan.count == 0) throw std::invalid_argument("image too small to hold a feature point");
  return plan;
}

Tensor crop_tensor(const Tensor& image, int x0, int y0, int size) {
  Tensor crop(image.channels(), size, size);
  const int ya = std::max(0, -y0), yb = std::min(size, image.height() - y0);
  const int xa = std::max(0, -x0), xb = std::min(size, image.width() - x0);
  for (int c = 0; c < image.channels(); ++c)
    for (int y = ya; y < yb; ++y)
      for (int x = xa; x < xb; ++x) crop(c, y, x) = image(c, y0 + y, x0 + x);
  return crop;
}

CellRange checked_retained(const NetSpec& net, int layer) {
  const CellRange r = retained_range(net, layer);
  if (r.empty())
    throw std::invalid_argument("layer " + std::to_string(layer) +
                                " has no padding-free interior cells");
  return r;
}

}  // namespace

TilingPlan plan_tiling(int image_w, int image_h, const NetSpec& net, int layer,
                       TilingMode mode) {
  if (image_w < 1 || image_h < 1) throw std::invalid_argument("empty image");
  const CellRange retained = checked_retained(net, layer);
  const int stride = static_cast<int>(layer_stride(net, layer));
  const int center = first_retained_center(net, layer, retained);
  const AxisPlan px = plan_axis(image_w, net.input_size, center, stride, retained, mode);
  const AxisPlan py = plan_axis(image_h, net.input_size, center, stride, retained, mode);

  TilingPlan plan;
  plan.layer = layer;
  plan.span = retained.size();
  plan.shift = plan.span * stride;
  plan.stride = stride;
  plan.origin_x = px.origin;
  plan.origin_y = py.origin;
  plan.cols = px.count;
  plan.rows = py.count;
  plan.crops_x = static_cast<int>(px.crops.size());
  plan.crops_y = static_cast<int>(py.crops.size());
  for (const auto& cy : py.crops)
    for (const auto& cx : px.crops)
      plan.crops.push_back({cx.origin, cy.origin, cx.cells, cy.cells, cx.grid_first,
                            cy.grid_first});
  return plan;
}

FeatureGrid extract_crop_features(const NetSpec& net, const WeightSet& weights,
                                  const Tensor& image, int crop_x, int crop_y, int layer) {
  const CellRange retained = checked_retained(net, layer);
  const int stride = static_cast<int>(layer_stride(net, layer));
  const int center = first_retained_center(net, layer, retained);
  const Tensor out = forward_to_layer(
      net, weights, crop_tensor(image, crop_x, crop_y, net.input_size), layer);
  const int span = retained.size();
  FeatureGrid grid(crop_x + center, crop_y + center, stride, span, span, out.channels());
  for (int v = 0; v < span; ++v)
    for (int u = 0; u < span; ++u)
      for (int d = 0; d < out.channels(); ++d)
        grid.data(d, grid.index(u, v)) = out(d, retained.first + v, retained.first + u);
  return grid;
}

FeatureGrid network_convolution(const NetSpec& net, const WeightSet& weights,
                                const Tensor& image, int layer, TilingMode mode) {
  const TilingPlan plan = plan_tiling(image.width(), image.height(), net, layer, mode);
  FeatureGrid grid(plan.origin_x, plan.origin_y, plan.stride, plan.cols, plan.rows,
                   output_channels(net, layer));
  std::vector<bool> filled(static_cast<std::size_t>(plan.cols) * plan.rows, false);
  for (const auto& crop : plan.crops) {
    const Tensor out =
        forward_to_layer(net, weights, crop_tensor(image, crop.x, crop.y, net.input_size), layer);
    for (int j = crop.rows.first; j <= crop.rows.last; ++j)
      for (int i = crop.cols.first; i <= crop.cols.last; ++i) {
        const int u = crop.grid_u + i - crop.cols.first;
        const int v = crop.grid_v + j - crop.rows.first;
        const Eigen::Index p = grid.index(u, v);
        if (filled[p]) continue;  // first writer wins
        filled[p] = true;
        for (int d = 0; d < grid.dim; ++d) grid.data(d, p) = out(d, j, i);
      }
  }
  if (std::find(filled.begin(), filled.end(), false) != filled.end())
    throw std::logic_error("network_convolution: tiling left grid points uncovered");
  return grid;
}

Eigen::VectorXf feature_vector_at(const FeatureGrid& grid, int x, int y) {
  const int dx = x - grid.origin_x, dy = y - grid.origin_y;
  if (dx < 0 || dy < 0 || dx % grid.stride != 0 || dy % grid.stride != 0 ||
      dx / grid.stride >= grid.cols || dy / grid.stride >= grid.rows)
    throw std::out_of_range("(" + std::to_string(x) + ", " + std::to_string(y) +
                            ") is not a grid point");
  return grid.point(dx / grid.stride, dy / grid.stride);
}

// --- HOG -----------------------------------------------------------------------

namespace {
constexpr int kCell = 8;
constexpr int kBins = 9;
constexpr float kClip = 0.2f;
constexpr float kEps = 1e-3f;

void l2_normalize(Eigen::Ref<Eigen::VectorXf> v) {
  v /= std::sqrt(v.squaredNorm() + kEps * kEps);
}
}  // namespace

Eigen::MatrixXf hog_cell_histograms(const Image& image, int* cells_x, int* cells_y) {
  const int w = image.width, h = image.height;
  const int cx = w / kCell, cy = h / kCell;
  if (cells_x) *cells_x = cx;
  if (cells_y) *cells_y = cy;
  // Channel sums keep gradients exact integer differences.
  std::vector<float> sum(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int s = 0;
      for (int c = 0; c < image.channels; ++c) s += image.at(x, y, c);
      sum[static_cast<std::size_t>(y) * w + x] = static_cast<float>(s);
    }
  auto at = [&](int x, int y) {
    return sum[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };
  const float scale = 1.0f / static_cast<float>(image.channels);
  Eigen::MatrixXf hist = Eigen::MatrixXf::Zero(kBins, static_cast<Eigen::Index>(cx) * cy);
  for (int y = 0; y < cy * kCell; ++y)
    for (int x = 0; x < cx * kCell; ++x) {
      const float gx = (at(x + 1, y) - at(x - 1, y)) * scale;
      const float gy = (at(x, y + 1) - at(x, y - 1)) * scale;
      const float mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0f) continue;
      double deg = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (deg < 0) deg += 180.0;
      if (deg >= 180.0) deg -= 180.0;
      const int bin = std::min(static_cast<int>(deg / 20.0), kBins - 1);
      hist(bin, static_cast<Eigen::Index>(y / kCell) * cx + x / kCell) += mag;
    }
  return hist;
}

FeatureGrid hog_extract(const Image& image) {
  int cx = 0, cy = 0;
  const Eigen::MatrixXf hist = hog_cell_histograms(image, &cx, &cy);
  const int bx = std::max(cx - 1, 0), by = std::max(cy - 1, 0);
  FeatureGrid grid(kCell, kCell, kCell, bx, by, 4 * kBins);
  for (int v = 0; v < by; ++v)
    for (int u = 0; u < bx; ++u) {
      Eigen::VectorXf block(4 * kBins);
      block << hist.col(static_cast<Eigen::Index>(v) * cx + u),
          hist.col(static_cast<Eigen::Index>(v) * cx + u + 1),
          hist.col(static_cast<Eigen::Index>(v + 1) * cx + u),
          hist.col(static_cast<Eigen::Index>(v + 1) * cx + u + 1);
      l2_normalize(block);
      block = block.cwiseMin(kClip);
      l2_normalize(block);
      grid.point(u, v) = block;
    }
  return grid;
}

void save_grid(const std::string& path, const FeatureGrid& grid) {
  detail::ByteWriter w;
  w.magic("DNPG");
  w.u32(1);
  w.i32(grid.origin_x);
  w.i32(grid.origin_y);
  w.i32(grid.stride);
  w.u32(grid.cols);
  w.u32(grid.rows);
  w.u32(grid.dim);
  for (Eigen::Index k = 0; k < grid.data.size(); ++k) w.f32(grid.data.data()[k]);
  detail::write_file(path, w.bytes());
}

FeatureGrid load_grid(const std::string& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, "grid file");
  if (!r.magic("DNPG")) throw BadMagicError("grid file: bad magic");
  if (r.u32() != 1) throw WeightFileError("grid file: unsupported version");
  const int ox = r.i32(), oy = r.i32(), s = r.i32();
  const int cols = static_cast<int>(r.u32()), rows = static_cast<int>(r.u32()),
            dim = static_cast<int>(r.u32());
  FeatureGrid grid(ox, oy, s, cols, rows, dim);
  r.need(4 * static_cast<std::size_t>(grid.data.size()));
  for (Eigen::Index k = 0; k < grid.data.size(); ++k) grid.data.data()[k] = r.f32();
  return grid;
}

}  // namespace dnp
