#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <boost/rational.hpp>

namespace dnp {

enum class LayerKind { conv, pool, norm, relu };

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& token);

/// One layer of a convolutional stack. Window, stride and padding are in
/// cells of the layer's input map.
struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  int window = 1;
  int stride = 1;
  int padding = 0;
  int in_channels = 1;
  int out_channels = 1;
  /// Fixed span of centered cells kept by dense extraction at this layer.
  /// When unset the padding-free interior is used.
  std::optional<int> retain;

  bool geometry_active() const {
    return kind == LayerKind::conv || kind == LayerKind::pool;
  }
};

struct NetSpec {
  int input_size = 0;
  int input_channels = 0;
  std::vector<LayerSpec> layers;
};

/// Exact pixel coordinate. Centers of even windows are half-integers.
using Coord = boost::rational<std::int64_t>;

/// Pixel coordinate convention for feature centers.
///
/// `table` is 1-based and starts from x_1 = (W_1 + 1) / 2 without a
/// padding correction on the first layer; this is the convention of the
/// published layer table. `exact` is 0-based and padding-aware on every
/// layer, so a cell's center is the true middle of its receptive field.
enum class Convention { table, exact };

struct GeometryRow {
  int layer_index = 0;  // 1-based, geometry-active layers only
  LayerKind kind = LayerKind::conv;
  int window = 1;
  int stride = 1;
  int padding = 0;
  std::int64_t pixel_stride = 1;
  Coord top_left = 0;
  std::int64_t receptive_field = 1;
  int out_size = 1;
};

/// Closed-interval run of cells along one axis; empty when last < first.
struct CellRange {
  int first = 0;
  int last = -1;
  bool empty() const { return last < first; }
  int size() const { return empty() ? 0 : last - first + 1; }
  bool contains(int u) const { return u >= first && u <= last; }
};

struct Cell {
  int u = 0;
  int v = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Pixel box [left, right] x [top, bottom], inclusive, exact convention.
struct PixelBox {
  Coord left, top, right, bottom;
};

// --- NetSpec handling -------------------------------------------------------

/// Throws std::invalid_argument when channels do not chain, a geometry
/// neutral layer carries a window, or some layer output would be empty.
void validate(const NetSpec& net);

/// Text format: optional `#` comments, a header `input <size> <channels>`,
/// then one layer per line `kind W s P in out [retain=N]`.
NetSpec parse_netspec(std::istream& in);
NetSpec load_netspec(const std::string& path);
void write_netspec(std::ostream& out, const NetSpec& net);

NetSpec paper_net();
NetSpec tiny_net();

int active_layer_count(const NetSpec& net);
/// Position in net.layers of the i-th geometry-active layer (1-based i).
std::size_t layer_position(const NetSpec& net, int i);
/// Position one past the last neutral layer trailing active layer i.
std::size_t layer_end(const NetSpec& net, int i);

/// Output extent of every layer in net.layers for a square input.
std::vector<int> spatial_sizes(const NetSpec& net, int input);
int output_size(const NetSpec& net, int i);
/// Channel count produced by active layer i.
int output_channels(const NetSpec& net, int i);

// --- receptive-field arithmetic ----------------------------------------------

std::int64_t layer_stride(const NetSpec& net, int i);
Coord top_left_center(const NetSpec& net, int i,
                      Convention convention = Convention::table);
std::pair<Coord, Coord> feature_center(const NetSpec& net, int i, int u, int v,
                                       Convention convention = Convention::table);
std::int64_t receptive_field_extent(const NetSpec& net, int i);
std::vector<GeometryRow> geometry_table(const NetSpec& net,
                                        Convention convention = Convention::table);

PixelBox receptive_field_box(const NetSpec& net, int i, int u, int v);

/// Cells (along one axis) whose receptive field lies inside the unpadded
/// input. Identical for both axes.
CellRange interior_range(const NetSpec& net, int i);
std::vector<Cell> interior_cells(const NetSpec& net, int i);

/// Centered span of cells kept by dense extraction at layer i: the layer's
/// `retain` override when present, otherwise the interior range.
CellRange retained_range(const NetSpec& net, int i);

void print_table(std::ostream& out, const std::vector<GeometryRow>& rows);
void print_table_csv(std::ostream& out, const std::vector<GeometryRow>& rows);

std::string format_coord(const Coord& c);

}  // namespace dnp
