#include "dnp/geometry.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dnp {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::pool: return "pool";
    case LayerKind::norm: return "norm";
    case LayerKind::relu: return "relu";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& token) {
  if (token == "conv") return LayerKind::conv;
  if (token == "pool") return LayerKind::pool;
  if (token == "norm") return LayerKind::norm;
  if (token == "relu") return LayerKind::relu;
  throw std::invalid_argument("unknown layer kind '" + token + "'");
}

void validate(const NetSpec& net) {
  if (net.input_size < 1 || net.input_channels < 1)
    throw std::invalid_argument("netspec: input size and channels must be >= 1");
  int channels = net.input_channels;
  int size = net.input_size;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const LayerSpec& l = net.layers[k];
    const std::string where = "netspec layer " + std::to_string(k + 1) + ": ";
    if (l.window < 1 || l.stride < 1 || l.padding < 0)
      throw std::invalid_argument(where + "window/stride must be >= 1, padding >= 0");
    if (l.in_channels != channels)
      throw std::invalid_argument(where + "expects " + std::to_string(l.in_channels) +
                                  " input channels, producer gives " +
                                  std::to_string(channels));
    if (l.kind != LayerKind::conv && l.out_channels != l.in_channels)
      throw std::invalid_argument(where + to_string(l.kind) + " must preserve channels");
    if (!l.geometry_active() && (l.window != 1 || l.stride != 1 || l.padding != 0))
      throw std::invalid_argument(where + to_string(l.kind) + " must have W=1 s=1 P=0");
    if (l.geometry_active()) {
      const int out = (size + 2 * l.padding - l.window) / l.stride + 1;
      if (size + 2 * l.padding < l.window || out < 1)
        throw std::invalid_argument(where + "output extent would be empty");
      size = out;
    }
    if (l.retain && (*l.retain < 1 || *l.retain > size))
      throw std::invalid_argument(where + "retain span out of range");
    channels = l.out_channels;
  }
}

NetSpec parse_netspec(std::istream& in) {
  NetSpec net;
  bool have_header = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    const std::string where = "netspec line " + std::to_string(lineno) + ": ";
    if (kind == "input") {
      if (!(ls >> net.input_size >> net.input_channels))
        throw std::invalid_argument(where + "expected 'input <size> <channels>'");
      have_header = true;
      continue;
    }
    LayerSpec layer;
    layer.kind = parse_layer_kind(kind);
    if (!(ls >> layer.window >> layer.stride >> layer.padding >> layer.in_channels >>
          layer.out_channels))
      throw std::invalid_argument(where + "expected 'kind W s P in out'");
    std::string extra;
    while (ls >> extra) {
      if (extra.rfind("retain=", 0) == 0) {
        layer.retain = std::stoi(extra.substr(7));
      } else {
        throw std::invalid_argument(where + "unexpected token '" + extra + "'");
      }
    }
    net.layers.push_back(layer);
  }
  if (!have_header) throw std::invalid_argument("netspec: missing 'input' header");
  validate(net);
  return net;
}

NetSpec load_netspec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open netspec '" + path + "'");
  return parse_netspec(in);
}

void write_netspec(std::ostream& out, const NetSpec& net) {
  out << "input " << net.input_size << ' ' << net.input_channels << '\n';
  for (const auto& l : net.layers) {
    out << to_string(l.kind) << ' ' << l.window << ' ' << l.stride << ' ' << l.padding << ' '
        << l.in_channels << ' ' << l.out_channels;
    if (l.retain) out << " retain=" << *l.retain;
    out << '\n';
  }
}

namespace {

LayerSpec conv(int w, int s, int p, int in, int out) {
  return {LayerKind::conv, w, s, p, in, out, std::nullopt};
}
LayerSpec pool(int w, int s, int ch) { return {LayerKind::pool, w, s, 0, ch, ch, std::nullopt}; }
LayerSpec relu(int ch) { return {LayerKind::relu, 1, 1, 0, ch, ch, std::nullopt}; }
LayerSpec norm(int ch) { return {LayerKind::norm, 1, 1, 0, ch, ch, std::nullopt}; }

}  // namespace

NetSpec paper_net() {
  NetSpec net;
  net.input_size = 224;
  net.input_channels = 3;
  LayerSpec conv5 = conv(3, 1, 1, 384, 256);
  conv5.retain = 5;
  net.layers = {conv(11, 4, 1, 3, 96),   relu(96),  norm(96),  pool(3, 2, 96),
                conv(5, 1, 2, 96, 256),  relu(256), norm(256), pool(3, 2, 256),
                conv(3, 1, 1, 256, 384), relu(384), conv(3, 1, 1, 384, 384),
                relu(384),               conv5,     relu(256), pool(3, 2, 256)};
  validate(net);
  return net;
}

NetSpec tiny_net() {
  NetSpec net;
  net.input_size = 64;
  net.input_channels = 3;
  net.layers = {conv(3, 2, 0, 3, 8), relu(8),        norm(8),  pool(3, 2, 8),
                conv(3, 1, 1, 8, 16), relu(16),      pool(3, 2, 16),
                conv(3, 1, 0, 16, 32), relu(32)};
  validate(net);
  return net;
}

int active_layer_count(const NetSpec& net) {
  int n = 0;
  for (const auto& l : net.layers) n += l.geometry_active() ? 1 : 0;
  return n;
}

std::size_t layer_position(const NetSpec& net, int i) {
  if (i >= 1) {
    int seen = 0;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      if (net.layers[k].geometry_active() && ++seen == i) return k;
    }
  }
  throw std::out_of_range("layer index " + std::to_string(i) + " out of range 1.." +
                          std::to_string(active_layer_count(net)));
}

std::size_t layer_end(const NetSpec& net, int i) {
  std::size_t k = layer_position(net, i) + 1;
  while (k < net.layers.size() && !net.layers[k].geometry_active()) ++k;
  return k;
}

std::vector<int> spatial_sizes(const NetSpec& net, int input) {
  std::vector<int> sizes;
  sizes.reserve(net.layers.size());
  int size = input;
  for (const auto& l : net.layers) {
    if (l.geometry_active()) {
      if (size + 2 * l.padding < l.window)
        throw std::invalid_argument("input of " + std::to_string(input) +
                                    " px is too small for this net");
      size = (size + 2 * l.padding - l.window) / l.stride + 1;
    }
    sizes.push_back(size);
  }
  return sizes;
}

int output_size(const NetSpec& net, int i) {
  return spatial_sizes(net, net.input_size)[layer_position(net, i)];
}

int output_channels(const NetSpec& net, int i) {
  return net.layers[layer_position(net, i)].out_channels;
}

std::int64_t layer_stride(const NetSpec& net, int i) {
  layer_position(net, i);
  std::int64_t stride = 1;
  for (int j = 1; j <= i; ++j) stride *= net.layers[layer_position(net, j)].stride;
  return stride;
}

Coord top_left_center(const NetSpec& net, int i, Convention convention) {
  layer_position(net, i);
  const LayerSpec& first = net.layers[layer_position(net, 1)];
  Coord x = convention == Convention::table ? Coord(first.window + 1, 2)
                                            : Coord(first.window - 1, 2) - first.padding;
  std::int64_t stride = first.stride;
  for (int j = 2; j <= i; ++j) {
    const LayerSpec& l = net.layers[layer_position(net, j)];
    x += (Coord(l.window - 1, 2) - l.padding) * stride;
    stride *= l.stride;
  }
  return x;
}

std::pair<Coord, Coord> feature_center(const NetSpec& net, int i, int u, int v,
                                       Convention convention) {
  const int extent = output_size(net, i);
  if (u < 0 || v < 0 || u >= extent || v >= extent)
    throw std::out_of_range("cell (" + std::to_string(u) + ", " + std::to_string(v) +
                            ") outside layer extent " + std::to_string(extent));
  const Coord x0 = top_left_center(net, i, convention);
  const std::int64_t s = layer_stride(net, i);
  return {x0 + Coord(u) * s, x0 + Coord(v) * s};
}

std::int64_t receptive_field_extent(const NetSpec& net, int i) {
  layer_position(net, i);
  std::int64_t rf = 1;
  std::int64_t stride = 1;
  for (int j = 1; j <= i; ++j) {
    const LayerSpec& l = net.layers[layer_position(net, j)];
    rf += static_cast<std::int64_t>(l.window - 1) * stride;
    stride *= l.stride;
  }
  return rf;
}

std::vector<GeometryRow> geometry_table(const NetSpec& net, Convention convention) {
  std::vector<GeometryRow> rows;
  const int n = active_layer_count(net);
  const auto sizes = spatial_sizes(net, net.input_size);
  for (int i = 1; i <= n; ++i) {
    const std::size_t k = layer_position(net, i);
    const LayerSpec& l = net.layers[k];
    rows.push_back({i, l.kind, l.window, l.stride, l.padding, layer_stride(net, i),
                    top_left_center(net, i, convention), receptive_field_extent(net, i),
                    sizes[k]});
  }
  return rows;
}

PixelBox receptive_field_box(const NetSpec& net, int i, int u, int v) {
  const auto [cx, cy] = feature_center(net, i, u, v, Convention::exact);
  const Coord half(receptive_field_extent(net, i) - 1, 2);
  return {cx - half, cy - half, cx + half, cy + half};
}

CellRange interior_range(const NetSpec& net, int i) {
  const int extent = output_size(net, i);
  const Coord x0 = top_left_center(net, i, Convention::exact);
  const std::int64_t s = layer_stride(net, i);
  const Coord half(receptive_field_extent(net, i) - 1, 2);
  const Coord last_pixel(net.input_size - 1);
  CellRange range;
  for (int u = 0; u < extent; ++u) {
    const Coord c = x0 + Coord(u) * s;
    if (c - half >= 0 && c + half <= last_pixel) {
      if (range.empty()) range.first = u;
      range.last = u;
    }
  }
  if (range.empty()) return CellRange{};
  return range;
}

std::vector<Cell> interior_cells(const NetSpec& net, int i) {
  const CellRange r = interior_range(net, i);
  std::vector<Cell> cells;
  for (int v = r.first; v <= r.last; ++v)
    for (int u = r.first; u <= r.last; ++u) cells.push_back({u, v});
  return cells;
}

CellRange retained_range(const NetSpec& net, int i) {
  const LayerSpec& l = net.layers[layer_position(net, i)];
  if (l.retain) {
    const int extent = output_size(net, i);
    const int first = (extent - *l.retain) / 2;
    return {first, first + *l.retain - 1};
  }
  return interior_range(net, i);
}

std::string format_coord(const Coord& c) {
  if (c.denominator() == 1) return std::to_string(c.numerator());
  return std::to_string(c.numerator()) + "/" + std::to_string(c.denominator());
}

namespace {

std::vector<std::string> layer_names(const std::vector<GeometryRow>& rows) {
  int convs = 0, pools = 0;
  std::vector<std::string> names;
  for (const auto& r : rows) {
    names.push_back(r.kind == LayerKind::conv ? "conv" + std::to_string(++convs)
                                              : "pool" + std::to_string(++pools));
  }
  return names;
}

}  // namespace

void print_table(std::ostream& out, const std::vector<GeometryRow>& rows) {
  const auto names = layer_names(rows);
  out << std::left << std::setw(4) << "i" << std::setw(8) << "layer" << std::right
      << std::setw(5) << "W" << std::setw(5) << "s" << std::setw(5) << "P" << std::setw(7)
      << "S" << std::setw(8) << "x" << std::setw(7) << "rf" << std::setw(6) << "out" << '\n';
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    out << std::left << std::setw(4) << r.layer_index << std::setw(8) << names[k]
        << std::right << std::setw(5) << r.window << std::setw(5) << r.stride
        << std::setw(5) << r.padding << std::setw(7) << r.pixel_stride << std::setw(8)
        << format_coord(r.top_left) << std::setw(7) << r.receptive_field << std::setw(6)
        << r.out_size << '\n';
  }
}

void print_table_csv(std::ostream& out, const std::vector<GeometryRow>& rows) {
  const auto names = layer_names(rows);
  out << "i,layer,W,s,P,S,x,rf,out\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    out << r.layer_index << ',' << names[k] << ',' << r.window << ',' << r.stride << ','
        << r.padding << ',' << r.pixel_stride << ',' << format_coord(r.top_left) << ','
        << r.receptive_field << ',' << r.out_size << '\n';
  }
}

}  // namespace dnp
