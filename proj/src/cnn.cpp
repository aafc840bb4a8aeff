#include "dnp/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "binary_io.hpp"

namespace dnp {

namespace {

int pooled_extent(int in, int window, int stride, int pad) {
  if (in + 2 * pad < window) throw std::invalid_argument("window larger than padded input");
  return (in + 2 * pad - window) / stride + 1;
}

Tensor zero_pad(const Tensor& input, int pad) {
  if (pad == 0) return input;
  Tensor out(input.channels(), input.height() + 2 * pad, input.width() + 2 * pad);
  for (int c = 0; c < input.channels(); ++c)
    for (int y = 0; y < input.height(); ++y) {
      const auto src = input.plane(c).subspan(static_cast<std::size_t>(y) * input.width(),
                                              input.width());
      std::copy(src.begin(), src.end(), &out(c, y + pad, pad));
    }
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvWeights& weights, int stride, int pad) {
  if (input.channels() != weights.in_channels)
    throw std::invalid_argument("conv2d: input has " + std::to_string(input.channels()) +
                                " channels, kernel expects " +
                                std::to_string(weights.in_channels));
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: bad stride or padding");
  const int w = weights.window;
  const int oh = pooled_extent(input.height(), w, stride, pad);
  const int ow = pooled_extent(input.width(), w, stride, pad);
  const Tensor padded = zero_pad(input, pad);
  const int pw = padded.width();

  Tensor out(weights.out_channels, oh, ow);
  for (int o = 0; o < weights.out_channels; ++o) {
    float* acc = out.plane(o).data();
    // Each output accumulates its terms in (c, a, b) order regardless of
    // where it sits in the map.
    for (int c = 0; c < weights.in_channels; ++c) {
      const float* src = padded.plane(c).data();
      for (int a = 0; a < w; ++a)
        for (int b = 0; b < w; ++b) {
          const float k = weights.at(o, c, a, b);
          for (int u = 0; u < oh; ++u) {
            const float* row = src + static_cast<std::size_t>(u * stride + a) * pw + b;
            float* dst = acc + static_cast<std::size_t>(u) * ow;
            for (int v = 0; v < ow; ++v) dst[v] += row[static_cast<std::size_t>(v) * stride] * k;
          }
        }
    }
    const float bias = weights.bias[o];
    for (float& x : out.plane(o)) x = bias + x;
  }
  return out;
}

Tensor maxpool(const Tensor& input, int window, int stride, int pad) {
  const int oh = pooled_extent(input.height(), window, stride, pad);
  const int ow = pooled_extent(input.width(), window, stride, pad);
  Tensor out(input.channels(), oh, ow);
  for (int c = 0; c < input.channels(); ++c)
    for (int u = 0; u < oh; ++u)
      for (int v = 0; v < ow; ++v) {
        float best = -std::numeric_limits<float>::infinity();
        const int y0 = u * stride - pad, x0 = v * stride - pad;
        for (int y = std::max(y0, 0); y < std::min(y0 + window, input.height()); ++y)
          for (int x = std::max(x0, 0); x < std::min(x0 + window, input.width()); ++x)
            best = std::max(best, input(c, y, x));
        // A window lying wholly in padding sees only implicit zeros.
        out(c, u, v) = std::isinf(best) ? 0.0f : best;
      }
  return out;
}

Tensor lrn(const Tensor& input, const LrnParams& p) {
  const int channels = input.channels();
  const int half = p.n / 2;
  Tensor out(channels, input.height(), input.width());
  for (int y = 0; y < input.height(); ++y)
    for (int x = 0; x < input.width(); ++x)
      for (int c = 0; c < channels; ++c) {
        double sum_sq = 0.0;
        for (int j = std::max(0, c - half); j <= std::min(channels - 1, c + half); ++j) {
          const double v = input(j, y, x);
          sum_sq += v * v;
        }
        const double scale = std::pow(p.k + p.alpha * sum_sq, p.beta);
        out(c, y, x) = static_cast<float>(input(c, y, x) / scale);
      }
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& x : out.data()) x = std::max(x, 0.0f);
  return out;
}

WeightSet init_weights(const NetSpec& net, std::uint64_t seed, float stddev) {
  validate(net);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, stddev);
  WeightSet ws;
  for (const auto& l : net.layers) {
    if (l.kind == LayerKind::conv) {
      ConvWeights cw{l.out_channels, l.in_channels, l.window, {}, {}};
      cw.kernel.resize(static_cast<std::size_t>(l.out_channels) * l.in_channels * l.window *
                       l.window);
      for (float& k : cw.kernel) k = gauss(rng);
      cw.bias.assign(l.out_channels, 0.0f);
      ws.convs.push_back(std::move(cw));
    } else if (l.kind == LayerKind::norm) {
      ws.norms.push_back(LrnParams{});
    }
  }
  return ws;
}

void remove_input_dc(WeightSet& weights) {
  if (weights.convs.empty()) return;
  ConvWeights& cw = weights.convs.front();
  const std::size_t taps = static_cast<std::size_t>(cw.window) * cw.window;
  for (std::size_t k = 0; k < cw.kernel.size(); k += taps) {
    const auto first = cw.kernel.begin() + static_cast<std::ptrdiff_t>(k);
    const double mean = std::accumulate(first, first + taps, 0.0) / taps;
    for (auto it = first; it != first + taps; ++it) *it = static_cast<float>(*it - mean);
  }
}

void check_shapes(const NetSpec& net, const WeightSet& weights) {
  std::size_t conv = 0, norm = 0;
  for (const auto& l : net.layers) {
    if (l.kind == LayerKind::conv) {
      if (conv >= weights.convs.size())
        throw ShapeMismatchError("shape mismatch: weights have too few conv layers");
      const ConvWeights& cw = weights.convs[conv++];
      if (cw.out_channels != l.out_channels || cw.in_channels != l.in_channels ||
          cw.window != l.window ||
          cw.kernel.size() != static_cast<std::size_t>(cw.out_channels) * cw.in_channels *
                                  cw.window * cw.window ||
          cw.bias.size() != static_cast<std::size_t>(cw.out_channels))
        throw ShapeMismatchError("shape mismatch: conv layer " + std::to_string(conv));
    } else if (l.kind == LayerKind::norm) {
      if (norm >= weights.norms.size())
        throw ShapeMismatchError("shape mismatch: weights have too few norm layers");
      const LrnParams& p = weights.norms[norm++];
      if (p.n < 1 || p.n % 2 == 0 || p.n > l.in_channels)
        throw ShapeMismatchError("shape mismatch: norm window must be odd and <= channels");
    }
  }
  if (conv != weights.convs.size() || norm != weights.norms.size())
    throw ShapeMismatchError("shape mismatch: weights have extra layers");
}

Tensor forward_to_layer(const NetSpec& net, const WeightSet& weights, const Tensor& crop,
                        int layer, bool trailing) {
  if (crop.channels() != net.input_channels || crop.height() != net.input_size ||
      crop.width() != net.input_size)
    throw std::invalid_argument("forward: crop must be " + std::to_string(net.input_channels) +
                                "x" + std::to_string(net.input_size) + "x" +
                                std::to_string(net.input_size));
  const std::size_t end = trailing ? layer_end(net, layer) : layer_position(net, layer) + 1;
  std::size_t conv = 0, norm = 0;
  Tensor x = crop;
  for (std::size_t k = 0; k < end; ++k) {
    const LayerSpec& l = net.layers[k];
    switch (l.kind) {
      case LayerKind::conv: x = conv2d(x, weights.convs.at(conv++), l.stride, l.padding); break;
      case LayerKind::pool: x = maxpool(x, l.window, l.stride, l.padding); break;
      case LayerKind::norm: x = lrn(x, weights.norms.at(norm++)); break;
      case LayerKind::relu: x = relu(x); break;
    }
  }
  return x;
}

// Weight file: "DNPW", version, conv count, then per conv layer the four
// kernel dims, kernel floats and bias floats; then norm count and four f64
// per norm layer (k, n, alpha, beta).
constexpr std::uint32_t kWeightVersion = 1;

std::vector<std::uint8_t> serialize_weights(const WeightSet& ws) {
  detail::ByteWriter w;
  w.magic("DNPW");
  w.u32(kWeightVersion);
  w.u32(static_cast<std::uint32_t>(ws.convs.size()));
  for (const auto& cw : ws.convs) {
    w.u32(cw.out_channels);
    w.u32(cw.in_channels);
    w.u32(cw.window);
    w.u32(cw.window);
    for (float k : cw.kernel) w.f32(k);
    for (float b : cw.bias) w.f32(b);
  }
  w.u32(static_cast<std::uint32_t>(ws.norms.size()));
  for (const auto& p : ws.norms) {
    w.f64(p.k);
    w.f64(p.n);
    w.f64(p.alpha);
    w.f64(p.beta);
  }
  return std::move(w.bytes());
}

WeightSet deserialize_weights(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "weight file");
  if (!r.magic("DNPW")) throw BadMagicError("weight file: bad magic");
  if (const auto v = r.u32(); v != kWeightVersion)
    throw WeightFileError("weight file: unsupported version " + std::to_string(v));
  WeightSet ws;
  const std::uint32_t convs = r.u32();
  for (std::uint32_t k = 0; k < convs; ++k) {
    ConvWeights cw;
    cw.out_channels = static_cast<int>(r.u32());
    cw.in_channels = static_cast<int>(r.u32());
    cw.window = static_cast<int>(r.u32());
    if (r.u32() != static_cast<std::uint32_t>(cw.window))
      throw WeightFileError("weight file: non-square kernel");
    const std::size_t n =
        static_cast<std::size_t>(cw.out_channels) * cw.in_channels * cw.window * cw.window;
    r.need(4 * (n + cw.out_channels));
    cw.kernel.resize(n);
    for (float& x : cw.kernel) x = r.f32();
    cw.bias.resize(cw.out_channels);
    for (float& x : cw.bias) x = r.f32();
    ws.convs.push_back(std::move(cw));
  }
  const std::uint32_t norms = r.u32();
  for (std::uint32_t k = 0; k < norms; ++k) {
    LrnParams p;
    p.k = r.f64();
    p.n = static_cast<int>(r.f64());
    p.alpha = r.f64();
    p.beta = r.f64();
    ws.norms.push_back(p);
  }
  if (!r.at_end()) throw WeightFileError("weight file: trailing bytes");
  return ws;
}

void save_weights(const std::string& path, const WeightSet& weights) {
  detail::write_file(path, serialize_weights(weights));
}

WeightSet load_weights(const std::string& path) {
  return deserialize_weights(detail::read_file(path));
}

WeightSet load_weights(const std::string& path, const NetSpec& net) {
  WeightSet ws = load_weights(path);
  check_shapes(net, ws);
  return ws;
}

void save_tensor(const std::string& path, const Tensor& t) {
  detail::ByteWriter w;
  w.magic("DNPT");
  w.u32(1);
  w.u32(t.channels());
  w.u32(t.height());
  w.u32(t.width());
  for (float x : t.data()) w.f32(x);
  detail::write_file(path, w.bytes());
}

Tensor load_tensor(const std::string& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, "tensor file");
  if (!r.magic("DNPT")) throw BadMagicError("tensor file: bad magic");
  r.u32();
  const int c = static_cast<int>(r.u32());
  const int h = static_cast<int>(r.u32());
  const int w = static_cast<int>(r.u32());
  Tensor t(c, h, w);
  r.need(4 * t.size());
  for (float& x : t.data()) x = r.f32();
  return t;
}

}  // namespace dnp
