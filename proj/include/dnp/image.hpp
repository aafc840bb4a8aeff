#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dnp/tensor.hpp"

namespace dnp {

/// 8-bit image with interleaved channels (1 = gray, 3 = RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

/// Binary PGM (P5) or PPM (P6) with maxval 255.
Image read_pnm(const std::string& path);
void write_pnm(const std::string& path, const Image& image);

/// Network input: each channel scaled to [0, 1] minus a mean of 0.5. Gray
/// images are replicated across `channels`.
Tensor to_input(const Image& image, int channels);

/// Mean over color channels, in [0, 255].
std::vector<float> grayscale(const Image& image);

}  // namespace dnp
