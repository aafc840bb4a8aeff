#pragma once

#include <cstddef>
#include <cstring>
#include <span>
#include <vector>

namespace dnp {

/// Dense channels x height x width array of 32-bit floats, channel-major,
/// row-major within a channel.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width, float fill = 0.0f)
      : channels_(channels),
        height_(height),
        width_(width),
        data_(static_cast<std::size_t>(channels) * height * width, fill) {}

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  float& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
  float operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  std::span<float> plane(int c) {
    return std::span<float>(data_).subspan(plane_offset(c), plane_size());
  }
  std::span<const float> plane(int c) const {
    return std::span<const float>(data_).subspan(plane_offset(c), plane_size());
  }

  bool same_shape(const Tensor& other) const {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  /// Bitwise comparison of shape and contents.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) &&
           std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
  }

 private:
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t plane_offset(int c) const { return static_cast<std::size_t>(c) * plane_size(); }
  std::size_t index(int c, int y, int x) const {
    return plane_offset(c) + static_cast<std::size_t>(y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

}  // namespace dnp
