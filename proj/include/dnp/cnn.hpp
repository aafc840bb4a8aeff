#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dnp/geometry.hpp"
#include "dnp/tensor.hpp"

namespace dnp {

/// Kernel (out x in x W x W) and bias (out) of one convolutional layer.
struct ConvWeights {
  int out_channels = 0;
  int in_channels = 0;
  int window = 0;
  std::vector<float> kernel;
  std::vector<float> bias;

  float at(int o, int c, int a, int b) const {
    return kernel[((static_cast<std::size_t>(o) * in_channels + c) * window + a) * window + b];
  }
  friend bool operator==(const ConvWeights&, const ConvWeights&) = default;
};

/// Across-channel local response normalization constants.
struct LrnParams {
  double k = 2.0;
  int n = 5;
  double alpha = 1e-4;
  double beta = 0.75;
  friend bool operator==(const LrnParams&, const LrnParams&) = default;
};

/// Parameters for a NetSpec: one ConvWeights per conv layer and one
/// LrnParams per norm layer, both in layer order.
struct WeightSet {
  std::vector<ConvWeights> convs;
  std::vector<LrnParams> norms;
  friend bool operator==(const WeightSet&, const WeightSet&) = default;
};

// Weight file errors. All derive from std::runtime_error.
struct WeightFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadMagicError : WeightFileError {
  using WeightFileError::WeightFileError;
};
struct TruncatedFileError : WeightFileError {
  using WeightFileError::WeightFileError;
};
struct ShapeMismatchError : WeightFileError {
  using WeightFileError::WeightFileError;
};

Tensor conv2d(const Tensor& input, const ConvWeights& weights, int stride, int pad);
Tensor maxpool(const Tensor& input, int window, int stride, int pad = 0);
Tensor lrn(const Tensor& input, const LrnParams& params);
Tensor relu(const Tensor& input);

WeightSet init_weights(const NetSpec& net, std::uint64_t seed, float stddev = 0.01f);

/// Shifts every per-channel kernel of the first conv layer to zero mean, so
/// the first layer ignores flat color and responds to local contrast only.
void remove_input_dc(WeightSet& weights);

/// Throws ShapeMismatchError when `weights` does not fit `net`.
void check_shapes(const NetSpec& net, const WeightSet& weights);

/// Runs active layers 1..L. With `trailing` set, the relu/norm layers that
/// directly follow layer L are applied as well.
Tensor forward_to_layer(const NetSpec& net, const WeightSet& weights, const Tensor& crop,
                        int layer, bool trailing = true);

std::vector<std::uint8_t> serialize_weights(const WeightSet& weights);
WeightSet deserialize_weights(const std::vector<std::uint8_t>& bytes);
void save_weights(const std::string& path, const WeightSet& weights);
WeightSet load_weights(const std::string& path);
WeightSet load_weights(const std::string& path, const NetSpec& net);

/// Tensor file: "DNPT", version u32, channels/height/width u32, f32 data.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace dnp
