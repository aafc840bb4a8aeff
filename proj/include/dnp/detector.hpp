#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dnp/cnn.hpp"
#include "dnp/dense.hpp"
#include "dnp/regionlet.hpp"

namespace dnp {

/// Regression stump over one pooled feature. Feature values are compared in
/// single precision so training and detection see identical splits.
struct WeakClassifier {
  RegionletConfig config;
  double threshold = 0.0;
  double left_value = 0.0;
  double right_value = 0.0;

  double response(double feature) const {
    return static_cast<double>(static_cast<float>(feature)) < threshold ? left_value
                                                                         : right_value;
  }
};

struct CascadeStage {
  std::vector<WeakClassifier> weaks;
  double reject_threshold = 0.0;
};

struct CascadeMeta {
  std::uint64_t seed = 0;
  int pool_size = 0;
  int positives = 0;
  int negatives = 0;
  std::string normalizer = "l0";
};

struct Cascade {
  std::vector<CascadeStage> stages;
  CascadeMeta meta;

  std::vector<Family> families() const;
  int weak_count() const;
};

struct WindowScore {
  bool accepted = true;
  double score = 0.0;
  int rejected_stage = -1;  // index of the rejecting stage when !accepted
};

/// Cumulative score with early exit at the first stage whose running total
/// falls below its reject threshold.
WindowScore score_window(const Cascade& cascade, const FeatureSet& features,
                         const PixelRect& window, Normalizer normalizer = Normalizer::l0);

struct Detection {
  PixelRect box;
  double score = 0.0;
  std::string label;
};

double iou(const PixelRect& a, const PixelRect& b);

/// Greedy non-maximum suppression, highest score first (ties keep input
/// order). Output is sorted by descending score.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold);

/// Sliding-window lattice: for each side length and aspect ratio
/// (width/height), windows at multiples of `stride`, clipped to the image.
std::vector<PixelRect> propose_grid(int width, int height, const std::vector<int>& scales,
                                    const std::vector<double>& ratios, int stride);

/// Scores proposals against precomputed dense features, drops rejected
/// windows, applies NMS and sorts by descending score.
std::vector<Detection> detect(const FeatureSet& features, const std::vector<PixelRect>& proposals,
                              const Cascade& cascade, double nms_iou = 0.5,
                              const std::string& label = "target",
                              Normalizer normalizer = Normalizer::l0);

// --- feature pipeline -------------------------------------------------------------

/// Everything needed to turn an image into the dense grids a cascade reads.
struct FeaturePipeline {
  NetSpec net;
  WeightSet weights;
  std::vector<Family> families;
  TilingMode mode = TilingMode::covering;
};

FeatureSet compute_features(const FeaturePipeline& pipeline, const Image& image);
std::vector<FamilyDim> family_dims(const FeaturePipeline& pipeline);

std::vector<Detection> detect(const Image& image, const FeaturePipeline& pipeline,
                              const std::vector<PixelRect>& proposals, const Cascade& cascade,
                              double nms_iou = 0.5);

// --- boosting ----------------------------------------------------------------------

struct StumpFit {
  double threshold = 0.0;
  double left_value = 0.0;
  double right_value = 0.0;
  double error = 0.0;  // weighted squared error, weights summing to one
  bool valid = false;  // false when all values are equal
};

/// Best regression stump for one feature column. `order` sorts `values`
/// ascending. Thresholds are midpoints between distinct neighbours; ties in
/// error keep the smaller threshold.
StumpFit fit_stump(const Eigen::Ref<const Eigen::VectorXf>& values,
                   const std::vector<int>& order, const Eigen::VectorXd& labels,
                   const Eigen::VectorXd& weights);

struct RoundLog {
  int stage = 0;
  int round = 0;
  int config = 0;
  double stump_error = 0.0;
  double constant_error = 0.0;
  /// Initial-weight-averaged exponential loss of the cumulative score.
  double training_loss = 0.0;
  double weight_sum = 0.0;  // after renormalization
  double min_weight = 0.0;
};

struct StageFit {
  std::vector<int> configs;
  std::vector<StumpFit> stumps;
  Eigen::VectorXd scores;  // cumulative, including the starting scores
};

/// Gentle boosting over a samples x configs feature matrix. Starts from
/// `initial_scores`; stops early when no stump beats the constant predictor.
StageFit boost_stage(const Eigen::MatrixXf& features, const Eigen::VectorXd& labels,
                     const Eigen::VectorXd& initial_scores, int rounds, int stage_index = 0,
                     std::vector<RoundLog>* log = nullptr);

/// Largest threshold that keeps at least `survival` of the positive scores.
double survival_threshold(std::vector<double> positive_scores, double survival);

struct TrainImage {
  const FeatureSet* features = nullptr;
  int width = 0;
  int height = 0;
  std::vector<PixelRect> objects;
};

struct TrainParams {
  int stages = 4;
  int weaks_per_stage = 64;
  double positive_survival = 0.99;
  int jitters_per_object = 4;
  double positive_iou = 0.7;
  double negative_iou = 0.3;
  int negatives_per_stage = 2000;
  int mining_candidates_per_image = 40;
  std::vector<int> scales = {32, 48, 64, 96};
  std::vector<double> ratios = {0.75, 1.0, 1.333};
  int proposal_stride = 12;
  std::uint64_t seed = 7;
  Normalizer normalizer = Normalizer::l0;
};

struct TrainReport {
  std::vector<RoundLog> rounds;
  std::vector<int> positives_per_stage;
  std::vector<int> negatives_per_stage;
  std::vector<int> hard_negatives_per_stage;
};

Cascade train_cascade(const std::vector<TrainImage>& images,
                      const std::vector<RegionletConfig>& pool, const TrainParams& params,
                      TrainReport* report = nullptr);

/// Versioned text format. The configs used by the cascade are listed once;
/// each weak line references one of them by index.
void write_cascade(std::ostream& out, const Cascade& cascade);
Cascade read_cascade(std::istream& in);
void save_cascade(const std::string& path, const Cascade& cascade);
Cascade load_cascade(const std::string& path);

}  // namespace dnp
