#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dnp/dataset.hpp"
#include "dnp/detector.hpp"

namespace dnp {

struct ScoredBox {
  std::string image_id;
  PixelRect box;
  double score = 0.0;
};

enum class ApMode { all_point, eleven_point };

/// Single-class average precision. Detections are ranked by score (ties
/// keep input order) and greedily matched to the best-overlapping ground
/// truth with IoU >= `iou_threshold`; each ground truth matches at most
/// once. Detections matched to difficult boxes are ignored.
double average_precision(std::vector<ScoredBox> dets, const std::vector<GroundTruth>& gts,
                         double iou_threshold = 0.5, ApMode mode = ApMode::all_point);

/// CSV `image_id,left,top,right,bottom,score` with a header line.
void write_detections_csv(std::ostream& out, const std::vector<ScoredBox>& dets);
/// Accepts files with or without the header line.
std::vector<ScoredBox> read_detections_csv(std::istream& in);

/// CSV `image_id,left,top,right,bottom`; header optional.
std::vector<std::pair<std::string, PixelRect>> read_proposals_csv(std::istream& in);

}  // namespace dnp
