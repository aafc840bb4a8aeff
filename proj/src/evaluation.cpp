#include "dnp/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dnp {

double average_precision(std::vector<ScoredBox> dets, const std::vector<GroundTruth>& gts,
                         double iou_threshold, ApMode mode) {
  std::map<std::string, const GroundTruth*> by_id;
  std::map<std::string, std::vector<bool>> matched;
  int positives = 0;
  for (const auto& gt : gts) {
    by_id[gt.image_id] = &gt;
    matched[gt.image_id].assign(gt.boxes.size(), false);
    for (const auto& a : gt.boxes) positives += a.difficult ? 0 : 1;
  }
  if (positives == 0) return 0.0;

  std::stable_sort(dets.begin(), dets.end(),
                   [](const ScoredBox& a, const ScoredBox& b) { return a.score > b.score; });
  std::vector<double> precision, recall;
  int tp = 0, fp = 0;
  for (const auto& d : dets) {
    bool is_tp = false;
    if (const auto it = by_id.find(d.image_id); it != by_id.end()) {
      const auto& boxes = it->second->boxes;
      double best = 0.0;
      int best_k = -1;
      for (std::size_t k = 0; k < boxes.size(); ++k) {
        const double o = iou(d.box, boxes[k].box);
        if (o > best) best = o, best_k = static_cast<int>(k);
      }
      if (best_k >= 0 && best >= iou_threshold) {
        if (boxes[best_k].difficult) continue;
        auto& used = matched[d.image_id];
        if (!used[best_k]) used[best_k] = is_tp = true;
      }
    }
    is_tp ? ++tp : ++fp;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / positives);
  }

  if (mode == ApMode::eleven_point) {
    double ap = 0.0;
    for (int t = 0; t <= 10; ++t) {
      double p = 0.0;
      for (std::size_t k = 0; k < recall.size(); ++k)
        if (recall[k] >= t / 10.0 - 1e-12) p = std::max(p, precision[k]);
      ap += p / 11.0;
    }
    return ap;
  }
  // Area under the monotone precision envelope.
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t k = mpre.size() - 1; k > 0; --k) mpre[k - 1] = std::max(mpre[k - 1], mpre[k]);
  double ap = 0.0;
  for (std::size_t k = 1; k < mrec.size(); ++k)
    if (mrec[k] != mrec[k - 1]) ap += (mrec[k] - mrec[k - 1]) * mpre[k];
  return ap;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  return fields;
}

double to_number(const std::string& s, int lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() && s.find_first_not_of(" \t\r", used) != std::string::npos)
      throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("csv line " + std::to_string(lineno) + ": bad number '" + s + "'");
  }
}

}  // namespace

void write_detections_csv(std::ostream& out, const std::vector<ScoredBox>& dets) {
  out << "image_id,left,top,right,bottom,score\n" << std::setprecision(10);
  for (const auto& d : dets)
    out << d.image_id << ',' << d.box.left << ',' << d.box.top << ',' << d.box.right << ','
        << d.box.bottom << ',' << d.score << '\n';
}

std::vector<ScoredBox> read_detections_csv(std::istream& in) {
  std::vector<ScoredBox> dets;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() >= 1 && f[0] == "image_id") continue;
    if (f.size() != 6)
      throw std::invalid_argument("detections csv line " + std::to_string(lineno) +
                                  ": expected 6 fields");
    dets.push_back({f[0],
                    {to_number(f[1], lineno), to_number(f[2], lineno), to_number(f[3], lineno),
                     to_number(f[4], lineno)},
                    to_number(f[5], lineno)});
  }
  return dets;
}

std::vector<std::pair<std::string, PixelRect>> read_proposals_csv(std::istream& in) {
  std::vector<std::pair<std::string, PixelRect>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() >= 1 && f[0] == "image_id") continue;
    if (f.size() != 5)
      throw std::invalid_argument("proposals csv line " + std::to_string(lineno) +
                                  ": expected 5 fields");
    out.push_back({f[0],
                   {to_number(f[1], lineno), to_number(f[2], lineno), to_number(f[3], lineno),
                    to_number(f[4], lineno)}});
  }
  return out;
}

}  // namespace dnp
