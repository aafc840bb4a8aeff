#include "dnp/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dnp {

std::vector<Family> Cascade::families() const {
  std::set<Family> seen;
  for (const auto& stage : stages)
    for (const auto& weak : stage.weaks) seen.insert(weak.config.family);
  return {seen.begin(), seen.end()};
}

int Cascade::weak_count() const {
  int n = 0;
  for (const auto& stage : stages) n += static_cast<int>(stage.weaks.size());
  return n;
}

WindowScore score_window(const Cascade& cascade, const FeatureSet& features,
                         const PixelRect& window, Normalizer normalizer) {
  for (const Family& f : cascade.families())
    if (!features.contains(f))
      throw std::invalid_argument("cascade needs feature family '" + f.name() +
                                  "' which was not computed");
  WindowScore result;
  for (std::size_t s = 0; s < cascade.stages.size(); ++s) {
    const CascadeStage& stage = cascade.stages[s];
    for (const auto& weak : stage.weaks)
      result.score += weak.response(region_feature(features, window, weak.config, normalizer));
    if (result.score < stage.reject_threshold) {
      result.accepted = false;
      result.rejected_stage = static_cast<int>(s);
      return result;
    }
  }
  return result;
}

double iou(const PixelRect& a, const PixelRect& b) {
  const double iw = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double ih = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  for (auto& d : dets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return iou(k.box, d.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

std::vector<PixelRect> propose_grid(int width, int height, const std::vector<int>& scales,
                                    const std::vector<double>& ratios, int stride) {
  if (stride < 1) throw std::invalid_argument("propose_grid: stride must be >= 1");
  std::vector<PixelRect> windows;
  for (int s : scales)
    for (double r : ratios) {
      const int w = std::clamp(static_cast<int>(std::lround(s * std::sqrt(r))), 1, width);
      const int h = std::clamp(static_cast<int>(std::lround(s / std::sqrt(r))), 1, height);
      for (int y = 0; y + h <= height; y += stride)
        for (int x = 0; x + w <= width; x += stride)
          windows.push_back({double(x), double(y), double(x + w), double(y + h)});
    }
  return windows;
}

std::vector<Detection> detect(const FeatureSet& features, const std::vector<PixelRect>& proposals,
                              const Cascade& cascade, double nms_iou, const std::string& label,
                              Normalizer normalizer) {
  std::vector<Detection> dets;
  for (const auto& box : proposals) {
    const WindowScore s = score_window(cascade, features, box, normalizer);
    if (s.accepted) dets.push_back({box, s.score, label});
  }
  return nms(std::move(dets), nms_iou);
}

FeatureSet compute_features(const FeaturePipeline& pipeline, const Image& image) {
  FeatureSet set;
  std::optional<Tensor> input;
  for (const Family& f : pipeline.families) {
    if (f.kind == FamilyKind::hog) {
      set.add(f, hog_extract(image));
    } else {
      if (!input) input = to_input(image, pipeline.net.input_channels);
      set.add(f, network_convolution(pipeline.net, pipeline.weights, *input, f.layer,
                                     pipeline.mode));
    }
  }
  return set;
}

std::vector<FamilyDim> family_dims(const FeaturePipeline& pipeline) {
  std::vector<FamilyDim> dims;
  for (const Family& f : pipeline.families)
    dims.push_back({f, f.kind == FamilyKind::hog ? 36 : output_channels(pipeline.net, f.layer)});
  return dims;
}

std::vector<Detection> detect(const Image& image, const FeaturePipeline& pipeline,
                              const std::vector<PixelRect>& proposals, const Cascade& cascade,
                              double nms_iou) {
  const FeatureSet features = compute_features(pipeline, image);
  const Normalizer n = cascade.meta.normalizer == "l1" ? Normalizer::l1 : Normalizer::l0;
  return detect(features, proposals, cascade, nms_iou, "target", n);
}

// --- boosting ----------------------------------------------------------------------

StumpFit fit_stump(const Eigen::Ref<const Eigen::VectorXf>& values, const std::vector<int>& order,
                   const Eigen::VectorXd& labels, const Eigen::VectorXd& weights) {
  const std::size_t n = order.size();
  double w_total = 0.0, wy_total = 0.0, wyy = 0.0;
  for (int i : order) {
    w_total += weights[i];
    wy_total += weights[i] * labels[i];
    wyy += weights[i] * labels[i] * labels[i];
  }
  StumpFit best;
  double w_left = 0.0, wy_left = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const int i = order[j];
    w_left += weights[i];
    wy_left += weights[i] * labels[i];
    const float a = values[i], b = values[order[j + 1]];
    if (!(a < b)) continue;
    const double w_right = w_total - w_left, wy_right = wy_total - wy_left;
    if (w_left <= 0.0 || w_right <= 0.0) continue;
    const double error = wyy - wy_left * wy_left / w_left - wy_right * wy_right / w_right;
    if (!best.valid || error < best.error) {
      best.valid = true;
      best.error = error;
      best.threshold = (static_cast<double>(a) + static_cast<double>(b)) / 2.0;
      best.left_value = wy_left / w_left;
      best.right_value = wy_right / w_right;
    }
  }
  return best;
}

namespace {

Eigen::VectorXd balanced_weights(const Eigen::VectorXd& labels) {
  const auto positives = (labels.array() > 0).count();
  const auto negatives = labels.size() - positives;
  if (positives == 0) throw std::invalid_argument("boosting needs at least one positive");
  if (negatives == 0) throw std::invalid_argument("boosting needs at least one negative");
  Eigen::VectorXd w(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    w[i] = labels[i] > 0 ? 0.5 / positives : 0.5 / negatives;
  return w;
}

}  // namespace

StageFit boost_stage(const Eigen::MatrixXf& features, const Eigen::VectorXd& labels,
                     const Eigen::VectorXd& initial_scores, int rounds, int stage_index,
                     std::vector<RoundLog>* log) {
  const Eigen::Index n = features.rows();
  if (labels.size() != n || initial_scores.size() != n)
    throw std::invalid_argument("boost_stage: sample count mismatch");
  if (features.cols() == 0) throw std::invalid_argument("boost_stage: empty feature pool");
  const Eigen::VectorXd prior = balanced_weights(labels);

  std::vector<std::vector<int>> orders(features.cols());
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    auto& order = orders[c];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    const float* col = features.col(c).data();
    std::stable_sort(order.begin(), order.end(), [col](int a, int b) { return col[a] < col[b]; });
  }

  StageFit fit;
  fit.scores = initial_scores;
  auto reweight = [&]() {
    Eigen::VectorXd w = (prior.array() * (-labels.array() * fit.scores.array()).exp()).matrix();
    const double loss = w.sum();
    return std::pair{Eigen::VectorXd(w / loss), loss};
  };
  auto [weights, loss] = reweight();

  for (int round = 0; round < rounds; ++round) {
    const double mean = weights.dot(labels);
    const double constant_error = weights.dot(labels.cwiseProduct(labels)) - mean * mean;
    StumpFit best;
    int best_config = -1;
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      const StumpFit s = fit_stump(features.col(c), orders[c], labels, weights);
      if (s.valid && (!best.valid || s.error < best.error)) {
        best = s;
        best_config = static_cast<int>(c);
      }
    }
    if (!best.valid || !(best.error < constant_error)) break;

    for (Eigen::Index i = 0; i < n; ++i)
      fit.scores[i] += features(i, best_config) < best.threshold ? best.left_value
                                                                  : best.right_value;
    fit.configs.push_back(best_config);
    fit.stumps.push_back(best);
    std::tie(weights, loss) = reweight();
    if (log)
      log->push_back({stage_index, round, best_config, best.error, constant_error, loss,
                      weights.sum(), weights.minCoeff()});
  }
  return fit;
}

double survival_threshold(std::vector<double> positive_scores, double survival) {
  if (positive_scores.empty()) return -std::numeric_limits<double>::infinity();
  std::sort(positive_scores.begin(), positive_scores.end());
  const auto n = positive_scores.size();
  const auto drop = static_cast<std::size_t>(std::floor((1.0 - survival) * n + 1e-9));
  return positive_scores[std::min(drop, n - 1)];
}

namespace {

struct Sample {
  int image = 0;
  PixelRect window;
  double label = 0;
};

double cumulative_score(const Cascade& cascade, const FeatureSet& features,
                        const PixelRect& window, Normalizer normalizer) {
  double score = 0.0;
  for (const auto& stage : cascade.stages)
    for (const auto& weak : stage.weaks)
      score += weak.response(region_feature(features, window, weak.config, normalizer));
  return score;
}

bool inside(const PixelRect& r, int w, int h) {
  return r.left >= 0 && r.top >= 0 && r.right <= w && r.bottom <= h && r.width() > 0 &&
         r.height() > 0;
}

double max_iou(const PixelRect& r, const std::vector<PixelRect>& objects) {
  double best = 0.0;
  for (const auto& o : objects) best = std::max(best, iou(r, o));
  return best;
}

}  // namespace

Cascade train_cascade(const std::vector<TrainImage>& images,
                      const std::vector<RegionletConfig>& pool, const TrainParams& params,
                      TrainReport* report) {
  if (pool.empty()) throw std::invalid_argument("train_cascade: empty configuration pool");
  std::mt19937_64 rng(params.seed);
  auto uniform_real = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  // Positives: each object plus jittered copies that still overlap it well.
  std::vector<Sample> positives;
  for (int k = 0; k < static_cast<int>(images.size()); ++k) {
    const TrainImage& im = images[k];
    for (const auto& obj : im.objects) {
      positives.push_back({k, obj, 1.0});
      for (int j = 0; j < params.jitters_per_object; ++j) {
        for (int attempt = 0; attempt < 20; ++attempt) {
          const double dx = uniform_real(-0.1, 0.1) * obj.width();
          const double dy = uniform_real(-0.1, 0.1) * obj.height();
          const double sc = uniform_real(0.9, 1.1);
          const double cx = (obj.left + obj.right) / 2 + dx, cy = (obj.top + obj.bottom) / 2 + dy;
          const PixelRect r{std::round(cx - sc * obj.width() / 2),
                            std::round(cy - sc * obj.height() / 2),
                            std::round(cx + sc * obj.width() / 2),
                            std::round(cy + sc * obj.height() / 2)};
          if (inside(r, im.width, im.height) && iou(r, obj) >= params.positive_iou) {
            positives.push_back({k, r, 1.0});
            break;
          }
        }
      }
    }
  }
  if (positives.empty()) throw std::invalid_argument("train_cascade: no positive windows");

  // Negative candidates: lattice windows that barely touch any object.
  std::vector<std::vector<PixelRect>> candidates(images.size());
  std::size_t candidate_total = 0;
  for (std::size_t k = 0; k < images.size(); ++k) {
    for (const auto& r : propose_grid(images[k].width, images[k].height, params.scales,
                                      params.ratios, params.proposal_stride))
      if (max_iou(r, images[k].objects) < params.negative_iou) candidates[k].push_back(r);
    candidate_total += candidates[k].size();
  }
  if (candidate_total == 0) throw std::invalid_argument("train_cascade: no negative windows");

  auto random_negative = [&]() {
    for (;;) {
      const auto k = std::uniform_int_distribution<std::size_t>(0, images.size() - 1)(rng);
      if (candidates[k].empty()) continue;
      const auto j = std::uniform_int_distribution<std::size_t>(0, candidates[k].size() - 1)(rng);
      return Sample{static_cast<int>(k), candidates[k][j], -1.0};
    }
  };

  Cascade cascade;
  cascade.meta.seed = params.seed;
  cascade.meta.pool_size = static_cast<int>(pool.size());
  cascade.meta.normalizer = params.normalizer == Normalizer::l1 ? "l1" : "l0";

  for (int stage = 0; stage < params.stages; ++stage) {
    std::vector<Sample> samples;
    for (const auto& p : positives)
      if (score_window(cascade, *images[p.image].features, p.window, params.normalizer).accepted)
        samples.push_back(p);
    const int n_pos = static_cast<int>(samples.size());
    if (n_pos == 0) break;

    int hard = 0;
    if (stage > 0) {
      std::vector<std::pair<double, Sample>> false_positives;
      for (std::size_t k = 0; k < images.size(); ++k) {
        auto pick = candidates[k];
        std::shuffle(pick.begin(), pick.end(), rng);
        pick.resize(std::min<std::size_t>(pick.size(), params.mining_candidates_per_image));
        for (const auto& r : pick) {
          const WindowScore s = score_window(cascade, *images[k].features, r, params.normalizer);
          if (s.accepted) false_positives.push_back({s.score, {static_cast<int>(k), r, -1.0}});
        }
      }
      if (false_positives.empty()) break;  // nothing left to learn from
      std::stable_sort(false_positives.begin(), false_positives.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (const auto& [score, s] : false_positives) {
        if (hard >= params.negatives_per_stage) break;
        samples.push_back(s);
        ++hard;
      }
    }
    while (static_cast<int>(samples.size()) - n_pos < params.negatives_per_stage)
      samples.push_back(random_negative());

    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXf features(n, static_cast<Eigen::Index>(pool.size()));
    Eigen::VectorXd labels(n), start(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Sample& s = samples[i];
      const FeatureSet& fs = *images[s.image].features;
      labels[i] = s.label;
      start[i] = cumulative_score(cascade, fs, s.window, params.normalizer);
      for (std::size_t c = 0; c < pool.size(); ++c)
        features(i, static_cast<Eigen::Index>(c)) =
            static_cast<float>(region_feature(fs, s.window, pool[c], params.normalizer));
    }

    const StageFit fit = boost_stage(features, labels, start, params.weaks_per_stage, stage,
                                     report ? &report->rounds : nullptr);
    if (fit.configs.empty()) break;
    CascadeStage cs;
    for (std::size_t j = 0; j < fit.configs.size(); ++j)
      cs.weaks.push_back({pool[fit.configs[j]], fit.stumps[j].threshold, fit.stumps[j].left_value,
                          fit.stumps[j].right_value});
    std::vector<double> pos_scores;
    for (Eigen::Index i = 0; i < n; ++i)
      if (labels[i] > 0) pos_scores.push_back(fit.scores[i]);
    cs.reject_threshold = survival_threshold(pos_scores, params.positive_survival);
    cascade.stages.push_back(std::move(cs));

    cascade.meta.positives += n_pos;
    cascade.meta.negatives += static_cast<int>(n) - n_pos;
    if (report) {
      report->positives_per_stage.push_back(n_pos);
      report->negatives_per_stage.push_back(static_cast<int>(n) - n_pos);
      report->hard_negatives_per_stage.push_back(hard);
    }
  }
  return cascade;
}

// --- cascade file -------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

double parse_double(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0')
    throw std::invalid_argument("cascade file: bad number '" + token + "'");
  return v;
}

std::string next_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') return line;
  throw std::invalid_argument("cascade file: unexpected end of file");
}

}  // namespace

void write_cascade(std::ostream& out, const Cascade& cascade) {
  std::vector<std::string> configs;
  std::map<std::string, std::size_t> index;
  for (const auto& stage : cascade.stages)
    for (const auto& weak : stage.weaks) {
      const std::string line = format_config(weak.config);
      if (index.emplace(line, configs.size()).second) configs.push_back(line);
    }
  const CascadeMeta& m = cascade.meta;
  out << "DNPC 1\n";
  out << "meta seed " << m.seed << " pool_size " << m.pool_size << " positives " << m.positives
      << " negatives " << m.negatives << " normalizer " << m.normalizer << '\n';
  out << "configs " << configs.size() << '\n';
  for (const auto& c : configs) out << c << '\n';
  out << "stages " << cascade.stages.size() << '\n';
  for (const auto& stage : cascade.stages) {
    out << "stage " << format_double(stage.reject_threshold) << ' ' << stage.weaks.size() << '\n';
    for (const auto& weak : stage.weaks)
      out << index.at(format_config(weak.config)) << ' ' << format_double(weak.threshold) << ' '
          << format_double(weak.left_value) << ' ' << format_double(weak.right_value) << '\n';
  }
}

Cascade read_cascade(std::istream& in) {
  if (next_line(in) != "DNPC 1") throw std::invalid_argument("cascade file: bad header");
  Cascade cascade;
  {
    std::istringstream ls(next_line(in));
    std::string tag, key;
    ls >> tag;
    if (tag != "meta") throw std::invalid_argument("cascade file: expected meta line");
    CascadeMeta& m = cascade.meta;
    while (ls >> key) {
      if (key == "seed") ls >> m.seed;
      else if (key == "pool_size") ls >> m.pool_size;
      else if (key == "positives") ls >> m.positives;
      else if (key == "negatives") ls >> m.negatives;
      else if (key == "normalizer") ls >> m.normalizer;
      else throw std::invalid_argument("cascade file: unknown meta key '" + key + "'");
    }
  }
  auto counted = [&](const std::string& expect) {
    std::istringstream ls(next_line(in));
    std::string tag;
    std::size_t n = 0;
    if (!(ls >> tag >> n) || tag != expect)
      throw std::invalid_argument("cascade file: expected '" + expect + " <n>'");
    return n;
  };
  std::vector<RegionletConfig> configs(counted("configs"));
  for (auto& c : configs) c = parse_config(next_line(in));
  const std::size_t stages = counted("stages");
  for (std::size_t s = 0; s < stages; ++s) {
    std::istringstream ls(next_line(in));
    std::string tag, reject;
    std::size_t weaks = 0;
    if (!(ls >> tag >> reject >> weaks) || tag != "stage")
      throw std::invalid_argument("cascade file: expected 'stage <reject> <n>'");
    CascadeStage stage;
    stage.reject_threshold = parse_double(reject);
    for (std::size_t k = 0; k < weaks; ++k) {
      std::istringstream ws(next_line(in));
      std::size_t idx = 0;
      std::string th, lv, rv;
      if (!(ws >> idx >> th >> lv >> rv) || idx >= configs.size())
        throw std::invalid_argument("cascade file: malformed weak line");
      stage.weaks.push_back({configs[idx], parse_double(th), parse_double(lv), parse_double(rv)});
    }
    cascade.stages.push_back(std::move(stage));
  }
  return cascade;
}

void save_cascade(const std::string& path, const Cascade& cascade) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write cascade '" + path + "'");
  write_cascade(out, cascade);
}

Cascade load_cascade(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cascade '" + path + "'");
  return read_cascade(in);
}

}  // namespace dnp
