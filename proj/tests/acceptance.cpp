// Acceptance gate: prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dnp/dataset.hpp"
#include "dnp/evaluation.hpp"
#include "dnp/harness.hpp"
#include "oracles.hpp"

using namespace dnp;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

int workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// --- 1-3, 6: geometry and counts --------------------------------------------------

Verdict table_reproduction() {
  const auto t0 = Clock::now();
  const std::string cmd = std::string(DNP_CLI) + " table --net " + DNP_NETS + "/paper.net --csv 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {false, "could not run the CLI"};
  std::string out;
  std::array<char, 4096> buf;
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  const double elapsed = seconds_since(t0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "CLI exit status nonzero"};

  const std::vector<long> want_s{4, 8, 8, 16, 16, 16, 16, 32}, want_x{6, 10, 10, 18, 18, 18, 18, 34};
  std::vector<long> s, x;
  std::istringstream lines(out);
  std::string line;
  std::getline(lines, line);  // header
  while (std::getline(lines, line)) {
    std::vector<std::string> f;
    std::istringstream fields(line);
    for (std::string tok; std::getline(fields, tok, ',');) f.push_back(tok);
    if (f.size() != 9) return {false, "malformed row: " + line};
    s.push_back(std::stol(f[5]));
    x.push_back(std::stol(f[6]));
  }
  int matched = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    matched += i < s.size() && s[i] == want_s[i];
    matched += i < x.size() && x[i] == want_x[i];
  }
  return {matched == 16 && s.size() == 8 && elapsed < 1.0,
          fmt("%d/16 values exact, %zu rows, %.3f s", matched, s.size(), elapsed)};
}

Verdict receptive_field() {
  const auto rf = receptive_field_extent(paper_net(), 7);
  return {rf == 163, fmt("conv5 receptive field %lld", static_cast<long long>(rf))};
}

Verdict tiling() {
  const TilingPlan p = plan_tiling(640, 480, paper_net(), 7);
  const bool ok = p.crop_count() == 48 && p.crops_x == 8 && p.crops_y == 6 && p.cols == 40 &&
                  p.rows == 30 && p.shift == 80;
  return {ok, fmt("%d crops (%dx%d), %dx%d grid, %d px shift", p.crop_count(), p.crops_x,
                  p.crops_y, p.cols, p.rows, p.shift)};
}

Verdict speed_accounting() {
  const BenchReport r = bench_convolutions(640, 480, 2213, paper_net(), 7);
  return {r.per_region == 2213 && r.dense == 48 && r.ratio >= 40.0,
          fmt("per-region %d vs dense %d, ratio %.1fx", r.per_region, r.dense, r.ratio)};
}

// --- 4-5: dense extraction ------------------------------------------------------------

Tensor random_tensor(std::mt19937& rng, int w, int h) {
  std::uniform_real_distribution<float> value(-0.5f, 0.5f);
  Tensor t(3, h, w);
  for (float& v : t.data()) v = value(rng);
  return t;
}

Verdict homogeneity() {
  const auto t0 = Clock::now();
  const NetSpec net = tiny_net();
  const int layer = 5;  // conv3
  const CellRange kept = retained_range(net, layer);
  std::mt19937 rng(101);
  int checked = 0, equal = 0;
  for (int im = 0; im < 4; ++im) {
    const WeightSet w = init_weights(net, 200 + im);
    const Tensor img = random_tensor(rng, 150 + static_cast<int>(rng() % 200),
                                     150 + static_cast<int>(rng() % 200));
    const FeatureGrid g = network_convolution(net, w, img, layer);
    for (int t = 0; t < 50; ++t) {
      // A grid point whose coordinate lies inside the image.
      int u, v;
      do {
        u = static_cast<int>(rng() % g.cols), v = static_cast<int>(rng() % g.rows);
      } while (g.x(u) < 0 || g.y(v) < 0 || g.x(u) >= img.width() || g.y(v) >= img.height());
      // An independent crop, placed so that a random retained cell lands on it.
      const int ki = kept.first + static_cast<int>(rng() % kept.size());
      const int kj = kept.first + static_cast<int>(rng() % kept.size());
      const auto [cx, cy] = feature_center(net, layer, ki, kj, Convention::exact);
      const int ox = g.x(u) - static_cast<int>(cx.numerator());
      const int oy = g.y(v) - static_cast<int>(cy.numerator());
      const Tensor out = forward_to_layer(net, w, [&] {
        Tensor crop(3, net.input_size, net.input_size);
        for (int c = 0; c < 3; ++c)
          for (int y = 0; y < net.input_size; ++y)
            for (int x = 0; x < net.input_size; ++x) {
              const int ix = ox + x, iy = oy + y;
              if (ix >= 0 && iy >= 0 && ix < img.width() && iy < img.height())
                crop(c, y, x) = img(c, iy, ix);
            }
        return crop;
      }(), layer);
      bool same = true;
      for (int c = 0; c < g.dim; ++c) {
        const float a = g.point(u, v)(c), b = out(c, kj, ki);
        same = same && std::memcmp(&a, &b, sizeof a) == 0;
      }
      ++checked;
      equal += same;
    }
  }
  const double elapsed = seconds_since(t0);
  return {checked >= 100 && equal == checked && elapsed <= 120.0,
          fmt("%d/%d grid points bitwise equal (tiny net, layer %d), %.1f s", equal, checked, layer,
              elapsed)};
}

Verdict occlusion() {
  const NetSpec net = tiny_net();
  const WeightSet w = init_weights(net, 3);
  std::mt19937 rng(103);
  const Tensor input = random_tensor(rng, net.input_size, net.input_size);
  std::vector<std::pair<int, Cell>> pairs;
  while (pairs.size() < 50) {
    const int layer = 1 + static_cast<int>(rng() % active_layer_count(net));
    const auto cells = interior_cells(net, layer);
    if (cells.empty()) continue;
    pairs.push_back({layer, cells[rng() % cells.size()]});
  }
  auto vector_at = [&](const Tensor& in, int layer, Cell c) {
    const Tensor out = forward_to_layer(net, w, in, layer);
    std::vector<float> v(out.channels());
    for (int ch = 0; ch < out.channels(); ++ch) v[ch] = out(ch, c.v, c.u);
    return v;
  };
  auto bitwise = [](const std::vector<float>& a, const std::vector<float>& b) {
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
  };
  int outside_ok = 0, outside_total = 0, center_changed = 0;
  for (const auto& [layer, c] : pairs) {
    const PixelBox box = receptive_field_box(net, layer, c.u, c.v);
    const auto base = vector_at(input, layer, c);
    for (int t = 0; t < 20; ++t) {
      int x, y;
      do {
        x = static_cast<int>(rng() % net.input_size), y = static_cast<int>(rng() % net.input_size);
      } while (Coord(x) >= box.left && Coord(x) <= box.right && Coord(y) >= box.top &&
               Coord(y) <= box.bottom);
      Tensor moved = input;
      for (int ch = 0; ch < 3; ++ch) moved(ch, y, x) += 0.75f;
      ++outside_total;
      outside_ok += bitwise(vector_at(moved, layer, c), base);
    }
    const auto [cx, cy] = feature_center(net, layer, c.u, c.v, Convention::exact);
    const int x = static_cast<int>(boost::rational_cast<double>(cx));
    const int y = static_cast<int>(boost::rational_cast<double>(cy));
    Tensor moved = input;
    for (int ch = 0; ch < 3; ++ch) moved(ch, y, x) += 0.75f;
    center_changed += !bitwise(vector_at(moved, layer, c), base);
  }
  return {outside_ok == outside_total && center_changed >= 49,
          fmt("%d/%d outside perturbations unchanged, %d/50 center perturbations changed",
              outside_ok, outside_total, center_changed)};
}

// --- 7, 11, 12: oracles -----------------------------------------------------------------

Verdict pooling_oracle() {
  std::mt19937 rng(107);
  int agree = 0;
  for (int t = 0; t < 1000; ++t) {
    const int stride = 4 + static_cast<int>(rng() % 13);
    FeatureGrid g(static_cast<int>(rng() % stride), static_cast<int>(rng() % stride), stride,
                  3 + static_cast<int>(rng() % 20), 3 + static_cast<int>(rng() % 20),
                  1 + static_cast<int>(rng() % 8));
    std::uniform_real_distribution<float> value(t % 2 ? -1.0f : 0.0f, 1.0f);
    for (Eigen::Index k = 0; k < g.data.size(); ++k)
      g.data.data()[k] = rng() % 5 < 2 ? 0.0f : value(rng);
    const double w = g.origin_x + g.cols * g.stride, h = g.origin_y + g.rows * g.stride;
    std::uniform_real_distribution<double> ux(0, w), uy(0, h);
    double l = ux(rng), r = ux(rng), top = uy(rng), b = uy(rng);
    if (l > r) std::swap(l, r);
    if (top > b) std::swap(top, b);
    const PixelRect window{std::floor(l), std::floor(top), std::floor(l) + std::max(4.0, std::ceil(r - l)),
                           std::floor(top) + std::max(4.0, std::ceil(b - top))};
    std::uniform_int_distribution<int> q(0, 16);
    int a = q(rng), c = q(rng), d = q(rng), e = q(rng);
    if (a == c) c = a == 16 ? a - 1 : a + 1;
    if (d == e) e = d == 16 ? d - 1 : d + 1;
    const Rect rect{std::min(a, c) / 16.0, std::min(d, e) / 16.0, std::max(a, c) / 16.0,
                    std::max(d, e) / 16.0};
    agree += pool_regionlet(g, window, rect) == oracle::pool(g, window, rect);
  }
  return {agree == 1000, fmt("%d/1000 cases exact", agree)};
}

Verdict ap_oracle() {
  std::mt19937 rng(109);
  std::uniform_int_distribution<int> pos(0, 60), side(5, 35);
  std::uniform_real_distribution<double> unit(0, 1);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<GroundTruth> gts;
    std::vector<ScoredBox> dets;
    int budget = 20;
    const int images = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < images; ++i) {
      GroundTruth g{"im" + std::to_string(i), 100, 100, {}};
      const int n = static_cast<int>(rng() % 5);
      for (int k = 0; k < n && budget > 0; ++k, --budget) {
        const double x = pos(rng), y = pos(rng);
        g.boxes.push_back({{x, y, x + side(rng), y + side(rng)}, "target", unit(rng) < 0.15});
      }
      const int m = static_cast<int>(rng() % 7);
      for (int k = 0; k < m && budget > 0; ++k, --budget) {
        PixelRect b;
        if (!g.boxes.empty() && unit(rng) < 0.6) {
          b = g.boxes[rng() % g.boxes.size()].box;
          b.left += static_cast<int>(rng() % 7) - 3;
          b.bottom += static_cast<int>(rng() % 7) - 3;
        } else {
          const double x = pos(rng), y = pos(rng);
          b = {x, y, x + side(rng), y + side(rng)};
        }
        dets.push_back({g.image_id, b, std::round(unit(rng) * 10) / 10});
      }
      gts.push_back(std::move(g));
    }
    worst = std::max(worst, std::abs(average_precision(dets, gts) -
                                     oracle::average_precision(dets, gts, 0.5)));
  }
  return {worst <= 1e-9, fmt("100 cases, max |difference| %.3g", worst)};
}

Verdict nms_oracle() {
  std::mt19937 rng(113);
  std::uniform_int_distribution<int> pos(0, 20), side(3, 14), score(0, 5);
  std::uniform_real_distribution<double> thr(0.1, 0.8);
  int agree = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = static_cast<int>(rng() % 9);
    std::vector<Detection> dets;
    for (int i = 0; i < n; ++i) {
      const double x = pos(rng), y = pos(rng);
      dets.push_back({{x, y, x + side(rng), y + side(rng)}, score(rng) / 5.0, std::to_string(i)});
    }
    const double t = thr(rng);
    int solutions = 0;
    const std::vector<int> expect = oracle::nms_subset(dets, t, &solutions);
    const auto kept = nms(dets, t);
    bool same = solutions == 1 && kept.size() == expect.size();
    for (std::size_t k = 0; same && k < kept.size(); ++k)
      same = kept[k].label == dets[expect[k]].label && kept[k].box == dets[expect[k]].box &&
             kept[k].score == dets[expect[k]].score;
    agree += same;
  }
  return {agree == 500, fmt("%d/500 cases exact", agree)};
}

// --- 8-10: the desk-scale detection protocol --------------------------------------------

struct Protocol {
  std::vector<SyntheticImage> images;  // 200 train then 50 test
  std::vector<FeatureSet> features;
  std::vector<GroundTruth> test_gt;
  std::vector<std::vector<PixelRect>> test_proposals;
};

const int kTrain = 200, kTest = 50;

Cascade train_on(const Protocol& p, const std::vector<FamilyDim>& dims, TrainReport* report) {
  std::vector<TrainImage> train;
  for (int k = 0; k < kTrain; ++k) {
    TrainImage t{&p.features[k], p.images[k].image.width, p.images[k].image.height, {}};
    for (const auto& a : p.images[k].gt.boxes) t.objects.push_back(a.box);
    train.push_back(std::move(t));
  }
  return train_cascade(train, sample_configurations(11, 10000, dims), TrainParams{}, report);
}

double test_ap(const Protocol& p, const Cascade& c) {
  std::vector<std::vector<ScoredBox>> per_image(kTest);
  for_each_index(kTest, workers(), [&](int i) {
    const int k = kTrain + i;
    for (const auto& d : detect(p.features[k], p.test_proposals[i], c))
      per_image[i].push_back({p.images[k].gt.image_id, d.box, d.score});
  });
  std::vector<ScoredBox> all;
  for (auto& v : per_image) all.insert(all.end(), v.begin(), v.end());
  return average_precision(all, p.test_gt);
}

double random_baseline_ap(const Protocol& p) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> unit(0, 1);
  std::vector<ScoredBox> all;
  for (int i = 0; i < kTest; ++i) {
    std::vector<Detection> dets;
    for (const auto& box : p.test_proposals[i]) dets.push_back({box, unit(rng), "target"});
    for (const auto& d : nms(std::move(dets), 0.5))
      all.push_back({p.images[kTrain + i].gt.image_id, d.box, d.score});
  }
  return average_precision(all, p.test_gt);
}

}  // namespace

int main() {
  std::array<Verdict, 13> v;
  auto run = [&](int n, const std::function<Verdict()>& fn) {
    try {
      v[n] = fn();
    } catch (const std::exception& e) {
      v[n] = {false, std::string("exception: ") + e.what()};
    }
  };

  run(1, table_reproduction);
  run(2, receptive_field);
  run(3, tiling);
  run(4, homogeneity);
  run(5, occlusion);
  run(6, speed_accounting);
  run(7, pooling_oracle);

  // Criteria 8-10 share one synthetic dataset and one set of features.
  Protocol p;
  TrainReport dnp_report;
  double ap_dnp = NAN, ap_random = NAN, ap_hog = NAN, ap_combo = NAN, protocol_seconds = NAN;
  std::string protocol_error;
  try {
    const auto t0 = Clock::now();
    p.images = synthesize(2024, kTrain + kTest, SynthSpec{});
    const NetSpec net = tiny_net();
    WeightSet w = init_weights(net, 1);
    remove_input_dc(w);
    const FeaturePipeline dnp{net, w, {Family::dnp(5)}, TilingMode::covering};
    p.features.resize(p.images.size());
    for_each_index(static_cast<int>(p.images.size()), workers(),
                   [&](int k) { p.features[k] = compute_features(dnp, p.images[k].image); });
    for (int i = 0; i < kTest; ++i) {
      const auto& im = p.images[kTrain + i];
      p.test_gt.push_back(im.gt);
      p.test_proposals.push_back(propose_grid(im.image.width, im.image.height, {32, 48, 64, 96},
                                              {0.75, 1.0, 1.333}, 8));
    }
    const Cascade dnp_cascade = train_on(p, family_dims(dnp), &dnp_report);
    ap_dnp = test_ap(p, dnp_cascade);
    protocol_seconds = seconds_since(t0);
    ap_random = random_baseline_ap(p);

    for_each_index(static_cast<int>(p.images.size()), workers(),
                   [&](int k) { p.features[k].add(Family::hog(), hog_extract(p.images[k].image)); });
    ap_hog = test_ap(p, train_on(p, {{Family::hog(), 36}}, nullptr));
    ap_combo = test_ap(p, train_on(p, {{Family::dnp(5), 32}, {Family::hog(), 36}}, nullptr));
  } catch (const std::exception& e) {
    protocol_error = std::string("exception: ") + e.what();
  }

  if (!protocol_error.empty()) {
    v[8] = v[9] = v[10] = {false, protocol_error};
  } else {
    int rounds = 0, beat = 0;
    bool decreasing = true;
    double previous = 1.0;
    for (const auto& r : dnp_report.rounds) {
      beat += r.stump_error < r.constant_error;
      if (r.stage == 0 && rounds < 10) {
        decreasing = decreasing && r.training_loss < previous;
        previous = r.training_loss;
        ++rounds;
      }
    }
    v[8] = {rounds == 10 && decreasing && beat == static_cast<int>(dnp_report.rounds.size()),
            fmt("loss strictly decreasing over %d/10 rounds (1 -> %.4f); %d/%zu stumps beat the "
                "constant predictor",
                rounds, previous, beat, dnp_report.rounds.size())};
    v[9] = {ap_dnp >= 0.5 && ap_random <= 0.2 && protocol_seconds <= 600.0,
            fmt("AP %.3f (>= 0.5), random-score baseline %.3f (<= 0.2), %.0f s", ap_dnp, ap_random,
                protocol_seconds)};
    v[10] = {ap_combo >= ap_hog - 0.02,
             fmt("AP DNP+HOG %.3f vs HOG %.3f (margin %+.3f)", ap_combo, ap_hog, ap_combo - ap_hog)};
  }

  run(11, ap_oracle);
  run(12, nms_oracle);

  const char* names[13] = {"",
                           "table reproduction",
                           "receptive field",
                           "tiling",
                           "homogeneity",
                           "occlusion oracle",
                           "speed accounting",
                           "pooling oracle",
                           "boosting properties",
                           "desk-scale detection",
                           "feature combination",
                           "AP oracle",
                           "NMS oracle"};
  int failed = 0;
  for (int n = 1; n <= 12; ++n) {
    std::printf("%s %2d %-22s %s\n", v[n].pass ? "PASS" : "FAIL", n, names[n], v[n].detail.c_str());
    failed += !v[n].pass;
  }
  std::printf("%d/12 criteria passed\n", 12 - failed);
  return failed == 0 ? 0 : 1;
}
