#include "doctest.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "dnp/detector.hpp"
#include "dnp/image.hpp"
#include "oracles.hpp"

using namespace dnp;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// 4x4 points at 4, 12, 20, 28 on both axes. Dimension 0 holds u + v + 1,
// dimension 1 is all ones.
FeatureSet ramp_features() {
  FeatureGrid g(4, 4, 8, 4, 4, 2);
  for (int v = 0; v < 4; ++v)
    for (int u = 0; u < 4; ++u) {
      g.point(u, v)[0] = static_cast<float>(u + v + 1);
      g.point(u, v)[1] = 1.0f;
    }
  FeatureSet fs;
  fs.add(Family::dnp(5), std::move(g));
  return fs;
}

RegionletConfig full_config(int dim, std::vector<Rect> regionlets = {Rect{}}) {
  return {Family::dnp(5), dim, Rect{}, std::move(regionlets)};
}

FeatureSet random_features(std::mt19937& rng, int dim) {
  FeatureGrid g(2, 2, 4, 16, 16, dim);
  std::uniform_real_distribution<float> value(0.0f, 1.0f);
  for (Eigen::Index k = 0; k < g.data.size(); ++k)
    g.data.data()[k] = value(rng) < 0.3f ? 0.0f : value(rng);
  FeatureSet fs;
  fs.add(Family::dnp(5), std::move(g));
  return fs;
}

Rect random_rect(std::mt19937& rng) {
  std::uniform_int_distribution<int> q(0, 8);
  int l = q(rng), r = q(rng), t = q(rng), b = q(rng);
  if (l == r) r = l == 8 ? l - 1 : l + 1;
  if (t == b) b = t == 8 ? t - 1 : t + 1;
  return {std::min(l, r) / 8.0, std::min(t, b) / 8.0, std::max(l, r) / 8.0, std::max(t, b) / 8.0};
}

Cascade random_cascade(std::mt19937& rng, int stages, int dim) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), th(0.0, 0.3);
  Cascade c;
  for (int s = 0; s < stages; ++s) {
    CascadeStage stage;
    const int weaks = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < weaks; ++k)
      stage.weaks.push_back({full_config(static_cast<int>(rng() % dim), {random_rect(rng)}),
                             th(rng), u(rng), u(rng)});
    stage.reject_threshold = u(rng) * 0.5;
    c.stages.push_back(std::move(stage));
  }
  return c;
}

PixelRect random_window(std::mt19937& rng) {
  std::uniform_int_distribution<int> pos(0, 40), side(8, 30);
  const double x = pos(rng), y = pos(rng);
  return {x, y, x + side(rng), y + side(rng)};
}

// Score of every stage evaluated in full, then thresholds checked in order.
WindowScore exhaustive(const Cascade& c, const FeatureSet& fs, const PixelRect& w) {
  std::vector<double> totals;
  double total = 0.0;
  for (const auto& stage : c.stages) {
    for (const auto& weak : stage.weaks) total += weak.response(region_feature(fs, w, weak.config));
    totals.push_back(total);
  }
  WindowScore out;
  out.score = total;
  for (std::size_t s = 0; s < c.stages.size(); ++s)
    if (totals[s] < c.stages[s].reject_threshold) {
      out.accepted = false;
      out.rejected_stage = static_cast<int>(s);
      out.score = totals[s];
      break;
    }
  return out;
}

}  // namespace

TEST_CASE("weak classifier response") {
  const WeakClassifier w{full_config(0), 0.5, -2.0, 3.0};
  CHECK(w.response(0.49) == -2.0);
  CHECK(w.response(0.5) == 3.0);
  CHECK(w.response(7.0) == 3.0);
}

TEST_CASE("regression stumps") {
  SUBCASE("separable toy data is fit with zero training error") {
    Eigen::MatrixXf x(6, 1);
    x << 1, 2, 3, 4, 5, 6;
    Eigen::VectorXd y(6);
    y << -1, -1, -1, 1, 1, 1;
    const StageFit fit = boost_stage(x, y, Eigen::VectorXd::Zero(6), 1);
    REQUIRE(fit.stumps.size() == 1);
    CHECK(fit.stumps[0].threshold == doctest::Approx(3.5));
    CHECK(fit.stumps[0].left_value == doctest::Approx(-1.0));
    CHECK(fit.stumps[0].right_value == doctest::Approx(1.0));
    for (int i = 0; i < 6; ++i) CHECK(fit.scores[i] * y[i] > 0);
  }
  SUBCASE("ties keep the smaller threshold") {
    Eigen::VectorXf x(3);
    x << 0, 1, 2;
    Eigen::VectorXd y(3), w = Eigen::VectorXd::Constant(3, 1.0 / 3);
    y << 1, -1, 1;
    const StumpFit s = fit_stump(x, {0, 1, 2}, y, w);
    REQUIRE(s.valid);
    CHECK(s.threshold == 0.5);
    CHECK(s.error == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("constant column has no split") {
    Eigen::VectorXf x = Eigen::VectorXf::Constant(4, 0.25f);
    Eigen::VectorXd y(4), w = Eigen::VectorXd::Constant(4, 0.25);
    y << 1, -1, 1, -1;
    CHECK_FALSE(fit_stump(x, {0, 1, 2, 3}, y, w).valid);
  }
  SUBCASE("error matches direct weighted squared error") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> unit(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 5 + static_cast<int>(rng() % 20);
      Eigen::VectorXf x(n);
      Eigen::VectorXd y(n), w(n);
      for (int i = 0; i < n; ++i) {
        x[i] = static_cast<float>(rng() % 6);
        y[i] = unit(rng) < 0.5 ? -1 : 1;
        w[i] = unit(rng) + 0.01;
      }
      w /= w.sum();
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x[a] < x[b]; });
      const StumpFit s = fit_stump(x, order, y, w);
      if (!s.valid) continue;
      double direct = 0.0;
      for (int i = 0; i < n; ++i) {
        const double pred = x[i] < s.threshold ? s.left_value : s.right_value;
        direct += w[i] * (y[i] - pred) * (y[i] - pred);
      }
      CHECK(s.error == doctest::Approx(direct).epsilon(1e-9));
      // No other midpoint does strictly better.
      for (int t = 0; t < 6; ++t) {
        double wl = 0, wyl = 0, wr = 0, wyr = 0;
        for (int i = 0; i < n; ++i)
          (x[i] < t + 0.5 ? wl : wr) += w[i], (x[i] < t + 0.5 ? wyl : wyr) += w[i] * y[i];
        if (wl == 0 || wr == 0) continue;
        double e = 0;
        for (int i = 0; i < n; ++i) {
          const double pred = x[i] < t + 0.5 ? wyl / wl : wyr / wr;
          e += w[i] * (y[i] - pred) * (y[i] - pred);
        }
        CHECK(s.error <= e + 1e-12);
      }
    }
  }
}

TEST_CASE("boosting soundness on random data") {
  std::mt19937 rng(17);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 200, cols = 12;
    Eigen::MatrixXf x(n, cols);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      y[i] = i % 3 == 0 ? 1 : -1;
      for (int c = 0; c < cols; ++c) x(i, c) = noise(rng) + (c % 4 == 0 ? 0.6f * y[i] : 0.0f);
    }
    std::vector<RoundLog> log;
    const StageFit fit = boost_stage(x, y, Eigen::VectorXd::Zero(n), 15, 0, &log);
    REQUIRE(log.size() == fit.stumps.size());
    REQUIRE(!log.empty());
    double previous = 1.0;
    for (const auto& r : log) {
      CHECK(r.stump_error < r.constant_error);
      CHECK(r.weight_sum == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(r.min_weight > 0.0);
      CHECK(r.training_loss < previous);
      previous = r.training_loss;
    }
  }
}

TEST_CASE("boosting errors") {
  Eigen::MatrixXf x(3, 1);
  x << 1, 2, 3;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(boost_stage(x, Eigen::VectorXd::Ones(3), zero, 1), std::invalid_argument);
  CHECK_THROWS_AS(boost_stage(x, -Eigen::VectorXd::Ones(3), zero, 1), std::invalid_argument);
  CHECK_THROWS_AS(boost_stage(Eigen::MatrixXf(3, 0), Eigen::VectorXd::Ones(3), zero, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(boost_stage(x, Eigen::VectorXd::Ones(2), zero, 1), std::invalid_argument);

  FeatureSet fs = ramp_features();
  TrainImage im{&fs, 32, 32, {{0, 0, 32, 32}}};
  TrainParams p;
  p.scales = {32};
  p.ratios = {1.0};
  p.proposal_stride = 8;
  CHECK_THROWS_AS(train_cascade({im}, {}, p), std::invalid_argument);
  // The only lattice window is the object itself: nothing to use as a negative.
  CHECK_THROWS_AS(train_cascade({im}, {full_config(0)}, p), std::invalid_argument);
  im.objects.clear();
  CHECK_THROWS_AS(train_cascade({im}, {full_config(0)}, p), std::invalid_argument);
}

TEST_CASE("survival threshold") {
  CHECK(survival_threshold({}, 0.99) == -kInf);
  std::vector<double> s(100);
  std::iota(s.begin(), s.end(), 0.0);
  CHECK(survival_threshold(s, 0.99) == 1.0);
  CHECK(survival_threshold(s, 1.0) == 0.0);
  CHECK(survival_threshold({3.0, 1.0, 2.0}, 0.99) == 1.0);
}

TEST_CASE("score_window") {
  const FeatureSet fs = ramp_features();
  const PixelRect window{0, 0, 32, 32};
  SUBCASE("empty cascade passes with score zero") {
    const WindowScore s = score_window(Cascade{}, fs, window);
    CHECK(s.accepted);
    CHECK(s.score == 0.0);
  }
  SUBCASE("minus infinity never rejects") {
    Cascade c;
    c.stages.push_back({{{full_config(0), 100.0, -50.0, 1.0}}, -kInf});
    const WindowScore s = score_window(c, fs, window);
    CHECK(s.accepted);
    CHECK(s.score == -50.0);
  }
  SUBCASE("two weaks sum by hand") {
    // Pooled dim 0 over the whole grid: mean of u+v+1 = 4; two nonzero dims
    // halve it to 2. Dim 1 pools to 1, normalized 0.5.
    Cascade c;
    c.stages.push_back({{{full_config(0), 1.5, -1.0, 0.7}, {full_config(1), 0.6, 0.25, -3.0}}, 0.0});
    const WindowScore s = score_window(c, fs, window);
    CHECK(s.accepted);
    CHECK(s.score == doctest::Approx(0.95));
    // Left half (u = 0, 1): mean 3, normalized 1.5; max with the full rect is 2.
    Cascade m;
    m.stages.push_back(
        {{{full_config(0, {Rect{0, 0, 0.5, 1}}), 1.75, 10.0, 20.0}}, -kInf});
    CHECK(score_window(m, fs, window).score == 10.0);
    m.stages[0].weaks[0].config.regionlets.push_back(Rect{});
    CHECK(score_window(m, fs, window).score == 20.0);
  }
  SUBCASE("rejection reports the stage and the partial score") {
    Cascade c;
    c.stages.push_back({{{full_config(0), 1.5, -1.0, 0.7}}, 0.5});
    c.stages.push_back({{{full_config(1), 0.6, 0.25, -3.0}}, 1.0});
    c.stages.push_back({{{full_config(1), 0.6, 100.0, 100.0}}, 0.0});
    const WindowScore s = score_window(c, fs, window);
    CHECK_FALSE(s.accepted);
    CHECK(s.rejected_stage == 1);
    CHECK(s.score == doctest::Approx(0.95));
  }
  SUBCASE("missing family") {
    Cascade c;
    c.stages.push_back({{{{Family::hog(), 0, Rect{}, {Rect{}}}, 0.0, 0.0, 0.0}}, 0.0});
    CHECK_THROWS_AS(score_window(c, fs, window), std::invalid_argument);
  }
}

TEST_CASE("early exit agrees with exhaustive evaluation") {
  std::mt19937 rng(23);
  int rejected = 0, accepted = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const FeatureSet fs = random_features(rng, 4);
    const Cascade c = random_cascade(rng, 1 + static_cast<int>(rng() % 4), 4);
    for (int k = 0; k < 10; ++k) {
      const PixelRect w = random_window(rng);
      const WindowScore fast = score_window(c, fs, w), full = exhaustive(c, fs, w);
      CHECK(fast.accepted == full.accepted);
      CHECK(fast.rejected_stage == full.rejected_stage);
      CHECK(fast.score == full.score);
      (fast.accepted ? accepted : rejected) += 1;
    }
  }
  CHECK(accepted > 0);
  CHECK(rejected > 0);
}

TEST_CASE("adding a stage never accepts more windows") {
  std::mt19937 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const FeatureSet fs = random_features(rng, 3);
    const Cascade full = random_cascade(rng, 4, 3);
    for (std::size_t n = 1; n < full.stages.size(); ++n) {
      Cascade shorter = full, longer = full;
      shorter.stages.resize(n);
      longer.stages.resize(n + 1);
      for (int k = 0; k < 10; ++k) {
        const PixelRect w = random_window(rng);
        if (score_window(longer, fs, w).accepted) CHECK(score_window(shorter, fs, w).accepted);
      }
    }
  }
}

TEST_CASE("iou") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {10, 0, 20, 10}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0));
  CHECK(iou({0, 0, 12, 1}, {4, 0, 16, 1}) == doctest::Approx(0.5));
  CHECK(iou({0, 0, 0, 0}, {0, 0, 0, 0}) == 0.0);
}


TEST_CASE("nms") {
  SUBCASE("disjoint boxes all survive") {
    const auto kept = nms({{{0, 0, 5, 5}, 0.3, ""}, {{10, 0, 15, 5}, 0.9, ""}, {{20, 0, 25, 5}, 0.5, ""}}, 0.5);
    REQUIRE(kept.size() == 3);
    CHECK(kept[0].score == 0.9);
    CHECK(kept[2].score == 0.3);
  }
  SUBCASE("identical boxes keep the higher score") {
    const auto kept = nms({{{0, 0, 5, 5}, 0.3, ""}, {{0, 0, 5, 5}, 0.8, ""}}, 0.5);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].score == 0.8);
  }
  SUBCASE("chain of half-overlapping boxes alternates") {
    std::vector<Detection> chain;
    for (int k = 0; k < 7; ++k) chain.push_back({{4.0 * k, 0, 4.0 * k + 12, 10}, 1.0 - 0.1 * k, ""});
    const auto kept = nms(chain, 0.4);
    REQUIRE(kept.size() == 4);
    for (int k = 0; k < 4; ++k) CHECK(kept[k].box.left == 8.0 * k);
  }
  SUBCASE("empty input") { CHECK(nms({}, 0.5).empty()); }
}

TEST_CASE("nms matches the subset oracle") {
  std::mt19937 rng(31);
  std::uniform_int_distribution<int> pos(0, 20), side(3, 14), score(0, 5);
  std::uniform_real_distribution<double> thr(0.1, 0.8);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = static_cast<int>(rng() % 9);
    std::vector<Detection> dets;
    for (int i = 0; i < n; ++i) {
      const double x = pos(rng), y = pos(rng);
      // Coarse scores force ties, which must keep input order.
      dets.push_back({{x, y, x + side(rng), y + side(rng)}, score(rng) / 5.0, std::to_string(i)});
    }
    const double t = thr(rng);
    int solutions = 0;
    const std::vector<int> expect = oracle::nms_subset(dets, t, &solutions);
    REQUIRE(solutions == 1);
    const auto kept = nms(dets, t);
    REQUIRE(kept.size() == expect.size());
    for (std::size_t k = 0; k < kept.size(); ++k) {
      CHECK(kept[k].label == dets[expect[k]].label);
      CHECK(kept[k].box == dets[expect[k]].box);
    }
    for (std::size_t a = 0; a < kept.size(); ++a)
      for (std::size_t b = a + 1; b < kept.size(); ++b) {
        CHECK(iou(kept[a].box, kept[b].box) <= t);
        CHECK(kept[a].score >= kept[b].score);
      }
  }
}

TEST_CASE("propose_grid") {
  SUBCASE("scale equal to the image gives one window") {
    const auto w = propose_grid(64, 64, {64}, {1.0}, 8);
    REQUIRE(w.size() == 1);
    CHECK(w[0] == PixelRect{0, 0, 64, 64});
  }
  SUBCASE("stride beyond the image gives one window per scale") {
    const auto w = propose_grid(50, 40, {16, 24}, {1.0}, 100);
    REQUIRE(w.size() == 2);
    CHECK(w[0] == PixelRect{0, 0, 16, 16});
    CHECK(w[1] == PixelRect{0, 0, 24, 24});
  }
  SUBCASE("lattice count on 640x480") {
    const std::vector<int> scales{64, 128};
    const std::vector<double> ratios{1.0, 2.0};
    std::size_t expect = 0;
    for (int s : scales)
      for (double r : ratios) {
        const long w = std::lround(s * std::sqrt(r)), h = std::lround(s / std::sqrt(r));
        expect += static_cast<std::size_t>(((640 - w) / 32 + 1) * ((480 - h) / 32 + 1));
      }
    const auto windows = propose_grid(640, 480, scales, ratios, 32);
    CHECK(windows.size() == expect);
    // 64x64: 19 x 14 positions; 128x128: 17 x 12.
    CHECK(propose_grid(640, 480, {64}, {1.0}, 32).size() == 19 * 14);
    CHECK(propose_grid(640, 480, {128}, {1.0}, 32).size() == 17 * 12);
    for (const auto& r : windows) {
      CHECK(r.left >= 0);
      CHECK(r.top >= 0);
      CHECK(r.right <= 640);
      CHECK(r.bottom <= 480);
    }
  }
  SUBCASE("windows larger than the image are clipped") {
    const auto w = propose_grid(30, 20, {64}, {1.0}, 8);
    REQUIRE(w.size() == 1);
    CHECK(w[0] == PixelRect{0, 0, 30, 20});
  }
  CHECK_THROWS_AS(propose_grid(10, 10, {4}, {1.0}, 0), std::invalid_argument);
}

TEST_CASE("detect over precomputed features") {
  const FeatureSet fs = ramp_features();
  SUBCASE("no proposals") { CHECK(detect(fs, {}, Cascade{}).empty()); }
  SUBCASE("always-pass cascade returns the proposal") {
    const auto d = detect(fs, {{0, 0, 16, 16}}, Cascade{});
    REQUIRE(d.size() == 1);
    CHECK(d[0].box == PixelRect{0, 0, 16, 16});
    CHECK(d[0].label == "target");
  }
  SUBCASE("duplicates collapse") {
    CHECK(detect(fs, {{0, 0, 16, 16}, {0, 0, 16, 16}, {0, 0, 16, 16}}, Cascade{}).size() == 1);
  }
  SUBCASE("rejected windows are dropped and the rest sorted") {
    // Dim 0 is larger toward the bottom right.
    Cascade c;
    c.stages.push_back({{{full_config(0), 1.0, -1.0, 1.0}, {full_config(0), 2.0, 0.0, 1.0}}, 0.5});
    const auto d = detect(fs, {{0, 0, 8, 8}, {16, 16, 32, 32}, {8, 8, 24, 24}}, c);
    REQUIRE(d.size() == 2);
    CHECK(d[0].box == PixelRect{16, 16, 32, 32});
    CHECK(d[0].score == 2.0);
    CHECK(d[1].box == PixelRect{8, 8, 24, 24});
  }
}

TEST_CASE("cascade file round trip") {
  std::mt19937 rng(37);
  Cascade c = random_cascade(rng, 3, 4);
  c.stages[0].reject_threshold = -kInf;
  c.stages[1].weaks.push_back(c.stages[0].weaks[0]);  // shared config
  c.meta = {99, 10000, 123, 456, "l0"};
  std::stringstream ss;
  write_cascade(ss, c);
  const Cascade back = read_cascade(ss);
  REQUIRE(back.stages.size() == c.stages.size());
  CHECK(back.meta.seed == 99);
  CHECK(back.meta.pool_size == 10000);
  CHECK(back.meta.positives == 123);
  CHECK(back.meta.negatives == 456);
  CHECK(back.meta.normalizer == "l0");
  CHECK(std::isinf(back.stages[0].reject_threshold));
  for (std::size_t s = 0; s < c.stages.size(); ++s) {
    CHECK(back.stages[s].reject_threshold == c.stages[s].reject_threshold);
    REQUIRE(back.stages[s].weaks.size() == c.stages[s].weaks.size());
    for (std::size_t k = 0; k < c.stages[s].weaks.size(); ++k) {
      const auto& a = c.stages[s].weaks[k];
      const auto& b = back.stages[s].weaks[k];
      CHECK(a.threshold == b.threshold);
      CHECK(a.left_value == b.left_value);
      CHECK(a.right_value == b.right_value);
      CHECK(a.config == b.config);
    }
  }
  // The shared config is listed once.
  std::stringstream again;
  write_cascade(again, back);
  CHECK(again.str() == ss.str());

  for (const char* bad : {"", "DNPC 2\n", "DNPC 1\nmeta seed 1 colour 3\n",
                          "DNPC 1\nmeta seed 1\nconfigs 0\nstages 1\nstage 0 1\n7 0 0 0\n",
                          "DNPC 1\nmeta seed 1\nconfigs 0\nstages 1\nstage zero 0\n"}) {
    std::istringstream in(bad);
    CHECK_THROWS_AS(read_cascade(in), std::invalid_argument);
  }
  CHECK_THROWS(load_cascade("/nonexistent/dir/cascade.txt"));
}

TEST_CASE("small end-to-end training run") {
  // Bright squares on a dark background, features from a plain HOG grid.
  std::mt19937 rng(41);
  std::vector<Image> images;
  std::vector<FeatureSet> features;
  std::vector<std::vector<PixelRect>> objects;
  for (int k = 0; k < 6; ++k) {
    Image im(128, 128, 1);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) im.at(x, y, 0) = static_cast<std::uint8_t>(20 + rng() % 30);
    const int x0 = 8 + static_cast<int>(rng() % 60), y0 = 8 + static_cast<int>(rng() % 60);
    for (int y = y0; y < y0 + 48; ++y)
      for (int x = x0; x < x0 + 48; ++x) im.at(x, y, 0) = 220;
    objects.push_back({{double(x0), double(y0), double(x0 + 48), double(y0 + 48)}});
    FeatureSet fs;
    fs.add(Family::hog(), hog_extract(im));
    features.push_back(std::move(fs));
    images.push_back(std::move(im));
  }
  std::vector<TrainImage> train;
  for (int k = 0; k < 6; ++k) train.push_back({&features[k], 128, 128, objects[k]});
  const auto pool = sample_configurations(3, 80, {{Family::hog(), 36}});
  TrainParams p;
  p.stages = 2;
  p.weaks_per_stage = 6;
  p.negatives_per_stage = 150;
  p.scales = {48};
  p.ratios = {1.0};
  p.proposal_stride = 8;
  TrainReport report;
  const Cascade c = train_cascade(train, pool, p, &report);
  REQUIRE(!c.stages.empty());
  CHECK(c.stages.size() <= 2);
  for (const auto& stage : c.stages) {
    CHECK(!stage.weaks.empty());
    CHECK(stage.weaks.size() <= 6);
  }
  CHECK(c.meta.pool_size == 80);
  CHECK(c.families() == std::vector<Family>{Family::hog()});
  for (std::size_t s = 1; s < report.positives_per_stage.size(); ++s)
    CHECK(report.positives_per_stage[s] <= report.positives_per_stage[s - 1]);
  // Every ground-truth window survives.
  for (int k = 0; k < 6; ++k)
    CHECK(score_window(c, features[k], objects[k][0]).accepted);
  const auto dets = detect(features[0], propose_grid(128, 128, {48}, {1.0}, 8), c);
  REQUIRE(!dets.empty());
  CHECK(iou(dets[0].box, objects[0][0]) > 0.5);
}
