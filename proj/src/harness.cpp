#include "dnp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

namespace dnp {

namespace fs = std::filesystem;

BenchReport bench_convolutions(int width, int height, int proposals, const NetSpec& net,
                               int layer, TilingMode mode) {
  if (proposals < 0) throw std::invalid_argument("bench: negative proposal count");
  const TilingPlan plan = plan_tiling(width, height, net, layer, mode);
  BenchReport r;
  r.image_width = width;
  r.image_height = height;
  r.layer = layer;
  r.proposals = proposals;
  r.dense = plan.crop_count();
  r.per_region = proposals;
  r.ratio = static_cast<double>(r.per_region) / r.dense;
  return r;
}

void time_bench(BenchReport& report, const NetSpec& net, const WeightSet& weights,
                TilingMode mode, int samples) {
  using clock = std::chrono::steady_clock;
  std::mt19937 rng(1);
  Image image(report.image_width, report.image_height, net.input_channels);
  for (auto& p : image.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  const Tensor input = to_input(image, net.input_channels);

  auto t0 = clock::now();
  network_convolution(net, weights, input, report.layer, mode);
  report.dense_seconds = std::chrono::duration<double>(clock::now() - t0).count();

  samples = std::max(1, std::min(samples, std::max(report.proposals, 1)));
  t0 = clock::now();
  for (int k = 0; k < samples; ++k) extract_crop_features(net, weights, input, 0, 0, report.layer);
  const double each = std::chrono::duration<double>(clock::now() - t0).count() / samples;
  report.per_region_seconds = each * report.proposals;
}

void print_bench(std::ostream& out, const BenchReport& r) {
  out << "image        " << r.image_width << "x" << r.image_height << "\n"
      << "layer        " << r.layer << "\n"
      << "proposals    " << r.proposals << "\n"
      << "dense        " << r.dense << " model convolutions\n"
      << "per-region   " << r.per_region << " model convolutions\n"
      << "ratio        " << std::fixed << std::setprecision(1) << r.ratio << "x\n";
  if (r.dense_seconds && r.per_region_seconds)
    out << "wall-clock   dense " << std::setprecision(2) << *r.dense_seconds << " s, per-region "
        << *r.per_region_seconds << " s (estimated; non-normative, this machine only)\n";
  out << std::defaultfloat;
}

void print_bench_csv(std::ostream& out, const std::vector<BenchReport>& reports) {
  out << "width,height,layer,proposals,dense,per_region,ratio,dense_s,per_region_s\n";
  for (const auto& r : reports) {
    out << r.image_width << ',' << r.image_height << ',' << r.layer << ',' << r.proposals << ','
        << r.dense << ',' << r.per_region << ',' << std::setprecision(6) << r.ratio << ',';
    if (r.dense_seconds) out << *r.dense_seconds;
    out << ',';
    if (r.per_region_seconds) out << *r.per_region_seconds;
    out << '\n';
  }
}

PatternReport visualize_top_patterns(const Cascade& cascade, const NetSpec& net,
                                     const std::vector<PatternSource>& sources, int k) {
  if (k < 0) throw std::invalid_argument("visualize: k must be >= 0");
  std::map<std::pair<Family, int>, int> counts;
  for (const auto& stage : cascade.stages)
    for (const auto& w : stage.weaks)
      if (w.config.family.kind == FamilyKind::dnp) ++counts[{w.config.family, w.config.dim}];
  if (counts.empty()) throw std::invalid_argument("visualize: cascade uses no DNP family");

  PatternReport report;
  for (const auto& [key, n] : counts) report.histogram.push_back({key.first, key.second, n});
  std::stable_sort(report.histogram.begin(), report.histogram.end(),
                   [](const DimCount& a, const DimCount& b) { return a.count > b.count; });
  const DimCount top = report.histogram.front();
  const int side = static_cast<int>(receptive_field_extent(net, top.family.layer));
  report.side = side;
  if (k == 0) return report;

  struct Hit {
    double value;
    std::size_t source;
    int u, v;
  };
  std::vector<Hit> hits;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const FeatureGrid& g = sources[s].features->grid(top.family);
    for (int v = 0; v < g.rows; ++v)
      for (int u = 0; u < g.cols; ++u) hits.push_back({g.point(u, v)(top.dim), s, u, v});
  }
  const auto n = std::min<std::size_t>(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + n, hits.end(), [](const Hit& a, const Hit& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.source != b.source) return a.source < b.source;
    return a.v != b.v ? a.v < b.v : a.u < b.u;
  });

  const int half = (side - 1) / 2;
  for (std::size_t h = 0; h < n; ++h) {
    const auto& src = sources[hits[h].source];
    const FeatureGrid& g = src.features->grid(top.family);
    Patch p;
    p.image_id = src.image_id;
    p.center_x = g.x(hits[h].u);
    p.center_y = g.y(hits[h].v);
    p.value = hits[h].value;
    const Image& im = *src.image;
    p.pixels = Image(side, side, im.channels);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const int ix = p.center_x - half + x, iy = p.center_y - half + y;
        if (ix < 0 || iy < 0 || ix >= im.width || iy >= im.height) continue;
        for (int c = 0; c < im.channels; ++c) p.pixels.at(x, y, c) = im.at(ix, iy, c);
      }
    report.patches.push_back(std::move(p));
  }
  return report;
}

void write_pattern_report(const std::string& dir, const PatternReport& report) {
  fs::create_directories(dir);
  std::ofstream hist(fs::path(dir) / "histogram.tsv");
  hist << "family\tdim\tcount\n";
  for (const auto& h : report.histogram)
    hist << h.family.name() << '\t' << h.dim << '\t' << h.count << '\n';
  std::ofstream index(fs::path(dir) / "index.tsv");
  index << "file\timage_id\tcenter_x\tcenter_y\tside\tvalue\n" << std::setprecision(9);
  for (std::size_t i = 0; i < report.patches.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "patch_%03zu.ppm", i);
    const auto& p = report.patches[i];
    write_pnm((fs::path(dir) / name).string(), p.pixels);
    index << name << '\t' << p.image_id << '\t' << p.center_x << '\t' << p.center_y << '\t'
          << report.side << '\t' << p.value << '\n';
  }
  if (!hist || !index) throw std::runtime_error("cannot write report under '" + dir + "'");
}

void for_each_index(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i; !failed && (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace dnp
