#include "dnp/regionlet.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dnp {

PixelRect to_pixels(const PixelRect& window, const Rect& r) {
  const double w = window.width(), h = window.height();
  return {window.left + r.left * w, window.top + r.top * h, window.left + r.right * w,
          window.top + r.bottom * h};
}

std::string Family::name() const {
  return kind == FamilyKind::hog ? "hog" : "dnp" + std::to_string(layer);
}

Family Family::parse(const std::string& token) {
  if (token == "hog") return hog();
  if (token.size() > 3 && token.compare(0, 3, "dnp") == 0) {
    std::size_t used = 0;
    const int layer = std::stoi(token.substr(3), &used);
    if (used == token.size() - 3 && layer >= 1) return dnp(layer);
  }
  throw std::invalid_argument("unknown feature family '" + token + "'");
}

std::pair<int, int> covered_points(int origin, int stride, int count, double lo, double hi) {
  auto coord = [&](int k) { return static_cast<double>(origin + k * stride); };
  auto clamp = [&](double k) {
    return static_cast<int>(std::clamp(k, 0.0, static_cast<double>(count)));
  };
  int first = clamp(std::ceil((lo - origin) / stride));
  while (first > 0 && coord(first - 1) >= lo) --first;
  while (first < count && coord(first) < lo) ++first;
  int last = clamp(std::ceil((hi - origin) / stride));
  while (last > 0 && coord(last - 1) >= hi) --last;
  while (last < count && coord(last) < hi) ++last;
  return {first, std::max(first, last)};
}

namespace {

struct Coverage {
  int u0, u1, v0, v1;
  int count() const { return (u1 - u0) * (v1 - v0); }
};

Coverage coverage(const FeatureGrid& grid, const PixelRect& window, const Rect& r) {
  const PixelRect px = to_pixels(window, r);
  if (!(px.width() > 0) || !(px.height() > 0))
    throw std::invalid_argument("regionlet has empty pixel area");
  const auto [u0, u1] = covered_points(grid.origin_x, grid.stride, grid.cols, px.left, px.right);
  const auto [v0, v1] = covered_points(grid.origin_y, grid.stride, grid.rows, px.top, px.bottom);
  return {u0, u1, v0, v1};
}

}  // namespace

Eigen::VectorXd pool_regionlet(const FeatureGrid& grid, const PixelRect& window, const Rect& r) {
  const Coverage c = coverage(grid, window, r);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(grid.dim);
  if (c.count() == 0) return sum;
  for (int v = c.v0; v < c.v1; ++v)
    for (int u = c.u0; u < c.u1; ++u) sum += grid.point(u, v).cast<double>();
  return sum / static_cast<double>(c.count());
}

Eigen::VectorXd normalize_l0(const Eigen::VectorXd& v) {
  const auto nonzero = (v.array() != 0.0).count();
  if (nonzero == 0) return v;
  return v / static_cast<double>(nonzero);
}

Eigen::VectorXd normalize_l1(const Eigen::VectorXd& v) {
  const double l1 = v.lpNorm<1>();
  if (l1 == 0.0) return v;
  return v / l1;
}

Eigen::VectorXd normalize(const Eigen::VectorXd& v, Normalizer n) {
  return n == Normalizer::l0 ? normalize_l0(v) : normalize_l1(v);
}

// --- FeatureSet ------------------------------------------------------------------

void FeatureSet::add(const Family& family, FeatureGrid grid) {
  Entry e;
  e.nonnegative = grid.data.size() == 0 || grid.data.minCoeff() >= 0.0f;
  const std::size_t points = static_cast<std::size_t>(grid.cols) * grid.rows;
  if (e.nonnegative && points < std::numeric_limits<std::uint16_t>::max()) {
    const std::size_t stride_u = grid.dim, stride_v = (grid.cols + 1) * stride_u;
    e.nonzero_integral.assign((grid.rows + 1) * stride_v, 0);
    for (int v = 0; v < grid.rows; ++v)
      for (int u = 0; u < grid.cols; ++u) {
        const auto p = grid.point(u, v);
        std::uint16_t* out = &e.nonzero_integral[(v + 1) * stride_v + (u + 1) * stride_u];
        const std::uint16_t* up = out - stride_v;
        const std::uint16_t* left = out - stride_u;
        const std::uint16_t* diag = up - stride_u;
        for (int d = 0; d < grid.dim; ++d)
          out[d] = static_cast<std::uint16_t>(up[d] + left[d] - diag[d] + (p[d] != 0.0f ? 1 : 0));
      }
  } else {
    e.nonnegative = false;
  }
  e.grid = std::move(grid);
  entries_[family] = std::move(e);
}

const FeatureSet::Entry& FeatureSet::entry(const Family& family) const {
  const auto it = entries_.find(family);
  if (it == entries_.end())
    throw std::out_of_range("feature family '" + family.name() + "' not computed");
  return it->second;
}

const FeatureGrid& FeatureSet::grid(const Family& family) const { return entry(family).grid; }

bool FeatureSet::nonnegative(const Family& family) const { return entry(family).nonnegative; }

std::vector<Family> FeatureSet::families() const {
  std::vector<Family> out;
  for (const auto& [f, e] : entries_) out.push_back(f);
  return out;
}

int FeatureSet::nonzero_dims(const Family& family, int u0, int u1, int v0, int v1) const {
  const Entry& e = entry(family);
  if (!e.nonnegative) throw std::logic_error("nonzero_dims needs a nonnegative grid");
  const std::size_t su = e.grid.dim, sv = (e.grid.cols + 1) * su;
  const std::uint16_t* a = &e.nonzero_integral[v0 * sv + u0 * su];
  const std::uint16_t* b = &e.nonzero_integral[v0 * sv + u1 * su];
  const std::uint16_t* c = &e.nonzero_integral[v1 * sv + u0 * su];
  const std::uint16_t* d = &e.nonzero_integral[v1 * sv + u1 * su];
  int nonzero = 0;
  for (int k = 0; k < e.grid.dim; ++k) nonzero += (d[k] + a[k] - b[k] - c[k]) > 0 ? 1 : 0;
  return nonzero;
}

double region_feature_reference(const FeatureSet& features, const PixelRect& window,
                                const RegionletConfig& cfg, Normalizer normalizer) {
  const FeatureGrid& grid = features.grid(cfg.family);
  if (cfg.dim < 0 || cfg.dim >= grid.dim)
    throw std::out_of_range("config dimension outside family dimension");
  double best = -std::numeric_limits<double>::infinity();
  for (const Rect& r : cfg.regionlets)
    best = std::max(best, normalize(pool_regionlet(grid, window, r), normalizer)[cfg.dim]);
  return best;
}

double region_feature(const FeatureSet& features, const PixelRect& window,
                      const RegionletConfig& cfg, Normalizer normalizer) {
  if (normalizer != Normalizer::l0 || !features.nonnegative(cfg.family))
    return region_feature_reference(features, window, cfg, normalizer);
  const FeatureGrid& grid = features.grid(cfg.family);
  if (cfg.dim < 0 || cfg.dim >= grid.dim)
    throw std::out_of_range("config dimension outside family dimension");
  double best = -std::numeric_limits<double>::infinity();
  for (const Rect& r : cfg.regionlets) {
    const Coverage c = coverage(grid, window, r);
    double value = 0.0;
    if (c.count() > 0) {
      // Same accumulation order as pool_regionlet, restricted to one row.
      double sum = 0.0;
      for (int v = c.v0; v < c.v1; ++v)
        for (int u = c.u0; u < c.u1; ++u) sum += grid.data(cfg.dim, grid.index(u, v));
      if (sum != 0.0) {
        const int nonzero = features.nonzero_dims(cfg.family, c.u0, c.u1, c.v0, c.v1);
        value = (sum / static_cast<double>(c.count())) / static_cast<double>(nonzero);
      }
    }
    best = std::max(best, value);
  }
  return best;
}

// --- configuration pool ---------------------------------------------------------

namespace {

double quantize(double x) { return std::round(x * 1e6) / 1e6; }

}  // namespace

std::vector<RegionletConfig> sample_configurations(std::uint64_t seed, int count,
                                                   const std::vector<FamilyDim>& families,
                                                   int k_max) {
  if (count < 1) throw std::invalid_argument("sample_configurations: count must be >= 1");
  if (families.empty()) throw std::invalid_argument("sample_configurations: no families");
  if (k_max < 1) throw std::invalid_argument("sample_configurations: k_max must be >= 1");
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto lattice_pair = [&]() {
    const int a = uniform(0, 16);
    int b = uniform(0, 15);
    if (b >= a) ++b;
    return std::pair{std::min(a, b), std::max(a, b)};
  };

  std::vector<RegionletConfig> pool;
  pool.reserve(count);
  for (int n = 0; n < count; ++n) {
    const FamilyDim& fd = families[uniform(0, static_cast<int>(families.size()) - 1)];
    RegionletConfig cfg;
    cfg.family = fd.family;
    cfg.dim = uniform(0, fd.dim - 1);
    const auto [l, r] = lattice_pair();
    const auto [t, b] = lattice_pair();
    cfg.region = {l / 16.0, t / 16.0, r / 16.0, b / 16.0};
    const int k = uniform(1, k_max);
    const double w = cfg.region.right - cfg.region.left;
    const double h = cfg.region.bottom - cfg.region.top;
    for (int j = 0; j < k; ++j) {
      const auto [rl, rr] = lattice_pair();
      const auto [rt, rb] = lattice_pair();
      cfg.regionlets.push_back({quantize(cfg.region.left + w * rl / 16.0),
                                quantize(cfg.region.top + h * rt / 16.0),
                                quantize(cfg.region.left + w * rr / 16.0),
                                quantize(cfg.region.top + h * rb / 16.0)});
    }
    pool.push_back(std::move(cfg));
  }
  return pool;
}

std::string format_config(const RegionletConfig& cfg) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  out << cfg.family.name() << ' ' << cfg.dim << ' ' << cfg.region.left << ' ' << cfg.region.top
      << ' ' << cfg.region.right << ' ' << cfg.region.bottom << ' ' << cfg.regionlets.size();
  for (const Rect& r : cfg.regionlets)
    out << ' ' << r.left << ' ' << r.top << ' ' << r.right << ' ' << r.bottom;
  return out.str();
}

RegionletConfig parse_config(const std::string& line) {
  std::istringstream in(line);
  std::string family;
  RegionletConfig cfg;
  std::size_t k = 0;
  if (!(in >> family >> cfg.dim >> cfg.region.left >> cfg.region.top >> cfg.region.right >>
        cfg.region.bottom >> k))
    throw std::invalid_argument("malformed config line: '" + line + "'");
  cfg.family = Family::parse(family);
  if (k < 1) throw std::invalid_argument("config needs at least one regionlet");
  cfg.regionlets.resize(k);
  for (Rect& r : cfg.regionlets)
    if (!(in >> r.left >> r.top >> r.right >> r.bottom))
      throw std::invalid_argument("truncated config line: '" + line + "'");
  std::string extra;
  if (in >> extra) throw std::invalid_argument("trailing fields in config line");
  return cfg;
}

void write_configs(std::ostream& out, const std::vector<RegionletConfig>& pool) {
  for (const auto& cfg : pool) out << format_config(cfg) << '\n';
}

std::vector<RegionletConfig> read_configs(std::istream& in) {
  std::vector<RegionletConfig> pool;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    pool.push_back(parse_config(line));
  }
  return pool;
}

}  // namespace dnp
