// Command-line front end: geometry tables, feature extraction, training,
// detection, evaluation, benchmarking and visualization.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dnp/dataset.hpp"
#include "dnp/detector.hpp"
#include "dnp/evaluation.hpp"
#include "dnp/harness.hpp"

namespace fs = std::filesystem;
using namespace dnp;

namespace {

// Thrown for bad input data (as opposed to bad command-line usage).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

NetSpec resolve_net(const std::string& token) {
  if (fs::exists(token)) return load_netspec(token);
  if (token == "paper") return paper_net();
  if (token == "tiny") return tiny_net();
  throw DataError("no net file or built-in net named '" + token + "'");
}

struct NetOptions {
  std::string net = "tiny";
  std::string weights;
  std::uint64_t weight_seed = 1;
  bool keep_dc = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--net", net, "net file, or 'paper' / 'tiny'")->capture_default_str();
    cmd->add_option("--weights", weights, "weight file (random weights when omitted)");
    cmd->add_option("--weight-seed", weight_seed, "seed for random weights")->capture_default_str();
    cmd->add_flag("--keep-dc", keep_dc, "leave random first-layer kernels uncentered");
  }
  WeightSet random(const NetSpec& n) const {
    WeightSet w = init_weights(n, weight_seed);
    if (!keep_dc) remove_input_dc(w);
    return w;
  }
  NetSpec spec() const { return resolve_net(net); }
  WeightSet load(const NetSpec& n) const {
    return weights.empty() ? random(n) : load_weights(weights, n);
  }
};

std::vector<Family> parse_families(const std::vector<std::string>& tokens) {
  std::vector<Family> out;
  for (const auto& t : tokens) out.push_back(Family::parse(t));
  return out;
}

TilingMode parse_mode(const std::string& m) {
  return m == "clamped" ? TilingMode::clamped : TilingMode::covering;
}

struct LoadedImage {
  const ManifestEntry* entry;
  Image image;
  FeatureSet features;
};

std::vector<LoadedImage> load_split(const DatasetManifest& m, const std::string& split,
                                    const FeaturePipeline& pipeline, int workers) {
  const auto entries = m.split(split);
  if (entries.empty()) throw DataError("split '" + split + "' of '" + m.root + "' is empty");
  std::vector<LoadedImage> out(entries.size());
  for_each_index(static_cast<int>(entries.size()), workers, [&](int i) {
    out[i].entry = entries[i];
    out[i].image = read_pnm(m.image_path(*entries[i]));
    out[i].features = compute_features(pipeline, out[i].image);
  });
  return out;
}

struct ProposalOptions {
  std::string file;
  std::vector<int> scales = {32, 48, 64, 96};
  std::vector<double> ratios = {0.75, 1.0, 1.333};
  int stride = 8;

  void add(CLI::App* cmd) {
    cmd->add_option("--proposals", file, "CSV image_id,left,top,right,bottom");
    cmd->add_option("--scales", scales, "grid proposal sides")->capture_default_str();
    cmd->add_option("--ratios", ratios, "grid proposal aspect ratios")->capture_default_str();
    cmd->add_option("--stride", stride, "grid proposal stride")->capture_default_str();
  }
};

int run_table(const std::string& net_token, bool csv, bool zero_based) {
  const auto rows = geometry_table(resolve_net(net_token),
                                   zero_based ? Convention::exact : Convention::table);
  if (csv)
    print_table_csv(std::cout, rows);
  else
    print_table(std::cout, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense neural pattern extraction and regionlet detection"};
  app.require_subcommand(1);
  int workers = 1;
  app.add_option("--workers", workers, "threads for per-image work")->capture_default_str();

  // table
  auto* table = app.add_subcommand("table", "receptive-field geometry per layer");
  std::string table_net = "paper";
  bool table_csv = false, zero_based = false;
  table->add_option("--net", table_net, "net file, or 'paper' / 'tiny'")->capture_default_str();
  table->add_flag("--csv", table_csv, "CSV output");
  table->add_flag("--zero-based", zero_based, "0-based, padding-aware coordinates");

  // init
  auto* init = app.add_subcommand("init", "write random weights for a net");
  NetOptions init_net;
  std::string init_out;
  init_net.add(init);
  init->add_option("--out", init_out, "weight file")->required();

  // forward
  auto* forward = app.add_subcommand("forward", "run one crop through the net");
  NetOptions fwd_net;
  std::string fwd_image, fwd_out;
  int fwd_layer = 0, fwd_x = 0, fwd_y = 0;
  fwd_net.add(forward);
  forward->add_option("--image", fwd_image, "PGM/PPM image")->required();
  forward->add_option("--layer", fwd_layer, "active layer index (default: last)");
  forward->add_option("--x", fwd_x, "crop left edge")->capture_default_str();
  forward->add_option("--y", fwd_y, "crop top edge")->capture_default_str();
  forward->add_option("--out", fwd_out, "tensor file");

  // extract
  auto* extract = app.add_subcommand("extract", "dense features of one image");
  NetOptions ext_net;
  std::string ext_image, ext_out, ext_family = "dnp5", ext_mode = "covering";
  ext_net.add(extract);
  extract->add_option("--image", ext_image, "PGM/PPM image")->required();
  extract->add_option("--family", ext_family, "dnp<L> or hog")->capture_default_str();
  extract->add_option("--mode", ext_mode, "tiling mode")
      ->check(CLI::IsMember({"covering", "clamped"}))
      ->capture_default_str();
  extract->add_option("--out", ext_out, "grid file");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::uint64_t synth_seed = 2024;
  int n_train = 200, n_test = 50;
  SynthSpec synth_spec;
  std::string synth_out;
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--train", n_train)->capture_default_str()->check(CLI::NonNegativeNumber);
  synth->add_option("--test", n_test)->capture_default_str()->check(CLI::NonNegativeNumber);
  synth->add_option("--width", synth_spec.width)->capture_default_str();
  synth->add_option("--height", synth_spec.height)->capture_default_str();
  synth->add_option("--out", synth_out, "dataset directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train a regionlet cascade");
  NetOptions train_net;
  std::string train_data, train_out;
  std::vector<std::string> train_families = {"dnp5"};
  int pool_size = 10000;
  std::uint64_t pool_seed = 11;
  TrainParams params;
  std::string normalizer = "l0";
  train_net.add(train);
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--families", train_families, "dnp<L> and/or hog")
      ->delimiter(',')
      ->capture_default_str();
  train->add_option("--pool", pool_size, "sampled configurations")->capture_default_str();
  train->add_option("--pool-seed", pool_seed)->capture_default_str();
  train->add_option("--stages", params.stages)->capture_default_str();
  train->add_option("--weaks", params.weaks_per_stage)->capture_default_str();
  train->add_option("--negatives", params.negatives_per_stage)->capture_default_str();
  train->add_option("--seed", params.seed, "sampling seed")->capture_default_str();
  train->add_option("--normalizer", normalizer)
      ->check(CLI::IsMember({"l0", "l1"}))
      ->capture_default_str();
  train->add_option("--out", train_out, "cascade file")->required();

  // detect
  auto* det = app.add_subcommand("detect", "score proposals with a cascade");
  NetOptions det_net;
  ProposalOptions det_props;
  std::string det_cascade, det_data, det_split = "test", det_image, det_out;
  double nms_iou = 0.5;
  det_net.add(det);
  det_props.add(det);
  det->add_option("--cascade", det_cascade)->required();
  auto* det_data_opt = det->add_option("--data", det_data, "dataset directory");
  det->add_option("--split", det_split)->capture_default_str();
  det->add_option("--image", det_image, "single image instead of a dataset")
      ->excludes(det_data_opt);
  det->add_option("--nms-iou", nms_iou)->capture_default_str();
  det->add_option("--out", det_out, "detections CSV (stdout when omitted)");

  // eval
  auto* eval = app.add_subcommand("eval", "average precision of a detections file");
  std::string eval_data, eval_split = "test", eval_dets, eval_mode = "all";
  double eval_iou = 0.5;
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--split", eval_split)->capture_default_str();
  eval->add_option("--detections", eval_dets)->required();
  eval->add_option("--iou", eval_iou)->capture_default_str();
  eval->add_option("--mode", eval_mode)->check(CLI::IsMember({"all", "11"}))->capture_default_str();

  // bench
  auto* bench = app.add_subcommand("bench", "count model convolutions");
  NetOptions bench_net;
  bench_net.net = "paper";
  int bench_w = 640, bench_h = 480, bench_props = 2213, bench_layer = 0;
  bool bench_csv = false, bench_time = false;
  std::string bench_mode = "covering";
  bench_net.add(bench);
  bench->add_option("--width", bench_w)->capture_default_str();
  bench->add_option("--height", bench_h)->capture_default_str();
  bench->add_option("--proposals", bench_props)->capture_default_str();
  bench->add_option("--layer", bench_layer, "active layer (default: last conv)");
  bench->add_option("--mode", bench_mode)
      ->check(CLI::IsMember({"covering", "clamped"}))
      ->capture_default_str();
  bench->add_flag("--csv", bench_csv);
  bench->add_flag("--time", bench_time, "also measure wall-clock time (non-normative)");

  // visualize
  auto* vis = app.add_subcommand("visualize", "top-responding patches of the most used dimension");
  NetOptions vis_net;
  std::string vis_cascade, vis_data, vis_split = "test", vis_out;
  int vis_k = 16;
  vis_net.add(vis);
  vis->add_option("--cascade", vis_cascade)->required();
  vis->add_option("--data", vis_data)->required();
  vis->add_option("--split", vis_split)->capture_default_str();
  vis->add_option("--k", vis_k)->capture_default_str()->check(CLI::NonNegativeNumber);
  vis->add_option("--out", vis_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (argc <= 1) std::cerr << app.help();
    return 1;
  }

  const CLI::App* sub = app.get_subcommands().front();
  std::cerr << "# dnp " << sub->get_name() << " (workers=" << workers << ")\n"
            << sub->config_to_str(true, false) << std::flush;

  try {
    if (*table) return run_table(table_net, table_csv, zero_based);

    if (*init) {
      const NetSpec net = init_net.spec();
      save_weights(init_out, init_net.random(net));
      return 0;
    }

    if (*forward) {
      const NetSpec net = fwd_net.spec();
      const WeightSet w = fwd_net.load(net);
      const int layer = fwd_layer > 0 ? fwd_layer : active_layer_count(net);
      const Tensor input = to_input(read_pnm(fwd_image), net.input_channels);
      Tensor crop(net.input_channels, net.input_size, net.input_size);
      for (int c = 0; c < crop.channels(); ++c)
        for (int y = 0; y < net.input_size; ++y)
          for (int x = 0; x < net.input_size; ++x) {
            const int ix = fwd_x + x, iy = fwd_y + y;
            if (ix >= 0 && iy >= 0 && ix < input.width() && iy < input.height())
              crop(c, y, x) = input(c, iy, ix);
          }
      const Tensor out = forward_to_layer(net, w, crop, layer);
      std::cout << "layer " << layer << ": " << out.channels() << "x" << out.height() << "x"
                << out.width() << "\n";
      if (!fwd_out.empty()) save_tensor(fwd_out, out);
      return 0;
    }

    if (*extract) {
      const NetSpec net = ext_net.spec();
      const FeaturePipeline p{net, ext_net.load(net), {Family::parse(ext_family)},
                              parse_mode(ext_mode)};
      const FeatureSet fs = compute_features(p, read_pnm(ext_image));
      const FeatureGrid& g = fs.grid(p.families.front());
      std::cout << p.families.front().name() << ": " << g.cols << "x" << g.rows << " points, D="
                << g.dim << ", origin (" << g.origin_x << "," << g.origin_y << "), stride "
                << g.stride << "\n";
      if (!ext_out.empty()) save_grid(ext_out, g);
      return 0;
    }

    if (*synth) {
      if (n_train + n_test < 1) throw DataError("synth: need at least one image");
      const auto m = generate_synthetic(synth_seed, n_train, n_test, synth_spec, synth_out);
      std::size_t boxes = 0;
      for (const auto& e : m.entries) boxes += e.gt.boxes.size();
      std::cout << m.entries.size() << " images, " << boxes << " targets written to "
                << synth_out << "\n";
      return 0;
    }

    if (*train) {
      const NetSpec net = train_net.spec();
      const FeaturePipeline p{net, train_net.load(net), parse_families(train_families),
                              TilingMode::covering};
      params.normalizer = normalizer == "l1" ? Normalizer::l1 : Normalizer::l0;
      const DatasetManifest m = load_manifest(train_data);
      const auto images = load_split(m, "train", p, workers);
      std::vector<TrainImage> timgs;
      for (const auto& im : images) {
        TrainImage t{&im.features, im.image.width, im.image.height, {}};
        for (const auto& a : im.entry->gt.boxes) t.objects.push_back(a.box);
        timgs.push_back(std::move(t));
      }
      const auto pool = sample_configurations(pool_seed, pool_size, family_dims(p));
      TrainReport report;
      const Cascade cascade = train_cascade(timgs, pool, params, &report);
      for (std::size_t s = 0; s < cascade.stages.size(); ++s)
        std::cerr << "stage " << s << ": " << cascade.stages[s].weaks.size() << " weaks, "
                  << report.positives_per_stage[s] << " positives, "
                  << report.negatives_per_stage[s] << " negatives ("
                  << report.hard_negatives_per_stage[s] << " hard), reject below "
                  << cascade.stages[s].reject_threshold << "\n";
      save_cascade(train_out, cascade);
      return 0;
    }

    if (*det) {
      const Cascade cascade = load_cascade(det_cascade);
      const NetSpec net = det_net.spec();
      const FeaturePipeline p{net, det_net.load(net), cascade.families(), TilingMode::covering};
      std::vector<std::pair<std::string, Image>> inputs;
      if (!det_image.empty()) {
        inputs.push_back({fs::path(det_image).stem().string(), read_pnm(det_image)});
      } else if (!det_data.empty()) {
        const DatasetManifest m = load_manifest(det_data);
        for (const auto* e : m.split(det_split))
          inputs.push_back({e->gt.image_id, read_pnm(m.image_path(*e))});
      } else {
        throw CLI::RequiredError("--data or --image");
      }
      std::map<std::string, std::vector<PixelRect>> given;
      if (!det_props.file.empty()) {
        std::ifstream in(det_props.file);
        if (!in) throw DataError("cannot open proposals '" + det_props.file + "'");
        for (auto& [id, box] : read_proposals_csv(in)) given[id].push_back(box);
      }
      std::vector<std::vector<ScoredBox>> per_image(inputs.size());
      for_each_index(static_cast<int>(inputs.size()), workers, [&](int i) {
        const auto& [id, image] = inputs[i];
        const auto props = det_props.file.empty()
                               ? propose_grid(image.width, image.height, det_props.scales,
                                              det_props.ratios, det_props.stride)
                               : given[id];
        for (const auto& d : detect(image, p, props, cascade, nms_iou))
          per_image[i].push_back({id, d.box, d.score});
      });
      std::vector<ScoredBox> all;
      for (auto& v : per_image) all.insert(all.end(), v.begin(), v.end());
      if (det_out.empty()) {
        write_detections_csv(std::cout, all);
      } else {
        std::ofstream out(det_out);
        write_detections_csv(out, all);
        if (!out) throw DataError("cannot write '" + det_out + "'");
      }
      return 0;
    }

    if (*eval) {
      std::ifstream in(eval_dets);
      if (!in) throw DataError("cannot open detections '" + eval_dets + "'");
      const auto dets = read_detections_csv(in);
      const DatasetManifest m = load_manifest(eval_data);
      std::vector<GroundTruth> gts;
      for (const auto* e : m.split(eval_split)) gts.push_back(e->gt);
      const double ap = average_precision(
          dets, gts, eval_iou, eval_mode == "11" ? ApMode::eleven_point : ApMode::all_point);
      std::cout << "AP " << ap << "\n";
      return 0;
    }

    if (*bench) {
      const NetSpec net = bench_net.spec();
      int layer = bench_layer;
      if (layer <= 0)
        for (int i = 1; i <= active_layer_count(net); ++i)
          if (net.layers[layer_position(net, i)].kind == LayerKind::conv) layer = i;
      BenchReport r =
          bench_convolutions(bench_w, bench_h, bench_props, net, layer, parse_mode(bench_mode));
      if (bench_time) time_bench(r, net, bench_net.load(net), parse_mode(bench_mode));
      if (bench_csv)
        print_bench_csv(std::cout, {r});
      else
        print_bench(std::cout, r);
      return 0;
    }

    if (*vis) {
      const Cascade cascade = load_cascade(vis_cascade);
      const NetSpec net = vis_net.spec();
      const FeaturePipeline p{net, vis_net.load(net), cascade.families(), TilingMode::covering};
      const auto images = load_split(load_manifest(vis_data), vis_split, p, workers);
      std::vector<PatternSource> sources;
      for (const auto& im : images) sources.push_back({im.entry->gt.image_id, &im.image, &im.features});
      const PatternReport report = visualize_top_patterns(cascade, net, sources, vis_k);
      write_pattern_report(vis_out, report);
      const auto& top = report.histogram.front();
      std::cout << "top dimension " << top.family.name() << ":" << top.dim << " used by "
                << top.count << " weaks; " << report.patches.size() << " patches of "
                << report.side << "x" << report.side << " written to " << vis_out << "\n";
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
