#include "acf/cli/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>

#include "acf/cli/pipeline.hpp"
#include "acf/cli/run_config.hpp"
#include "acf/data/dataset.hpp"
#include "acf/data/image_io.hpp"
#include "acf/error.hpp"
#include "acf/report.hpp"
#include "acf/supervision.hpp"

namespace fs = std::filesystem;

namespace acf {
namespace {

constexpr const char* kCheckpointName = "model.ckpt";

std::optional<DisparityRange> parse_range_flag(const std::string& flag, const std::string& text) {
  if (text.empty()) return std::nullopt;
  const std::size_t colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(text);
    std::size_t a = 0, b = 0;
    const std::string lo = text.substr(0, colon), hi = text.substr(colon + 1);
    const DisparityRange r{std::stod(lo, &a), std::stod(hi, &b)};
    if (a != lo.size() || b != hi.size()) throw std::invalid_argument(text);
    return r;
  } catch (const std::exception&) {
    throw Error(errc::kUsage, flag + " expects lo:hi, got '" + text + "'");
  }
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  try {
    return parse_run_config(read_file(path));
  } catch (const Error& e) {
    if (e.code() != errc::kConfig) throw;
    throw Error(errc::kConfig, path + ": " + e.what());
  }
}

fs::path checkpoint_file(const fs::path& model) {
  const fs::path file = fs::is_directory(model) ? model / kCheckpointName : model;
  if (!fs::exists(file)) throw Error(errc::kIo, "checkpoint '" + file.string() + "' not found");
  return file;
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string out;
  std::size_t count = 0;
  std::size_t height = 64;
  std::size_t width = 96;
  std::size_t max_disp = 32;
  std::uint64_t seed = 1;
  std::size_t shapes = 4;
  std::size_t max_shapes = 12;
  bool slant = false;
  std::optional<double> target_occlusion;
  std::string background;
  std::string shape_disparity;
  bool force = false;
};

void cmd_gen(const GenArgs& a, std::ostream& out) {
  DatasetSpec spec;
  spec.count = a.count;
  spec.seed = a.seed;
  spec.target_occlusion = a.target_occlusion;
  spec.max_shapes = a.max_shapes;
  spec.stereo.height = a.height;
  spec.stereo.width = a.width;
  spec.stereo.max_disp = a.max_disp;
  spec.stereo.num_shapes = a.shapes;
  spec.stereo.slant = a.slant;
  spec.stereo.background = parse_range_flag("--bg-disp", a.background);
  spec.stereo.shapes = parse_range_flag("--shape-disp", a.shape_disparity);
  const GenerationSummary summary = write_dataset(spec, a.out, a.force);
  out << "samples=" << summary.count << "\n";
  out << "occluded_fraction=" << format_fixed6(summary.occluded_fraction) << "\n";
  out << "manifest=" << summary.manifest.string() << "\n";
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string mode;
  std::string val;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg = load_run_config(a.config);
  if (!a.mode.empty()) cfg.model.mode = parse_training_mode(a.mode);
  cfg.validate();
  const std::vector<StereoSample> train_set = load_dataset(a.data);
  const std::vector<StereoSample> val_set = a.val.empty() ? std::vector<StereoSample>{} : load_dataset(a.val);

  const fs::path dir = a.out;
  fs::create_directories(dir);
  if (!a.config.empty()) write_file(dir / "config.txt", read_file(a.config));
  write_file(dir / "config.resolved.txt", to_run_config_text(cfg));

  std::vector<EpochLog> log;
  const TrainResult result = train(train_set, cfg.model, val_set, [&](const EpochLog& e) {
    log.push_back(e);
    write_file(dir / "loss.csv", loss_csv(log));
    out << "epoch=" << e.epoch << " total=" << format_fixed6(e.loss.total) << " val_epe=" << format_fixed6(e.val_epe)
        << "\n"
        << std::flush;
  });
  write_file(dir / "loss.csv", loss_csv(result.log));
  save_checkpoint(result.checkpoint, dir / kCheckpointName);
  out << "checkpoint=" << (dir / kCheckpointName).string() << "\n";
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string pred;
  std::string data;
  std::string out;
  std::string splits = "all,occ,noc";
  std::string occ_source = "gt";
  std::string config;
  std::string save_pred;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const RunConfig cfg = load_run_config(a.config);
  const std::vector<Split> splits = parse_splits(a.splits);
  const OccSource source = parse_occ_source(a.occ_source);
  if (a.model.empty() == a.pred.empty()) throw Error(errc::kUsage, "give exactly one of --model and --pred");
  if (source == OccSource::kModel && a.model.empty()) {
    throw Error(errc::kUsage, "--occ-source model needs --model");
  }
  const fs::path manifest_file = manifest_path(a.data);
  const Manifest manifest = read_manifest(manifest_file);
  const std::vector<StereoSample> samples = load_dataset(manifest_file);

  std::vector<Tensor<double>> disparities;
  std::vector<Tensor<double>> rights;
  if (!a.model.empty()) {
    StereoModel model = StereoModel::load(checkpoint_file(a.model));
    for (const StereoSample& s : samples) {
      disparities.push_back(model.predict(s.left, s.right).disparity);
      if (source == OccSource::kModel) rights.push_back(model.predict_right_view(s.left, s.right));
    }
  } else {
    for (const ManifestEntry& e : manifest.entries) disparities.push_back(read_pfm(fs::path(a.pred) / e.dgt.filename()));
  }
  if (!a.save_pred.empty()) {
    fs::create_directories(a.save_pred);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      write_pfm(disparities[i], fs::path(a.save_pred) / manifest.entries[i].dgt.filename());
    }
  }
  const std::vector<MetricReport> reports = evaluate_dataset(samples, disparities, splits, source,
                                                             cfg.lr_check_threshold, rights.empty() ? nullptr : &rights);
  ensure_parent(a.out);
  write_metrics_csv(reports, a.out);
  out << metrics_csv(reports);
}

// ---------------------------------------------------------------------------

struct SparsifyArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string fractions = "0:0.95:0.01";
  std::optional<std::uint64_t> seed;
  std::string config;
};

void cmd_sparsify(const SparsifyArgs& a, std::ostream& out) {
  const RunConfig cfg = load_run_config(a.config);
  const std::vector<double> fractions = parse_fractions(a.fractions);
  const std::vector<StereoSample> samples = load_dataset(a.data);
  StereoModel model = StereoModel::load(checkpoint_file(a.model));
  std::vector<Tensor<double>> disparities;
  std::vector<Tensor<double>> variances;
  for (const StereoSample& s : samples) {
    Prediction p = model.predict(s.left, s.right);
    disparities.push_back(std::move(p.disparity));
    variances.push_back(std::move(p.variance));
  }
  const SparsificationCurve curve =
      sparsify_dataset(samples, disparities, variances, fractions, a.seed.value_or(cfg.sparsify_seed));
  ensure_parent(a.out);
  write_sparsification_csv(curve, a.out);
  const auto show = [](const std::optional<double>& f) { return f ? format_fixed6(*f) : std::string("none"); };
  out << "model_halving_fraction=" << show(first_fraction_at_or_below(curve.fractions, curve.model, 0.5)) << "\n";
  out << "random_halving_fraction=" << show(first_fraction_at_or_below(curve.fractions, curve.random, 0.5)) << "\n";
}

// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string model;
  std::string left;
  std::string right;
  std::string pixel;
  std::string out;
  std::string dgt;
};

void cmd_inspect(const InspectArgs& a, std::ostream& out) {
  std::size_t px = 0, py = 0;
  {
    const std::size_t comma = a.pixel.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument(a.pixel);
      std::size_t u = 0, v = 0;
      const std::string xs = a.pixel.substr(0, comma), ys = a.pixel.substr(comma + 1);
      const long long xv = std::stoll(xs, &u), yv = std::stoll(ys, &v);
      if (u != xs.size() || v != ys.size() || xv < 0 || yv < 0) throw std::invalid_argument(a.pixel);
      px = static_cast<std::size_t>(xv);
      py = static_cast<std::size_t>(yv);
    } catch (const std::exception&) {
      throw Error(errc::kUsage, "--pixel expects X,Y with non-negative integers, got '" + a.pixel + "'");
    }
  }
  StereoModel model = StereoModel::load(checkpoint_file(a.model));
  const Tensor<double> left = read_pgm(a.left);
  const Tensor<double> right = read_pgm(a.right);
  if (px >= left.dim(1) || py >= left.dim(0)) {
    throw Error(errc::kDomain, "pixel (" + std::to_string(px) + "," + std::to_string(py) + ") outside the " +
                                   std::to_string(left.dim(1)) + "x" + std::to_string(left.dim(0)) + " image");
  }
  const Prediction p = model.predict(left, right);
  const std::size_t D = p.probs.dim(2);
  const double dhat = p.disparity.at(py, px);
  const double sigma = p.variance.at(py, px);

  std::optional<double> dgt;
  if (!a.dgt.empty()) {
    const Tensor<double> map = read_pfm(a.dgt);
    if (map.dim(0) != left.dim(0) || map.dim(1) != left.dim(1)) {
      throw Error(errc::kShape, "disparity map size does not match the images");
    }
    dgt = map.at(py, px);
  }
  // Target centred on the ground truth when known, else on the estimate.
  const double centre = std::clamp(dgt.value_or(dhat), 0.0, static_cast<double>(D - 1));
  Tensor<double> one_d(Shape{1, 1});
  one_d[0] = centre;
  Tensor<double> one_sigma(Shape{1, 1});
  one_sigma[0] = sigma;
  const UnimodalTargetVolume<double> target = unimodal_target(DisparityMap<double>{one_d}, VarianceMap<double>{one_sigma},
                                                              D, Mask(1, 1, true), 1e-12);

  std::ostringstream csv;
  csv << "# pixel=" << px << "," << py << "\n";
  csv << "# dhat=" << format_double(dhat) << "\n";
  if (dgt) csv << "# dgt=" << format_double(*dgt) << "\n";
  csv << "# f=" << format_double(p.confidence.at(py, px)) << "\n";
  csv << "# sigma=" << format_double(sigma) << "\n";
  csv << "d,cost,prob,target_prob\n";
  for (std::size_t d = 0; d < D; ++d) {
    csv << d << "," << format_double(p.costs.at(py, px, d)) << "," << format_double(p.probs.at(py, px, d)) << ","
        << format_double(target.target.at(0, 0, d)) << "\n";
  }
  ensure_parent(a.out);
  write_file(a.out, csv.str());
  out << "dhat=" << format_double(dhat) << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stereo matching with adaptive unimodal cost-volume filtering", "acfstereo"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* g = app.add_subcommand("gen", "generate a random-dot stereogram dataset");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--count", gen.count, "number of samples")->required();
  g->add_option("--height", gen.height, "image height")->capture_default_str();
  g->add_option("--width", gen.width, "image width")->capture_default_str();
  g->add_option("--max-disp", gen.max_disp, "disparity hypotheses D")->capture_default_str();
  g->add_option("--seed", gen.seed, "dataset seed")->capture_default_str();
  g->add_option("--shapes", gen.shapes, "foreground shapes per sample")->capture_default_str();
  g->add_option("--max-shapes", gen.max_shapes, "largest shape count tried for --target-occlusion")
      ->capture_default_str();
  g->add_flag("--slant", gen.slant, "slanted planes with real-valued disparity");
  g->add_option("--target-occlusion", gen.target_occlusion, "pick per-sample shape counts to approach this fraction");
  g->add_option("--bg-disp", gen.background, "background disparity range lo:hi");
  g->add_option("--shape-disp", gen.shape_disparity, "shape disparity range lo:hi");
  g->add_flag("--force", gen.force, "replace a non-empty output directory");

  TrainArgs tr;
  CLI::App* t = app.add_subcommand("train", "train a model");
  t->add_option("--config", tr.config, "run configuration file");
  t->add_option("--data", tr.data, "training dataset (directory or manifest)")->required();
  t->add_option("--out", tr.out, "run directory")->required();
  t->add_option("--mode", tr.mode, "acf-adaptive, acf-uniform or regression-only");
  t->add_option("--val", tr.val, "validation dataset");

  EvalArgs ev;
  CLI::App* e = app.add_subcommand("eval", "score predictions against ground truth");
  e->add_option("--model", ev.model, "checkpoint file or run directory");
  e->add_option("--pred", ev.pred, "directory of predicted PFM maps named like the ground truth");
  e->add_option("--data", ev.data, "dataset (directory or manifest)")->required();
  e->add_option("--out", ev.out, "metrics CSV path")->required();
  e->add_option("--splits", ev.splits, "comma-separated subset of all,occ,noc")->capture_default_str();
  e->add_option("--occ-source", ev.occ_source, "gt, stored or model")->capture_default_str();
  e->add_option("--config", ev.config, "run configuration file");
  e->add_option("--save-pred", ev.save_pred, "also write predicted maps to this directory");

  SparsifyArgs sp;
  CLI::App* s = app.add_subcommand("sparsify", "sparsification curves of the predicted variance");
  s->add_option("--model", sp.model, "checkpoint file or run directory")->required();
  s->add_option("--data", sp.data, "dataset (directory or manifest)")->required();
  s->add_option("--out", sp.out, "sparsification CSV path")->required();
  s->add_option("--fractions", sp.fractions, "start:stop:step")->capture_default_str();
  s->add_option("--seed", sp.seed, "random-curve seed");
  s->add_option("--config", sp.config, "run configuration file");

  InspectArgs in;
  CLI::App* i = app.add_subcommand("inspect", "per-pixel cost and probability along disparity");
  i->add_option("--model", in.model, "checkpoint file or run directory")->required();
  i->add_option("--left", in.left, "left PGM")->required();
  i->add_option("--right", in.right, "right PGM")->required();
  i->add_option("--pixel", in.pixel, "X,Y")->required();
  i->add_option("--out", in.out, "CSV path")->required();
  i->add_option("--dgt", in.dgt, "ground-truth PFM");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "ERROR " << errc::kUsage << ": " << ex.what() << "\n";
    return 2;
  }

  try {
    if (g->parsed()) cmd_gen(gen, out);
    if (t->parsed()) cmd_train(tr, out);
    if (e->parsed()) cmd_eval(ev, out);
    if (s->parsed()) cmd_sparsify(sp, out);
    if (i->parsed()) cmd_inspect(in, out);
  } catch (const Error& ex) {
    err << "ERROR " << ex.code() << ": " << ex.what() << "\n";
    return ex.code() == errc::kUsage ? 2 : 1;
  } catch (const fs::filesystem_error& ex) {
    err << "ERROR " << errc::kIo << ": " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    err << "ERROR internal: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace acf
