// deepnotch command-line interface.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "deepnotch/adversary/detector.hpp"
#include "deepnotch/adversary/guidance.hpp"
#include "deepnotch/adversary/pgd.hpp"
#include "deepnotch/errors.hpp"
#include "deepnotch/io/config.hpp"
#include "deepnotch/io/dataset.hpp"
#include "deepnotch/io/png.hpp"
#include "deepnotch/io/report.hpp"
#include "deepnotch/kpn/kpn.hpp"
#include "deepnotch/parallel.hpp"
#include "deepnotch/pipeline/pipeline.hpp"
#include "deepnotch/spectral/fft.hpp"
#include "deepnotch/spectral/notch.hpp"
#include "deepnotch/spectral/spikes.hpp"
#include "deepnotch/synth/synth.hpp"

namespace fs = std::filesystem;
using namespace deepnotch;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Options of one subcommand, each stored as text under its config key.
struct Options {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::vector<std::pair<std::string, CLI::Option*>> given;

  void add(CLI::App* app, const std::string& key, const std::string& help) {
    given.emplace_back(key, app->add_option("--" + key, values[key], help));
  }
  void add_flag(CLI::App* app, const std::string& key, const std::string& help) {
    given.emplace_back(key, app->add_flag("--" + key, flags[key], help));
  }
  // Explicit command-line values, as a Config to merge over the file.
  io::Config overrides() const {
    io::Config c;
    for (const auto& [key, opt] : given) {
      if (opt->count() == 0) continue;
      auto f = flags.find(key);
      c.set(key, f != flags.end() ? (f->second ? "true" : "false") : values.at(key));
    }
    return c;
  }
};

fs::path required_path(const io::Config& cfg, const std::string& key) {
  const std::string v = cfg.get_string(key, "");
  if (v.empty()) throw ConfigError("missing required setting '" + key + "' (--" + key + ")");
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<io::ImagePair> load_pairs(const io::Config& cfg, int threads) {
  const auto ds = io::PairedDataset::open(required_path(cfg, "dataset"));
  std::size_t n = ds.size();
  const auto limit = cfg.get_int("limit", 0);
  if (limit > 0) n = std::min<std::size_t>(n, static_cast<std::size_t>(limit));
  std::vector<io::ImagePair> pairs(n);
  parallel_for(n, threads, [&](std::size_t i) { pairs[i] = ds.load_pair(i); });
  return pairs;
}

kpn::NoiseSpec noise_from(const io::Config& cfg) {
  kpn::NoiseSpec n;
  n.family = kpn::parse_noise_family(cfg.get_string("noise", "gaussian"));
  n.sigma = cfg.get_double("sigma", n.sigma);
  n.mean = cfg.get_double("mean", n.mean);
  n.lower = cfg.get_double("lower", n.lower);
  n.upper = cfg.get_double("upper", n.upper);
  n.validate();
  return n;
}

// --------------------------------------------------------------------------

int cmd_synth(const io::Config& cfg, int threads, std::uint64_t seed) {
  synth::DatasetOptions o;
  o.count = static_cast<int>(cfg.get_int("count", 100));
  o.size = static_cast<int>(cfg.get_int("size", 64));
  o.seed = seed;
  o.threads = threads;
  o.overwrite = cfg.get_bool("overwrite", false);
  auto& a = o.artifact;
  a.kind = synth::parse_artifact_kind(cfg.get_string("kind", "checkerboard"));
  a.stride = static_cast<int>(cfg.get_int("stride", a.stride));
  a.kernel = static_cast<int>(cfg.get_int("kernel", a.kernel));
  a.gain = cfg.get_double("gain", a.gain);
  a.freq_u = static_cast<int>(cfg.get_int("freq-u", a.freq_u));
  a.freq_v = static_cast<int>(cfg.get_int("freq-v", a.freq_v));
  a.amplitude = cfg.get_double("amplitude", a.amplitude);
  a.phase = cfg.get_double("phase", a.phase);
  try {
    a.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (o.count < 1) throw ConfigError("count must be >= 1");
  const auto ds = synth::generate_dataset(o, required_path(cfg, "out"));
  std::cout << "wrote " << ds.size() << " pairs to " << ds.root().string() << "\n";
  return 0;
}

int cmd_spectrum(const io::Config& cfg) {
  const fs::path out = required_path(cfg, "out");
  const double min_prom = cfg.get_double("min-prominence", 2.0);
  const auto inputs = split(cfg.get_string("input", ""), ',');
  if (inputs.empty()) throw ConfigError("spectrum: --input is required");
  fs::create_directories(out);
  io::Table table;
  table.header = {"image", "u", "v", "magnitude", "prominence", "paired"};
  for (const auto& in : inputs) {
    const Image img = io::load_image(in);
    const auto spec = spectral::fft2d(img);
    const std::string stem = fs::path(in).stem().string();
    spectral::save_spectrum_png(spec, out / (stem + "_spectrum.png"));
    const auto report = spectral::detect_spikes(spec, min_prom);
    for (const auto& s : report.spikes) {
      table.rows.push_back({stem, static_cast<std::int64_t>(s.u), static_cast<std::int64_t>(s.v), s.magnitude,
                            s.prominence, static_cast<std::int64_t>(s.paired)});
    }
    std::cout << stem << ": " << report.spikes.size() << " spikes\n";
  }
  io::write_report(table, out / "spikes.csv");
  return 0;
}

int cmd_notch(const io::Config& cfg) {
  const Image img = io::load_image(required_path(cfg, "input"));
  const auto spec = spectral::NotchSpec::load(required_path(cfg, "spec"));
  const auto transfer = spectral::build_notch_transfer(spec, img.height(), img.width());
  const Image out = spectral::apply_frequency_filter(img, transfer);
  io::save_image(out, required_path(cfg, "out"));
  return 0;
}

int cmd_train_kpn(const io::Config& cfg, int threads, std::uint64_t seed) {
  const fs::path out = required_path(cfg, "out");
  const auto pairs = load_pairs(cfg, threads);
  kpn::TrainKpnOptions o;
  o.epochs = static_cast<int>(cfg.get_int("epochs", o.epochs));
  o.batch = static_cast<int>(cfg.get_int("batch", o.batch));
  o.learning_rate = static_cast<float>(cfg.get_double("lr", o.learning_rate));
  o.model.kernel_size = static_cast<int>(cfg.get_int("kernel-size", o.model.kernel_size));
  o.seed = seed;
  const auto noise = noise_from(cfg);
  const auto result = kpn::train_kpn(pairs, noise, o);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  result.model.save(out);
  io::Table curve;
  curve.header = {"step", "loss"};
  for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
    curve.rows.push_back({static_cast<std::int64_t>(i), result.loss_curve[i]});
  }
  fs::path curve_path = out;
  curve_path += ".loss.csv";
  io::write_report(curve, curve_path);
  std::cout << "epoch losses:";
  for (double l : result.epoch_loss) std::cout << " " << io::format_field(l);
  std::cout << "\nsaved " << out.string() << "\n";
  return 0;
}

int cmd_train_detector(const io::Config& cfg, int threads, std::uint64_t seed) {
  const fs::path out = required_path(cfg, "out");
  const auto pairs = load_pairs(cfg, threads);
  adversary::TrainDetectorOptions o;
  o.epochs = static_cast<int>(cfg.get_int("epochs", o.epochs));
  o.batch = static_cast<int>(cfg.get_int("batch", o.batch));
  o.learning_rate = static_cast<float>(cfg.get_double("lr", o.learning_rate));
  o.holdout = cfg.get_double("holdout", o.holdout);
  o.seed = seed;
  const auto widths = split(cfg.get_string("widths", "16,32,64,64"), ',');
  if (widths.size() != 4) throw ConfigError("widths must list four integers");
  for (int i = 0; i < 4; ++i) {
    try {
      o.model.widths[i] = std::stoi(widths[i]);
    } catch (const std::exception&) {
      throw ConfigError("widths: '" + widths[i] + "' is not an integer");
    }
  }
  const auto result = adversary::train_subject_detector(pairs, o);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  result.model.save(out);
  std::cout << "held-out accuracy " << io::format_field(result.heldout_accuracy) << " on " << result.heldout_count
            << " images\nsaved " << out.string() << "\n";
  return 0;
}

int cmd_attack(const io::Config& cfg, int threads) {
  const fs::path out = required_path(cfg, "out");
  const auto detector = adversary::DetectorModel::load(required_path(cfg, "detector"));
  adversary::AttackConfig a;
  a.epsilon = cfg.get_double("epsilon", a.epsilon);
  a.steps = static_cast<int>(cfg.get_int("steps", a.steps));
  a.step_size = cfg.get_double("step-size", a.step_size);
  a.validate();
  const double alpha = cfg.get_double("alpha", 0.8);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");

  std::vector<std::pair<std::string, Image>> items;
  for (const auto& in : split(cfg.get_string("input", ""), ',')) {
    items.emplace_back(fs::path(in).stem().string(), io::load_image(in));
  }
  if (cfg.has("dataset")) {
    for (auto& p : load_pairs(cfg, threads)) items.emplace_back("", std::move(p.fake));
    const auto ds = io::PairedDataset::open(required_path(cfg, "dataset"));
    std::size_t k = 0;
    for (auto& [name, img] : items) {
      if (name.empty()) name = fs::path(ds.rows()[k++].filename).stem().string();
    }
  }
  if (items.empty()) throw ConfigError("attack: give --input and/or --dataset");
  fs::create_directories(out);
  const auto frozen = detector.frozen();
  std::vector<double> flipped(items.size());
  parallel_for(items.size(), threads, [&](std::size_t i) {
    const auto& [name, img] = items[i];
    const Image m = adversary::pgd_perturbation(frozen, img, a);
    adversary::save_guidance_pngs(adversary::guidance_map(m, alpha), out / name);
    Image adv = img;
    for (std::size_t j = 0; j < adv.size(); ++j) adv.pixels()[j] += m.pixels()[j];
    flipped[i] = frozen.classify({adv}).front() == adversary::kLabelReal ? 1.0 : 0.0;
  });
  double f = 0.0;
  for (double v : flipped) f += v;
  std::cout << "attacked " << items.size() << " images, classified real after attack: "
            << io::format_field(f / static_cast<double>(items.size())) << "\n";
  return 0;
}

int cmd_run(const io::Config& cfg) {
  const auto rc = pipeline::RunConfig::from_config(cfg);
  const auto report = pipeline::run_pipeline(rc);
  std::cout << io::to_csv(report.summary_table());
  return 0;
}

int cmd_eval(const io::Config& cfg, int threads) {
  const fs::path out = required_path(cfg, "out");
  const auto detector = adversary::DetectorModel::load(required_path(cfg, "detector"));
  std::vector<Image> images;
  std::vector<int> labels;
  if (cfg.has("dataset")) {
    for (auto& p : load_pairs(cfg, threads)) {
      images.push_back(std::move(p.real));
      labels.push_back(adversary::kLabelReal);
      images.push_back(std::move(p.fake));
      labels.push_back(adversary::kLabelFake);
    }
  }
  if (cfg.has("images")) {
    const fs::path dir = required_path(cfg, "images");
    const std::string label = cfg.get_string("label", "fake");
    if (label != "fake" && label != "real") throw ConfigError("label must be 'fake' or 'real'");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      images.push_back(io::load_image(f));
      labels.push_back(label == "fake" ? adversary::kLabelFake : adversary::kLabelReal);
    }
  }
  if (images.empty()) throw ConfigError("eval: give --dataset and/or --images");
  const auto r = pipeline::evaluate_detection(detector, images, labels);
  io::Table t;
  t.header = {"total", "accuracy", "true_real", "false_fake", "true_fake", "false_real"};
  t.rows.push_back({static_cast<std::int64_t>(r.total), r.accuracy, static_cast<std::int64_t>(r.true_real),
                    static_cast<std::int64_t>(r.false_fake), static_cast<std::int64_t>(r.true_fake),
                    static_cast<std::int64_t>(r.false_real)});
  fs::create_directories(out);
  io::write_report(t, out / "eval.csv");
  std::cout << io::to_csv(t);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deepnotch: implicit notch filtering of GAN-style spectral artifacts"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  Options global;
  app.add_option("--config", config_path, "key=value configuration file");
  global.add(&app, "seed", "random seed");
  global.add(&app, "out", "output path (file or directory, per command)");
  global.add(&app, "threads", "worker threads");

  struct Command {
    CLI::App* app;
    Options opts;
  };
  std::map<std::string, Command> cmds;
  auto sub = [&](const std::string& name, const std::string& help, std::vector<std::pair<std::string, std::string>> opts,
                 std::vector<std::pair<std::string, std::string>> flags = {}) {
    Command c{app.add_subcommand(name, help), {}};
    for (const auto& [k, h] : opts) c.opts.add(c.app, k, h);
    for (const auto& [k, h] : flags) c.opts.add_flag(c.app, k, h);
    cmds.emplace(name, std::move(c));
  };
  sub("synth", "generate a paired real/fake dataset",
      {{"count", "number of pairs"}, {"size", "image side (power of two, 64-256)"},
       {"kind", "checkerboard | sinusoid"}, {"stride", "upsampling stride"}, {"kernel", "transposed-conv kernel"},
       {"gain", "artifact gain"}, {"freq-u", "sinusoid u"}, {"freq-v", "sinusoid v"},
       {"amplitude", "sinusoid amplitude"}, {"phase", "sinusoid phase"}},
      {{"overwrite", "allow a non-empty output directory"}});
  sub("spectrum", "save spectrum PNGs and detected spikes",
      {{"input", "comma-separated PNG files"}, {"min-prominence", "spike threshold (default 2)"}});
  sub("notch", "filter an image with an explicit notch specification",
      {{"input", "input PNG"}, {"spec", "notch specification file"}});
  sub("train-kpn", "train the kernel prediction network",
      {{"dataset", "paired dataset directory"}, {"epochs", "epochs"}, {"batch", "batch size"}, {"lr", "learning rate"},
       {"kernel-size", "3 or 5"}, {"noise", "gaussian | uniform"}, {"sigma", "gaussian std (8-bit units)"},
       {"mean", "gaussian mean (8-bit units)"}, {"lower", "uniform lower bound"}, {"upper", "uniform upper bound"},
       {"limit", "use the first n pairs"}});
  sub("train-detector", "train a real/fake detector",
      {{"dataset", "paired dataset directory"}, {"epochs", "epochs"}, {"batch", "batch size"}, {"lr", "learning rate"},
       {"widths", "four comma-separated block widths"}, {"holdout", "held-out pair fraction"},
       {"limit", "use the first n pairs"}});
  sub("attack", "PGD attack and guidance-map PNG export",
      {{"detector", "subject detector checkpoint"}, {"input", "comma-separated PNG files"},
       {"dataset", "attack the fakes of a dataset"}, {"limit", "first n dataset pairs"}, {"alpha", "area fraction"},
       {"epsilon", "L-inf budget"}, {"steps", "iterations"}, {"step-size", "step (default epsilon/4)"}});
  sub("run", "run one pipeline variant and write reports",
      {{"variant", "Filt(nn) | Fake-gau | Fake-uni | DN(rn)-gau | DN(rn)-uni | DN(an)-gau | DN(an)-uni"},
       {"dataset", "paired dataset directory"}, {"kpn", "KPN checkpoint"}, {"subject", "subject detector checkpoint"},
       {"evaluation", "evaluation detector checkpoint"}, {"limit", "first n fakes"},
       {"sigma", "gaussian std (8-bit units)"}, {"mean", "gaussian mean"}, {"lower", "uniform lower bound"},
       {"upper", "uniform upper bound"}, {"alpha", "guidance area fraction"}, {"epsilon", "PGD budget"},
       {"steps", "PGD iterations"}, {"step-size", "PGD step"}, {"save-images", "write output PNGs (true/false)"}});
  sub("eval", "detection accuracy of a detector",
      {{"detector", "detector checkpoint"}, {"dataset", "paired dataset (reals and fakes)"},
       {"images", "directory of PNGs sharing one label"}, {"label", "fake | real"}, {"limit", "first n pairs"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    io::Config cfg;
    if (!config_path.empty()) cfg = io::Config::load(config_path);
    cfg.merge(global.overrides());
    std::string name;
    for (auto& [n, c] : cmds) {
      if (c.app->parsed()) {
        name = n;
        cfg.merge(c.opts.overrides());
      }
    }
    const int threads = static_cast<int>(cfg.get_int("threads", 1));
    if (threads < 1) throw ConfigError("threads must be >= 1");
    const std::uint64_t seed = cfg.get_u64("seed", 1);
    if (name == "synth") return cmd_synth(cfg, threads, seed);
    if (name == "spectrum") return cmd_spectrum(cfg);
    if (name == "notch") return cmd_notch(cfg);
    if (name == "train-kpn") return cmd_train_kpn(cfg, threads, seed);
    if (name == "train-detector") return cmd_train_detector(cfg, threads, seed);
    if (name == "attack") return cmd_attack(cfg, threads);
    if (name == "run") return cmd_run(cfg);
    if (name == "eval") return cmd_eval(cfg, threads);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
