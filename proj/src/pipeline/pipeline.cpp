#include "deepnotch/pipeline/pipeline.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "deepnotch/adversary/guidance.hpp"
#include "deepnotch/errors.hpp"
#include "deepnotch/io/dataset.hpp"
#include "deepnotch/io/png.hpp"
#include "deepnotch/nn/rng.hpp"
#include "deepnotch/parallel.hpp"
#include "deepnotch/pipeline/metrics.hpp"

namespace deepnotch::pipeline {

namespace {

constexpr std::array<std::pair<Variant, const char*>, 7> kVariantNames{{
    {Variant::kFiltNn, "Filt(nn)"},
    {Variant::kFakeGau, "Fake-gau"},
    {Variant::kFakeUni, "Fake-uni"},
    {Variant::kDnRnGau, "DN(rn)-gau"},
    {Variant::kDnRnUni, "DN(rn)-uni"},
    {Variant::kDnAnGau, "DN(an)-gau"},
    {Variant::kDnAnUni, "DN(an)-uni"},
}};

bool gaussian_family(Variant v) {
  return v == Variant::kFakeGau || v == Variant::kDnRnGau || v == Variant::kDnAnGau;
}

Stat stat_of(const std::vector<double>& values) {
  Stat s;
  double sum = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++s.count;
    }
  }
  if (s.count == 0) return s;
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) sq += (v - s.mean) * (v - s.mean);
  }
  s.stddev = std::sqrt(sq / static_cast<double>(s.count));
  return s;
}

}  // namespace

const char* variant_name(Variant v) {
  for (const auto& [k, name] : kVariantNames) {
    if (k == v) return name;
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (const auto& [k, n] : kVariantNames) {
    if (name == n) return k;
  }
  throw ConfigError("unknown variant '" + name + "'");
}

bool uses_kpn(Variant v) { return v != Variant::kFakeGau && v != Variant::kFakeUni; }
bool uses_attack(Variant v) { return v == Variant::kDnAnGau || v == Variant::kDnAnUni; }
bool uses_noise(Variant v) { return v != Variant::kFiltNn; }

DetectionResult evaluate_detection(const adversary::DetectorModel& detector, const std::vector<Image>& images,
                                   const std::vector<int>& labels) {
  if (images.empty()) throw ContractError("evaluate_detection: empty image set");
  if (images.size() != labels.size()) throw ContractError("evaluate_detection: image and label counts differ");
  const auto pred = detector.classify(images);
  DetectionResult r;
  r.total = images.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool fake = labels[i] == adversary::kLabelFake;
    if (fake) {
      (pred[i] == adversary::kLabelFake ? r.true_fake : r.false_real)++;
    } else {
      (pred[i] == adversary::kLabelReal ? r.true_real : r.false_fake)++;
    }
    correct += pred[i] == labels[i];
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  return r;
}

kpn::NoiseSpec variant_noise(Variant v, const VariantParams& params) {
  kpn::NoiseSpec n = params.noise;
  n.family = gaussian_family(v) ? kpn::NoiseFamily::kGaussian : kpn::NoiseFamily::kUniform;
  n.area = uses_attack(v) ? params.alpha : 1.0;
  n.validate();
  return n;
}

VariantOutput run_variant(Variant v, const std::vector<Image>& fakes, const std::vector<std::string>& names,
                          const VariantParams& params, const Models& models) {
  if (fakes.empty()) throw DataError("run_variant: no images");
  if (uses_kpn(v) && !models.kpn) throw ConfigError(std::string(variant_name(v)) + " needs a KPN model");
  if (uses_attack(v) && !models.subject) {
    throw ConfigError(std::string(variant_name(v)) + " needs a subject detector");
  }
  const kpn::NoiseSpec noise = variant_noise(v, params);
  if (uses_attack(v)) params.attack.validate();
  const std::optional<adversary::DetectorModel> subject =
      uses_attack(v) ? std::optional(models.subject->frozen()) : std::nullopt;

  VariantOutput out;
  out.images.resize(fakes.size());
  EvalReport& rep = out.report;
  rep.variant = v;
  rep.count = fakes.size();
  rep.rows.resize(fakes.size());

  parallel_for(fakes.size(), params.threads, [&](std::size_t i) {
    const Image& fake = fakes[i];
    const std::uint64_t seed = nn::derive_seed(params.seed, i);
    ImageRow& row = rep.rows[i];
    row.index = i;
    row.name = i < names.size() ? names[i] : std::to_string(i);
    std::optional<adversary::GuidanceMap> guidance;
    if (uses_attack(v)) {
      guidance = adversary::guidance_map(adversary::pgd_perturbation(*subject, fake, params.attack), params.alpha);
    }
    const adversary::GuidanceMap* g = guidance ? &*guidance : nullptr;
    if (uses_noise(v)) {
      double l1 = 0.0;
      for (float n : kpn::noise_field(fake, noise, g, seed)) l1 += std::fabs(n);
      row.noise_l1 = l1 / static_cast<double>(fake.size());
    }
    Image result;
    switch (v) {
      case Variant::kFiltNn:
        result = kpn::pixelwise_filter(fake, models.kpn->predict_kernels(fake));
        break;
      case Variant::kFakeGau:
      case Variant::kFakeUni:
        result = kpn::add_noise(fake, noise, nullptr, seed);
        break;
      default:
        result = kpn::deepnotch_reconstruct(*models.kpn, fake, noise, g, seed);
        break;
    }
    row.psnr = psnr(fake, result);
    row.ssim = ssim(fake, result);
    row.coss = coss(fake, result);
    row.prominence_before = spike_prominence_score(fake);
    row.prominence_after = spike_prominence_score(result);
    out.images[i] = std::move(result);
  });

  std::vector<double> p, s, c, pb, pa, nl;
  for (const auto& r : rep.rows) {
    p.push_back(r.psnr);
    s.push_back(r.ssim);
    c.push_back(r.coss);
    pb.push_back(r.prominence_before);
    pa.push_back(r.prominence_after);
    nl.push_back(r.noise_l1);
  }
  rep.psnr = stat_of(p);
  rep.ssim = stat_of(s);
  rep.coss = stat_of(c);
  rep.prominence_before = stat_of(pb);
  rep.prominence_after = stat_of(pa);
  rep.noise_l1 = stat_of(nl);

  if (models.evaluation) {
    rep.has_detector = true;
    const std::vector<int> labels(fakes.size(), adversary::kLabelFake);
    const auto before = models.evaluation->classify(fakes);
    const auto after = models.evaluation->classify(out.images);
    for (std::size_t i = 0; i < fakes.size(); ++i) {
      rep.rows[i].label_before = before[i];
      rep.rows[i].label_after = after[i];
    }
    rep.accuracy_before = evaluate_detection(*models.evaluation, fakes, labels).accuracy;
    rep.accuracy_after = evaluate_detection(*models.evaluation, out.images, labels).accuracy;
    rep.accuracy_delta = rep.accuracy_after - rep.accuracy_before;
  }
  return out;
}

io::Table EvalReport::summary_table() const {
  io::Table t;
  t.header = {"variant",        "count",         "accuracy_before", "accuracy_after", "accuracy_delta",
              "psnr_mean",      "psnr_std",      "psnr_finite",     "ssim_mean",      "ssim_std",
              "coss_mean",      "coss_std",      "prominence_before", "prominence_after", "noise_l1"};
  auto acc = [&](double v) -> io::Field {
    if (!has_detector) return std::string("n/a");
    return v;
  };
  t.rows.push_back({std::string(variant_name(variant)), static_cast<std::int64_t>(count), acc(accuracy_before),
                    acc(accuracy_after), acc(accuracy_delta), psnr.mean, psnr.stddev,
                    static_cast<std::int64_t>(psnr.count), ssim.mean, ssim.stddev, coss.mean, coss.stddev,
                    prominence_before.mean, prominence_after.mean, noise_l1.mean * 255.0});
  return t;
}

io::Table EvalReport::rows_table() const {
  io::Table t;
  t.header = {"index", "image", "psnr", "ssim", "coss", "prominence_before", "prominence_after",
              "noise_l1", "label_before", "label_after"};
  for (const auto& r : rows) {
    t.rows.push_back({static_cast<std::int64_t>(r.index), r.name, r.psnr, r.ssim, r.coss, r.prominence_before,
                      r.prominence_after, r.noise_l1 * 255.0, static_cast<std::int64_t>(r.label_before),
                      static_cast<std::int64_t>(r.label_after)});
  }
  return t;
}

// ---------------------------------------------------------------------------

RunConfig RunConfig::from_config(const io::Config& cfg) {
  RunConfig r;
  r.variant = parse_variant(cfg.get_string("variant", variant_name(r.variant)));
  r.dataset = cfg.get_string("dataset", "");
  r.kpn_path = cfg.get_string("kpn", "");
  r.subject_path = cfg.get_string("subject", "");
  r.evaluation_path = cfg.get_string("evaluation", "");
  r.out_dir = cfg.get_string("out", "");
  r.limit = static_cast<std::size_t>(cfg.get_int("limit", 0));
  r.params.seed = cfg.get_u64("seed", r.params.seed);
  r.params.threads = static_cast<int>(cfg.get_int("threads", r.params.threads));
  r.params.noise.sigma = cfg.get_double("sigma", r.params.noise.sigma);
  r.params.noise.mean = cfg.get_double("mean", r.params.noise.mean);
  r.params.noise.lower = cfg.get_double("lower", r.params.noise.lower);
  r.params.noise.upper = cfg.get_double("upper", r.params.noise.upper);
  r.params.alpha = cfg.get_double("alpha", r.params.alpha);
  r.params.attack.epsilon = cfg.get_double("epsilon", r.params.attack.epsilon);
  r.params.attack.steps = static_cast<int>(cfg.get_int("steps", r.params.attack.steps));
  r.params.attack.step_size = cfg.get_double("step-size", r.params.attack.step_size);
  r.save_images = cfg.get_bool("save-images", r.save_images);
  return r;
}

void RunConfig::validate() const {
  const std::string name = variant_name(variant);
  if (dataset.empty()) throw ConfigError("run: dataset path is required");
  if (out_dir.empty()) throw ConfigError("run: output directory is required");
  if (uses_kpn(variant) && kpn_path.empty()) throw ConfigError("run: " + name + " requires a KPN checkpoint (kpn=)");
  if (uses_attack(variant)) {
    if (subject_path.empty()) throw ConfigError("run: " + name + " requires a subject detector checkpoint (subject=)");
    if (!std::filesystem::exists(subject_path)) {
      throw ConfigError("run: subject detector checkpoint " + subject_path.string() + " does not exist");
    }
    if (!(params.alpha > 0.0 && params.alpha <= 1.0)) throw ConfigError("run: alpha must lie in (0, 1]");
    params.attack.validate();
  }
  if (uses_kpn(variant) && !std::filesystem::exists(kpn_path)) {
    throw ConfigError("run: KPN checkpoint " + kpn_path.string() + " does not exist");
  }
  if (!evaluation_path.empty() && !std::filesystem::exists(evaluation_path)) {
    throw ConfigError("run: evaluation detector checkpoint " + evaluation_path.string() + " does not exist");
  }
  if (params.threads < 1) throw ConfigError("run: threads must be >= 1");
  variant_noise(variant, params);
}

EvalReport run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  std::optional<kpn::KpnModel> kpn_model;
  std::optional<adversary::DetectorModel> subject, evaluation;
  if (uses_kpn(cfg.variant)) kpn_model = kpn::KpnModel::load(cfg.kpn_path);
  if (uses_attack(cfg.variant)) subject = adversary::DetectorModel::load(cfg.subject_path);
  if (!cfg.evaluation_path.empty()) evaluation = adversary::DetectorModel::load(cfg.evaluation_path);

  const auto ds = io::PairedDataset::open(cfg.dataset);
  std::size_t n = ds.size();
  if (cfg.limit > 0) n = std::min(n, cfg.limit);
  std::vector<Image> fakes(n);
  std::vector<std::string> names(n);
  parallel_for(n, cfg.params.threads, [&](std::size_t i) {
    fakes[i] = ds.load_pair(i).fake;
    names[i] = ds.rows()[i].filename;
  });

  Models models;
  models.kpn = kpn_model ? &*kpn_model : nullptr;
  models.subject = subject ? &*subject : nullptr;
  models.evaluation = evaluation ? &*evaluation : nullptr;
  auto result = run_variant(cfg.variant, fakes, names, cfg.params, models);

  std::filesystem::create_directories(cfg.out_dir);
  if (cfg.save_images) {
    const auto dir = cfg.out_dir / "images";
    std::filesystem::create_directories(dir);
    parallel_for(n, cfg.params.threads, [&](std::size_t i) { io::save_image(result.images[i], dir / names[i]); });
  }
  io::write_report(result.report.rows_table(), cfg.out_dir / "per_image.csv");
  io::write_report(result.report.summary_table(), cfg.out_dir / "summary.csv");
  return result.report;
}

}  // namespace deepnotch::pipeline
