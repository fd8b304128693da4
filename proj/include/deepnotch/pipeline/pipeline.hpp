#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deepnotch/adversary/detector.hpp"
#include "deepnotch/adversary/pgd.hpp"
#include "deepnotch/io/config.hpp"
#include "deepnotch/io/image.hpp"
#include "deepnotch/io/report.hpp"
#include "deepnotch/kpn/kpn.hpp"

namespace deepnotch::pipeline {

enum class Variant { kFiltNn, kFakeGau, kFakeUni, kDnRnGau, kDnRnUni, kDnAnGau, kDnAnUni };

// "Filt(nn)", "Fake-gau", "Fake-uni", "DN(rn)-gau", "DN(rn)-uni", "DN(an)-gau", "DN(an)-uni".
const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);
bool uses_kpn(Variant v);
bool uses_attack(Variant v);
bool uses_noise(Variant v);

struct DetectionResult {
  double accuracy = 0.0;
  std::size_t total = 0;
  std::size_t true_real = 0, false_fake = 0;  // real images classified real / fake
  std::size_t true_fake = 0, false_real = 0;  // fake images classified fake / real
};

// Argmax classification against labels. Throws ContractError on an empty set.
DetectionResult evaluate_detection(const adversary::DetectorModel& detector, const std::vector<Image>& images,
                                   const std::vector<int>& labels);

struct ImageRow {
  std::size_t index = 0;
  std::string name;
  double psnr = 0.0, ssim = 0.0, coss = 0.0;
  double prominence_before = 0.0, prominence_after = 0.0;
  double noise_l1 = 0.0;  // mean |noised - fake| before filtering
  int label_before = -1, label_after = -1;  // evaluation detector, -1 if absent
};

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;  // finite values used
};

struct EvalReport {
  Variant variant = Variant::kDnRnGau;
  std::size_t count = 0;
  bool has_detector = false;
  double accuracy_before = 0.0, accuracy_after = 0.0, accuracy_delta = 0.0;
  Stat psnr, ssim, coss, prominence_before, prominence_after, noise_l1;
  std::vector<ImageRow> rows;

  io::Table summary_table() const;
  io::Table rows_table() const;
};

struct VariantParams {
  // Amplitudes of both families; the variant picks the family.
  kpn::NoiseSpec noise;
  adversary::AttackConfig attack;
  double alpha = 0.8;  // guidance area for DN(an)-*
  std::uint64_t seed = 1;
  int threads = 1;
};

struct Models {
  const kpn::KpnModel* kpn = nullptr;
  const adversary::DetectorModel* subject = nullptr;
  const adversary::DetectorModel* evaluation = nullptr;  // optional
};

// Noise actually used by a variant: family from the name, area alpha for
// DN(an)-*.
kpn::NoiseSpec variant_noise(Variant v, const VariantParams& params);

struct VariantOutput {
  std::vector<Image> images;
  EvalReport report;
};

// Applies the variant to each fake (sub-seed derive_seed(seed, i)) and
// evaluates it. Names label the report rows; may be empty.
VariantOutput run_variant(Variant v, const std::vector<Image>& fakes, const std::vector<std::string>& names,
                          const VariantParams& params, const Models& models);

struct RunConfig {
  Variant variant = Variant::kDnRnGau;
  VariantParams params;
  std::filesystem::path dataset;
  std::filesystem::path kpn_path;
  std::filesystem::path subject_path;
  std::filesystem::path evaluation_path;  // optional
  std::filesystem::path out_dir;
  std::size_t limit = 0;  // first n fakes; 0 = all
  bool save_images = true;

  // Keys: variant, dataset, kpn, subject, evaluation, out, seed, threads,
  // limit, sigma, mean, lower, upper, alpha, epsilon, steps, step-size,
  // save-images.
  static RunConfig from_config(const io::Config& cfg);
  // Throws ConfigError for missing required paths.
  void validate() const;
};

// Loads models and data, runs the variant and writes <out>/images/*.png,
// <out>/per_image.csv and <out>/summary.csv. All configuration problems are
// reported before any image is processed.
EvalReport run_pipeline(const RunConfig& cfg);

}  // namespace deepnotch::pipeline
