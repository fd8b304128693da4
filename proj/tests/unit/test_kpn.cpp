#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "deepnotch/adversary/guidance.hpp"
#include "deepnotch/errors.hpp"
#include "deepnotch/kpn/kpn.hpp"
#include "deepnotch/nn/rng.hpp"
#include "deepnotch/pipeline/metrics.hpp"
#include "deepnotch/synth/synth.hpp"

using namespace deepnotch;
using namespace deepnotch::kpn;
namespace fs = std::filesystem;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
  nn::Rng rng(seed);
  Image img(h, w, 3);
  for (auto& v : img.pixels()) v = static_cast<float>(rng.uniform());
  return img;
}

KernelField random_field(int h, int w, int k, std::uint64_t seed) {
  nn::Rng rng(seed);
  KernelField f{k, nn::Tensor({1, k * k, h, w})};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int t = 0; t < k * k; ++t) s += f.weights.at(0, t, y, x) = static_cast<float>(rng.uniform(0.01, 1.0));
      for (int t = 0; t < k * k; ++t) f.weights.at(0, t, y, x) = static_cast<float>(f.weights.at(0, t, y, x) / s);
    }
  return f;
}

// Direct per-pixel loop with replicate border.
Image reference_filter(const Image& img, const KernelField& f) {
  const int k = f.kernel_size, r = k / 2;
  Image out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) {
        double s = 0;
        for (int a = 0; a < k; ++a)
          for (int b = 0; b < k; ++b) {
            const int yy = std::clamp(y + a - r, 0, img.height() - 1), xx = std::clamp(x + b - r, 0, img.width() - 1);
            s += f.at(y, x, a * k + b) * img.at(yy, xx, c);
          }
        out.at(y, x, c) = static_cast<float>(std::clamp(s, 0.0, 1.0));
      }
  return out;
}

std::vector<io::ImagePair> toy_pairs(int n, int size) {
  synth::DatasetOptions o;
  o.size = size;
  std::vector<io::ImagePair> pairs;
  for (int i = 0; i < n; ++i) pairs.push_back(synth::synthesize_pair(o, static_cast<std::size_t>(i)));
  return pairs;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(PixelwiseFilter, IdentityKernels) {
  const Image img = random_image(12, 10, 1);
  const Image out = pixelwise_filter(img, KernelField::identity(12, 10, 3));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(out.pixels()[i], img.pixels()[i]);
}

TEST(PixelwiseFilter, UniformKernelIsBoxBlur) {
  const Image img = random_image(9, 11, 2);
  KernelField f{3, nn::Tensor({1, 9, 9, 11}, 1.0f / 9.0f)};
  const Image out = pixelwise_filter(img, f);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 11; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) s += img.at(std::clamp(y + dy, 0, 8), std::clamp(x + dx, 0, 10), c);
        EXPECT_NEAR(out.at(y, x, c), s / 9.0, 1e-5);
      }
}

TEST(PixelwiseFilter, RandomKernelsMatchDirectLoop) {
  for (int k : {3, 5}) {
    const Image img = random_image(16, 12, 3);
    const KernelField f = random_field(16, 12, k, 4);
    const Image out = pixelwise_filter(img, f), ref = reference_filter(img, f);
    for (std::size_t i = 0; i < img.size(); ++i) ASSERT_NEAR(out.pixels()[i], ref.pixels()[i], 1e-5);
  }
}

TEST(PixelwiseFilter, Contracts) {
  const Image img = random_image(8, 8, 5);
  EXPECT_THROW(pixelwise_filter(img, KernelField::identity(8, 16, 3)), ContractError);
  KernelField bad = KernelField::identity(8, 8, 3);
  bad.weights.at(0, 4, 2, 2) = 0.5f;
  EXPECT_THROW(pixelwise_filter(img, bad), ContractError);
}

TEST(KernelField, DeltaDistance) {
  EXPECT_DOUBLE_EQ(KernelField::identity(8, 8, 3).mean_delta_distance(), 0.0);
  KernelField box{3, nn::Tensor({1, 9, 8, 8}, 1.0f / 9.0f)};
  EXPECT_NEAR(box.mean_delta_distance(), 8.0 / 9.0, 1e-6);
  EXPECT_NEAR(box.max_normalization_error(), 0.0, 1e-6);
}

TEST(Noise, SpecValidation) {
  EXPECT_THROW(NoiseSpec::gaussian(-1).validate(), ConfigError);
  EXPECT_THROW(NoiseSpec::uniform(5, 5).validate(), ConfigError);
  NoiseSpec n;
  n.area = 0.0;
  EXPECT_THROW(n.validate(), ConfigError);
  n.area = 1.2;
  EXPECT_THROW(n.validate(), ConfigError);
  EXPECT_EQ(parse_noise_family("uni"), NoiseFamily::kUniform);
  EXPECT_EQ(parse_noise_family("gaussian"), NoiseFamily::kGaussian);
  EXPECT_THROW(parse_noise_family("pink"), ConfigError);
}

TEST(Noise, AreaCompensationScalesBounds) {
  NoiseSpec n = NoiseSpec::uniform(-20, 20);
  n.area = 0.8;
  nn::Rng rng(6);
  const auto s = n.sample(20000, rng);
  const float hi = *std::max_element(s.begin(), s.end()), lo = *std::min_element(s.begin(), s.end());
  EXPECT_LE(hi, 25.0f / 255.0f + 1e-6f);
  EXPECT_GT(hi, 24.5f / 255.0f);
  EXPECT_GE(lo, -25.0f / 255.0f - 1e-6f);
  double l1 = 0;
  for (float v : s) l1 += std::fabs(v);
  EXPECT_NEAR(l1 / s.size(), n.expected_l1(), 0.02 * n.expected_l1());
  // Masked to 80% of the entries, the energy matches the unmasked +-20 field.
  EXPECT_NEAR(0.8 * n.expected_l1(), NoiseSpec::uniform(-20, 20).expected_l1(), 1e-9);
}

TEST(Noise, GaussianMoments) {
  const NoiseSpec n = NoiseSpec::gaussian(10, 2);
  nn::Rng rng(7);
  const auto s = n.sample(50000, rng);
  double m = 0, v = 0;
  for (float x : s) m += x;
  m /= s.size();
  for (float x : s) v += (x - m) * (x - m);
  v /= s.size();
  EXPECT_NEAR(m * 255, 2.0, 0.2);
  EXPECT_NEAR(std::sqrt(v) * 255, 10.0, 0.2);
}

TEST(Noise, GuidanceMasksNoise) {
  const Image fake = random_image(16, 16, 8);
  Image pert(16, 16, 3);
  nn::Rng rng(9);
  for (auto& v : pert.pixels()) v = static_cast<float>(rng.uniform(-1, 1));
  const auto g = adversary::guidance_map(pert, 0.5);
  NoiseSpec n = NoiseSpec::gaussian(10);
  n.area = 0.5;
  const auto field = noise_field(fake, n, &g, 3);
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (g.mask[i] == 0) EXPECT_EQ(field[i], 0.0f);
  }
}

TEST(Noise, AllOnesGuidanceEqualsNoGuidance) {
  const Image fake = random_image(16, 16, 10);
  const auto g = adversary::GuidanceMap::ones(16, 16, 3);
  const NoiseSpec n = NoiseSpec::uniform(-20, 20);
  const Image a = add_noise(fake, n, &g, 44), b = add_noise(fake, n, nullptr, 44);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.pixels()[i], b.pixels()[i]);
}

TEST(Noise, GuidanceShapeMismatch) {
  const auto g = adversary::GuidanceMap::ones(8, 8, 3);
  EXPECT_THROW(add_noise(random_image(16, 16, 1), NoiseSpec{}, &g, 1), ContractError);
}

TEST(Noise, GaussianFiveDestroysCheckerboardSpike) {
  int reduced = 0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto pair = synth::synthesize_pair(synth::DatasetOptions{}, i);
    const double before = pipeline::spike_prominence_score(pair.fake);
    const double after = pipeline::spike_prominence_score(add_noise(pair.fake, NoiseSpec::gaussian(5), nullptr, i));
    reduced += after < before;
  }
  EXPECT_EQ(reduced, 10);
}

TEST(KpnModel, UntrainedKernelsAreNormalised) {
  const KpnModel m(KpnOptions{}, 1);
  const auto f = m.predict_kernels(random_image(16, 24, 11));
  EXPECT_EQ(f.height(), 16);
  EXPECT_EQ(f.width(), 24);
  EXPECT_LT(f.max_normalization_error(), 1e-5);
  const KpnModel m5(KpnOptions{5, 8}, 1);
  EXPECT_LT(m5.predict_kernels(random_image(16, 16, 11)).max_normalization_error(), 1e-5);
}

TEST(KpnModel, DeterministicPrediction) {
  const Image img = random_image(16, 16, 12);
  const auto a = KpnModel(KpnOptions{}, 5).predict_kernels(img);
  const auto b = KpnModel(KpnOptions{}, 5).predict_kernels(img);
  const auto da = a.weights.data(), db = b.weights.data();
  EXPECT_TRUE(std::equal(da.begin(), da.end(), db.begin(), db.end()));
}

TEST(KpnModel, DimensionsMustBeDivisibleByFour) {
  const KpnModel m(KpnOptions{}, 1);
  EXPECT_THROW(m.predict_kernels(random_image(18, 16, 1)), DimensionError);
  EXPECT_THROW(KpnModel(KpnOptions{4, 16}, 1), ConfigError);
}

TEST(KpnModel, ZeroNoiseReducesToFiltering) {
  const KpnModel m(KpnOptions{}, 2);
  const Image fake = random_image(16, 16, 13);
  adversary::GuidanceMap zero = adversary::GuidanceMap::ones(16, 16, 3);
  std::fill(zero.mask.begin(), zero.mask.end(), 0);
  const Image a = deepnotch_reconstruct(m, fake, NoiseSpec::gaussian(0.0), &zero, 7);
  const Image b = pixelwise_filter(fake, m.predict_kernels(fake));
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.pixels()[i], b.pixels()[i]);
}

TEST(KpnModel, ReconstructGraphMatchesInference) {
  const KpnModel m(KpnOptions{}, 3);
  const Image img = random_image(16, 16, 14);
  const nn::Var v = reconstruct_graph(m, img);
  EXPECT_EQ(v.op_name(), "pixelwise_filter");
  const Image a = tensor_to_image(v.value());
  const Image b = pixelwise_filter(img, m.predict_kernels(img));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.pixels()[i], b.pixels()[i], 1e-6);
}

TEST(TrainKpn, IdentityTaskConvergesTowardDelta) {
  // Targets equal inputs and no noise: the kernels should approach the delta.
  auto pairs = toy_pairs(8, 32);
  for (auto& p : pairs) p.real = p.fake;
  TrainKpnOptions o;
  o.epochs = 6;
  o.learning_rate = 3e-3f;
  const auto r = train_kpn(pairs, NoiseSpec::gaussian(0.0), o);
  const double before = KpnModel(KpnOptions{}, nn::derive_seed(o.seed, 1)).predict_kernels(pairs[0].fake).mean_delta_distance();
  const double after = r.model.predict_kernels(pairs[0].fake).mean_delta_distance();
  EXPECT_LT(after, 0.5);
  EXPECT_LT(after, before);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
}

TEST(TrainKpn, SameSeedSameCheckpointAndRoundtrip) {
  const auto pairs = toy_pairs(4, 16);
  TrainKpnOptions o;
  o.epochs = 1;
  o.batch = 2;
  const auto a = train_kpn(pairs, NoiseSpec::gaussian(10), o);
  const auto b = train_kpn(pairs, NoiseSpec::gaussian(10), o);
  const fs::path dir = fs::temp_directory_path() / "deepnotch_test_kpn_ckpt";
  fs::create_directories(dir);
  a.model.save(dir / "a.ckpt");
  b.model.save(dir / "b.ckpt");
  EXPECT_EQ(file_bytes(dir / "a.ckpt"), file_bytes(dir / "b.ckpt"));

  const KpnModel loaded = KpnModel::load(dir / "a.ckpt");
  const auto fa = a.model.predict_kernels(pairs[0].fake).weights.data();
  const auto fl = loaded.predict_kernels(pairs[0].fake).weights.data();
  EXPECT_TRUE(std::equal(fa.begin(), fa.end(), fl.begin(), fl.end()));
  fs::remove_all(dir);
}

TEST(TrainKpn, NonFiniteLossNamesStep) {
  auto pairs = toy_pairs(2, 16);
  pairs[1].real.pixels()[5] = std::numeric_limits<float>::quiet_NaN();
  TrainKpnOptions o;
  o.epochs = 1;
  o.batch = 1;
  try {
    train_kpn(pairs, NoiseSpec::gaussian(0.0), o);
    ADD_FAILURE() << "no error";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos) << e.what();
  }
}

TEST(TrainKpn, EmptyDatasetRejected) {
  EXPECT_THROW(train_kpn({}, NoiseSpec{}, TrainKpnOptions{}), Error);
  TrainKpnOptions o;
  o.epochs = 0;
  EXPECT_THROW(train_kpn(toy_pairs(1, 16), NoiseSpec{}, o), Error);
}
