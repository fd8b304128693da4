#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "deepnotch/errors.hpp"
#include "deepnotch/io/dataset.hpp"
#include "deepnotch/spectral/fft.hpp"
#include "deepnotch/spectral/spikes.hpp"
#include "deepnotch/synth/synth.hpp"

using namespace deepnotch;
using namespace deepnotch::synth;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("deepnotch_test_synth_" + name)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return out;
}

Image smooth_gradient(int size) {
  Image img(size, size, 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.2f + 0.6f * static_cast<float>(x + y) / (2.0f * (size - 1));
  return img;
}

}  // namespace

TEST(Sinusoid, ZeroAmplitudeIsIdentity) {
  const Image img = procedural_real(32, 1);
  const Image out = inject_sinusoid(img, 3, 2, 0.0, 0.7);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(out.pixels()[i], img.pixels()[i]);
}

TEST(Sinusoid, MidGrayBinMagnitude) {
  const Image out = inject_sinusoid(Image(64, 64, 1, 0.5f), 8, 0, 0.1, 0.0);
  const auto s = spectral::fft2d(out);
  EXPECT_NEAR(s.magnitude(8, 0), 0.05 * 64 * 64, 1e-3 * 0.05 * 64 * 64);
}

TEST(Sinusoid, OutOfRangeFrequencyRejected) {
  const Image img(32, 32, 1, 0.5f);
  EXPECT_THROW(inject_sinusoid(img, 17, 0, 0.1, 0.0), ContractError);
  EXPECT_THROW(inject_sinusoid(img, 0, -17, 0.1, 0.0), ContractError);
}

TEST(ArtifactConfig, Validation) {
  ArtifactConfig c;
  c.kernel = 4;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.gain = 1.5;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.stride = 0;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.kind = ArtifactKind::kSinusoid;
  c.amplitude = 0.7;
  EXPECT_THROW(c.validate(), ContractError);
  EXPECT_EQ(parse_artifact_kind("sinusoid"), ArtifactKind::kSinusoid);
  EXPECT_THROW(parse_artifact_kind("stripes"), ConfigError);
}

TEST(Checkerboard, GainZeroLeavesRealUnchanged) {
  const Image real = procedural_real(64, 2);
  ArtifactConfig c;
  c.gain = 0.0;
  const Image fake = checkerboard_fake(real, c, 2);
  for (std::size_t i = 0; i < real.size(); ++i) EXPECT_EQ(fake.pixels()[i], real.pixels()[i]);
}

TEST(Checkerboard, SmoothGradientGetsHalfBandSpikePair) {
  const Image fake = checkerboard_fake(smooth_gradient(64), ArtifactConfig{}, 3);
  const auto report = spectral::detect_spikes(spectral::fft2d(fake), 4.0);
  ASSERT_FALSE(report.spikes.empty());
  const auto& top = report.spikes[0];
  EXPECT_TRUE(std::abs(top.u) == 32 || std::abs(top.v) == 32) << top.u << "," << top.v;
  EXPECT_GT(top.prominence, 4.0);
}

TEST(Checkerboard, SameSeedSameFake) {
  const Image real = procedural_real(64, 4);
  const Image a = make_fake(real, ArtifactConfig{}, 9), b = make_fake(real, ArtifactConfig{}, 9);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.pixels()[i], b.pixels()[i]);
  const Image c = make_fake(real, ArtifactConfig{}, 10);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a.pixels()[i] != c.pixels()[i];
  EXPECT_TRUE(differs);
}

TEST(Checkerboard, IndivisibleSizeIsDimensionError) {
  ArtifactConfig c;
  c.stride = 3;
  c.kernel = 4;
  EXPECT_THROW(checkerboard_fake(Image(32, 32, 3, 0.5f), c, 1), DimensionError);
}

TEST(GeneratorKernel, NormalisedPerChannel) {
  const auto k = generator_kernel(3, 2, 3, 5);
  for (int c = 0; c < 3; ++c) {
    double s = 0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        s += k.at(c, c, a, b);
        EXPECT_GT(k.at(c, c, a, b), 0.0f);
        EXPECT_EQ(k.at(c, (c + 1) % 3, a, b), 0.0f);
      }
    EXPECT_NEAR(s, 4.0, 1e-5);
  }
}

TEST(Procedural, DeterministicAndInRange) {
  const Image a = procedural_real(64, 7), b = procedural_real(64, 7);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.pixels()[i], b.pixels()[i]);
    ASSERT_GE(a.pixels()[i], 0.0f);
    ASSERT_LE(a.pixels()[i], 1.0f);
  }
}

TEST(Procedural, RealsHaveNoStrongSpike) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = spectral::detect_spikes(spectral::fft2d(procedural_real(64, seed)), 4.0);
    EXPECT_TRUE(r.spikes.empty()) << "seed " << seed;
  }
}

TEST(Dataset, EveryFakeIsDetectable) {
  DatasetOptions o;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto pair = synthesize_pair(o, i);
    EXPECT_FALSE(spectral::detect_spikes(spectral::fft2d(pair.fake), 2.0).spikes.empty()) << "pair " << i;
  }
}

TEST(Dataset, SinglePairOnDisk) {
  TempDir dir("one");
  DatasetOptions o;
  const auto ds = generate_dataset(o, dir.path);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.rows()[0].filename, pair_filename(0));
  EXPECT_EQ(ds.rows()[0].kind, "checkerboard");
  EXPECT_TRUE(fs::exists(dir.path / "real" / pair_filename(0)));
  EXPECT_TRUE(fs::exists(dir.path / "fake" / pair_filename(0)));
  const auto reopened = io::PairedDataset::open(dir.path);
  EXPECT_EQ(reopened.size(), 1u);
}

TEST(Dataset, RefusesNonEmptyDirectoryUnlessOverwrite) {
  TempDir dir("refuse");
  DatasetOptions o;
  generate_dataset(o, dir.path);
  EXPECT_THROW(generate_dataset(o, dir.path), Error);
  o.overwrite = true;
  o.count = 2;
  EXPECT_EQ(generate_dataset(o, dir.path).size(), 2u);
}

TEST(Dataset, ByteIdenticalAcrossRunsAndThreadCounts) {
  TempDir a("det_a"), b("det_b");
  DatasetOptions o;
  o.count = 12;
  o.seed = 33;
  generate_dataset(o, a.path);
  o.threads = 3;
  generate_dataset(o, b.path);
  EXPECT_EQ(tree_contents(a.path), tree_contents(b.path));
}

TEST(Dataset, SinusoidKind) {
  DatasetOptions o;
  o.artifact.kind = ArtifactKind::kSinusoid;
  o.artifact.freq_u = 8;
  o.artifact.freq_v = 5;
  const auto pair = synthesize_pair(o, 0);
  const auto sr = spectral::fft2d(pair.real), sf = spectral::fft2d(pair.fake);
  EXPECT_GT(sf.magnitude(8, 5), sr.magnitude(8, 5) + 0.03 * 64 * 64);
}
