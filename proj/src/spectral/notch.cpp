#include "deepnotch/spectral/notch.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include "deepnotch/errors.hpp"
#include "deepnotch/spectral/fft.hpp"

namespace deepnotch::spectral {

NotchSpec& NotchSpec::add(const NotchOpening& o) {
  if (o.u == 0 && o.v == 0) throw ContractError("notch centre at the DC bin is not allowed");
  if (!(o.size > 0.0)) throw ContractError("notch radius/sigma must be positive");
  openings_.push_back(o);
  return *this;
}

NotchSpec NotchSpec::parse(const std::string& text) {
  NotchSpec spec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string shape;
    if (!(ls >> shape)) continue;
    NotchOpening o;
    std::string extra;
    if (!(ls >> o.u >> o.v >> o.size) || (ls >> extra)) {
      throw ConfigError("notch spec line " + std::to_string(lineno) + ": expected '<shape> <u> <v> <size>'");
    }
    if (shape == "ideal") o.shape = NotchShape::kIdeal;
    else if (shape == "gaussian") o.shape = NotchShape::kGaussian;
    else throw ConfigError("notch spec line " + std::to_string(lineno) + ": unknown shape '" + shape + "'");
    try {
      spec.add(o);
    } catch (const ContractError& e) {
      throw ConfigError("notch spec line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return spec;
}

NotchSpec NotchSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read notch spec " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

double Transfer::at(int u, int v) const {
  const int wu = ((u + width / 2) % width + width) % width;
  const int wv = ((v + height / 2) % height + height) % height;
  return values[static_cast<std::size_t>(wv) * width + wu];
}

bool Transfer::conjugate_symmetric(double tol) const {
  for (int v = -height / 2; v < height / 2; ++v) {
    for (int u = -width / 2; u < width / 2; ++u) {
      if (std::fabs(at(u, v) - at(-u, -v)) > tol) return false;
    }
  }
  return true;
}

Transfer build_notch_transfer(const NotchSpec& spec, int H, int W) {
  if (H < 1 || W < 1) throw ContractError("build_notch_transfer: empty grid");
  auto wrap = [](int x, int n) { return ((x + n / 2) % n + n) % n - n / 2; };
  // Each opening together with its mirror; identical entries (self-mirrored
  // Nyquist bins, duplicates) are applied once.
  std::set<std::tuple<int, int, int, double>> applied;
  for (const auto& o : spec.openings()) {
    if (std::abs(o.u) > W / 2 || std::abs(o.v) > H / 2) {
      throw ContractError("notch centre (" + std::to_string(o.u) + "," + std::to_string(o.v) +
                          ") lies beyond the Nyquist range of a " + std::to_string(H) + "x" + std::to_string(W) +
                          " spectrum");
    }
    const int shape = static_cast<int>(o.shape);
    applied.insert({wrap(o.u, W), wrap(o.v, H), shape, o.size});
    applied.insert({wrap(-o.u, W), wrap(-o.v, H), shape, o.size});
  }
  Transfer t{H, W, std::vector<double>(static_cast<std::size_t>(H) * W, 1.0)};
  for (const auto& [cu, cv, shape, size] : applied) {
    for (int v = -H / 2; v < H / 2; ++v) {
      const int dv0 = std::abs(v - cv) % H;
      const int dv = std::min(dv0, H - dv0);
      for (int u = -W / 2; u < W / 2; ++u) {
        const int du0 = std::abs(u - cu) % W;
        const int du = std::min(du0, W - du0);
        const double d2 = static_cast<double>(du) * du + static_cast<double>(dv) * dv;
        double f;
        if (shape == static_cast<int>(NotchShape::kIdeal)) f = d2 <= size * size ? 0.0 : 1.0;
        else f = 1.0 - std::exp(-d2 / (2.0 * size * size));
        t.values[static_cast<std::size_t>(v + H / 2) * W + (u + W / 2)] *= f;
      }
    }
  }
  return t;
}

Image apply_frequency_filter(const Image& image, const Transfer& transfer) {
  if (transfer.height != image.height() || transfer.width != image.width()) {
    throw ContractError("apply_frequency_filter: transfer " + std::to_string(transfer.height) + "x" +
                        std::to_string(transfer.width) + " does not match image " + std::to_string(image.height()) +
                        "x" + std::to_string(image.width()));
  }
  if (!transfer.conjugate_symmetric()) {
    throw ContractError("apply_frequency_filter: transfer is not conjugate-symmetric");
  }
  Image out = image;
  for (int c = 0; c < image.channels(); ++c) {
    const auto plane = image.channel(c);
    Spectrum s = fft2d(plane, image.height(), image.width());
    for (std::size_t i = 0; i < s.bins.size(); ++i) s.bins[i] *= transfer.values[i];
    const auto re = ifft2d(s);
    std::vector<float> filtered(re.size());
    for (std::size_t i = 0; i < re.size(); ++i) filtered[i] = static_cast<float>(re[i]);
    out.set_channel(c, filtered);
  }
  out.clamp();
  return out;
}

}  // namespace deepnotch::spectral
