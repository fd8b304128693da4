#pragma once

#include <filesystem>
#include <vector>

#include "deepnotch/io/image.hpp"

namespace deepnotch::spectral {

enum class NotchShape { kIdeal, kGaussian };

struct NotchOpening {
  int u = 0;  // DC-centred frequency coordinates
  int v = 0;
  NotchShape shape = NotchShape::kIdeal;
  double size = 1.0;  // radius r (ideal) or sigma (gaussian), in bins
};

// A set of notch openings. Each opening implies its conjugate mirror.
class NotchSpec {
 public:
  // Rejects the DC bin and non-positive sizes (ContractError).
  NotchSpec& add(const NotchOpening& opening);
  NotchSpec& add_ideal(int u, int v, double radius) { return add({u, v, NotchShape::kIdeal, radius}); }
  NotchSpec& add_gaussian(int u, int v, double sigma) { return add({u, v, NotchShape::kGaussian, sigma}); }

  const std::vector<NotchOpening>& openings() const { return openings_; }
  bool empty() const { return openings_.empty(); }

  // Text form: one opening per line, "ideal <u> <v> <r>" or
  // "gaussian <u> <v> <sigma>"; '#' starts a comment.
  static NotchSpec parse(const std::string& text);
  static NotchSpec load(const std::filesystem::path& path);

 private:
  std::vector<NotchOpening> openings_;
};

// Real transfer function over the DC-centred grid, row (v + H/2), column (u + W/2).
struct Transfer {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int u, int v) const;
  bool conjugate_symmetric(double tol = 1e-12) const;
};

// Product over openings and their mirrors; distances wrap around the
// periodic spectrum. Centres must lie within the Nyquist range.
Transfer build_notch_transfer(const NotchSpec& spec, int height, int width);

// Per channel: FFT, multiply, inverse FFT, clamp. Image dims must be powers
// of two matching the transfer; an asymmetric transfer raises ContractError.
Image apply_frequency_filter(const Image& image, const Transfer& transfer);

}  // namespace deepnotch::spectral
