#pragma once

#include <vector>

#include "deepnotch/spectral/fft.hpp"

namespace deepnotch::spectral {

inline constexpr int kDefaultDcExclusion = 3;
// Chebyshev radii of the background annulus around a candidate (9 x 9
// window minus its 3 x 3 core).
inline constexpr int kAnnulusInner = 2;
inline constexpr int kAnnulusOuter = 4;
// Magnitude unit for the log compression: the expected DFT magnitude of white
// noise with an RMS of one 8-bit grey level, i.e. kLevelUnit * sqrt(H * W).
// Keeps prominence comparable across image sizes.
inline constexpr double kLevelUnit = 1.0 / 255.0;

struct Spike {
  int u = 0;
  int v = 0;
  double magnitude = 0.0;
  // Log-magnitude over the median log-magnitude of the surrounding annulus.
  double prominence = 0.0;
  // True when the conjugate bin (-u, -v) was detected as well.
  bool paired = false;
};

struct SpikeReport {
  std::vector<Spike> spikes;  // descending prominence, conjugate partners adjacent
  double reference_magnitude = 0.0;  // kLevelUnit * sqrt(H * W)
  double background_median = 0.0;    // median log-magnitude outside the DC disk
  double background_max = 0.0;

  bool all_paired() const;
};

// Log-magnitude is log(1 + |F| / reference_magnitude).
// Strict local maxima (8-neighbourhood, wrapping) of the log-magnitude outside
// the DC disk whose prominence exceeds min_prominence.
SpikeReport detect_spikes(const Spectrum& spectrum, double min_prominence, int dc_exclusion_radius = kDefaultDcExclusion);

}  // namespace deepnotch::spectral
