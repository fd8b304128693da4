#pragma once

#include <vector>

#include "deepnotch/io/image.hpp"
#include "deepnotch/spectral/spikes.hpp"

namespace deepnotch::spectral {

// Bilinear resampling with half-pixel centres and edge clamping.
Image resize_bilinear(const Image& img, int height, int width);

// Rotates content by angle_deg about the image centre:
// out(p) = in(R(-angle) (p - c) + c). Samples outside the source take `fill`.
Image rotate_bilinear(const Image& img, double angle_deg, float fill = 0.5f);

// Largest power-of-two square fully inside the valid area of an image of the
// given size rotated by angle_deg.
int valid_power_of_two_crop(int height, int width, double angle_deg);
Image center_crop(const Image& img, int height, int width);

// Frequency in cycles per pixel, x (horizontal) and y (vertical).
struct Frequency {
  double fx = 0.0;
  double fy = 0.0;
  double angle_deg() const;  // orientation modulo 180 degrees, in [0, 180)
  double radius() const;
};

struct ShiftResult {
  Frequency source;     // strongest spike of the input
  Frequency predicted;  // source mapped through the scaling/rotation theorems
  Frequency measured;   // strongest spike of the transformed image
  int source_bin_u = 0, source_bin_v = 0;
  int measured_bin_u = 0, measured_bin_v = 0;
  int analysed_size = 0;  // side of the transformed crop that was analysed
  SpikeReport source_report;
  SpikeReport measured_report;

  double angle_error_deg() const;  // |measured - predicted| modulo 180
  double radius_error_bins() const;
};

// Resizes by `scale`, rotates by angle_deg, crops to a power of two inside
// the valid region, then re-detects spikes on the Hann-windowed luminance.
// The tracked spike is the detection of largest magnitude; positions are
// refined to sub-bin accuracy by a 3 x 3 centroid of the magnitude. Throws
// DataError when the input has no detectable spike.
inline constexpr double kShiftMinProminence = 1.5;
ShiftResult geometric_spectrum_shift(const Image& image, double scale, double angle_deg,
                                     double min_prominence = kShiftMinProminence);

}  // namespace deepnotch::spectral
