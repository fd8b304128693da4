#pragma once

#include "deepnotch/io/image.hpp"

namespace deepnotch::pipeline {

// 10 log10(1 / MSE), peak 1. Identical images give +infinity.
double psnr(const Image& a, const Image& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// Mean local SSIM over all fully contained 11x11 Gaussian windows
// (sigma 1.5, K1 0.01, K2 0.03, range 1), per channel, then averaged.
// Throws DimensionError for images smaller than the window.
double ssim(const Image& a, const Image& b);

// Cosine similarity of the flattened images (all channels jointly). Throws
// ContractError when either image is all zero.
double coss(const Image& a, const Image& b);

// Detection threshold used by spike_prominence_score; any local maximum
// above background counts.
inline constexpr double kScoreMinProminence = 1.01;

// Prominence of the strongest non-DC spike of the luminance spectrum, or 1.0
// when there is none. Power-of-two dims required.
double spike_prominence_score(const Image& image);

}  // namespace deepnotch::pipeline
