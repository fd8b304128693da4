#pragma once

#include <vector>

#include "deepnotch/adversary/detector.hpp"
#include "deepnotch/io/image.hpp"

namespace deepnotch::adversary {

struct AttackConfig {
  double epsilon = 0.04;   // L-inf radius, unit-interval scale
  int steps = 10;
  double step_size = 0.0;  // 0 selects epsilon / 4
  int label = kLabelFake;  // true label y whose loss is ascended

  double effective_step() const { return step_size > 0.0 ? step_size : epsilon / 4.0; }
  // Throws ConfigError for epsilon < 0, steps < 1 or step > epsilon.
  void validate() const;
};

// Sign-gradient ascent on CE(D(I + M), y), M projected onto the epsilon ball
// and I + M onto [0, 1]. No random start. The result may be negative.
Image pgd_perturbation(const DetectorModel& detector, const Image& image, const AttackConfig& cfg);
std::vector<Image> pgd_batch(const DetectorModel& detector, const std::vector<Image>& images,
                             const AttackConfig& cfg);

// Mean cross-entropy of the detector on images against a single label.
double mean_loss(const DetectorModel& detector, const std::vector<Image>& images, int label);

}  // namespace deepnotch::adversary
