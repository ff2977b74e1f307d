// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detfuse/detections.hpp"
#include "detfuse/metrics.hpp"

namespace detfuse {

/// Behaviour of one simulated detector under one lighting condition.
struct SensorProfile {
  /// Probability that a ground truth object is detected.
  double recall = 0.9;
  /// Mean number of false positives per image (Poisson).
  double fp_rate = 0.5;
  /// Separation c of the score model: the correct class logit is drawn from
  /// N(c, 1) and the others from N(0, 1), then all are multiplied by c so the
  /// relative logit is the log-likelihood ratio between hit and false alarm.
  double concentration = 2.0;
  /// Standard deviation, in pixels, of the noise added to x, y, w and h.
  double loc_noise = 3.0;
  /// Log-normal sigma applied to the reported variance (0 = exact).
  double variance_noise = 0.0;
};

struct ModalityProfile {
  std::string name;
  SensorProfile day;
  SensorProfile night;
  /// Extra factor on every emitted logit; 1 leaves the scores calibrated.
  double logit_scale = 1.0;
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  int image_count = 100;
  int num_classes = 1;
  std::vector<std::string> class_names;
  /// Poisson mean of objects per image.
  double objects_per_image = 2.5;
  double day_fraction = 0.6;
  double image_width = 640.0;
  double image_height = 512.0;
  double min_object_height = 40.0;
  double max_object_height = 160.0;
  /// Object width / height.
  double aspect_ratio = 0.41;
  std::vector<ModalityProfile> modalities;
};

/// Throws ConfigError for probabilities outside [0, 1], negative noise or rates,
/// empty or duplicate modality names and other malformed fields.
void validate(const ScenarioSpec& spec);

struct SyntheticDataset {
  GroundTruthSet truth;
  /// One detection list per modality, in ScenarioSpec::modalities order.
  std::vector<std::vector<Detection>> detections;
};

/// Deterministic in `spec.seed`. Each modality fires on each object
/// independently; boxes are the object box plus Gaussian noise and carry the
/// variance of that noise.
SyntheticDataset generate(const ScenarioSpec& spec);

/// RGB strong by day, thermal strong by night. A third modality, when asked
/// for, behaves the same in both conditions; more are copies of it.
ScenarioSpec kaist_like_preset(std::uint64_t seed, int image_count, int modality_count = 2);

}  // namespace detfuse
