// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detfuse/box_fusion.hpp"
#include "detfuse/detections.hpp"
#include "detfuse/score_fusion.hpp"

namespace detfuse {

struct FusionConfig {
  /// Detections join a cluster when IoU with the seed exceeds this value.
  double iou_threshold = 0.5;
  ScoreFusion score_fusion = ScoreFusion::kProbEn;
  BoxFusion box_fusion = BoxFusion::kArgmax;
  /// Uniform over K+1 classes when unset.
  std::optional<ClassPrior> prior;
  /// Per-modality logit calibration; modalities not listed are left alone.
  std::map<std::string, CalibrationParams> calibration;
  /// Required by ScoreFusion::kLinear.
  std::optional<LinearFusionWeights> weights;
};

/// Throws ConfigError for an out-of-range threshold, missing linear weights or
/// invalid calibration parameters.
void validate(const FusionConfig& config);

/// One greedy step of the fusion loop.
struct Cluster {
  /// Highest-ranked remaining detection.
  Detection seed;
  /// Every remaining detection of the seed's class overlapping it above the
  /// threshold, seed included, in rank order.
  std::vector<Detection> members;
  /// Best-ranked member of each modality, in rank order (seed first).
  std::vector<Detection> selected;
};

/// Greedy star-shaped clustering of one image's detections, per argmax class.
/// Detections are consumed in rank order; clusters are returned in the order
/// they were formed, classes ascending.
std::vector<Cluster> cluster_detections(std::vector<Detection> detections, double iou_threshold);

/// Applies the configured per-modality calibration to each detection.
std::vector<Detection> apply_calibration(std::span<const Detection> detections,
                                         const std::map<std::string, CalibrationParams>& calibration);

/// Fuses one cluster's selected members into a single detection.
Detection fuse_cluster(const Cluster& cluster, const FusionConfig& config);

/// Concatenation of every modality's detections in rank order. No suppression.
std::vector<Detection> pool(std::span<const std::vector<Detection>> detection_sets);

/// Multimodal fusion by NMS or probabilistic ensembling. Calibrates, then per
/// image and per argmax class repeatedly takes the best remaining detection,
/// gathers its overlap set, fuses the best detection of each modality within
/// it, and removes the whole set. Images are processed independently; the
/// result is in rank order.
std::vector<Detection> fuse(std::span<const std::vector<Detection>> detection_sets,
                            const FusionConfig& config);

/// Caches the clusters formed during fusion as training data for linear logit
/// fusion: each cluster's per-modality logits plus whether its seed matches a
/// non-ignored ground truth of the same class with IoU above `match_iou`.
std::vector<LinearTrainingExample> collect_linear_training_set(
    std::span<const std::vector<Detection>> detection_sets, std::span<const GroundTruth> gts,
    const FusionConfig& config, double match_iou = 0.5);

}  // namespace detfuse
