// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "detfuse/detections.hpp"

namespace detfuse {

enum class MatchLabel { kTruePositive, kFalsePositive, kIgnored };

struct MatchedDetection {
  std::string image_id;
  int class_id = 1;
  double score = 0.0;
  std::uint64_t det_id = 0;
  MatchLabel label = MatchLabel::kFalsePositive;
};

struct MatchResult {
  /// Every detection in rank order with its label.
  std::vector<MatchedDetection> detections;
  /// Parallel to the ground truth input; always false for ignored entries.
  std::vector<bool> gt_matched;
  /// Non-ignored ground truths per class id.
  std::map<int, std::size_t> gt_count;

  std::size_t total_gt() const noexcept;
  std::size_t count(MatchLabel label) const noexcept;
  std::size_t count(MatchLabel label, int class_id) const noexcept;
};

/// Greedy matching per image in detection rank order. A detection claims the
/// unmatched non-ignored ground truth of its class with the highest IoU above
/// the threshold (TP); failing that it is IGNORED if it overlaps an ignored
/// ground truth of its class above the threshold, otherwise FP.
MatchResult match(std::span<const Detection> detections, std::span<const GroundTruth> gts,
                  double iou_threshold = 0.5);

struct PrPoint {
  double threshold;
  double recall;
  double precision;
};

/// One point per distinct score threshold of the class, strictest first.
std::vector<PrPoint> precision_recall_curve(const MatchResult& matches, int class_id);

/// All-point interpolated AP: area under the monotone precision envelope.
/// Empty when the class has no non-ignored ground truth.
std::optional<double> average_precision(const MatchResult& matches, int class_id);

struct MissRatePoint {
  double threshold;
  double fppi;
  double miss_rate;
};

/// Miss rate against false positives per image over all classes, one point per
/// distinct score threshold, strictest first.
std::vector<MissRatePoint> miss_rate_curve(const MatchResult& matches, std::size_t image_count);

/// The nine reference FPPI values 10^(-2 + k/4), k = 0..8.
std::array<double, 9> lamr_reference_fppi() noexcept;

/// Miss rate sampled at each reference FPPI: the loosest threshold whose FPPI
/// does not exceed the reference, or 1 when no threshold qualifies.
std::array<double, 9> sampled_miss_rates(const MatchResult& matches, std::size_t image_count);

/// Log-average miss rate: geometric mean of the sampled miss rates, each floored
/// at 1e-10. Empty when there is no non-ignored ground truth.
std::optional<double> lamr(const MatchResult& matches, std::size_t image_count);

/// Ground truth plus the image universe it was annotated over.
struct GroundTruthSet {
  int num_classes = 1;
  std::vector<std::string> class_names;
  std::vector<GroundTruth> objects;
  /// Every image known to the annotation, including ones without objects.
  std::set<std::string> images;
  /// image_id -> "day" or "night".
  std::map<std::string, std::string> tags;
};

struct ClassReport {
  int class_id = 1;
  std::string name;
  std::size_t gt_count = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::optional<double> ap;
  std::vector<PrPoint> pr_curve;
};

struct SubsetReport {
  std::size_t image_count = 0;
  std::size_t gt_count = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t ignored = 0;
  std::vector<ClassReport> classes;
  /// Mean over classes with ground truth.
  std::optional<double> mean_ap;
  std::optional<double> lamr;
  std::array<double, 9> sampled_miss_rates{};
  std::vector<MissRatePoint> miss_rate_curve;
};

struct EvalReport {
  /// Keys "all", "day", "night"; a subset with no images is empty, not zero.
  std::map<std::string, std::optional<SubsetReport>> subsets;
  std::vector<std::string> warnings;
};

struct EvalOptions {
  double iou_threshold = 0.5;
};

/// Evaluates one subset of images.
SubsetReport evaluate_subset(std::span<const Detection> detections, const GroundTruthSet& truth,
                             const std::set<std::string>& images, const EvalOptions& options,
                             std::vector<std::string>* warnings = nullptr);

/// AP and LAMR over all images and over the day and night tagged subsets.
/// Untagged images only count toward "all".
EvalReport breakdown(std::span<const Detection> detections, const GroundTruthSet& truth,
                     const EvalOptions& options = {});

}  // namespace detfuse
