// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detfuse/detections.hpp"
#include "detfuse/metrics.hpp"
#include "detfuse/score_fusion.hpp"
#include "detfuse/synth.hpp"

namespace detfuse {

// Detection files are newline-delimited JSON, one record per detection:
//
//   {"image_id": "img000001", "modality": "rgb", "bbox": [x, y, w, h],
//    "logits": [s0, s1, ...] | "posteriors": [p0, p1, ...] | "score": c, "class_id": k,
//    "box_variance": v}
//
// An optional {"meta": {"num_classes": K}} record fixes K for scalar scores.
//
// Ground truth files start with {"meta": {"num_classes": K, "class_names": [...]}}
// followed by object records {"image_id", "bbox", "class_id", "ignore"?, "tag"?}
// and image records {"image_id", "tag"?} that declare images without objects.

struct DetectionReadOptions {
  /// Replaces the modality tag of every record.
  std::optional<std::string> modality;
  /// Number of foreground classes; otherwise taken from a meta record, the
  /// first vector-valued record, or 1.
  std::optional<int> num_classes;
  /// det_id of the first record; later records count up in file order.
  std::uint64_t first_det_id = 0;
};

struct DetectionReadResult {
  std::vector<Detection> detections;
  int num_classes = 0;
  std::vector<std::string> warnings;
};

/// Throws ParseError naming `source` and the 1-based line on malformed records.
DetectionReadResult read_detections(std::istream& in, const std::string& source,
                                    const DetectionReadOptions& options = {});
DetectionReadResult read_detections(const std::filesystem::path& path,
                                    const DetectionReadOptions& options = {});

/// Writes logits, so reading the file back reproduces every field exactly.
void write_detections(std::ostream& out, std::span<const Detection> detections);
void write_detections(const std::filesystem::path& path, std::span<const Detection> detections);

struct GroundTruthReadOptions {
  /// Objects shorter than this many pixels are marked ignore.
  double min_height = 0.0;
};

GroundTruthSet read_ground_truth(std::istream& in, const std::string& source,
                                 const GroundTruthReadOptions& options = {});
GroundTruthSet read_ground_truth(const std::filesystem::path& path,
                                 const GroundTruthReadOptions& options = {});

void write_ground_truth(std::ostream& out, const GroundTruthSet& truth);
void write_ground_truth(const std::filesystem::path& path, const GroundTruthSet& truth);

/// {"weights": {"rgb": [w0, w1, ...], "thermal": [...]}}
LinearFusionWeights read_weights(const std::filesystem::path& path);
void write_weights(const std::filesystem::path& path, const LinearFusionWeights& weights);

/// JSON scenario description; omitted fields keep their defaults. A "preset"
/// key ("kaist-like") seeds the modalities before the remaining fields apply.
ScenarioSpec read_scenario_spec(std::istream& in, const std::string& source);
ScenarioSpec read_scenario_spec(const std::filesystem::path& path);

std::string report_to_json(const EvalReport& report);
/// Aligned-column plain text.
std::string report_to_text(const EvalReport& report);
/// fppi,miss_rate,threshold rows of the "all" subset.
std::string miss_rate_csv(const SubsetReport& report);
/// class_id,recall,precision,threshold rows of the "all" subset.
std::string precision_recall_csv(const SubsetReport& report);

/// Writes `text` to `path`, throwing InputError when the file cannot be opened.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace detfuse
