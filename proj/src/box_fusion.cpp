// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "detfuse/box_fusion.hpp"

#include <algorithm>
#include <vector>

#include "detfuse/error.hpp"

namespace detfuse {

std::string_view to_string(BoxFusion mode) noexcept {
  switch (mode) {
    case BoxFusion::kArgmax:
      return "argmax";
    case BoxFusion::kAvg:
      return "avg";
    case BoxFusion::kSAvg:
      return "s-avg";
    case BoxFusion::kVAvg:
      return "v-avg";
  }
  return "?";
}

BoxFusion parse_box_fusion(std::string_view name) {
  for (auto mode : {BoxFusion::kArgmax, BoxFusion::kAvg, BoxFusion::kSAvg, BoxFusion::kVAvg}) {
    if (to_string(mode) == name) {
      return mode;
    }
  }
  throw ConfigError("unknown box fusion mode '" + std::string(name) + "'");
}

BBox fuse_boxes(std::span<const Detection> members, const ClassScores& fused_scores, BoxFusion mode) {
  if (members.empty()) {
    throw EmptyClusterError("cannot fuse boxes of an empty cluster");
  }
  if (mode == BoxFusion::kArgmax) {
    return std::min_element(members.begin(), members.end(), ranks_before)->box;
  }

  std::vector<BBox> boxes;
  std::vector<double> weights;
  boxes.reserve(members.size());
  weights.reserve(members.size());
  const int k = fused_scores.argmax_class();
  double min_variance = 0.0;
  if (mode == BoxFusion::kVAvg) {
    for (const auto& m : members) {
      if (!m.box_variance) {
        throw MissingVarianceError("v-avg box fusion needs box_variance, missing on det_id " +
                                   std::to_string(m.det_id));
      }
      min_variance = min_variance == 0.0 ? *m.box_variance : std::min(min_variance, *m.box_variance);
    }
  }
  for (const auto& m : members) {
    boxes.push_back(m.box);
    switch (mode) {
      case BoxFusion::kAvg:
        weights.push_back(1.0);
        break;
      case BoxFusion::kSAvg:
        weights.push_back(m.scores.posterior(k));
        break;
      case BoxFusion::kVAvg:
        // Relative precision; equal variances give unit weights, same as avg.
        weights.push_back(min_variance / *m.box_variance);
        break;
      case BoxFusion::kArgmax:
        break;
    }
  }
  return convex_combination(boxes, weights);
}

}  // namespace detfuse
