// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>

#include "detfuse/detections.hpp"
#include "detfuse/geometry.hpp"

namespace detfuse {

/// How cluster members' boxes become one box. Every mode except kArgmax is an
/// inverse-variance weighted mean; they differ in where the variance comes from:
///   kAvg  - every variance is 1
///   kSAvg - variance is 1 / p(y = k | x_i), k the fused argmax class
///   kVAvg - variance is the detector-reported box_variance
enum class BoxFusion { kArgmax, kAvg, kSAvg, kVAvg };

/// argmax, avg, s-avg, v-avg.
std::string_view to_string(BoxFusion mode) noexcept;
BoxFusion parse_box_fusion(std::string_view name);

/// Throws EmptyClusterError for no members and MissingVarianceError (naming the
/// det_id) when kVAvg meets a member without box_variance.
BBox fuse_boxes(std::span<const Detection> members, const ClassScores& fused_scores, BoxFusion mode);

}  // namespace detfuse
