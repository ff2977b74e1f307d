// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detfuse/engine.hpp"
#include "detfuse/metrics.hpp"

namespace detfuse {

/// Evenly spaced values lo..hi inclusive; one step means just lo.
struct GridAxis {
  double lo = 1.0;
  double hi = 1.0;
  int steps = 1;

  std::vector<double> values() const;
};

/// Parses "lo:hi:steps" or a single value. Throws ConfigError.
GridAxis parse_grid_axis(std::string_view text);

enum class Objective { kLamr, kAp };

std::string_view to_string(Objective objective) noexcept;
Objective parse_objective(std::string_view name);

struct CalibrationSearch {
  std::string modality;
  GridAxis temperature{1.0, 1.0, 1};
  GridAxis shift{0.0, 0.0, 1};
  /// LAMR is minimized, mean AP maximized, both over all images.
  Objective objective = Objective::kLamr;
  /// Fusion settings used at every grid point; the searched modality's entry
  /// in `calibration` is replaced.
  FusionConfig fusion;
  EvalOptions eval;
};

struct SurfacePoint {
  double temperature;
  double shift;
  double objective;
};

struct CalibrationResult {
  CalibrationParams best;
  double best_objective = 0.0;
  /// Temperature-major, in grid order.
  std::vector<SurfacePoint> surface;
};

/// Exhaustive grid search. Ties go to the point nearest (T, b) = (1, 0), then
/// to the lexicographically smaller (T, b). Throws ConfigError for a
/// non-positive temperature in the grid or an undefined objective.
CalibrationResult calibrate_grid(std::span<const std::vector<Detection>> detection_sets,
                                 const GroundTruthSet& truth, const CalibrationSearch& search);

/// "temperature,shift,objective" rows.
std::string surface_csv(const CalibrationResult& result, Objective objective);

}  // namespace detfuse
