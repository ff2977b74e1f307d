// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "detfuse/calibration.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

#include "detfuse/error.hpp"

namespace detfuse {

namespace {

double parse_double(std::string_view text) {
  std::string s(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) {
      throw ConfigError("");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("invalid number '" + s + "' in grid");
  }
}

}  // namespace

std::vector<double> GridAxis::values() const {
  if (steps < 1) {
    throw ConfigError("grid axis needs at least one step");
  }
  if (steps == 1) {
    return {lo};
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    out.push_back(i + 1 == steps ? hi : lo + (hi - lo) * i / (steps - 1));
  }
  return out;
}

GridAxis parse_grid_axis(std::string_view text) {
  const auto first = text.find(':');
  if (first == std::string_view::npos) {
    const double v = parse_double(text);
    return {v, v, 1};
  }
  const auto second = text.find(':', first + 1);
  if (second == std::string_view::npos) {
    throw ConfigError("grid axis must be 'lo:hi:steps' or a single value");
  }
  GridAxis axis{parse_double(text.substr(0, first)),
                parse_double(text.substr(first + 1, second - first - 1)), 0};
  const auto steps = text.substr(second + 1);
  auto [ptr, ec] = std::from_chars(steps.data(), steps.data() + steps.size(), axis.steps);
  if (ec != std::errc() || ptr != steps.data() + steps.size() || axis.steps < 1) {
    throw ConfigError("grid steps must be a positive integer");
  }
  return axis;
}

std::string_view to_string(Objective objective) noexcept {
  return objective == Objective::kLamr ? "lamr" : "ap";
}

Objective parse_objective(std::string_view name) {
  if (name == "lamr") {
    return Objective::kLamr;
  }
  if (name == "ap") {
    return Objective::kAp;
  }
  throw ConfigError("unknown objective '" + std::string(name) + "'");
}

CalibrationResult calibrate_grid(std::span<const std::vector<Detection>> detection_sets,
                                 const GroundTruthSet& truth, const CalibrationSearch& search) {
  const auto temperatures = search.temperature.values();
  const auto shifts = search.shift.values();
  for (double t : temperatures) {
    if (!(t > 0.0)) {
      throw ConfigError("calibration grid contains a non-positive temperature");
    }
  }
  if (search.modality.empty()) {
    throw ConfigError("calibration needs the modality to calibrate");
  }

  std::set<std::string> images = truth.images;
  for (const auto& gt : truth.objects) {
    images.insert(gt.image_id);
  }
  for (const auto& set : detection_sets) {
    for (const auto& d : set) {
      images.insert(d.image_id);
    }
  }

  CalibrationResult result;
  bool have_best = false;
  auto better = [&](const SurfacePoint& a, const CalibrationParams& b, double b_obj) {
    if (a.objective != b_obj) {
      return search.objective == Objective::kLamr ? a.objective < b_obj : a.objective > b_obj;
    }
    const double da = std::hypot(a.temperature - 1.0, a.shift);
    const double db = std::hypot(b.temperature - 1.0, b.shift);
    if (da != db) {
      return da < db;
    }
    return std::tie(a.temperature, a.shift) < std::tie(b.temperature, b.shift);
  };

  for (double t : temperatures) {
    for (double b : shifts) {
      FusionConfig config = search.fusion;
      config.calibration[search.modality] = {t, b};
      const auto fused = fuse(detection_sets, config);
      const auto report = evaluate_subset(fused, truth, images, search.eval);
      const auto value = search.objective == Objective::kLamr ? report.lamr : report.mean_ap;
      if (!value) {
        throw ConfigError("calibration objective is undefined: no ground truth to evaluate against");
      }
      SurfacePoint p{t, b, *value};
      result.surface.push_back(p);
      if (!have_best || better(p, result.best, result.best_objective)) {
        result.best = {t, b};
        result.best_objective = *value;
        have_best = true;
      }
    }
  }
  return result;
}

std::string surface_csv(const CalibrationResult& result, Objective objective) {
  std::ostringstream os;
  os << std::setprecision(17) << "temperature,shift," << to_string(objective) << '\n';
  for (const auto& p : result.surface) {
    os << p.temperature << ',' << p.shift << ',' << p.objective << '\n';
  }
  return os.str();
}

}  // namespace detfuse
