// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

namespace detfuse {

/// Axis-aligned box in pixel coordinates, stored as top-left corner plus size.
/// Width and height are strictly positive and every field is finite.
class BBox {
 public:
  /// Throws InputError when the box is degenerate or non-finite.
  BBox(double x, double y, double w, double h);

  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }
  double w() const noexcept { return w_; }
  double h() const noexcept { return h_; }
  double right() const noexcept { return x_ + w_; }
  double bottom() const noexcept { return y_ + h_; }
  double area() const noexcept { return w_ * h_; }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x_;
  double y_;
  double w_;
  double h_;
};

/// Intersection over union. Boxes touching only along an edge give 0.
double iou(const BBox& a, const BBox& b) noexcept;

/// Coordinate-wise weighted mean of `boxes` after normalizing `weights` to sum 1.
/// Throws DegenerateWeightsError on empty input, mismatched lengths, negative
/// weights or a zero weight sum.
BBox convex_combination(std::span<const BBox> boxes, std::span<const double> weights);

}  // namespace detfuse
