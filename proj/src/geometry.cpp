// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "detfuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "detfuse/error.hpp"

namespace detfuse {

BBox::BBox(double x, double y, double w, double h) : x_(x), y_(y), w_(w), h_(h) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) || !std::isfinite(h)) {
    throw InputError("bbox has non-finite coordinates");
  }
  if (!(w > 0.0) || !(h > 0.0)) {
    std::ostringstream os;
    os << "bbox must have positive width and height, got w=" << w << " h=" << h;
    throw InputError(os.str());
  }
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x(), b.x());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y(), b.y());
  if (iw <= 0.0 || ih <= 0.0) {
    return 0.0;
  }
  const double inter = iw * ih;
  // a.area() + b.area() is commutative, so iou(a, b) == iou(b, a) bit for bit.
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox convex_combination(std::span<const BBox> boxes, std::span<const double> weights) {
  if (boxes.empty() || boxes.size() != weights.size()) {
    throw DegenerateWeightsError("convex_combination needs equally sized, nonempty inputs");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw DegenerateWeightsError("convex_combination weights must be finite and nonnegative");
    }
    total += w;
  }
  if (!(total > 0.0)) {
    throw DegenerateWeightsError("convex_combination weights sum to zero");
  }

  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double a = weights[i] / total;
    x += a * boxes[i].x();
    y += a * boxes[i].y();
    w += a * boxes[i].w();
    h += a * boxes[i].h();
  }

  // Rounding can push a mean a few ulps outside the input envelope.
  auto envelope = [&](double v, auto field) {
    double lo = field(boxes[0]), hi = lo;
    for (const auto& b : boxes) {
      lo = std::min(lo, field(b));
      hi = std::max(hi, field(b));
    }
    return std::clamp(v, lo, hi);
  };
  return BBox(envelope(x, [](const BBox& b) { return b.x(); }),
              envelope(y, [](const BBox& b) { return b.y(); }),
              envelope(w, [](const BBox& b) { return b.w(); }),
              envelope(h, [](const BBox& b) { return b.h(); }));
}

}  // namespace detfuse
