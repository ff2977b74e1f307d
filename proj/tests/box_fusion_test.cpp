// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>
#include <vector>

#include "detfuse/box_fusion.hpp"
#include "detfuse/error.hpp"
#include "oracles.hpp"

using detfuse::BBox;
using detfuse::BoxFusion;
using detfuse::ClassScores;
using detfuse::Detection;

namespace {

Detection det(BBox box, double p, std::optional<double> var, std::uint64_t id) {
  return {"im", "m" + std::to_string(id), box, ClassScores::from_posteriors(std::vector<double>{1 - p, p}),
          var, id};
}

const ClassScores kAny = ClassScores::from_logits({0.0, 1.0});

}  // namespace

TEST_CASE("variance-weighted box fusion") {
  const BBox a(0, 0, 10, 10), b(2, 2, 10, 10);
  const std::vector<Detection> equal{det(a, 0.8, 2.0, 0), det(b, 0.7, 2.0, 1)};
  CHECK(detfuse::fuse_boxes(equal, kAny, BoxFusion::kVAvg) == BBox(1, 1, 10, 10));

  const std::vector<Detection> skewed{det(a, 0.8, 1.0, 0), det(b, 0.7, 3.0, 1)};
  const auto out = detfuse::fuse_boxes(skewed, kAny, BoxFusion::kVAvg);
  CHECK(out.x() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.y() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.w() == 10);
  CHECK(out.h() == 10);

  const std::vector<Detection> missing{det(a, 0.8, 1.0, 0), det(b, 0.7, std::nullopt, 7)};
  CHECK_THROWS_AS(detfuse::fuse_boxes(missing, kAny, BoxFusion::kVAvg), detfuse::MissingVarianceError);
  try {
    detfuse::fuse_boxes(missing, kAny, BoxFusion::kVAvg);
  } catch (const detfuse::MissingVarianceError& e) {
    CHECK(std::string(e.what()).find('7') != std::string::npos);
  }
}

TEST_CASE("single member returns its box in every mode") {
  const std::vector<Detection> one{det(BBox(3, 4, 5, 6), 0.6, 2.0, 0)};
  for (auto mode : {BoxFusion::kArgmax, BoxFusion::kAvg, BoxFusion::kSAvg, BoxFusion::kVAvg}) {
    CHECK(detfuse::fuse_boxes(one, kAny, mode) == one[0].box);
  }
  CHECK_THROWS_AS(detfuse::fuse_boxes({}, kAny, BoxFusion::kAvg), detfuse::EmptyClusterError);
}

TEST_CASE("score-weighted box fusion uses the members' fused-class posteriors") {
  const BBox a(0, 0, 10, 10), b(2, 2, 10, 10);
  const std::vector<Detection> pair{det(a, 0.8, std::nullopt, 0), det(b, 0.7, std::nullopt, 1)};
  const auto expected = detfuse::convex_combination(std::vector<BBox>{a, b}, std::vector<double>{8.0 / 15.0, 7.0 / 15.0});
  const auto got = detfuse::fuse_boxes(pair, kAny, BoxFusion::kSAvg);
  CHECK(got.x() == doctest::Approx(expected.x()).epsilon(1e-12));
  CHECK(got.y() == doctest::Approx(expected.y()).epsilon(1e-12));
  CHECK(got.x() == doctest::Approx(14.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("argmax box is the top-ranked member's") {
  const std::vector<Detection> pair{det(BBox(0, 0, 10, 10), 0.6, std::nullopt, 0),
                                    det(BBox(2, 2, 10, 10), 0.9, std::nullopt, 1)};
  CHECK(detfuse::fuse_boxes(pair, kAny, BoxFusion::kArgmax) == BBox(2, 2, 10, 10));
}

TEST_CASE("box fusion properties") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> p(0.05, 0.95), v(0.1, 10.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<Detection> members;
    const int n = 1 + static_cast<int>(rng() % 4);
    const double shared = v(rng);
    std::vector<Detection> same_var;
    for (int k = 0; k < n; ++k) {
      members.push_back(det(oracle::random_box(rng), p(rng), v(rng), static_cast<std::uint64_t>(k)));
      same_var.push_back(members.back());
      same_var.back().box_variance = shared;
    }
    for (auto mode : {BoxFusion::kArgmax, BoxFusion::kAvg, BoxFusion::kSAvg, BoxFusion::kVAvg}) {
      const auto out = detfuse::fuse_boxes(members, kAny, mode);
      double lx = HUGE_VAL, hx = -HUGE_VAL, lw = HUGE_VAL, hw = -HUGE_VAL;
      double ly = HUGE_VAL, hy = -HUGE_VAL, lh = HUGE_VAL, hh = -HUGE_VAL;
      for (const auto& m : members) {
        lx = std::min(lx, m.box.x()), hx = std::max(hx, m.box.x());
        ly = std::min(ly, m.box.y()), hy = std::max(hy, m.box.y());
        lw = std::min(lw, m.box.w()), hw = std::max(hw, m.box.w());
        lh = std::min(lh, m.box.h()), hh = std::max(hh, m.box.h());
      }
      CHECK(out.x() >= lx);
      CHECK(out.x() <= hx);
      CHECK(out.y() >= ly);
      CHECK(out.y() <= hy);
      CHECK(out.w() >= lw);
      CHECK(out.w() <= hw);
      CHECK(out.h() >= lh);
      CHECK(out.h() <= hh);
    }
    CHECK(detfuse::fuse_boxes(members, kAny, BoxFusion::kAvg) ==
          detfuse::fuse_boxes(same_var, kAny, BoxFusion::kVAvg));
  }
}

TEST_CASE("huge variances hand the box to the confident member") {
  std::mt19937_64 rng(123);
  for (int i = 0; i < 200; ++i) {
    std::vector<Detection> members;
    const int n = 2 + static_cast<int>(rng() % 3);
    for (int k = 0; k < n; ++k) {
      members.push_back(det(oracle::random_box(rng), 0.5, 1e12, static_cast<std::uint64_t>(k)));
    }
    members[0].box_variance = 1.0;
    const auto out = detfuse::fuse_boxes(members, kAny, BoxFusion::kVAvg);
    CHECK(std::abs(out.x() - members[0].box.x()) < 1e-6);
    CHECK(std::abs(out.y() - members[0].box.y()) < 1e-6);
    CHECK(std::abs(out.w() - members[0].box.w()) < 1e-6);
    CHECK(std::abs(out.h() - members[0].box.h()) < 1e-6);
  }
}
