// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "detfuse/detections.hpp"
#include "detfuse/error.hpp"

using detfuse::ClassScores;

TEST_CASE("softmax") {
  const auto half = detfuse::softmax(std::vector<double>{0.0, 0.0});
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);
  const auto third = detfuse::softmax(std::vector<double>{std::log(2.0), 0.0});
  CHECK(third[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(third[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(detfuse::softmax(std::vector<double>{NAN, 0.0}), detfuse::InvalidScoreError);
  CHECK_THROWS_AS(detfuse::softmax(std::vector<double>{INFINITY, 0.0}), detfuse::InvalidScoreError);
  // Large logits must not overflow.
  const auto big = detfuse::softmax(std::vector<double>{1000.0, 999.0});
  CHECK(big[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("softmax is shift invariant") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> v(2 + rng() % 5), w;
    for (auto& x : v) {
      x = n(rng);
    }
    const double c = n(rng) * 10.0;
    for (double x : v) {
      w.push_back(x + c);
    }
    const auto a = detfuse::softmax(v), b = detfuse::softmax(w);
    for (std::size_t k = 0; k < v.size(); ++k) {
      CHECK(std::abs(a[k] - b[k]) < 1e-12);
    }
  }
}

TEST_CASE("posteriors to logits round trip") {
  const auto half = detfuse::logits_from_posteriors(std::vector<double>{0.5, 0.5});
  CHECK(half.logits[0] == doctest::Approx(std::log(0.5)));
  CHECK(half.logits[1] == doctest::Approx(std::log(0.5)));
  CHECK_FALSE(half.clamped);

  std::mt19937_64 rng(9);
  std::gamma_distribution<double> g(1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> p(2 + rng() % 4);
    double s = 0.0;
    for (auto& x : p) {
      x = g(rng) + 1e-3;
      s += x;
    }
    for (auto& x : p) {
      x /= s;
    }
    const auto back = ClassScores::from_posteriors(p).posteriors();
    for (std::size_t k = 0; k < p.size(); ++k) {
      CHECK(std::abs(back[k] - p[k]) < 1e-9);
    }
  }

  bool clamped = false;
  const auto edge = ClassScores::from_posteriors(std::vector<double>{1.0, 0.0}, &clamped);
  CHECK(clamped);
  CHECK(std::abs(edge.posteriors()[0] - (1.0 - detfuse::kPosteriorEpsilon)) < 2e-7);
  CHECK(std::abs(edge.posteriors()[1] - detfuse::kPosteriorEpsilon) < 2e-7);
}

TEST_CASE("malformed score vectors are rejected") {
  CHECK_THROWS_AS(ClassScores::from_logits({1.0}), detfuse::InvalidScoreError);
  CHECK_THROWS_AS(ClassScores::from_posteriors(std::vector<double>{0.5, 0.6}), detfuse::InvalidScoreError);
  CHECK_THROWS_AS(ClassScores::from_posteriors(std::vector<double>{1.2, -0.2}), detfuse::InvalidScoreError);
  CHECK_THROWS_AS(ClassScores::from_confidence(0.5, 3, 2), detfuse::InputError);
}

TEST_CASE("class scores") {
  const auto s = ClassScores::from_logits({0.0, 2.0, 1.0});
  CHECK(s.num_classes() == 2);
  CHECK(s.argmax_class() == 1);
  CHECK(s.score() == doctest::Approx(s.posteriors()[1]));

  // Argmax ranges over foreground classes even when background dominates.
  const auto bg = ClassScores::from_logits({5.0, -1.0, -2.0});
  CHECK(bg.argmax_class() == 1);
  // Ties go to the lower class id.
  CHECK(ClassScores::from_logits({0.0, 1.0, 1.0}).argmax_class() == 1);

  const auto conf = ClassScores::from_confidence(0.8, 2, 3);
  CHECK(conf.posterior(2) == doctest::Approx(0.8));
  CHECK(conf.posterior(0) == doctest::Approx(0.2));
  CHECK(conf.argmax_class() == 2);
}

TEST_CASE("stored posteriors agree with logits and argmax is shift invariant") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 4.0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(2 + rng() % 5);
    for (auto& x : v) {
      x = n(rng);
    }
    const auto s = ClassScores::from_logits(v);
    const auto p = detfuse::softmax(v);
    for (std::size_t k = 0; k < v.size(); ++k) {
      CHECK(std::abs(s.posteriors()[k] - p[k]) < 1e-6);
    }
    const double c = n(rng);
    for (auto& x : v) {
      x += c;
    }
    CHECK(ClassScores::from_logits(v).argmax_class() == s.argmax_class());
  }
}

TEST_CASE("class prior") {
  CHECK_THROWS_AS(detfuse::ClassPrior({0.5, 0.6}), detfuse::ConfigError);
  CHECK_THROWS_AS(detfuse::ClassPrior({1.0, 0.0}), detfuse::ConfigError);
  CHECK(detfuse::ClassPrior::uniform(3).is_uniform());
  CHECK_FALSE(detfuse::ClassPrior({0.7, 0.3}).is_uniform());
}

TEST_CASE("estimated class prior") {
  const detfuse::BBox box(0, 0, 1, 1);
  auto gts_for = [&](std::vector<int> counts) {
    std::vector<detfuse::GroundTruth> gts;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      for (int i = 0; i < counts[k]; ++i) {
        gts.push_back({"im", box, static_cast<int>(k) + 1, false});
      }
    }
    return gts;
  };

  const auto even = detfuse::estimate_class_prior(gts_for({10, 10, 10}), 3, 0.25).values();
  for (double v : even) {
    CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  }

  // Reference values: 0.5 * count / 79300.
  const auto flir = detfuse::estimate_class_prior(gts_for({28151, 46692, 4457}), 3, 0.5).values();
  CHECK(flir[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(flir[1] == doctest::Approx(0.1774968474148802).epsilon(1e-12));
  CHECK(flir[2] == doctest::Approx(0.29440100882723835).epsilon(1e-12));
  CHECK(flir[3] == doctest::Approx(0.028102143757881462).epsilon(1e-12));

  const auto single = detfuse::estimate_class_prior(gts_for({1}), 1, 0.3).values();
  CHECK(single[1] == doctest::Approx(0.7));

  // An empty class still gets positive mass.
  const auto sparse = detfuse::estimate_class_prior(gts_for({5, 0}), 2, 0.5).values();
  CHECK(sparse[2] > 0.0);
  CHECK(sparse[2] < 1e-5);

  auto ignored = gts_for({3});
  ignored.push_back({"im", box, 1, true});
  CHECK_THROWS_AS(detfuse::estimate_class_prior({}, 1, 0.5), detfuse::ConfigError);
  CHECK_THROWS_AS(detfuse::estimate_class_prior(ignored, 1, 1.0), detfuse::ConfigError);
}

TEST_CASE("detection validation") {
  detfuse::Detection d{"im", "rgb", detfuse::BBox(0, 0, 1, 1), ClassScores::from_logits({0, 1}), 2.0, 0};
  CHECK_NOTHROW(detfuse::validate(d));
  d.box_variance = 0.0;
  CHECK_THROWS_AS(detfuse::validate(d), detfuse::InputError);
  d.box_variance = NAN;
  CHECK_THROWS_AS(detfuse::validate(d), detfuse::InputError);
}
