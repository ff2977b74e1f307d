// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "detfuse/error.hpp"
#include "detfuse/score_fusion.hpp"

using detfuse::ClassPrior;
using detfuse::ClassScores;

namespace {

ClassScores binary(double p) { return ClassScores::from_posteriors(std::vector<double>{1.0 - p, p}); }
ClassScores relative(double r) { return ClassScores::from_logits({0.0, r}); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<ClassScores> random_cluster(std::mt19937_64& rng, int m, int k) {
  std::normal_distribution<double> n(0.0, 2.5);
  std::vector<ClassScores> out;
  for (int i = 0; i < m; ++i) {
    std::vector<double> v(static_cast<std::size_t>(k) + 1);
    for (auto& x : v) {
      x = n(rng);
    }
    out.push_back(ClassScores::from_logits(v));
  }
  return out;
}

void check_valid(const ClassScores& s) {
  double sum = 0.0;
  for (double p : s.posteriors()) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    sum += p;
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

}  // namespace

TEST_CASE("empty clusters are rejected") {
  const std::vector<ClassScores> none;
  CHECK_THROWS_AS(detfuse::fuse_max(none), detfuse::EmptyClusterError);
  CHECK_THROWS_AS(detfuse::fuse_avg_posteriors(none), detfuse::EmptyClusterError);
  CHECK_THROWS_AS(detfuse::fuse_avg_logits(none), detfuse::EmptyClusterError);
  CHECK_THROWS_AS(detfuse::fuse_proben(none, ClassPrior::uniform(1), 1), detfuse::EmptyClusterError);
}

TEST_CASE("two-sensor worked example") {
  const std::vector<ClassScores> pair{binary(0.8), binary(0.7)};
  CHECK(detfuse::fuse_max(pair).score() == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(detfuse::fuse_avg_posteriors(pair).score() == doctest::Approx(0.75).epsilon(1e-12));
  // 0.8 * 0.7 / (0.8 * 0.7 + 0.2 * 0.3) = 0.56 / 0.62
  CHECK(detfuse::fuse_proben(pair, ClassPrior::uniform(1), 2).score() ==
        doctest::Approx(0.56 / 0.62).epsilon(1e-12));
}

TEST_CASE("opposing evidence") {
  const std::vector<ClassScores> pair{relative(3.0), relative(-3.0)};
  CHECK(detfuse::fuse_max(pair).score() == doctest::Approx(0.9525741268224334).epsilon(1e-12));
  CHECK(detfuse::fuse_proben(pair, ClassPrior::uniform(1), 2).score() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(detfuse::fuse_avg_logits(pair).score() == doctest::Approx(0.5).epsilon(1e-12));
  const std::vector<ClassScores> agree{relative(4.0), relative(4.0)};
  CHECK(detfuse::fuse_proben(agree, ClassPrior::uniform(1), 2).score() > detfuse::fuse_max(agree).score());
}

TEST_CASE("single members pass through unchanged") {
  const std::vector<ClassScores> one{ClassScores::from_logits({0.3, 1.2, -0.4})};
  CHECK(detfuse::fuse_max(one).logits() == one[0].logits());
  CHECK(detfuse::fuse_avg_logits(one).logits() == one[0].logits());
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(detfuse::fuse_avg_posteriors(one).posteriors()[k] == doctest::Approx(one[0].posteriors()[k]));
    CHECK(detfuse::fuse_proben(one, ClassPrior({0.6, 0.3, 0.1}), 1).posteriors()[k] ==
          doctest::Approx(one[0].posteriors()[k]).epsilon(1e-12));
  }
}

TEST_CASE("uninformative member leaves probabilistic fusion unchanged") {
  for (double p : {0.05, 0.3, 0.77, 0.99}) {
    const std::vector<ClassScores> pair{binary(p), binary(0.5)};
    CHECK(detfuse::fuse_proben(pair, ClassPrior::uniform(1), 2).score() == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("identical members are a fixed point of averaging") {
  const auto s = ClassScores::from_logits({0.1, 1.5, -2.0});
  const std::vector<ClassScores> same{s, s, s};
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(detfuse::fuse_avg_posteriors(same).posteriors()[k] == doctest::Approx(s.posteriors()[k]).epsilon(1e-12));
    CHECK(detfuse::fuse_avg_logits(same).posteriors()[k] == doctest::Approx(s.posteriors()[k]).epsilon(1e-12));
  }
}

TEST_CASE("product of posteriors equals softmax of summed logits") {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int m = 1 + static_cast<int>(rng() % 4);
    const int k = 1 + static_cast<int>(rng() % 5);
    const auto members = random_cluster(rng, m, k);
    std::vector<double> summed(static_cast<std::size_t>(k) + 1, 0.0);
    for (const auto& s : members) {
      for (std::size_t j = 0; j < summed.size(); ++j) {
        summed[j] += s.logits()[j];
      }
    }
    const auto expected = detfuse::softmax(summed);
    const auto got = detfuse::fuse_proben(members, ClassPrior::uniform(k), m).posteriors();
    for (std::size_t j = 0; j < got.size(); ++j) {
      worst = std::max(worst, std::abs(got[j] - expected[j]));
    }
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("two-member logit average is probabilistic fusion of halved logits") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto members = random_cluster(rng, 2, 1 + static_cast<int>(rng() % 4));
    std::vector<ClassScores> halved;
    for (const auto& s : members) {
      auto v = s.logits();
      for (auto& x : v) {
        x /= 2.0;
      }
      halved.push_back(ClassScores::from_logits(v));
    }
    const auto a = detfuse::fuse_avg_logits(members).posteriors();
    const auto b = detfuse::fuse_proben(halved, ClassPrior::uniform(members[0].num_classes()), 2).posteriors();
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK(std::abs(a[j] - b[j]) < 1e-12);
    }
  }
}

TEST_CASE("non-uniform prior divides by the prior M-1 times") {
  const ClassPrior prior({0.7, 0.2, 0.1});
  const std::vector<ClassScores> members{ClassScores::from_logits({0.0, 1.0, 0.5}),
                                         ClassScores::from_logits({0.2, 0.3, 1.1}),
                                         ClassScores::from_logits({-0.5, 0.4, 0.0})};
  std::vector<double> expected(3, 1.0);
  for (std::size_t k = 0; k < 3; ++k) {
    for (const auto& s : members) {
      expected[k] *= s.posteriors()[k];
    }
    expected[k] /= prior.values()[k] * prior.values()[k];
  }
  const double z = expected[0] + expected[1] + expected[2];
  const auto got = detfuse::fuse_proben(members, prior, 3).posteriors();
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(got[k] == doctest::Approx(expected[k] / z).epsilon(1e-12));
  }
}

TEST_CASE("fusion properties on random clusters") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 500; ++i) {
    const int m = 1 + static_cast<int>(rng() % 4);
    const int k = 1 + static_cast<int>(rng() % 4);
    auto members = random_cluster(rng, m, k);
    const auto prior = ClassPrior::uniform(k);
    const auto mx = detfuse::fuse_max(members);
    const auto avg = detfuse::fuse_avg_posteriors(members);
    const auto pe = detfuse::fuse_proben(members, prior, m);
    check_valid(mx);
    check_valid(avg);
    check_valid(detfuse::fuse_avg_logits(members));
    check_valid(pe);

    const int c = mx.argmax_class();
    CHECK(avg.posterior(c) <= mx.posterior(c) + 1e-12);

    std::shuffle(members.begin(), members.end(), rng);
    CHECK(detfuse::fuse_max(members).logits() == mx.logits());
    const auto pe2 = detfuse::fuse_proben(members, prior, m).posteriors();
    for (std::size_t j = 0; j < pe2.size(); ++j) {
      CHECK(std::abs(pe2[j] - pe.posteriors()[j]) < 1e-12);
    }
  }
}

TEST_CASE("agreement boosts and disagreement lowers the fused binary score") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng);
    const std::vector<ClassScores> pair{binary(a), binary(b)};
    const double pe = detfuse::fuse_proben(pair, ClassPrior::uniform(1), 2).score();
    const double mx = detfuse::fuse_max(pair).score();
    if (a > 0.5 && b > 0.5) {
      CHECK(pe > mx);
    } else if ((a < 0.5) != (b < 0.5)) {
      CHECK(pe < mx);
    }
  }
}

TEST_CASE("calibration transform") {
  const auto s = ClassScores::from_logits({0.2, -1.0, 3.0});
  const auto same = detfuse::calibrate_scores(s, {});
  CHECK(same.logits() == s.logits());

  const auto halved = detfuse::calibrate_scores(relative(4.0), {2.0, 0.0});
  CHECK(halved.score() == doctest::Approx(sigmoid(2.0)).epsilon(1e-12));
  const auto shifted = detfuse::calibrate_scores(relative(4.0), {2.0, -1.0});
  CHECK(shifted.score() == doctest::Approx(sigmoid(1.0)).epsilon(1e-12));

  CHECK_THROWS_AS(detfuse::validate(detfuse::CalibrationParams{0.0, 0.0}), detfuse::ConfigError);
  CHECK_THROWS_AS(detfuse::validate(detfuse::CalibrationParams{NAN, 0.0}), detfuse::ConfigError);
  CHECK_THROWS_AS(detfuse::validate(detfuse::CalibrationParams{1.0, INFINITY}), detfuse::ConfigError);
}

TEST_CASE("calibration preserves within-modality ranking") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 3.0);
  std::vector<double> r(200);
  for (auto& x : r) {
    x = n(rng);
  }
  for (const detfuse::CalibrationParams p : {detfuse::CalibrationParams{0.3, 2.0}, {4.0, -1.5}}) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
      const bool before = relative(r[i]).score() < relative(r[i + 1]).score();
      const bool after = detfuse::calibrate_scores(relative(r[i]), p).score() <
                         detfuse::calibrate_scores(relative(r[i + 1]), p).score();
      CHECK(before == after);
    }
  }
}

TEST_CASE("linear fusion reduces to fixed rules") {
  std::mt19937_64 rng(31);
  const std::vector<std::string> names{"a", "b", "c"};
  for (int i = 0; i < 200; ++i) {
    const int m = 1 + static_cast<int>(rng() % 3);
    const int k = 1 + static_cast<int>(rng() % 3);
    const auto members = random_cluster(rng, m, k);
    std::vector<detfuse::ModalityScores> tagged;
    for (int j = 0; j < m; ++j) {
      tagged.push_back({names[static_cast<std::size_t>(j)], members[static_cast<std::size_t>(j)]});
    }
    const auto ones = detfuse::LinearFusionWeights::constant(names, k, 1.0);
    const auto mean = detfuse::LinearFusionWeights::constant(names, k, 1.0 / m);
    const auto pe = detfuse::fuse_proben(members, ClassPrior::uniform(k), m).posteriors();
    const auto al = detfuse::fuse_avg_logits(members).posteriors();
    const auto l1 = detfuse::fuse_linear(tagged, ones).posteriors();
    const auto lm = detfuse::fuse_linear(tagged, mean).posteriors();
    for (std::size_t j = 0; j < pe.size(); ++j) {
      CHECK(std::abs(l1[j] - pe[j]) < 1e-9);
      CHECK(std::abs(lm[j] - al[j]) < 1e-9);
    }
  }
}

TEST_CASE("zero weight removes a modality") {
  detfuse::LinearFusionWeights w({{"a", {0.7, 1.3, 0.9}}, {"b", {0.0, 0.0, 0.0}}});
  const auto a = ClassScores::from_logits({0.1, 2.0, -1.0});
  using Members = std::vector<detfuse::ModalityScores>;
  const auto x = detfuse::fuse_linear(Members{{"a", a}, {"b", ClassScores::from_logits({5.0, -3.0, 1.0})}}, w);
  const auto y = detfuse::fuse_linear(Members{{"a", a}, {"b", ClassScores::from_logits({-2.0, 4.0, 0.0})}}, w);
  CHECK(x.logits() == y.logits());
  CHECK_THROWS_AS(detfuse::fuse_linear(Members{{"z", a}}, w), detfuse::ConfigError);
}

namespace {

detfuse::LinearTrainingExample example(double ra, double rb, bool positive) {
  return {{{"a", {0.0, ra}}, {"b", {0.0, rb}}}, 1, positive};
}

}  // namespace

TEST_CASE("linear weights separate separable data") {
  std::vector<detfuse::LinearTrainingExample> data;
  for (int i = 0; i < 5; ++i) {
    data.push_back(example(5.0, 5.0, true));
    data.push_back(example(-5.0, -5.0, false));
  }
  const auto fit = detfuse::fit_linear_weights(data);
  CHECK_FALSE(fit.single_label);
  for (const auto& ex : data) {
    std::vector<detfuse::ModalityScores> members;
    for (const auto& [m, v] : ex.logits) {
      members.push_back({m, ClassScores::from_logits(v)});
    }
    const double p = detfuse::fuse_linear(members, fit.weights).posterior(1);
    CHECK((p > 0.5) == ex.positive);
  }
  for (std::size_t i = 1; i < fit.loss_history.size(); ++i) {
    CHECK(fit.loss_history[i] <= fit.loss_history[i - 1]);
  }
}

TEST_CASE("linear weights ignore duplication and respect symmetry") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<detfuse::LinearTrainingExample> data;
  for (int i = 0; i < 30; ++i) {
    const double ra = n(rng) + 1.0, rb = n(rng) + 1.0;
    const bool pos = (ra + rb + n(rng)) > 1.0;
    data.push_back(example(ra, rb, pos));
    data.push_back(example(rb, ra, pos));
  }
  const auto fit = detfuse::fit_linear_weights(data);
  const auto wa = fit.weights.for_modality("a");
  const auto wb = fit.weights.for_modality("b");
  for (std::size_t k = 0; k < wa.size(); ++k) {
    CHECK(std::abs(wa[k] - wb[k]) < 1e-6);
  }

  auto doubled = data;
  doubled.insert(doubled.end(), data.begin(), data.end());
  const auto fit2 = detfuse::fit_linear_weights(doubled);
  for (const auto& [m, w] : fit.weights.by_modality()) {
    const auto& w2 = fit2.weights.for_modality(m);
    for (std::size_t k = 0; k < w.size(); ++k) {
      CHECK(std::abs(w[k] - w2[k]) < 1e-9);
    }
  }
}

TEST_CASE("single-label training data is flagged") {
  std::vector<detfuse::LinearTrainingExample> data{example(2.0, 1.0, true), example(3.0, 0.5, true)};
  CHECK(detfuse::fit_linear_weights(data).single_label);
}

TEST_CASE("mode names round trip") {
  for (auto mode : {detfuse::ScoreFusion::kMax, detfuse::ScoreFusion::kAvgPosteriors,
                    detfuse::ScoreFusion::kAvgLogits, detfuse::ScoreFusion::kProbEn,
                    detfuse::ScoreFusion::kLinear}) {
    CHECK(detfuse::parse_score_fusion(detfuse::to_string(mode)) == mode);
  }
  CHECK_THROWS_AS(detfuse::parse_score_fusion("mean"), detfuse::ConfigError);
}
