// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "detfuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "detfuse/error.hpp"

namespace detfuse {

namespace {

void check_profile(const SensorProfile& p, const std::string& where) {
  auto prob = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!prob(p.recall)) {
    throw ConfigError(where + ": recall must lie in [0, 1]");
  }
  if (!nonneg(p.fp_rate) || !nonneg(p.concentration) || !nonneg(p.loc_noise) ||
      !nonneg(p.variance_noise)) {
    throw ConfigError(where + ": rates, concentration and noise must be finite and nonnegative");
  }
}

std::string image_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img%06d", i);
  return buf;
}

class Simulator {
 public:
  explicit Simulator(const ScenarioSpec& spec) : spec_(spec), rng_(spec.seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(rng_); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(rng_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  int poisson(double mean) {
    return mean > 0.0 ? std::poisson_distribution<int>(mean)(rng_) : 0;
  }

  BBox random_box() {
    const double h = uniform(spec_.min_object_height, spec_.max_object_height);
    const double w = std::max(1.0, h * spec_.aspect_ratio);
    const double x = uniform(0.0, std::max(1.0, spec_.image_width - w));
    const double y = uniform(0.0, std::max(1.0, spec_.image_height - h));
    return BBox(x, y, w, h);
  }

  BBox jitter(const BBox& b, double sd) {
    if (sd == 0.0) {
      return b;
    }
    const double x = b.x() + normal(0.0, sd);
    const double y = b.y() + normal(0.0, sd);
    const double w = std::max(1.0, b.w() + normal(0.0, sd));
    const double h = std::max(1.0, b.h() + normal(0.0, sd));
    return BBox(x, y, w, h);
  }

  // true_class 0 is background (false alarm). softmax of the unscaled logits
  // is the exact posterior over {false alarm, hit of class k}.
  ClassScores scores(int true_class, const SensorProfile& p, double logit_scale) {
    constexpr double kMinRate = 1e-6;
    const double c = p.concentration;
    const double hit_rate = spec_.objects_per_image * p.recall / spec_.num_classes;
    std::vector<double> logits(static_cast<std::size_t>(spec_.num_classes) + 1);
    for (std::size_t k = 0; k < logits.size(); ++k) {
      const double mean = static_cast<int>(k) == true_class ? c : 0.0;
      const double log_rate = std::log(std::max(k == 0 ? p.fp_rate : hit_rate, kMinRate));
      logits[k] = (normal(mean, 1.0) * c + log_rate) * logit_scale;
    }
    return ClassScores::from_logits(std::move(logits));
  }

  double reported_variance(const SensorProfile& p) {
    constexpr double kMinVariance = 1e-6;
    double v = std::max(p.loc_noise * p.loc_noise, kMinVariance);
    if (p.variance_noise > 0.0) {
      v *= std::exp(normal(0.0, p.variance_noise));
    }
    return v;
  }

 private:
  const ScenarioSpec& spec_;
  std::mt19937_64 rng_;
};

}  // namespace

void validate(const ScenarioSpec& spec) {
  if (spec.image_count < 1) {
    throw ConfigError("scenario needs at least one image");
  }
  if (spec.num_classes < 1) {
    throw ConfigError("scenario needs at least one class");
  }
  if (!spec.class_names.empty() && static_cast<int>(spec.class_names.size()) != spec.num_classes) {
    throw ConfigError("class_names must list one name per class");
  }
  if (!(spec.objects_per_image >= 0.0) || !std::isfinite(spec.objects_per_image)) {
    throw ConfigError("objects_per_image must be finite and nonnegative");
  }
  if (!(spec.day_fraction >= 0.0 && spec.day_fraction <= 1.0)) {
    throw ConfigError("day_fraction must lie in [0, 1]");
  }
  if (!(spec.image_width > 0.0) || !(spec.image_height > 0.0) || !(spec.min_object_height > 0.0) ||
      !(spec.max_object_height >= spec.min_object_height) || !(spec.aspect_ratio > 0.0)) {
    throw ConfigError("image and object sizes must be positive with min <= max");
  }
  if (spec.modalities.empty()) {
    throw ConfigError("scenario needs at least one modality");
  }
  std::set<std::string> names;
  for (const auto& m : spec.modalities) {
    if (m.name.empty() || !names.insert(m.name).second) {
      throw ConfigError("modality names must be nonempty and unique");
    }
    if (!std::isfinite(m.logit_scale) || !(m.logit_scale > 0.0)) {
      throw ConfigError(m.name + ": logit_scale must be finite and positive");
    }
    check_profile(m.day, m.name + ".day");
    check_profile(m.night, m.name + ".night");
  }
}

SyntheticDataset generate(const ScenarioSpec& spec) {
  validate(spec);
  Simulator sim(spec);
  SyntheticDataset out;
  out.truth.num_classes = spec.num_classes;
  out.truth.class_names = spec.class_names;
  if (out.truth.class_names.empty()) {
    for (int k = 1; k <= spec.num_classes; ++k) {
      out.truth.class_names.push_back(spec.num_classes == 1 ? "person" : "class" + std::to_string(k));
    }
  }
  out.detections.resize(spec.modalities.size());

  std::uint64_t next_id = 0;
  for (int i = 0; i < spec.image_count; ++i) {
    const std::string id = image_name(i);
    const bool day = sim.bernoulli(spec.day_fraction);
    out.truth.images.insert(id);
    out.truth.tags[id] = day ? "day" : "night";

    std::vector<GroundTruth> objects;
    const int n_objects = sim.poisson(spec.objects_per_image);
    for (int o = 0; o < n_objects; ++o) {
      const int cls = sim.uniform_int(1, spec.num_classes);
      objects.push_back({id, sim.random_box(), cls, false});
    }

    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
      const auto& modality = spec.modalities[m];
      const auto& profile = day ? modality.day : modality.night;
      auto& dets = out.detections[m];
      for (const auto& gt : objects) {
        if (!sim.bernoulli(profile.recall)) {
          continue;
        }
        BBox box = sim.jitter(gt.box, profile.loc_noise);
        ClassScores scores = sim.scores(gt.class_id, profile, modality.logit_scale);
        const double variance = sim.reported_variance(profile);
        dets.push_back({id, modality.name, box, std::move(scores), variance, next_id++});
      }
      const int n_fp = sim.poisson(profile.fp_rate);
      for (int f = 0; f < n_fp; ++f) {
        BBox box = sim.random_box();
        ClassScores scores = sim.scores(0, profile, modality.logit_scale);
        const double variance = sim.reported_variance(profile);
        dets.push_back({id, modality.name, box, std::move(scores), variance, next_id++});
      }
    }
    for (auto& gt : objects) {
      out.truth.objects.push_back(std::move(gt));
    }
  }
  return out;
}

ScenarioSpec kaist_like_preset(std::uint64_t seed, int image_count, int modality_count) {
  if (modality_count < 1) {
    throw ConfigError("preset needs at least one modality");
  }
  ScenarioSpec spec;
  spec.seed = seed;
  spec.image_count = image_count;
  spec.class_names = {"person"};

  ModalityProfile rgb{"rgb", {}, {}, 1.0};
  rgb.day = {0.92, 0.3, 2.2, 3.0, 0.2};
  rgb.night = {0.55, 0.6, 1.0, 6.0, 0.2};
  ModalityProfile thermal{"thermal", {}, {}, 1.0};
  thermal.day = {0.75, 0.5, 1.4, 5.0, 0.2};
  thermal.night = {0.92, 0.3, 2.2, 3.0, 0.2};
  ModalityProfile mid{"mid", {}, {}, 1.0};
  mid.day = {0.85, 0.4, 1.8, 4.0, 0.2};
  mid.night = mid.day;

  spec.modalities.push_back(rgb);
  if (modality_count >= 2) {
    spec.modalities.push_back(thermal);
  }
  for (int m = 2; m < modality_count; ++m) {
    auto extra = mid;
    if (m > 2) {
      extra.name = "mid" + std::to_string(m - 1);
    }
    spec.modalities.push_back(extra);
  }
  return spec;
}

}  // namespace detfuse
