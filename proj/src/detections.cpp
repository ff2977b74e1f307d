// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "detfuse/detections.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "detfuse/error.hpp"

namespace detfuse {

namespace {

void require_finite(std::span<const double> values) {
  if (values.empty()) {
    throw InvalidScoreError("empty score vector");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw InvalidScoreError("score vector contains NaN or infinite entries");
    }
  }
}

}  // namespace

double log_sum_exp(std::span<const double> values) {
  require_finite(values);
  const double top = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) {
    sum += std::exp(v - top);
  }
  return top + std::log(sum);
}

std::vector<double> softmax(std::span<const double> logits) {
  require_finite(logits);
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (double& v : out) {
    v /= sum;
  }
  return out;
}

ClampedLogits logits_from_posteriors(std::span<const double> posteriors) {
  if (posteriors.empty()) {
    throw InvalidScoreError("empty posterior vector");
  }
  ClampedLogits out;
  out.logits.reserve(posteriors.size());
  double sum = 0.0;
  for (double p : posteriors) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw InvalidScoreError("posterior entries must lie in [0, 1]");
    }
    sum += p;
    double q = p;
    if (q < kPosteriorEpsilon) {
      q = kPosteriorEpsilon;
      out.clamped = true;
    } else if (q > 1.0 - kPosteriorEpsilon) {
      q = 1.0 - kPosteriorEpsilon;
      out.clamped = true;
    }
    out.logits.push_back(std::log(q));
  }
  // Detector files typically print 2-4 decimals, so the sum is only approximately 1.
  if (std::abs(sum - 1.0) > 1e-2) {
    throw InvalidScoreError("posterior entries must sum to 1");
  }
  return out;
}

ClassScores::ClassScores(std::vector<double> logits, std::vector<double> posteriors)
    : logits_(std::move(logits)), posteriors_(std::move(posteriors)) {
  argmax_ = 1;
  for (std::size_t k = 2; k < posteriors_.size(); ++k) {
    if (posteriors_[k] > posteriors_[static_cast<std::size_t>(argmax_)]) {
      argmax_ = static_cast<int>(k);
    }
  }
}

ClassScores ClassScores::from_logits(std::vector<double> logits) {
  if (logits.size() < 2) {
    throw InvalidScoreError("score vectors need a background and at least one foreground class");
  }
  auto posteriors = softmax(logits);
  return ClassScores(std::move(logits), std::move(posteriors));
}

ClassScores ClassScores::from_posteriors(std::span<const double> posteriors, bool* clamped) {
  auto converted = logits_from_posteriors(posteriors);
  if (clamped != nullptr) {
    *clamped = converted.clamped;
  }
  return from_logits(std::move(converted.logits));
}

ClassScores ClassScores::from_confidence(double confidence, int class_id, int num_classes,
                                         bool* clamped) {
  if (num_classes < 1 || class_id < 1 || class_id > num_classes) {
    throw InvalidScoreError("class_id out of range for scalar confidence");
  }
  if (!std::isfinite(confidence) || confidence < 0.0 || confidence > 1.0) {
    throw InvalidScoreError("confidence must lie in [0, 1]");
  }
  std::vector<double> p(static_cast<std::size_t>(num_classes) + 1, 0.0);
  p[0] = 1.0 - confidence;
  p[static_cast<std::size_t>(class_id)] = confidence;
  return from_posteriors(p, clamped);
}

void validate(const Detection& det) {
  if (det.box_variance && (!std::isfinite(*det.box_variance) || *det.box_variance <= 0.0)) {
    throw InputError("box_variance must be finite and positive");
  }
}

bool ranks_before(const Detection& a, const Detection& b) noexcept {
  if (a.score() != b.score()) {
    return a.score() > b.score();
  }
  return std::forward_as_tuple(a.label(), a.det_id, a.image_id, a.modality, a.box.x(), a.box.y(),
                               a.box.w(), a.box.h()) <
         std::forward_as_tuple(b.label(), b.det_id, b.image_id, b.modality, b.box.x(), b.box.y(),
                               b.box.w(), b.box.h());
}

void sort_by_rank(std::vector<Detection>& dets) {
  std::stable_sort(dets.begin(), dets.end(), ranks_before);
}

ClassPrior::ClassPrior(std::vector<double> priors) : priors_(std::move(priors)) {
  if (priors_.size() < 2) {
    throw ConfigError("class prior needs at least two entries");
  }
  double sum = 0.0;
  for (double p : priors_) {
    if (!std::isfinite(p) || p <= 0.0 || p > 1.0) {
      throw ConfigError("class prior entries must lie in (0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("class prior must sum to 1");
  }
}

ClassPrior ClassPrior::uniform(int num_classes) {
  if (num_classes < 1) {
    throw ConfigError("uniform prior needs at least one foreground class");
  }
  const auto n = static_cast<std::size_t>(num_classes) + 1;
  return ClassPrior(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

bool ClassPrior::is_uniform() const noexcept {
  return std::all_of(priors_.begin(), priors_.end(),
                     [&](double p) { return p == priors_.front(); });
}

ClassPrior estimate_class_prior(std::span<const GroundTruth> gts, int num_classes,
                                double background_prior) {
  constexpr double kEmptyClassShare = 1e-6;
  if (num_classes < 1) {
    throw ConfigError("estimate_class_prior needs at least one foreground class");
  }
  if (!(background_prior > 0.0 && background_prior < 1.0)) {
    throw ConfigError("background prior must lie in (0, 1)");
  }
  std::vector<double> counts(static_cast<std::size_t>(num_classes) + 1, 0.0);
  double total = 0.0;
  for (const auto& gt : gts) {
    if (gt.ignore) {
      continue;
    }
    if (gt.class_id < 1 || gt.class_id > num_classes) {
      throw InputError("ground truth class_id out of range");
    }
    counts[static_cast<std::size_t>(gt.class_id)] += 1.0;
    total += 1.0;
  }
  if (total == 0.0) {
    throw ConfigError("estimate_class_prior needs at least one non-ignored ground truth");
  }

  std::vector<double> share(counts.size(), 0.0);
  double share_sum = 0.0;
  for (std::size_t k = 1; k < counts.size(); ++k) {
    share[k] = counts[k] > 0.0 ? counts[k] / total : kEmptyClassShare;
    share_sum += share[k];
  }
  std::vector<double> priors(counts.size());
  priors[0] = background_prior;
  for (std::size_t k = 1; k < counts.size(); ++k) {
    priors[k] = (1.0 - background_prior) * share[k] / share_sum;
  }
  // Absorb rounding so the sum-to-one check holds at 1e-9.
  const double fg = std::accumulate(priors.begin() + 1, priors.end(), 0.0);
  priors[0] = 1.0 - fg;
  return ClassPrior(std::move(priors));
}

}  // namespace detfuse
