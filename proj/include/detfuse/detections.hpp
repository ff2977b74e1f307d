// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detfuse/geometry.hpp"

namespace detfuse {

/// Clamp applied to posteriors before taking logarithms.
inline constexpr double kPosteriorEpsilon = 1e-7;

/// Numerically stable softmax (max-subtracted). Throws InvalidScoreError on
/// NaN or infinite entries and on an empty vector.
std::vector<double> softmax(std::span<const double> logits);

/// log-sum-exp of finite entries.
double log_sum_exp(std::span<const double> values);

struct ClampedLogits {
  std::vector<double> logits;
  /// True when at least one entry had to be clamped into [eps, 1 - eps].
  bool clamped = false;
};

/// One logit preimage of a posterior vector: log(p) after clamping each entry
/// into [kPosteriorEpsilon, 1 - kPosteriorEpsilon].
ClampedLogits logits_from_posteriors(std::span<const double> posteriors);

/// K+1 way class score vector; index 0 is background. Logits and posteriors
/// are always both present and posteriors == softmax(logits).
class ClassScores {
 public:
  static ClassScores from_logits(std::vector<double> logits);

  /// `clamped`, when given, is set to whether the epsilon clamp fired.
  static ClassScores from_posteriors(std::span<const double> posteriors, bool* clamped = nullptr);

  /// Scalar confidence for one foreground class: background gets 1 - c, the
  /// class gets c, every other foreground class gets nothing (then clamped).
  static ClassScores from_confidence(double confidence, int class_id, int num_classes,
                                     bool* clamped = nullptr);

  const std::vector<double>& logits() const noexcept { return logits_; }
  const std::vector<double>& posteriors() const noexcept { return posteriors_; }

  /// Number of foreground classes K.
  int num_classes() const noexcept { return static_cast<int>(logits_.size()) - 1; }

  /// Foreground class with the largest posterior; ties go to the lower id.
  int argmax_class() const noexcept { return argmax_; }

  /// Posterior of argmax_class(); the ranking score of a detection.
  double score() const noexcept { return posteriors_[static_cast<std::size_t>(argmax_)]; }

  double posterior(int class_id) const { return posteriors_.at(static_cast<std::size_t>(class_id)); }

 private:
  ClassScores(std::vector<double> logits, std::vector<double> posteriors);

  std::vector<double> logits_;
  std::vector<double> posteriors_;
  int argmax_ = 1;
};

struct Detection {
  std::string image_id;
  std::string modality;
  BBox box;
  ClassScores scores;
  std::optional<double> box_variance;
  /// Ingest ordinal, used only to break exact score ties.
  std::uint64_t det_id = 0;

  int label() const noexcept { return scores.argmax_class(); }
  double score() const noexcept { return scores.score(); }
};

/// Throws InputError if the optional variance is non-finite or not positive.
void validate(const Detection& det);

/// Strict total order used by every sort in the pipeline: higher score, then
/// lower class id, then lower det_id. Remaining fields only separate
/// detections that share a det_id.
bool ranks_before(const Detection& a, const Detection& b) noexcept;

void sort_by_rank(std::vector<Detection>& dets);

struct GroundTruth {
  std::string image_id;
  BBox box;
  int class_id = 1;
  bool ignore = false;
};

/// Marginal class distribution p(y) over K+1 classes. Entries are strictly
/// positive and sum to 1.
class ClassPrior {
 public:
  /// Throws ConfigError when the invariants do not hold (tolerance 1e-9).
  explicit ClassPrior(std::vector<double> priors);

  static ClassPrior uniform(int num_classes);

  const std::vector<double>& values() const noexcept { return priors_; }
  int num_classes() const noexcept { return static_cast<int>(priors_.size()) - 1; }
  bool is_uniform() const noexcept;

 private:
  std::vector<double> priors_;
};

/// Foreground priors proportional to the counts of non-ignored ground truths,
/// scaled to 1 - background_prior. Classes with no examples get a 1e-6 share
/// before renormalization.
ClassPrior estimate_class_prior(std::span<const GroundTruth> gts, int num_classes,
                                double background_prior);

}  // namespace detfuse
