// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "detfuse/detections.hpp"

namespace detfuse {

enum class ScoreFusion { kMax, kAvgPosteriors, kAvgLogits, kProbEn, kLinear };

/// Names used on the command line and in reports: max, avg-posteriors,
/// avg-logits, proben, linear.
std::string_view to_string(ScoreFusion mode) noexcept;
ScoreFusion parse_score_fusion(std::string_view name);

/// Logit transform s/T + b applied to foreground logits; background gets s/T.
struct CalibrationParams {
  double temperature = 1.0;
  double shift = 0.0;

  bool is_identity() const noexcept { return temperature == 1.0 && shift == 0.0; }
};

/// Throws ConfigError unless T is finite and positive and b is finite.
void validate(const CalibrationParams& params);

ClassScores calibrate_scores(const ClassScores& scores, const CalibrationParams& params);

/// Per-modality, per-class weights of a linear logit combination.
class LinearFusionWeights {
 public:
  LinearFusionWeights() = default;
  /// Throws ConfigError on non-finite entries or mismatched lengths.
  explicit LinearFusionWeights(std::map<std::string, std::vector<double>> weights);

  /// Same weight for every modality and class.
  static LinearFusionWeights constant(std::span<const std::string> modalities, int num_classes,
                                      double value);

  const std::map<std::string, std::vector<double>>& by_modality() const noexcept { return weights_; }
  /// Throws ConfigError for an unknown modality tag.
  const std::vector<double>& for_modality(const std::string& modality) const;
  int num_classes() const noexcept { return num_classes_; }
  bool empty() const noexcept { return weights_.empty(); }

 private:
  std::map<std::string, std::vector<double>> weights_;
  int num_classes_ = 0;
};

struct ModalityScores {
  std::string modality;
  ClassScores scores;
};

/// Scores of the member with the highest argmax-class posterior, whole vector.
ClassScores fuse_max(std::span<const ClassScores> members);

/// Entrywise mean of posteriors.
ClassScores fuse_avg_posteriors(std::span<const ClassScores> members);

/// Softmax of the entrywise mean of logits.
ClassScores fuse_avg_logits(std::span<const ClassScores> members);

/// Product of member posteriors divided by prior^(m_effective - 1), normalized.
/// Evaluated in the log domain from log-posteriors, so it never underflows.
/// `m_effective` is the number of distinct modalities contributing.
ClassScores fuse_proben(std::span<const ClassScores> members, const ClassPrior& prior,
                        int m_effective);

/// Softmax of sum_i w_{m(i)}[k] * s_i[k]; modalities absent from `members`
/// contribute nothing.
ClassScores fuse_linear(std::span<const ModalityScores> members, const LinearFusionWeights& weights);

/// One cached cluster for learning linear fusion weights.
struct LinearTrainingExample {
  /// Logits of the best detection of each modality that fired.
  std::map<std::string, std::vector<double>> logits;
  /// Class the cluster was emitted as.
  int class_id = 1;
  /// True when the cluster matched a ground truth object.
  bool positive = false;
};

struct LinearFitOptions {
  double step = 0.1;
  int iterations = 5000;
};

struct LinearFitResult {
  LinearFusionWeights weights;
  /// Mean logistic loss before each iteration and after the last one.
  std::vector<double> loss_history;
  /// Set when the data holds only one label; the weights are still returned.
  bool single_label = false;
};

/// Full-batch gradient descent on the mean logistic loss of
/// softmax(sum_i w_i * s_i)[class_id] against the binary label, starting from
/// zero weights. Any step that would raise the loss is halved until it does not.
LinearFitResult fit_linear_weights(std::span<const LinearTrainingExample> examples,
                                   const LinearFitOptions& options = {});

/// Mean logistic loss of `weights` on `examples`.
double linear_fusion_loss(std::span<const LinearTrainingExample> examples,
                          const LinearFusionWeights& weights);

}  // namespace detfuse
