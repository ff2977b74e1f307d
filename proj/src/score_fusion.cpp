// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "detfuse/score_fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "detfuse/error.hpp"

namespace detfuse {

namespace {

void require_members(std::span<const ClassScores> members) {
  if (members.empty()) {
    throw EmptyClusterError("cannot fuse an empty cluster");
  }
  const auto dim = members.front().logits().size();
  for (const auto& m : members) {
    if (m.logits().size() != dim) {
      throw InputError("cluster members disagree on the number of classes");
    }
  }
}

std::vector<double> log_posteriors(const ClassScores& scores) {
  const auto& s = scores.logits();
  const double lse = log_sum_exp(s);
  std::vector<double> out(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    out[k] = s[k] - lse;
  }
  return out;
}

bool scores_before(const ClassScores& a, const ClassScores& b) {
  if (a.score() != b.score()) {
    return a.score() > b.score();
  }
  if (a.argmax_class() != b.argmax_class()) {
    return a.argmax_class() < b.argmax_class();
  }
  return a.logits() > b.logits();
}

}  // namespace

std::string_view to_string(ScoreFusion mode) noexcept {
  switch (mode) {
    case ScoreFusion::kMax:
      return "max";
    case ScoreFusion::kAvgPosteriors:
      return "avg-posteriors";
    case ScoreFusion::kAvgLogits:
      return "avg-logits";
    case ScoreFusion::kProbEn:
      return "proben";
    case ScoreFusion::kLinear:
      return "linear";
  }
  return "?";
}

ScoreFusion parse_score_fusion(std::string_view name) {
  for (auto mode : {ScoreFusion::kMax, ScoreFusion::kAvgPosteriors, ScoreFusion::kAvgLogits,
                    ScoreFusion::kProbEn, ScoreFusion::kLinear}) {
    if (to_string(mode) == name) {
      return mode;
    }
  }
  throw ConfigError("unknown score fusion mode '" + std::string(name) + "'");
}

void validate(const CalibrationParams& params) {
  if (!std::isfinite(params.temperature) || params.temperature <= 0.0) {
    throw ConfigError("calibration temperature must be finite and positive");
  }
  if (!std::isfinite(params.shift)) {
    throw ConfigError("calibration shift must be finite");
  }
}

ClassScores calibrate_scores(const ClassScores& scores, const CalibrationParams& params) {
  validate(params);
  if (params.is_identity()) {
    return scores;
  }
  std::vector<double> logits = scores.logits();
  logits[0] /= params.temperature;
  for (std::size_t k = 1; k < logits.size(); ++k) {
    logits[k] = logits[k] / params.temperature + params.shift;
  }
  return ClassScores::from_logits(std::move(logits));
}

LinearFusionWeights::LinearFusionWeights(std::map<std::string, std::vector<double>> weights)
    : weights_(std::move(weights)) {
  for (const auto& [modality, w] : weights_) {
    if (w.size() < 2) {
      throw ConfigError("fusion weights for '" + modality + "' need at least two classes");
    }
    if (num_classes_ == 0) {
      num_classes_ = static_cast<int>(w.size()) - 1;
    } else if (static_cast<int>(w.size()) - 1 != num_classes_) {
      throw ConfigError("fusion weights disagree on the number of classes");
    }
    for (double v : w) {
      if (!std::isfinite(v)) {
        throw ConfigError("fusion weights must be finite");
      }
    }
  }
}

LinearFusionWeights LinearFusionWeights::constant(std::span<const std::string> modalities,
                                                  int num_classes, double value) {
  std::map<std::string, std::vector<double>> w;
  for (const auto& m : modalities) {
    w[m] = std::vector<double>(static_cast<std::size_t>(num_classes) + 1, value);
  }
  return LinearFusionWeights(std::move(w));
}

const std::vector<double>& LinearFusionWeights::for_modality(const std::string& modality) const {
  auto it = weights_.find(modality);
  if (it == weights_.end()) {
    throw ConfigError("no fusion weights for modality '" + modality + "'");
  }
  return it->second;
}

ClassScores fuse_max(std::span<const ClassScores> members) {
  require_members(members);
  return *std::min_element(members.begin(), members.end(), scores_before);
}

ClassScores fuse_avg_posteriors(std::span<const ClassScores> members) {
  require_members(members);
  // log(mean_i p_i[k]) via log-sum-exp of log-posteriors; the result already
  // sums to one, so softmax returns the arithmetic mean unchanged.
  const auto dim = members.front().logits().size();
  std::vector<std::vector<double>> per_class(dim);
  for (const auto& m : members) {
    const auto lp = log_posteriors(m);
    for (std::size_t k = 0; k < dim; ++k) {
      per_class[k].push_back(lp[k]);
    }
  }
  const double log_m = std::log(static_cast<double>(members.size()));
  std::vector<double> logits(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    logits[k] = log_sum_exp(per_class[k]) - log_m;
  }
  return ClassScores::from_logits(std::move(logits));
}

ClassScores fuse_avg_logits(std::span<const ClassScores> members) {
  require_members(members);
  const auto dim = members.front().logits().size();
  std::vector<double> logits(dim, 0.0);
  for (const auto& m : members) {
    for (std::size_t k = 0; k < dim; ++k) {
      logits[k] += m.logits()[k];
    }
  }
  for (double& v : logits) {
    v /= static_cast<double>(members.size());
  }
  return ClassScores::from_logits(std::move(logits));
}

ClassScores fuse_proben(std::span<const ClassScores> members, const ClassPrior& prior,
                        int m_effective) {
  require_members(members);
  const auto dim = members.front().logits().size();
  if (prior.values().size() != dim) {
    throw ConfigError("class prior size does not match the score vectors");
  }
  if (m_effective < 1) {
    throw ConfigError("effective modality count must be at least 1");
  }
  std::vector<double> logits(dim, 0.0);
  for (const auto& m : members) {
    const auto lp = log_posteriors(m);
    for (std::size_t k = 0; k < dim; ++k) {
      logits[k] += lp[k];
    }
  }
  if (m_effective > 1 && !prior.is_uniform()) {
    const double exponent = static_cast<double>(m_effective - 1);
    for (std::size_t k = 0; k < dim; ++k) {
      logits[k] -= exponent * std::log(prior.values()[k]);
    }
  }
  return ClassScores::from_logits(std::move(logits));
}

ClassScores fuse_linear(std::span<const ModalityScores> members, const LinearFusionWeights& weights) {
  if (members.empty()) {
    throw EmptyClusterError("cannot fuse an empty cluster");
  }
  const auto dim = members.front().scores.logits().size();
  if (static_cast<std::size_t>(weights.num_classes()) + 1 != dim) {
    throw ConfigError("fusion weights do not match the number of classes");
  }
  std::vector<double> logits(dim, 0.0);
  for (const auto& m : members) {
    if (m.scores.logits().size() != dim) {
      throw InputError("cluster members disagree on the number of classes");
    }
    const auto& w = weights.for_modality(m.modality);
    for (std::size_t k = 0; k < dim; ++k) {
      logits[k] += w[k] * m.scores.logits()[k];
    }
  }
  return ClassScores::from_logits(std::move(logits));
}

namespace {

// Neumaier compensated sum, so a mean over a duplicated dataset matches the original.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

// Dense parameter layout for gradient descent: modality-major, class-minor.
struct LinearProblem {
  std::vector<std::string> modalities;
  std::size_t dim = 0;

  struct Row {
    std::vector<std::pair<std::size_t, const std::vector<double>*>> inputs;
    std::size_t class_id;
    double target;
  };
  std::vector<Row> rows;

  explicit LinearProblem(std::span<const LinearTrainingExample> examples) {
    std::set<std::string> names;
    for (const auto& ex : examples) {
      for (const auto& [m, s] : ex.logits) {
        names.insert(m);
        if (dim == 0) {
          dim = s.size();
        } else if (s.size() != dim) {
          throw InputError("training logits disagree on the number of classes");
        }
        for (double v : s) {
          if (!std::isfinite(v)) {
            throw InvalidScoreError("training logits must be finite");
          }
        }
      }
    }
    if (dim < 2) {
      throw InputError("linear fusion training needs logits with at least two classes");
    }
    modalities.assign(names.begin(), names.end());
    for (const auto& ex : examples) {
      if (ex.class_id < 1 || static_cast<std::size_t>(ex.class_id) >= dim) {
        throw InputError("training example class_id out of range");
      }
      Row row{{}, static_cast<std::size_t>(ex.class_id), ex.positive ? 1.0 : 0.0};
      for (const auto& [m, s] : ex.logits) {
        const auto idx = static_cast<std::size_t>(
            std::lower_bound(modalities.begin(), modalities.end(), m) - modalities.begin());
        row.inputs.emplace_back(idx, &s);
      }
      rows.push_back(std::move(row));
    }
  }

  std::size_t size() const { return modalities.size() * dim; }

  std::vector<double> fused(const Row& row, const std::vector<double>& w) const {
    std::vector<double> s(dim, 0.0);
    for (const auto& [m, x] : row.inputs) {
      for (std::size_t k = 0; k < dim; ++k) {
        s[k] += w[m * dim + k] * (*x)[k];
      }
    }
    return s;
  }

  static double lse_except(const std::vector<double>& s, std::size_t skip) {
    std::vector<double> rest;
    rest.reserve(s.size() - 1);
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (k != skip) {
        rest.push_back(s[k]);
      }
    }
    return log_sum_exp(rest);
  }

  double loss(const std::vector<double>& w) const {
    CompensatedSum total;
    for (const auto& row : rows) {
      const auto s = fused(row, w);
      const double lse = log_sum_exp(s);
      const double log_p = s[row.class_id] - lse;
      const double log_not_p = lse_except(s, row.class_id) - lse;
      total.add(-(row.target * log_p + (1.0 - row.target) * log_not_p));
    }
    return total.value() / static_cast<double>(rows.size());
  }

  std::vector<double> gradient(const std::vector<double>& w) const {
    std::vector<CompensatedSum> acc(size());
    for (const auto& row : rows) {
      const auto s = fused(row, w);
      const auto q = softmax(s);
      // r: softmax over every class except the target one.
      const double lse_rest = lse_except(s, row.class_id);
      std::vector<double> ds(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        const double r = j == row.class_id ? 0.0 : std::exp(s[j] - lse_rest);
        const double hit = j == row.class_id ? 1.0 : 0.0;
        ds[j] = q[j] - row.target * hit - (1.0 - row.target) * r;
      }
      for (const auto& [m, x] : row.inputs) {
        for (std::size_t k = 0; k < dim; ++k) {
          acc[m * dim + k].add(ds[k] * (*x)[k]);
        }
      }
    }
    std::vector<double> g(size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = acc[i].value() / static_cast<double>(rows.size());
    }
    return g;
  }

  LinearFusionWeights to_weights(const std::vector<double>& w) const {
    std::map<std::string, std::vector<double>> out;
    for (std::size_t m = 0; m < modalities.size(); ++m) {
      out[modalities[m]].assign(w.begin() + static_cast<std::ptrdiff_t>(m * dim),
                                w.begin() + static_cast<std::ptrdiff_t>((m + 1) * dim));
    }
    return LinearFusionWeights(std::move(out));
  }
};

}  // namespace

double linear_fusion_loss(std::span<const LinearTrainingExample> examples,
                          const LinearFusionWeights& weights) {
  if (examples.empty()) {
    throw InputError("no training examples");
  }
  LinearProblem problem(examples);
  std::vector<double> w(problem.size(), 0.0);
  for (std::size_t m = 0; m < problem.modalities.size(); ++m) {
    const auto& row = weights.for_modality(problem.modalities[m]);
    if (row.size() != problem.dim) {
      throw ConfigError("fusion weights do not match the number of classes");
    }
    std::copy(row.begin(), row.end(), w.begin() + static_cast<std::ptrdiff_t>(m * problem.dim));
  }
  return problem.loss(w);
}

LinearFitResult fit_linear_weights(std::span<const LinearTrainingExample> examples,
                                   const LinearFitOptions& options) {
  if (examples.empty()) {
    throw InputError("no training examples");
  }
  if (!(options.step > 0.0) || options.iterations < 0) {
    throw ConfigError("invalid gradient descent options");
  }
  LinearProblem problem(examples);

  LinearFitResult result;
  const bool any_pos = std::any_of(examples.begin(), examples.end(), [](const auto& e) { return e.positive; });
  const bool any_neg = std::any_of(examples.begin(), examples.end(), [](const auto& e) { return !e.positive; });
  result.single_label = !(any_pos && any_neg);

  std::vector<double> w(problem.size(), 0.0);
  double loss = problem.loss(w);
  result.loss_history.reserve(static_cast<std::size_t>(options.iterations) + 1);
  result.loss_history.push_back(loss);

  std::vector<double> trial(w.size());
  for (int it = 0; it < options.iterations; ++it) {
    const auto g = problem.gradient(w);
    double step = options.step;
    double trial_loss = loss;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        trial[i] = w[i] - step * g[i];
      }
      trial_loss = problem.loss(trial);
      if (trial_loss <= loss) {
        accepted = true;
        break;
      }
    }
    if (accepted) {
      w.swap(trial);
      loss = trial_loss;
    }
    result.loss_history.push_back(loss);
  }
  result.weights = problem.to_weights(w);
  return result;
}

}  // namespace detfuse
