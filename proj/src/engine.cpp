// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "detfuse/engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "detfuse/error.hpp"
#include "detfuse/geometry.hpp"

namespace detfuse {

namespace {

std::map<std::string, std::vector<Detection>> group_by_image(std::vector<Detection> dets) {
  std::map<std::string, std::vector<Detection>> by_image;
  for (auto& d : dets) {
    auto key = d.image_id;
    by_image[key].push_back(std::move(d));
  }
  return by_image;
}

std::vector<Detection> flatten(std::span<const std::vector<Detection>> sets) {
  std::vector<Detection> all;
  std::size_t n = 0;
  for (const auto& s : sets) {
    n += s.size();
  }
  all.reserve(n);
  std::optional<std::size_t> dim;
  for (const auto& s : sets) {
    for (const auto& d : s) {
      validate(d);
      if (!dim) {
        dim = d.scores.logits().size();
      } else if (*dim != d.scores.logits().size()) {
        throw InputError("detections disagree on the number of classes");
      }
      all.push_back(d);
    }
  }
  return all;
}

std::string joined_modalities(std::span<const Detection> dets) {
  std::set<std::string> tags;
  for (const auto& d : dets) {
    tags.insert(d.modality);
  }
  std::string out;
  for (const auto& t : tags) {
    if (!out.empty()) {
      out += '+';
    }
    out += t;
  }
  return out;
}

}  // namespace

void validate(const FusionConfig& config) {
  if (!(config.iou_threshold > 0.0 && config.iou_threshold < 1.0)) {
    throw ConfigError("iou threshold must lie in (0, 1)");
  }
  if (config.score_fusion == ScoreFusion::kLinear && (!config.weights || config.weights->empty())) {
    throw ConfigError("linear score fusion needs fusion weights");
  }
  for (const auto& [modality, params] : config.calibration) {
    validate(params);
  }
}

std::vector<Cluster> cluster_detections(std::vector<Detection> detections, double iou_threshold) {
  std::map<int, std::vector<Detection>> by_class;
  for (auto& d : detections) {
    const int label = d.label();
    by_class[label].push_back(std::move(d));
  }

  std::vector<Cluster> clusters;
  for (auto& [label, remaining] : by_class) {
    sort_by_rank(remaining);
    std::vector<bool> taken(remaining.size(), false);
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (taken[i]) {
        continue;
      }
      Cluster c{remaining[i], {}, {}};
      std::set<std::string> seen;
      for (std::size_t j = i; j < remaining.size(); ++j) {
        if (taken[j] || (j != i && !(iou(remaining[i].box, remaining[j].box) > iou_threshold))) {
          continue;
        }
        taken[j] = true;
        c.members.push_back(remaining[j]);
        // Members arrive in rank order, so the first of each modality is its best.
        if (seen.insert(remaining[j].modality).second) {
          c.selected.push_back(remaining[j]);
        }
      }
      clusters.push_back(std::move(c));
    }
  }
  return clusters;
}

std::vector<Detection> apply_calibration(std::span<const Detection> detections,
                                         const std::map<std::string, CalibrationParams>& calibration) {
  std::vector<Detection> out(detections.begin(), detections.end());
  if (calibration.empty()) {
    return out;
  }
  for (auto& d : out) {
    auto it = calibration.find(d.modality);
    if (it != calibration.end()) {
      d.scores = calibrate_scores(d.scores, it->second);
    }
  }
  return out;
}

Detection fuse_cluster(const Cluster& cluster, const FusionConfig& config) {
  const auto& selected = cluster.selected;
  if (selected.empty()) {
    throw EmptyClusterError("cluster has no selected members");
  }
  if (config.box_fusion == BoxFusion::kVAvg) {
    for (const auto& d : selected) {
      if (!d.box_variance) {
        throw MissingVarianceError("v-avg box fusion needs box_variance, missing on det_id " +
                                   std::to_string(d.det_id));
      }
    }
  }
  // A single modality in the overlap set: fusion is the identity.
  if (selected.size() == 1) {
    return cluster.seed;
  }

  std::vector<ClassScores> scores;
  scores.reserve(selected.size());
  for (const auto& d : selected) {
    scores.push_back(d.scores);
  }
  const int dim = static_cast<int>(scores.front().logits().size());
  const int m_effective = static_cast<int>(selected.size());

  std::optional<ClassScores> fused;
  switch (config.score_fusion) {
    case ScoreFusion::kMax:
      fused = fuse_max(scores);
      break;
    case ScoreFusion::kAvgPosteriors:
      fused = fuse_avg_posteriors(scores);
      break;
    case ScoreFusion::kAvgLogits:
      fused = fuse_avg_logits(scores);
      break;
    case ScoreFusion::kProbEn:
      fused = fuse_proben(scores, config.prior ? *config.prior : ClassPrior::uniform(dim - 1),
                          m_effective);
      break;
    case ScoreFusion::kLinear: {
      if (!config.weights) {
        throw ConfigError("linear score fusion needs fusion weights");
      }
      std::vector<ModalityScores> tagged;
      for (const auto& d : selected) {
        tagged.push_back({d.modality, d.scores});
      }
      fused = fuse_linear(tagged, *config.weights);
      break;
    }
  }

  Detection out = cluster.seed;
  out.box = fuse_boxes(selected, *fused, config.box_fusion);
  out.scores = std::move(*fused);
  out.modality = joined_modalities(selected);
  if (config.box_fusion == BoxFusion::kVAvg) {
    double precision = 0.0;
    for (const auto& d : selected) {
      precision += 1.0 / *d.box_variance;
    }
    out.box_variance = 1.0 / precision;
  }
  return out;
}

std::vector<Detection> pool(std::span<const std::vector<Detection>> detection_sets) {
  auto all = flatten(detection_sets);
  sort_by_rank(all);
  return all;
}

std::vector<Detection> fuse(std::span<const std::vector<Detection>> detection_sets,
                            const FusionConfig& config) {
  validate(config);
  auto all = apply_calibration(flatten(detection_sets), config.calibration);
  if (config.prior && !all.empty() &&
      config.prior->values().size() != all.front().scores.logits().size()) {
    throw ConfigError("class prior size does not match the detections");
  }

  std::vector<Detection> out;
  for (auto& [image_id, dets] : group_by_image(std::move(all))) {
    for (const auto& cluster : cluster_detections(std::move(dets), config.iou_threshold)) {
      out.push_back(fuse_cluster(cluster, config));
    }
  }
  sort_by_rank(out);
  return out;
}

std::vector<LinearTrainingExample> collect_linear_training_set(
    std::span<const std::vector<Detection>> detection_sets, std::span<const GroundTruth> gts,
    const FusionConfig& config, double match_iou) {
  validate(config);
  std::map<std::string, std::vector<const GroundTruth*>> gt_by_image;
  for (const auto& gt : gts) {
    gt_by_image[gt.image_id].push_back(&gt);
  }

  auto all = apply_calibration(flatten(detection_sets), config.calibration);
  std::vector<LinearTrainingExample> examples;
  for (auto& [image_id, dets] : group_by_image(std::move(all))) {
    const auto& image_gts = gt_by_image[image_id];
    for (const auto& cluster : cluster_detections(std::move(dets), config.iou_threshold)) {
      LinearTrainingExample ex;
      ex.class_id = cluster.seed.label();
      for (const auto& d : cluster.selected) {
        ex.logits[d.modality] = d.scores.logits();
      }
      ex.positive = std::any_of(image_gts.begin(), image_gts.end(), [&](const GroundTruth* gt) {
        return !gt->ignore && gt->class_id == ex.class_id && iou(gt->box, cluster.seed.box) > match_iou;
      });
      examples.push_back(std::move(ex));
    }
  }
  return examples;
}

}  // namespace detfuse
