// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "detfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "detfuse/error.hpp"
#include "detfuse/geometry.hpp"

namespace detfuse {

namespace {

constexpr double kMissRateFloor = 1e-10;

// Detections of interest sorted by descending score; ties stay together.
template <typename Pred>
std::vector<const MatchedDetection*> ranked(const MatchResult& matches, Pred keep) {
  std::vector<const MatchedDetection*> out;
  for (const auto& d : matches.detections) {
    if (d.label != MatchLabel::kIgnored && keep(d)) {
      out.push_back(&d);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto* a, const auto* b) { return a->score > b->score; });
  return out;
}

}  // namespace

std::size_t MatchResult::total_gt() const noexcept {
  std::size_t n = 0;
  for (const auto& [k, c] : gt_count) {
    n += c;
  }
  return n;
}

std::size_t MatchResult::count(MatchLabel label) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      detections.begin(), detections.end(), [&](const auto& d) { return d.label == label; }));
}

std::size_t MatchResult::count(MatchLabel label, int class_id) const noexcept {
  return static_cast<std::size_t>(std::count_if(detections.begin(), detections.end(), [&](const auto& d) {
    return d.label == label && d.class_id == class_id;
  }));
}

MatchResult match(std::span<const Detection> detections, std::span<const GroundTruth> gts,
                  double iou_threshold) {
  MatchResult result;
  result.gt_matched.assign(gts.size(), false);

  std::map<std::string, std::vector<std::size_t>> gts_by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    gts_by_image[gts[g].image_id].push_back(g);
    if (!gts[g].ignore) {
      ++result.gt_count[gts[g].class_id];
    }
  }

  std::vector<Detection> sorted(detections.begin(), detections.end());
  sort_by_rank(sorted);

  result.detections.reserve(sorted.size());
  for (const auto& det : sorted) {
    MatchedDetection m{det.image_id, det.label(), det.score(), det.det_id, MatchLabel::kFalsePositive};
    auto it = gts_by_image.find(det.image_id);
    if (it != gts_by_image.end()) {
      std::optional<std::size_t> best;
      double best_iou = -1.0;
      bool hits_ignored = false;
      for (std::size_t g : it->second) {
        const auto& gt = gts[g];
        if (gt.class_id != m.class_id) {
          continue;
        }
        const double overlap = iou(det.box, gt.box);
        if (!(overlap > iou_threshold)) {
          continue;
        }
        if (gt.ignore) {
          hits_ignored = true;
        } else if (!result.gt_matched[g] && overlap > best_iou) {
          best = g;
          best_iou = overlap;
        }
      }
      if (best) {
        result.gt_matched[*best] = true;
        m.label = MatchLabel::kTruePositive;
      } else if (hits_ignored) {
        m.label = MatchLabel::kIgnored;
      }
    }
    result.detections.push_back(std::move(m));
  }
  return result;
}

std::vector<PrPoint> precision_recall_curve(const MatchResult& matches, int class_id) {
  std::vector<PrPoint> curve;
  auto it = matches.gt_count.find(class_id);
  const double n_gt = it == matches.gt_count.end() ? 0.0 : static_cast<double>(it->second);
  const auto dets = ranked(matches, [&](const auto& d) { return d.class_id == class_id; });
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    (dets[i]->label == MatchLabel::kTruePositive ? tp : fp) += 1.0;
    if (i + 1 < dets.size() && dets[i + 1]->score == dets[i]->score) {
      continue;
    }
    curve.push_back({dets[i]->score, n_gt > 0.0 ? tp / n_gt : 0.0, tp / (tp + fp)});
  }
  return curve;
}

std::optional<double> average_precision(const MatchResult& matches, int class_id) {
  auto it = matches.gt_count.find(class_id);
  if (it == matches.gt_count.end() || it->second == 0) {
    return std::nullopt;
  }
  const auto curve = precision_recall_curve(matches, class_id);
  // Envelope: precision at each point becomes the best precision at any looser threshold.
  std::vector<double> envelope(curve.size());
  double best = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    best = std::max(best, curve[i].precision);
    envelope[i] = best;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    ap += (curve[i].recall - prev_recall) * envelope[i];
    prev_recall = curve[i].recall;
  }
  return std::clamp(ap, 0.0, 1.0);
}

std::vector<MissRatePoint> miss_rate_curve(const MatchResult& matches, std::size_t image_count) {
  if (image_count == 0) {
    throw InputError("miss rate curve needs at least one image");
  }
  std::vector<MissRatePoint> curve;
  const double n_gt = static_cast<double>(matches.total_gt());
  const double n_img = static_cast<double>(image_count);
  const auto dets = ranked(matches, [](const auto&) { return true; });
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    (dets[i]->label == MatchLabel::kTruePositive ? tp : fp) += 1.0;
    if (i + 1 < dets.size() && dets[i + 1]->score == dets[i]->score) {
      continue;
    }
    curve.push_back({dets[i]->score, fp / n_img, n_gt > 0.0 ? 1.0 - tp / n_gt : 1.0});
  }
  return curve;
}

std::array<double, 9> lamr_reference_fppi() noexcept {
  std::array<double, 9> refs{};
  for (int k = 0; k < 9; ++k) {
    refs[static_cast<std::size_t>(k)] = std::pow(10.0, -2.0 + k / 4.0);
  }
  return refs;
}

std::array<double, 9> sampled_miss_rates(const MatchResult& matches, std::size_t image_count) {
  const auto curve = miss_rate_curve(matches, image_count);
  const auto refs = lamr_reference_fppi();
  std::array<double, 9> out{};
  for (std::size_t r = 0; r < refs.size(); ++r) {
    double miss = 1.0;
    // FPPI is non-decreasing along the curve, so the last qualifying point is the loosest.
    for (const auto& p : curve) {
      if (p.fppi <= refs[r]) {
        miss = p.miss_rate;
      } else {
        break;
      }
    }
    out[r] = miss;
  }
  return out;
}

std::optional<double> lamr(const MatchResult& matches, std::size_t image_count) {
  if (matches.total_gt() == 0) {
    return std::nullopt;
  }
  const auto miss = sampled_miss_rates(matches, image_count);
  double log_sum = 0.0;
  for (double m : miss) {
    log_sum += std::log(std::max(m, kMissRateFloor));
  }
  return std::clamp(std::exp(log_sum / static_cast<double>(miss.size())), 0.0, 1.0);
}

SubsetReport evaluate_subset(std::span<const Detection> detections, const GroundTruthSet& truth,
                             const std::set<std::string>& images, const EvalOptions& options,
                             std::vector<std::string>* warnings) {
  std::vector<Detection> dets;
  for (const auto& d : detections) {
    if (images.count(d.image_id) != 0) {
      dets.push_back(d);
    }
  }
  std::vector<GroundTruth> gts;
  for (const auto& g : truth.objects) {
    if (images.count(g.image_id) != 0) {
      gts.push_back(g);
    }
  }

  const auto matches = match(dets, gts, options.iou_threshold);
  SubsetReport report;
  report.image_count = images.size();
  report.gt_count = matches.total_gt();
  report.tp = matches.count(MatchLabel::kTruePositive);
  report.fp = matches.count(MatchLabel::kFalsePositive);
  report.ignored = matches.count(MatchLabel::kIgnored);

  double ap_sum = 0.0;
  int ap_n = 0;
  for (int k = 1; k <= truth.num_classes; ++k) {
    ClassReport cls;
    cls.class_id = k;
    if (static_cast<std::size_t>(k - 1) < truth.class_names.size()) {
      cls.name = truth.class_names[static_cast<std::size_t>(k - 1)];
    }
    auto it = matches.gt_count.find(k);
    cls.gt_count = it == matches.gt_count.end() ? 0 : it->second;
    cls.tp = matches.count(MatchLabel::kTruePositive, k);
    cls.fp = matches.count(MatchLabel::kFalsePositive, k);
    cls.ap = average_precision(matches, k);
    cls.pr_curve = precision_recall_curve(matches, k);
    if (cls.ap) {
      ap_sum += *cls.ap;
      ++ap_n;
    } else if (warnings != nullptr) {
      warnings->push_back("class " + std::to_string(k) +
                          " has no ground truth in this subset; excluded from mean AP");
    }
    report.classes.push_back(std::move(cls));
  }
  if (ap_n > 0) {
    report.mean_ap = ap_sum / ap_n;
  }
  if (report.image_count > 0) {
    report.lamr = lamr(matches, report.image_count);
    report.sampled_miss_rates = sampled_miss_rates(matches, report.image_count);
    report.miss_rate_curve = miss_rate_curve(matches, report.image_count);
  }
  return report;
}

EvalReport breakdown(std::span<const Detection> detections, const GroundTruthSet& truth,
                     const EvalOptions& options) {
  EvalReport report;
  std::set<std::string> all = truth.images;
  for (const auto& g : truth.objects) {
    all.insert(g.image_id);
  }
  std::set<std::string> unannotated;
  for (const auto& d : detections) {
    if (all.count(d.image_id) == 0) {
      unannotated.insert(d.image_id);
    }
  }
  for (const auto& id : unannotated) {
    report.warnings.push_back("image '" + id + "' has detections but no ground truth record");
    all.insert(id);
  }

  std::map<std::string, std::set<std::string>> subsets{{"all", all}, {"day", {}}, {"night", {}}};
  for (const auto& [image, tag] : truth.tags) {
    auto it = subsets.find(tag);
    if (it != subsets.end() && tag != "all") {
      it->second.insert(image);
    }
  }
  for (const auto& [name, images] : subsets) {
    if (images.empty()) {
      report.subsets[name] = std::nullopt;
      continue;
    }
    std::vector<std::string> subset_warnings;
    report.subsets[name] = evaluate_subset(detections, truth, images, options, &subset_warnings);
    for (auto& w : subset_warnings) {
      report.warnings.push_back(name + ": " + w);
    }
  }
  return report;
}

}  // namespace detfuse
