// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "detfuse/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "detfuse/error.hpp"

namespace detfuse {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open '" + path.string() + "' for reading");
  }
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

struct Line {
  std::size_t number;
  json record;
};

std::vector<Line> read_records(std::istream& in, const std::string& source) {
  std::vector<Line> lines;
  std::string text;
  std::size_t n = 0;
  while (std::getline(in, text)) {
    ++n;
    if (blank(text)) {
      continue;
    }
    try {
      auto j = json::parse(text);
      if (!j.is_object()) {
        throw ParseError(source, n, "record is not a JSON object");
      }
      lines.push_back({n, std::move(j)});
    } catch (const json::exception& e) {
      throw ParseError(source, n, e.what());
    }
  }
  return lines;
}

std::string string_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_string()) {
    return v.get<std::string>();
  }
  if (v.is_number_integer()) {
    return std::to_string(v.get<long long>());
  }
  throw std::invalid_argument(std::string("field '") + key + "' must be a string");
}

double number(const json& v, const char* what) {
  if (!v.is_number()) {
    throw std::invalid_argument(std::string(what) + " must be a number");
  }
  return v.get<double>();
}

std::vector<double> number_array(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array()) {
    throw std::invalid_argument(std::string("field '") + key + "' must be an array");
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    out.push_back(number(e, key));
  }
  return out;
}

BBox bbox_field(const json& j) {
  const auto v = number_array(j, "bbox");
  if (v.size() != 4) {
    throw std::invalid_argument("bbox must have four entries [x, y, w, h]");
  }
  return BBox(v[0], v[1], v[2], v[3]);
}

int meta_num_classes(const json& j) {
  const auto& meta = j.at("meta");
  const auto& k = meta.at("num_classes");
  if (!k.is_number_integer() || k.get<int>() < 1) {
    throw std::invalid_argument("meta.num_classes must be a positive integer");
  }
  return k.get<int>();
}

template <typename F>
auto guarded(const std::string& source, std::size_t line, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(source, line, e.what());
  }
}

ordered_json bbox_json(const BBox& b) { return ordered_json::array({b.x(), b.y(), b.w(), b.h()}); }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

DetectionReadResult read_detections(std::istream& in, const std::string& source,
                                    const DetectionReadOptions& options) {
  const auto lines = read_records(in, source);
  DetectionReadResult result;

  // K: explicit option, then a meta record, then the first score vector.
  std::optional<int> k = options.num_classes;
  for (const auto& [n, rec] : lines) {
    if (rec.contains("meta")) {
      const int meta_k = guarded(source, n, [&] { return meta_num_classes(rec); });
      if (k && *k != meta_k) {
        throw ParseError(source, n, "meta.num_classes disagrees with the expected class count");
      }
      k = meta_k;
    }
  }
  if (!k) {
    for (const auto& [n, rec] : lines) {
      for (const char* key : {"logits", "posteriors"}) {
        if (!k && rec.contains(key) && rec[key].is_array() && rec[key].size() >= 2) {
          k = static_cast<int>(rec[key].size()) - 1;
        }
      }
    }
  }
  result.num_classes = k.value_or(1);
  const auto dim = static_cast<std::size_t>(result.num_classes) + 1;

  std::uint64_t next_id = options.first_det_id;
  for (const auto& [n, rec] : lines) {
    if (rec.contains("meta")) {
      continue;
    }
    Detection det = guarded(source, n, [&] {
      const int forms = static_cast<int>(rec.contains("logits")) + static_cast<int>(rec.contains("posteriors")) +
                        static_cast<int>(rec.contains("score"));
      if (forms != 1) {
        throw std::invalid_argument("record needs exactly one of logits, posteriors, score");
      }
      bool clamped = false;
      std::optional<ClassScores> scores;
      if (rec.contains("logits")) {
        scores = ClassScores::from_logits(number_array(rec, "logits"));
      } else if (rec.contains("posteriors")) {
        scores = ClassScores::from_posteriors(number_array(rec, "posteriors"), &clamped);
      } else {
        const int class_id = rec.contains("class_id") ? rec.at("class_id").get<int>() : 1;
        scores = ClassScores::from_confidence(number(rec.at("score"), "score"), class_id,
                                              result.num_classes, &clamped);
      }
      if (scores->logits().size() != dim) {
        throw std::invalid_argument("score vector has " + std::to_string(scores->logits().size()) +
                                    " entries, expected " + std::to_string(dim));
      }
      if (clamped) {
        result.warnings.push_back(source + ":" + std::to_string(n) +
                                  ": posterior clamped away from 0/1 before taking logs");
      }
      std::string modality = options.modality ? *options.modality : string_field(rec, "modality");
      std::optional<double> variance;
      if (rec.contains("box_variance") && !rec["box_variance"].is_null()) {
        variance = number(rec["box_variance"], "box_variance");
      }
      Detection d{string_field(rec, "image_id"), std::move(modality), bbox_field(rec),
                  std::move(*scores), variance, next_id};
      validate(d);
      return d;
    });
    ++next_id;
    result.detections.push_back(std::move(det));
  }
  return result;
}

DetectionReadResult read_detections(const std::filesystem::path& path,
                                    const DetectionReadOptions& options) {
  auto in = open_in(path);
  return read_detections(in, path.string(), options);
}

void write_detections(std::ostream& out, std::span<const Detection> detections) {
  for (const auto& d : detections) {
    ordered_json rec;
    rec["image_id"] = d.image_id;
    rec["modality"] = d.modality;
    rec["bbox"] = bbox_json(d.box);
    rec["logits"] = d.scores.logits();
    if (d.box_variance) {
      rec["box_variance"] = *d.box_variance;
    }
    out << rec.dump() << '\n';
  }
}

void write_detections(const std::filesystem::path& path, std::span<const Detection> detections) {
  auto out = open_out(path);
  write_detections(out, detections);
}

GroundTruthSet read_ground_truth(std::istream& in, const std::string& source,
                                 const GroundTruthReadOptions& options) {
  const auto lines = read_records(in, source);
  if (lines.empty() || !lines.front().record.contains("meta")) {
    throw ParseError(source, lines.empty() ? 1 : lines.front().number,
                     "ground truth files must start with a meta record declaring num_classes");
  }
  GroundTruthSet truth;
  guarded(source, lines.front().number, [&] {
    const auto& rec = lines.front().record;
    truth.num_classes = meta_num_classes(rec);
    const auto& meta = rec.at("meta");
    if (meta.contains("class_names")) {
      truth.class_names = meta.at("class_names").get<std::vector<std::string>>();
    }
    return 0;
  });

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [n, rec] = lines[i];
    guarded(source, n, [&] {
      if (rec.contains("meta")) {
        throw std::invalid_argument("only one meta record is allowed");
      }
      const auto image_id = string_field(rec, "image_id");
      truth.images.insert(image_id);
      if (rec.contains("tag") && !rec["tag"].is_null()) {
        const auto tag = rec.at("tag").get<std::string>();
        if (tag != "day" && tag != "night") {
          throw std::invalid_argument("tag must be \"day\" or \"night\"");
        }
        auto [it, inserted] = truth.tags.emplace(image_id, tag);
        if (!inserted && it->second != tag) {
          throw std::invalid_argument("image '" + image_id + "' has conflicting tags");
        }
      }
      if (!rec.contains("bbox")) {
        return 0;
      }
      const int class_id = rec.value("class_id", 1);
      if (class_id < 1 || class_id > truth.num_classes) {
        throw std::invalid_argument("class_id " + std::to_string(class_id) + " outside [1, " +
                                    std::to_string(truth.num_classes) + "]");
      }
      GroundTruth gt{image_id, bbox_field(rec), class_id,
                     rec.contains("ignore") && rec.at("ignore").get<bool>()};
      if (gt.box.h() < options.min_height) {
        gt.ignore = true;
      }
      truth.objects.push_back(std::move(gt));
      return 0;
    });
  }
  return truth;
}

GroundTruthSet read_ground_truth(const std::filesystem::path& path,
                                 const GroundTruthReadOptions& options) {
  auto in = open_in(path);
  return read_ground_truth(in, path.string(), options);
}

void write_ground_truth(std::ostream& out, const GroundTruthSet& truth) {
  ordered_json meta;
  meta["num_classes"] = truth.num_classes;
  if (!truth.class_names.empty()) {
    meta["class_names"] = truth.class_names;
  }
  out << ordered_json{{"meta", meta}}.dump() << '\n';

  std::map<std::string, std::vector<const GroundTruth*>> by_image;
  for (const auto& id : truth.images) {
    by_image[id];
  }
  for (const auto& gt : truth.objects) {
    by_image[gt.image_id].push_back(&gt);
  }
  for (const auto& [id, objects] : by_image) {
    auto tag = truth.tags.find(id);
    ordered_json image;
    image["image_id"] = id;
    if (tag != truth.tags.end()) {
      image["tag"] = tag->second;
    }
    out << image.dump() << '\n';
    for (const auto* gt : objects) {
      ordered_json rec;
      rec["image_id"] = gt->image_id;
      rec["bbox"] = bbox_json(gt->box);
      rec["class_id"] = gt->class_id;
      if (gt->ignore) {
        rec["ignore"] = true;
      }
      out << rec.dump() << '\n';
    }
  }
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruthSet& truth) {
  auto out = open_out(path);
  write_ground_truth(out, truth);
}

LinearFusionWeights read_weights(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    const auto j = json::parse(in);
    return LinearFusionWeights(j.at("weights").get<std::map<std::string, std::vector<double>>>());
  } catch (const json::exception& e) {
    throw ConfigError("invalid weights file '" + path.string() + "': " + e.what());
  }
}

void write_weights(const std::filesystem::path& path, const LinearFusionWeights& weights) {
  ordered_json w = ordered_json::object();
  for (const auto& [m, v] : weights.by_modality()) {
    w[m] = v;
  }
  write_text_file(path, ordered_json{{"weights", w}}.dump(2) + "\n");
}

namespace {

void apply_profile(const json& j, SensorProfile& p) {
  p.recall = j.value("recall", p.recall);
  p.fp_rate = j.value("fp_rate", p.fp_rate);
  p.concentration = j.value("concentration", p.concentration);
  p.loc_noise = j.value("loc_noise", p.loc_noise);
  p.variance_noise = j.value("variance_noise", p.variance_noise);
}

}  // namespace

ScenarioSpec read_scenario_spec(std::istream& in, const std::string& source) {
  try {
    const auto j = json::parse(in);
    ScenarioSpec spec;
    if (j.contains("preset")) {
      const auto preset = j.at("preset").get<std::string>();
      if (preset != "kaist-like") {
        throw ConfigError(source + ": unknown preset '" + preset + "'");
      }
      spec = kaist_like_preset(j.value("seed", std::uint64_t{0}), j.value("image_count", 100),
                               j.value("modality_count", 2));
    }
    spec.seed = j.value("seed", spec.seed);
    spec.image_count = j.value("image_count", spec.image_count);
    spec.num_classes = j.value("num_classes", spec.num_classes);
    spec.class_names = j.value("class_names", spec.class_names);
    spec.objects_per_image = j.value("objects_per_image", spec.objects_per_image);
    spec.day_fraction = j.value("day_fraction", spec.day_fraction);
    spec.image_width = j.value("image_width", spec.image_width);
    spec.image_height = j.value("image_height", spec.image_height);
    spec.min_object_height = j.value("min_object_height", spec.min_object_height);
    spec.max_object_height = j.value("max_object_height", spec.max_object_height);
    spec.aspect_ratio = j.value("aspect_ratio", spec.aspect_ratio);
    if (j.contains("modalities")) {
      spec.modalities.clear();
      for (const auto& m : j.at("modalities")) {
        ModalityProfile profile;
        profile.name = m.at("name").get<std::string>();
        profile.logit_scale = m.value("logit_scale", 1.0);
        if (m.contains("both")) {
          apply_profile(m["both"], profile.day);
          apply_profile(m["both"], profile.night);
        }
        if (m.contains("day")) {
          apply_profile(m["day"], profile.day);
        }
        if (m.contains("night")) {
          apply_profile(m["night"], profile.night);
        }
        spec.modalities.push_back(std::move(profile));
      }
    }
    validate(spec);
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(source + ": invalid scenario spec: " + e.what());
  }
}

ScenarioSpec read_scenario_spec(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_scenario_spec(in, path.string());
}

std::string report_to_json(const EvalReport& report) {
  ordered_json subsets = ordered_json::object();
  for (const auto& [name, subset] : report.subsets) {
    if (!subset) {
      subsets[name] = nullptr;
      continue;
    }
    const auto& s = *subset;
    ordered_json j;
    j["image_count"] = s.image_count;
    j["gt_count"] = s.gt_count;
    j["tp"] = s.tp;
    j["fp"] = s.fp;
    j["ignored"] = s.ignored;
    j["mean_ap"] = optional_number(s.mean_ap);
    j["lamr"] = optional_number(s.lamr);
    j["sampled_miss_rates"] = s.lamr ? ordered_json(s.sampled_miss_rates) : ordered_json(nullptr);
    ordered_json classes = ordered_json::array();
    for (const auto& c : s.classes) {
      ordered_json cj;
      cj["class_id"] = c.class_id;
      cj["name"] = c.name;
      cj["gt_count"] = c.gt_count;
      cj["tp"] = c.tp;
      cj["fp"] = c.fp;
      cj["ap"] = optional_number(c.ap);
      ordered_json curve = ordered_json::array();
      for (const auto& p : c.pr_curve) {
        curve.push_back({p.recall, p.precision, p.threshold});
      }
      cj["pr_curve"] = std::move(curve);
      classes.push_back(std::move(cj));
    }
    j["classes"] = std::move(classes);
    ordered_json curve = ordered_json::array();
    for (const auto& p : s.miss_rate_curve) {
      curve.push_back({p.fppi, p.miss_rate, p.threshold});
    }
    j["miss_rate_curve"] = std::move(curve);
    subsets[name] = std::move(j);
  }
  ordered_json root;
  root["subsets"] = std::move(subsets);
  root["warnings"] = report.warnings;
  return root.dump(2) + "\n";
}

std::string report_to_text(const EvalReport& report) {
  std::ostringstream os;
  auto metric = [](const std::optional<double>& v) {
    std::ostringstream m;
    if (v) {
      m << std::fixed << std::setprecision(4) << *v;
    } else {
      m << "-";
    }
    return m.str();
  };
  os << std::left << std::setw(8) << "subset" << std::right << std::setw(8) << "images"
     << std::setw(8) << "gt" << std::setw(8) << "tp" << std::setw(8) << "fp" << std::setw(8)
     << "ignored" << std::setw(10) << "mAP" << std::setw(10) << "LAMR" << '\n';
  for (const auto& [name, subset] : report.subsets) {
    os << std::left << std::setw(8) << name << std::right;
    if (!subset) {
      os << std::setw(8) << "absent" << '\n';
      continue;
    }
    os << std::setw(8) << subset->image_count << std::setw(8) << subset->gt_count << std::setw(8)
       << subset->tp << std::setw(8) << subset->fp << std::setw(8) << subset->ignored
       << std::setw(10) << metric(subset->mean_ap) << std::setw(10) << metric(subset->lamr) << '\n';
  }
  for (const auto& [name, subset] : report.subsets) {
    if (!subset) {
      continue;
    }
    os << '\n' << "per-class AP (" << name << ")\n";
    os << std::left << std::setw(8) << "class" << std::setw(16) << "name" << std::right
       << std::setw(8) << "gt" << std::setw(8) << "tp" << std::setw(8) << "fp" << std::setw(10)
       << "AP" << '\n';
    for (const auto& c : subset->classes) {
      os << std::left << std::setw(8) << c.class_id << std::setw(16) << (c.name.empty() ? "-" : c.name)
         << std::right << std::setw(8) << c.gt_count << std::setw(8) << c.tp << std::setw(8) << c.fp
         << std::setw(10) << metric(c.ap) << '\n';
    }
  }
  for (const auto& w : report.warnings) {
    os << "warning: " << w << '\n';
  }
  return os.str();
}

std::string miss_rate_csv(const SubsetReport& report) {
  std::ostringstream os;
  os << std::setprecision(17) << "fppi,miss_rate,threshold\n";
  for (const auto& p : report.miss_rate_curve) {
    os << p.fppi << ',' << p.miss_rate << ',' << p.threshold << '\n';
  }
  return os.str();
}

std::string precision_recall_csv(const SubsetReport& report) {
  std::ostringstream os;
  os << std::setprecision(17) << "class_id,recall,precision,threshold\n";
  for (const auto& c : report.classes) {
    for (const auto& p : c.pr_curve) {
      os << c.class_id << ',' << p.recall << ',' << p.precision << ',' << p.threshold << '\n';
    }
  }
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

}  // namespace detfuse
