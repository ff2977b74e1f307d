// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "detfuse/box_fusion.hpp"
#include "detfuse/calibration.hpp"
#include "detfuse/engine.hpp"
#include "detfuse/error.hpp"
#include "detfuse/io.hpp"
#include "detfuse/metrics.hpp"
#include "detfuse/score_fusion.hpp"
#include "detfuse/synth.hpp"

namespace py = pybind11;
using namespace detfuse;

namespace {

using DetectionSets = std::vector<std::vector<Detection>>;

std::string box_repr(const BBox& b) {
  return "BBox(" + std::to_string(b.x()) + ", " + std::to_string(b.y()) + ", " +
         std::to_string(b.w()) + ", " + std::to_string(b.h()) + ")";
}

}  // namespace

PYBIND11_MODULE(_detfuse, m) {
  m.doc() = "Late fusion of multimodal object detections";

  auto error = py::register_exception<Error>(m, "DetfuseError", PyExc_RuntimeError);
  auto input_error = py::register_exception<InputError>(m, "InputError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", input_error.ptr());
  py::register_exception<InvalidScoreError>(m, "InvalidScoreError", input_error.ptr());
  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<MissingVarianceError>(m, "MissingVarianceError", config_error.ptr());
  py::register_exception<EmptyClusterError>(m, "EmptyClusterError", error.ptr());
  py::register_exception<DegenerateWeightsError>(m, "DegenerateWeightsError", error.ptr());

  py::class_<BBox>(m, "BBox")
      .def(py::init<double, double, double, double>(), py::arg("x"), py::arg("y"), py::arg("w"),
           py::arg("h"))
      .def_property_readonly("x", &BBox::x)
      .def_property_readonly("y", &BBox::y)
      .def_property_readonly("w", &BBox::w)
      .def_property_readonly("h", &BBox::h)
      .def_property_readonly("area", &BBox::area)
      .def("to_list", [](const BBox& b) { return std::vector<double>{b.x(), b.y(), b.w(), b.h()}; })
      .def(py::self == py::self)
      .def("__repr__", &box_repr);

  m.def("iou", &iou, py::arg("a"), py::arg("b"));
  m.def("convex_combination",
        [](const std::vector<BBox>& boxes, const std::vector<double>& weights) {
          return convex_combination(boxes, weights);
        },
        py::arg("boxes"), py::arg("weights"));

  m.def("softmax", [](const std::vector<double>& v) { return softmax(v); }, py::arg("logits"));

  py::class_<ClassScores>(m, "ClassScores")
      .def_static("from_logits", &ClassScores::from_logits, py::arg("logits"))
      .def_static("from_posteriors",
                  [](const std::vector<double>& p) { return ClassScores::from_posteriors(p); },
                  py::arg("posteriors"))
      .def_static("from_confidence",
                  [](double c, int k, int n) { return ClassScores::from_confidence(c, k, n); },
                  py::arg("confidence"), py::arg("class_id"), py::arg("num_classes"))
      .def_property_readonly("logits", &ClassScores::logits)
      .def_property_readonly("posteriors", &ClassScores::posteriors)
      .def_property_readonly("num_classes", &ClassScores::num_classes)
      .def_property_readonly("argmax_class", &ClassScores::argmax_class)
      .def_property_readonly("score", &ClassScores::score)
      .def("posterior", &ClassScores::posterior, py::arg("class_id"));

  py::class_<Detection>(m, "Detection")
      .def(py::init([](std::string image_id, std::string modality, BBox box, ClassScores scores,
                       std::optional<double> box_variance, std::uint64_t det_id) {
             Detection d{std::move(image_id), std::move(modality), box, std::move(scores), box_variance,
                         det_id};
             validate(d);
             return d;
           }),
           py::arg("image_id"), py::arg("modality"), py::arg("box"), py::arg("scores"),
           py::arg("box_variance") = py::none(), py::arg("det_id") = 0)
      .def_readwrite("image_id", &Detection::image_id)
      .def_readwrite("modality", &Detection::modality)
      .def_readwrite("box", &Detection::box)
      .def_readwrite("scores", &Detection::scores)
      .def_readwrite("box_variance", &Detection::box_variance)
      .def_readwrite("det_id", &Detection::det_id)
      .def_property_readonly("label", &Detection::label)
      .def_property_readonly("score", &Detection::score);

  py::class_<GroundTruth>(m, "GroundTruth")
      .def(py::init([](std::string image_id, BBox box, int class_id, bool ignore) {
             return GroundTruth{std::move(image_id), box, class_id, ignore};
           }),
           py::arg("image_id"), py::arg("box"), py::arg("class_id") = 1, py::arg("ignore") = false)
      .def_readwrite("image_id", &GroundTruth::image_id)
      .def_readwrite("box", &GroundTruth::box)
      .def_readwrite("class_id", &GroundTruth::class_id)
      .def_readwrite("ignore", &GroundTruth::ignore);

  py::class_<ClassPrior>(m, "ClassPrior")
      .def(py::init<std::vector<double>>(), py::arg("values"))
      .def_static("uniform", &ClassPrior::uniform, py::arg("num_classes"))
      .def_property_readonly("values", &ClassPrior::values)
      .def_property_readonly("is_uniform", &ClassPrior::is_uniform);
  m.def("estimate_class_prior",
        [](const std::vector<GroundTruth>& gts, int k, double bg) { return estimate_class_prior(gts, k, bg); },
        py::arg("ground_truth"), py::arg("num_classes"), py::arg("background_prior"));

  m.def("fuse_max", [](const std::vector<ClassScores>& s) { return fuse_max(s); }, py::arg("members"));
  m.def("fuse_avg_posteriors", [](const std::vector<ClassScores>& s) { return fuse_avg_posteriors(s); },
        py::arg("members"));
  m.def("fuse_avg_logits", [](const std::vector<ClassScores>& s) { return fuse_avg_logits(s); },
        py::arg("members"));
  m.def("fuse_proben",
        [](const std::vector<ClassScores>& s, std::optional<ClassPrior> prior, std::optional<int> m_eff) {
          if (s.empty()) {
            throw EmptyClusterError("score fusion needs at least one member");
          }
          const auto p = prior ? *prior : ClassPrior::uniform(s.front().num_classes());
          return fuse_proben(s, p, m_eff.value_or(static_cast<int>(s.size())));
        },
        py::arg("members"), py::arg("prior") = py::none(), py::arg("m_effective") = py::none());

  py::class_<CalibrationParams>(m, "CalibrationParams")
      .def(py::init([](double t, double b) { return CalibrationParams{t, b}; }),
           py::arg("temperature") = 1.0, py::arg("shift") = 0.0)
      .def_readwrite("temperature", &CalibrationParams::temperature)
      .def_readwrite("shift", &CalibrationParams::shift);
  m.def("calibrate_scores", &calibrate_scores, py::arg("scores"), py::arg("params"));

  py::class_<LinearFusionWeights>(m, "LinearFusionWeights")
      .def(py::init<std::map<std::string, std::vector<double>>>(), py::arg("weights"))
      .def_property_readonly("by_modality", &LinearFusionWeights::by_modality);

  py::class_<FusionConfig>(m, "FusionConfig")
      .def(py::init([](double iou_threshold, const std::string& score_fusion, const std::string& box_fusion,
                       std::optional<ClassPrior> prior, std::map<std::string, CalibrationParams> calibration,
                       std::optional<LinearFusionWeights> weights) {
             FusionConfig c{iou_threshold,
                            parse_score_fusion(score_fusion),
                            parse_box_fusion(box_fusion),
                            std::move(prior),
                            std::move(calibration),
                            std::move(weights)};
             validate(c);
             return c;
           }),
           py::arg("iou_threshold") = 0.5, py::arg("score_fusion") = "proben",
           py::arg("box_fusion") = "argmax", py::arg("prior") = py::none(),
           py::arg("calibration") = std::map<std::string, CalibrationParams>{},
           py::arg("weights") = py::none())
      .def_readonly("iou_threshold", &FusionConfig::iou_threshold)
      .def_property_readonly("score_fusion",
                             [](const FusionConfig& c) { return std::string(to_string(c.score_fusion)); })
      .def_property_readonly("box_fusion",
                             [](const FusionConfig& c) { return std::string(to_string(c.box_fusion)); });

  m.def("fuse", [](const DetectionSets& sets, const FusionConfig& config) { return fuse(sets, config); },
        py::arg("detection_sets"), py::arg("config") = FusionConfig{});
  m.def("pool", [](const DetectionSets& sets) { return pool(sets); }, py::arg("detection_sets"));

  py::enum_<MatchLabel>(m, "MatchLabel")
      .value("TRUE_POSITIVE", MatchLabel::kTruePositive)
      .value("FALSE_POSITIVE", MatchLabel::kFalsePositive)
      .value("IGNORED", MatchLabel::kIgnored);
  py::class_<MatchedDetection>(m, "MatchedDetection")
      .def_readonly("image_id", &MatchedDetection::image_id)
      .def_readonly("class_id", &MatchedDetection::class_id)
      .def_readonly("score", &MatchedDetection::score)
      .def_readonly("det_id", &MatchedDetection::det_id)
      .def_readonly("label", &MatchedDetection::label);
  py::class_<MatchResult>(m, "MatchResult")
      .def_readonly("detections", &MatchResult::detections)
      .def_readonly("gt_matched", &MatchResult::gt_matched)
      .def_property_readonly("total_gt", &MatchResult::total_gt);
  m.def("match",
        [](const std::vector<Detection>& d, const std::vector<GroundTruth>& g, double t) { return match(d, g, t); },
        py::arg("detections"), py::arg("ground_truth"), py::arg("iou_threshold") = 0.5);
  m.def("average_precision", &average_precision, py::arg("matches"), py::arg("class_id") = 1);
  m.def("lamr", &lamr, py::arg("matches"), py::arg("image_count"));

  py::class_<GroundTruthSet>(m, "GroundTruthSet")
      .def(py::init<>())
      .def_readwrite("num_classes", &GroundTruthSet::num_classes)
      .def_readwrite("class_names", &GroundTruthSet::class_names)
      .def_readwrite("objects", &GroundTruthSet::objects)
      .def_readwrite("images", &GroundTruthSet::images)
      .def_readwrite("tags", &GroundTruthSet::tags);
  m.def("evaluate",
        [](const std::vector<Detection>& d, const GroundTruthSet& truth, double iou_threshold) {
          return report_to_json(breakdown(d, truth, {iou_threshold}));
        },
        py::arg("detections"), py::arg("ground_truth"), py::arg("iou_threshold") = 0.5,
        "Day/night breakdown report as a JSON string.");

  m.def("synthesize",
        [](std::uint64_t seed, int images, int modalities, std::map<std::string, double> logit_scale) {
          auto spec = kaist_like_preset(seed, images, modalities);
          for (auto& p : spec.modalities) {
            if (auto it = logit_scale.find(p.name); it != logit_scale.end()) {
              p.logit_scale = it->second;
            }
          }
          auto data = generate(spec);
          return py::make_tuple(std::move(data.truth), std::move(data.detections));
        },
        py::arg("seed"), py::arg("images") = 2000, py::arg("modalities") = 2,
        py::arg("logit_scale") = std::map<std::string, double>{},
        "Kaist-like scenario; returns (ground truth, per-modality detections).");

  m.def("read_detections",
        [](const std::filesystem::path& path, std::optional<std::string> modality) {
          DetectionReadOptions opts;
          opts.modality = std::move(modality);
          return read_detections(path, opts).detections;
        },
        py::arg("path"), py::arg("modality") = py::none());
  m.def("write_detections",
        [](const std::filesystem::path& path, const std::vector<Detection>& d) { write_detections(path, d); },
        py::arg("path"), py::arg("detections"));
  m.def("read_ground_truth",
        [](const std::filesystem::path& path, double min_height) {
          return read_ground_truth(path, {min_height});
        },
        py::arg("path"), py::arg("min_height") = 0.0);
  m.def("write_ground_truth",
        [](const std::filesystem::path& path, const GroundTruthSet& t) { write_ground_truth(path, t); },
        py::arg("path"), py::arg("ground_truth"));
}
