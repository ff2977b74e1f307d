// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

// detfuse: late fusion of multimodal detections and their evaluation.
//
//   detfuse fuse -i rgb.jsonl -i thermal.jsonl -o fused.jsonl --score-fusion proben
//   detfuse eval -d fused.jsonl -g gt.jsonl -o report --breakdown
//   detfuse calibrate -i rgb.jsonl -i thermal.jsonl -g gt.jsonl --calibrate-modality thermal
//   detfuse synth --preset kaist-like --seed 7 -o data/
//   detfuse fit-weights -i rgb.jsonl -i thermal.jsonl -g gt.jsonl -o weights.json

#include <CLI11.hpp>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "detfuse/calibration.hpp"
#include "detfuse/engine.hpp"
#include "detfuse/error.hpp"
#include "detfuse/io.hpp"
#include "detfuse/metrics.hpp"
#include "detfuse/synth.hpp"

namespace fs = std::filesystem;
using namespace detfuse;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitConfig = 3;

struct FusionFlags {
  double iou_threshold = 0.5;
  std::string score_fusion = "proben";
  std::string box_fusion = "argmax";
  std::string prior = "uniform";
  std::vector<std::string> temperatures;
  std::vector<std::string> shifts;
  std::string weights;
  std::optional<int> num_classes;
};

void add_fusion_flags(CLI::App* cmd, FusionFlags& f) {
  cmd->add_option("--iou-threshold", f.iou_threshold, "Cluster overlap threshold")->capture_default_str();
  cmd->add_option("--score-fusion", f.score_fusion, "max | avg-posteriors | avg-logits | proben | linear")
      ->capture_default_str();
  cmd->add_option("--box-fusion", f.box_fusion, "argmax | avg | s-avg | v-avg")->capture_default_str();
  cmd->add_option("--prior", f.prior, "uniform | counted:<background prior> (needs --gt)")
      ->capture_default_str();
  cmd->add_option("--temperature", f.temperatures, "<modality>=<T>, repeatable");
  cmd->add_option("--shift", f.shifts, "<modality>=<b>, repeatable");
  cmd->add_option("--weights", f.weights, "Linear fusion weights file");
  cmd->add_option("--num-classes", f.num_classes, "Foreground class count for scalar-score records");
}

std::pair<std::string, double> key_value(const std::string& text, const char* flag) {
  const auto eq = text.rfind('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(std::string(flag) + " expects <modality>=<value>, got '" + text + "'");
  }
  try {
    std::size_t used = 0;
    const auto value_text = text.substr(eq + 1);
    const double v = std::stod(value_text, &used);
    if (used != value_text.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return {text.substr(0, eq), v};
  } catch (const std::exception&) {
    throw ConfigError(std::string(flag) + ": invalid number in '" + text + "'");
  }
}

FusionConfig make_config(const FusionFlags& f, const GroundTruthSet* truth, int num_classes) {
  FusionConfig config;
  config.iou_threshold = f.iou_threshold;
  config.score_fusion = parse_score_fusion(f.score_fusion);
  config.box_fusion = parse_box_fusion(f.box_fusion);
  for (const auto& t : f.temperatures) {
    auto [m, v] = key_value(t, "--temperature");
    config.calibration[m].temperature = v;
  }
  for (const auto& s : f.shifts) {
    auto [m, v] = key_value(s, "--shift");
    config.calibration[m].shift = v;
  }
  if (f.prior.rfind("counted:", 0) == 0) {
    if (truth == nullptr) {
      throw ConfigError("--prior counted:<bg> needs --gt to count classes");
    }
    double bg = 0.0;
    try {
      bg = std::stod(f.prior.substr(8));
    } catch (const std::exception&) {
      throw ConfigError("invalid background prior in '" + f.prior + "'");
    }
    config.prior = estimate_class_prior(truth->objects, num_classes, bg);
  } else if (f.prior != "uniform") {
    throw ConfigError("--prior must be 'uniform' or 'counted:<bg>'");
  }
  if (!f.weights.empty()) {
    config.weights = read_weights(f.weights);
  }
  validate(config);
  return config;
}

struct LoadedInputs {
  std::vector<std::vector<Detection>> sets;
  int num_classes = 0;
};

LoadedInputs load_inputs(const std::vector<std::string>& paths, const std::vector<std::string>& modalities,
                         std::optional<int> num_classes) {
  if (!modalities.empty() && modalities.size() != paths.size()) {
    throw ConfigError("--modality must be given once per input file");
  }
  LoadedInputs out;
  std::uint64_t next_id = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    DetectionReadOptions opts;
    opts.num_classes = num_classes;
    opts.first_det_id = next_id;
    if (!modalities.empty()) {
      opts.modality = modalities[i];
    }
    auto result = read_detections(fs::path(paths[i]), opts);
    for (const auto& w : result.warnings) {
      std::cerr << "warning: " << w << '\n';
    }
    if (out.num_classes != 0 && !result.detections.empty() && result.num_classes != out.num_classes) {
      throw InputError(paths[i] + ": number of classes differs from earlier inputs");
    }
    if (!result.detections.empty() || out.num_classes == 0) {
      out.num_classes = result.num_classes;
    }
    next_id += result.detections.size();
    out.sets.push_back(std::move(result.detections));
  }
  return out;
}

int run_fuse(const std::vector<std::string>& inputs, const std::vector<std::string>& modalities,
             const std::string& output, const std::string& gt_path, bool pool_only, bool quiet,
             const FusionFlags& flags) {
  auto loaded = load_inputs(inputs, modalities, flags.num_classes);
  std::optional<GroundTruthSet> truth;
  if (!gt_path.empty()) {
    truth = read_ground_truth(fs::path(gt_path));
  }
  std::vector<Detection> fused;
  if (pool_only) {
    fused = pool(loaded.sets);
  } else {
    const auto config = make_config(flags, truth ? &*truth : nullptr, loaded.num_classes);
    fused = fuse(loaded.sets, config);
  }
  write_detections(fs::path(output), fused);

  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  std::size_t total_in = 0;
  for (const auto& set : loaded.sets) {
    for (const auto& d : set) {
      ++counts[d.image_id].first;
      ++total_in;
    }
  }
  for (const auto& d : fused) {
    ++counts[d.image_id].second;
  }
  if (!quiet) {
    for (const auto& [id, c] : counts) {
      std::cout << id << '\t' << c.first << '\t' << c.second << '\n';
    }
  }
  std::cout << "total\t" << total_in << '\t' << fused.size() << '\n';
  return 0;
}

int run_eval(const std::string& dets_path, const std::string& gt_path, const std::string& prefix,
             const std::string& metric, bool breakdown_on, bool curves, double iou_threshold,
             double min_height, std::optional<int> num_classes) {
  if (metric != "ap" && metric != "lamr" && metric != "both") {
    throw ConfigError("--metric must be ap, lamr or both");
  }
  const auto truth = read_ground_truth(fs::path(gt_path), {min_height});
  DetectionReadOptions opts;
  opts.num_classes = num_classes ? num_classes : std::optional<int>(truth.num_classes);
  const auto dets = read_detections(fs::path(dets_path), opts);
  for (const auto& w : dets.warnings) {
    std::cerr << "warning: " << w << '\n';
  }
  if (!dets.detections.empty() && dets.num_classes != truth.num_classes) {
    throw InputError("detections and ground truth disagree on the number of classes");
  }

  EvalReport report = breakdown(dets.detections, truth, {iou_threshold});
  if (!breakdown_on) {
    for (auto& [name, subset] : report.subsets) {
      if (name != "all") {
        subset.reset();
      }
    }
    std::erase_if(report.subsets, [](const auto& kv) { return kv.first != "all"; });
  }
  for (const auto& w : report.warnings) {
    std::cerr << "warning: " << w << '\n';
  }
  if (!prefix.empty()) {
    write_text_file(prefix + ".json", report_to_json(report));
    write_text_file(prefix + ".txt", report_to_text(report));
    if (curves && report.subsets.at("all")) {
      write_text_file(prefix + "_miss_rate.csv", miss_rate_csv(*report.subsets.at("all")));
      write_text_file(prefix + "_pr.csv", precision_recall_csv(*report.subsets.at("all")));
    }
  }
  for (const auto& [name, subset] : report.subsets) {
    std::cout << std::left << std::setw(6) << name;
    if (!subset) {
      std::cout << " absent\n";
      continue;
    }
    std::cout << std::fixed << std::setprecision(4);
    if (metric != "lamr") {
      std::cout << " mAP=" << (subset->mean_ap ? std::to_string(*subset->mean_ap) : "-");
    }
    if (metric != "ap") {
      std::cout << " LAMR=" << (subset->lamr ? std::to_string(*subset->lamr) : "-");
    }
    std::cout << '\n';
  }
  return 0;
}

int run_calibrate(const std::vector<std::string>& inputs, const std::vector<std::string>& modalities,
                  const std::string& gt_path, const std::string& prefix, const std::string& modality,
                  const std::string& t_grid, const std::string& b_grid, const std::string& objective,
                  double min_height, const FusionFlags& flags) {
  const auto truth = read_ground_truth(fs::path(gt_path), {min_height});
  auto loaded = load_inputs(inputs, modalities, flags.num_classes);
  CalibrationSearch search;
  search.modality = modality;
  search.temperature = parse_grid_axis(t_grid);
  search.shift = parse_grid_axis(b_grid);
  search.objective = parse_objective(objective);
  search.fusion = make_config(flags, &truth, loaded.num_classes);
  search.eval.iou_threshold = 0.5;

  const auto result = calibrate_grid(loaded.sets, truth, search);
  if (!prefix.empty()) {
    write_text_file(prefix + "_surface.csv", surface_csv(result, search.objective));
    std::ostringstream js;
    js << std::setprecision(17) << "{\n  \"modality\": \"" << modality << "\",\n  \"temperature\": "
       << result.best.temperature << ",\n  \"shift\": " << result.best.shift << ",\n  \"objective\": \""
       << to_string(search.objective) << "\",\n  \"value\": " << result.best_objective << "\n}\n";
    write_text_file(prefix + ".json", js.str());
  }
  std::cout << modality << " T=" << result.best.temperature << " b=" << result.best.shift << ' '
            << to_string(search.objective) << '=' << result.best_objective << '\n';
  return 0;
}

int run_synth(const std::string& preset, const std::string& spec_path, std::optional<std::uint64_t> seed,
              std::optional<int> images, std::optional<int> modality_count,
              const std::vector<std::string>& logit_scales, const std::string& out_dir) {
  ScenarioSpec spec;
  if (!spec_path.empty()) {
    spec = read_scenario_spec(fs::path(spec_path));
  } else if (preset == "kaist-like") {
    spec = kaist_like_preset(0, 2000, modality_count.value_or(2));
  } else {
    throw ConfigError("unknown preset '" + preset + "'");
  }
  if (seed) {
    spec.seed = *seed;
  }
  if (images) {
    spec.image_count = *images;
  }
  if (modality_count && !spec_path.empty()) {
    throw ConfigError("--modalities applies to presets only");
  }
  for (const auto& s : logit_scales) {
    auto [m, v] = key_value(s, "--logit-scale");
    auto it = std::find_if(spec.modalities.begin(), spec.modalities.end(),
                           [&](const auto& p) { return p.name == m; });
    if (it == spec.modalities.end()) {
      throw ConfigError("--logit-scale names unknown modality '" + m + "'");
    }
    it->logit_scale = v;
  }
  const auto data = generate(spec);

  fs::create_directories(out_dir);
  write_ground_truth(fs::path(out_dir) / "gt.jsonl", data.truth);
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    write_detections(fs::path(out_dir) / (spec.modalities[m].name + ".jsonl"), data.detections[m]);
  }
  std::size_t day = 0;
  for (const auto& [id, tag] : data.truth.tags) {
    day += tag == "day" ? 1 : 0;
  }
  std::cout << "images\t" << data.truth.images.size() << " (day " << day << ", night "
            << data.truth.images.size() - day << ")\n";
  std::cout << "objects\t" << data.truth.objects.size() << '\n';
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    std::cout << spec.modalities[m].name << '\t' << data.detections[m].size() << '\n';
  }
  return 0;
}

int run_fit_weights(const std::vector<std::string>& inputs, const std::vector<std::string>& modalities,
                    const std::string& gt_path, const std::string& output, double min_height,
                    const FusionFlags& flags) {
  const auto truth = read_ground_truth(fs::path(gt_path), {min_height});
  auto loaded = load_inputs(inputs, modalities, flags.num_classes);
  FusionFlags cluster_flags = flags;
  cluster_flags.score_fusion = "max";
  cluster_flags.weights.clear();
  const auto config = make_config(cluster_flags, &truth, loaded.num_classes);
  const auto examples = collect_linear_training_set(loaded.sets, truth.objects, config);
  const auto fit = fit_linear_weights(examples);
  if (fit.single_label) {
    std::cerr << "warning: training clusters carry a single label; weights are not meaningful\n";
  }
  write_weights(fs::path(output), fit.weights);
  std::cout << "examples\t" << examples.size() << "\nloss\t" << fit.loss_history.front() << " -> "
            << fit.loss_history.back() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Late fusion of multimodal object detections"};
  app.require_subcommand(1);

  FusionFlags flags;
  std::vector<std::string> inputs;
  std::vector<std::string> modalities;
  std::string output;
  std::string gt_path;
  double min_height = 0.0;

  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse per-modality detection files");
  fuse_cmd->add_option("-i,--input", inputs, "Detection file, repeat per modality")->required();
  fuse_cmd->add_option("--modality", modalities, "Override modality tag, once per input");
  fuse_cmd->add_option("-o,--output", output, "Fused detection file")->required();
  fuse_cmd->add_option("--gt", gt_path, "Ground truth, for counted priors");
  bool pool_only = false;
  bool quiet = false;
  fuse_cmd->add_flag("--pool", pool_only, "Concatenate without suppression");
  fuse_cmd->add_flag("-q,--quiet", quiet, "Only print totals");
  add_fusion_flags(fuse_cmd, flags);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate detections against ground truth");
  std::string dets_path;
  std::string prefix;
  std::string metric = "both";
  bool breakdown_on = false;
  bool curves = false;
  double eval_iou = 0.5;
  std::optional<int> eval_classes;
  eval_cmd->add_option("-d,--detections", dets_path, "Detection file")->required();
  eval_cmd->add_option("-g,--gt", gt_path, "Ground truth file")->required();
  eval_cmd->add_option("-o,--output", prefix, "Report prefix (.json, .txt)");
  eval_cmd->add_option("--metric", metric, "ap | lamr | both")->capture_default_str();
  eval_cmd->add_flag("--breakdown", breakdown_on, "Also report day and night subsets");
  eval_cmd->add_flag("--curves", curves, "Write miss-rate and precision-recall CSV");
  eval_cmd->add_option("--iou-threshold", eval_iou, "Match threshold")->capture_default_str();
  eval_cmd->add_option("--min-height", min_height, "Ignore ground truth shorter than this");
  eval_cmd->add_option("--num-classes", eval_classes, "Foreground class count for scalar scores");

  auto* cal_cmd = app.add_subcommand("calibrate", "Grid search temperature and shift of one modality");
  std::string cal_modality;
  std::string t_grid = "1";
  std::string b_grid = "0";
  std::string objective = "lamr";
  cal_cmd->add_option("-i,--input", inputs, "Detection file, repeat per modality")->required();
  cal_cmd->add_option("--modality", modalities, "Override modality tag, once per input");
  cal_cmd->add_option("-g,--gt", gt_path, "Ground truth file")->required();
  cal_cmd->add_option("-o,--output", prefix, "Output prefix (.json, _surface.csv)");
  cal_cmd->add_option("--calibrate-modality", cal_modality, "Modality to calibrate")->required();
  cal_cmd->add_option("--t-grid", t_grid, "lo:hi:steps or a single temperature")->capture_default_str();
  cal_cmd->add_option("--b-grid", b_grid, "lo:hi:steps or a single shift")->capture_default_str();
  cal_cmd->add_option("--objective", objective, "lamr | ap")->capture_default_str();
  cal_cmd->add_option("--min-height", min_height, "Ignore ground truth shorter than this");
  add_fusion_flags(cal_cmd, flags);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic multimodal scenario");
  std::string preset = "kaist-like";
  std::string spec_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> images;
  std::optional<int> modality_count;
  std::vector<std::string> logit_scales;
  synth_cmd->add_option("--preset", preset, "Scenario preset")->capture_default_str();
  synth_cmd->add_option("--spec", spec_path, "JSON scenario spec");
  synth_cmd->add_option("--seed", seed, "Random seed");
  synth_cmd->add_option("--images", images, "Image count");
  synth_cmd->add_option("--modalities", modality_count, "Number of modalities (presets)");
  synth_cmd->add_option("--logit-scale", logit_scales, "<modality>=<factor>, repeatable");
  synth_cmd->add_option("-o,--output", output, "Output directory")->required();

  auto* fit_cmd = app.add_subcommand("fit-weights", "Learn linear logit fusion weights");
  fit_cmd->add_option("-i,--input", inputs, "Detection file, repeat per modality")->required();
  fit_cmd->add_option("--modality", modalities, "Override modality tag, once per input");
  fit_cmd->add_option("-g,--gt", gt_path, "Ground truth file")->required();
  fit_cmd->add_option("-o,--output", output, "Weights file")->required();
  fit_cmd->add_option("--min-height", min_height, "Ignore ground truth shorter than this");
  add_fusion_flags(fit_cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*fuse_cmd) {
      return run_fuse(inputs, modalities, output, gt_path, pool_only, quiet, flags);
    }
    if (*eval_cmd) {
      return run_eval(dets_path, gt_path, prefix, metric, breakdown_on, curves, eval_iou, min_height,
                      eval_classes);
    }
    if (*cal_cmd) {
      return run_calibrate(inputs, modalities, gt_path, prefix, cal_modality, t_grid, b_grid, objective,
                           min_height, flags);
    }
    if (*synth_cmd) {
      return run_synth(preset, spec_path, seed, images, modality_count, logit_scales, output);
    }
    if (*fit_cmd) {
      return run_fit_weights(inputs, modalities, gt_path, output, min_height, flags);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  }
  return 0;
}
