// Copyright 2026 The etsam Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// etsam command-line driver: make-data, train, infer, eval, ablate.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "CLI11.hpp"
#include "json.hpp"

#include "etsam/annotations.hpp"
#include "etsam/checkpoint.hpp"
#include "etsam/config.hpp"
#include "etsam/evaluation.hpp"
#include "etsam/heatmap.hpp"
#include "etsam/inference.hpp"
#include "etsam/pool.hpp"
#include "etsam/predictions.hpp"
#include "etsam/synthdata.hpp"
#include "etsam/trainer.hpp"

namespace fs = std::filesystem;
using namespace etsam;

namespace {

// Failure tagged with the pipeline stage it happened in.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& msg)
      : std::runtime_error(msg), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

class Manifest {
 public:
  Manifest(fs::path out, std::string command) : out_(std::move(out)), command_(std::move(command)) {}

  void add(const fs::path& p) { artifacts_.push_back(fs::relative(p, out_).generic_string()); }

  void write() const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["version"] = kConfigVersion;
    j["artifacts"] = artifacts_;
    std::ofstream(out_ / "manifest.json") << j.dump(2) << '\n';
  }

 private:
  fs::path out_;
  std::string command_;
  std::vector<std::string> artifacts_;
};

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

std::vector<fs::path> collect_images(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  auto is_image = [](const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
  };
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && is_image(e.path())) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      out.push_back(p);
    } else {
      throw std::runtime_error("missing image: " + in);
    }
  }
  return out;
}

cv::Scalar palette(int i) {
  static const cv::Scalar colors[] = {{230, 25, 75},  {60, 180, 75},  {0, 130, 200},
                                      {245, 130, 48}, {145, 30, 180}, {70, 240, 240},
                                      {240, 50, 230}, {210, 245, 60}, {0, 128, 128}};
  return colors[(i < 0 ? 0 : i) % 9];
}

void draw_contours(cv::Mat& bgr, const Mask& m, const cv::Scalar& color, int thickness) {
  cv::Mat mat(m.rows(), m.cols(), CV_8U, const_cast<std::uint8_t*>(m.data()));
  std::vector<std::vector<cv::Point>> contours;
  cv::findContours(mat.clone(), contours, cv::RETR_EXTERNAL, cv::CHAIN_APPROX_SIMPLE);
  cv::drawContours(bgr, contours, -1, color, thickness);
}

// Paragraph clusters as translucent fills, lines in red, words in white.
cv::Mat overlay(const cv::Mat& rgb01, const DetectionSet& ds) {
  cv::Mat bgr;
  rgb01.convertTo(bgr, CV_8UC3, 255.0);
  cv::cvtColor(bgr, bgr, cv::COLOR_RGB2BGR);
  cv::Mat fill = bgr.clone();
  const auto& regions = ds.word_groups.empty() ? ds.paragraphs : ds.word_groups;
  for (const auto& d : regions) {
    cv::Mat mat(d.mask.rows(), d.mask.cols(), CV_8U, const_cast<std::uint8_t*>(d.mask.data()));
    fill.setTo(palette(d.cluster), mat);
  }
  cv::addWeighted(bgr, 0.6, fill, 0.4, 0, bgr);
  for (const auto& d : ds.lines) draw_contours(bgr, d.mask, {0, 0, 255}, 1);
  for (const auto& d : ds.words) draw_contours(bgr, d.mask, {255, 255, 255}, 1);
  return bgr;
}

std::vector<double> parse_thresholds(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size() || !(v > 0 && v < 1)) {
      throw std::invalid_argument("threshold '" + item + "' is not in (0, 1)");
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("no thresholds given");
  return out;
}

std::string metrics_table(const DatasetEvaluator& ev) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s %7s %7s %7s %7s %7s %6s %6s %6s\n", "level", "PQ", "F",
                "P", "R", "T", "TP", "FP", "FN");
  os << buf;
  for (int l = 0; l < kNumEvalLevels; ++l) {
    const auto level = static_cast<EvalLevel>(l);
    if (ev.images(level) == 0) continue;
    const MetricReport m = ev.report(level);
    const MatchCounts& c = ev.counts(level);
    std::snprintf(buf, sizeof(buf), "%-8s %7.2f %7.2f %7.2f %7.2f %7.2f %6lld %6lld %6lld\n",
                  eval_level_name(level), 100 * m.pq, 100 * m.f, 100 * m.p, 100 * m.r,
                  100 * m.t, static_cast<long long>(c.tp), static_cast<long long>(c.fp),
                  static_cast<long long>(c.fn));
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------------------

int cmd_make_data(const fs::path& spec_path, const fs::path& out) {
  const DataSpec spec = stage("config", [&] { return data_spec_from(read_key_values(spec_path)); });
  Manifest manifest(out, "make-data");
  stage("make-data", [&] {
    fs::create_directories(out / "images");
    struct Category {
      const char* name;
      int count;
      std::uint64_t offset;
      std::optional<DegradeMode> mode;
    };
    const Category cats[] = {{"multi", spec.multi, 0, std::nullopt},
                             {"word", spec.word_only, 100000, DegradeMode::kWordOnly},
                             {"line", spec.line_only, 200000, DegradeMode::kLineOnly}};
    for (const auto& cat : cats) {
      if (cat.count == 0) continue;
      std::vector<HierSample> samples;
      for (int i = 0; i < cat.count; ++i) {
        SceneSpec s = spec.scene;
        s.seed = spec.scene.seed + cat.offset + static_cast<std::uint64_t>(i);
        HierSample sample = generate(s);
        if (cat.mode) sample = degrade(sample, *cat.mode);
        const fs::path img = out / "images" / (sample.image_id + ".png");
        save_image(img, sample.image);
        manifest.add(img);
        samples.push_back(std::move(sample));
      }
      const fs::path json = out / (std::string(cat.name) + ".json");
      write_hiertext_json(json, samples);
      manifest.add(json);
      std::cout << cat.name << ": " << samples.size() << " images -> " << json.string() << '\n';
    }
    return 0;
  });
  manifest.write();
  return 0;
}

std::vector<HierSample> load_category(const std::optional<DataSource>& src) {
  if (!src) return {};
  return parse_hiertext_json(src->annotations, src->images);
}

int cmd_train(const fs::path& config_path, const std::vector<std::string>& overrides,
              const std::string& out_opt, const std::string& resume, int log_every) {
  RunConfig cfg = stage("config", [&] {
    RunConfig c = load_run_config(config_path, overrides);
    if (!out_opt.empty()) c.out_dir = out_opt;
    c.validate();
    return c;
  });
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  Manifest manifest(out, "train");

  auto [multi, word, line] = stage("data", [&] {
    return std::make_tuple(load_category(cfg.multi), load_category(cfg.word),
                           load_category(cfg.line));
  });
  const DataPool pool = stage("data", [&] {
    return DataPool(std::move(multi), std::move(word), std::move(line), cfg.seed);
  });

  cfg.train.checkpoint_path = out / "checkpoint.etck";
  cfg.train.log_path = out / "train_log.jsonl";
  stage("train", [&] {
    EtSam model(cfg.model);
    Trainer trainer(model, pool, cfg.train);
    if (!resume.empty()) {
      trainer.resume(read_checkpoint(resume));
      std::cout << "resumed at step " << trainer.current_step() << '\n';
    } else {
      std::ofstream(cfg.train.log_path, std::ios::trunc);
    }
    const auto t0 = std::chrono::steady_clock::now();
    trainer.run([&](std::int64_t step, const LossReport& r) {
      if (log_every > 0 && (step % log_every == 0 || step + 1 == cfg.train.steps)) {
        const double s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("step %lld  L_total %.4f  L_point %.5f  (%.0fs)\n",
                    static_cast<long long>(step), r.L_total, r.L_point, s);
        std::fflush(stdout);
      }
    });
    return 0;
  });
  write_text(out / "config.resolved.txt", cfg.describe() + "\n");
  manifest.add(cfg.train.checkpoint_path);
  manifest.add(cfg.train.log_path);
  manifest.add(out / "config.resolved.txt");
  manifest.write();
  return 0;
}

InferenceConfig inference_config(const std::string& config_path,
                                 const std::vector<std::string>& overrides) {
  if (config_path.empty()) {
    if (!overrides.empty()) {
      KeyValues kv{{"version", std::to_string(kConfigVersion)}};
      for (const auto& o : overrides) kv.insert(parse_override(o));
      RunConfig c = run_config_from(kv);
      c.validate(false);
      return c.infer;
    }
    return InferenceConfig{};
  }
  RunConfig c = load_run_config(config_path, overrides);
  c.validate(false);
  return c.infer;
}

int cmd_infer(const fs::path& ckpt, const std::vector<std::string>& images, int task,
              std::optional<double> threshold, const std::string& config_path,
              const std::vector<std::string>& overrides, const fs::path& out, bool save_heatmap,
              bool save_overlay) {
  InferenceConfig icfg = stage("config", [&] {
    InferenceConfig c = inference_config(config_path, overrides);
    if (threshold) {
      if (!(*threshold > 0 && *threshold < 1)) throw ConfigError("threshold must be in (0, 1)");
      c.point_threshold = *threshold;
    }
    task_from_index(task);
    return c;
  });
  EtSam model = stage("load-checkpoint", [&] { return load_model(ckpt); });
  model->eval();
  const auto paths = stage("data", [&] { return collect_images(images); });
  Manifest manifest(out, "infer");
  fs::create_directories(out / "predictions");
  stage("infer", [&] {
    for (const auto& p : paths) {
      const cv::Mat img = load_image(p);
      const EncodedImage enc = encode(model, img, task_from_index(task));
      const InferenceResult res = detect(model, enc, task_from_index(task), icfg);
      PredictionFile pf{p.stem().string(), task_from_index(task), res.detections};
      const fs::path pred = out / "predictions" / (pf.image_id + ".json");
      write_prediction(pred, pf);
      manifest.add(pred);
      if (save_heatmap) {
        const fs::path hp = out / "heatmaps" / (pf.image_id + ".png");
        fs::create_directories(hp.parent_path());
        save_heatmap_png(hp, enc.heatmap);
        manifest.add(hp);
      }
      if (save_overlay) {
        const fs::path op = out / "overlays" / (pf.image_id + ".png");
        fs::create_directories(op.parent_path());
        cv::imwrite(op.string(), overlay(img, res.detections));
        manifest.add(op);
      }
      std::printf("%s: %zu points, %zu words, %zu lines, %zu paragraphs, %d clusters\n",
                  pf.image_id.c_str(), res.peaks.size(), res.detections.words.size(),
                  res.detections.lines.size(), res.detections.paragraphs.size(),
                  res.detections.num_clusters);
    }
    return 0;
  });
  manifest.write();
  return 0;
}

int cmd_eval(const fs::path& pred_dir, const fs::path& gt_path, const fs::path& out,
             double iou) {
  if (!(iou > 0 && iou < 1)) throw StageError("config", "--iou must be in (0, 1)");
  const auto gts = stage("data", [&] {
    if (!fs::is_directory(pred_dir)) {
      throw std::runtime_error("prediction directory not found: " + pred_dir.string());
    }
    return parse_hiertext_json(gt_path);
  });
  DatasetEvaluator ev(iou);
  stage("eval", [&] {
    for (const auto& gt : gts) {
      const fs::path p = pred_dir / (gt.image_id + ".json");
      PredictionFile pf;
      pf.detections.task = gt.task;
      if (fs::exists(p)) pf = read_prediction(p);
      ev.add(pf.detections, gt);
    }
    return 0;
  });
  Manifest manifest(out, "eval");
  fs::create_directories(out);
  write_text(out / "report.json", ev.to_json() + "\n");
  manifest.add(out / "report.json");
  manifest.write();
  std::cout << metrics_table(ev);
  return 0;
}

int cmd_ablate(const fs::path& ckpt, const fs::path& gt_path, const fs::path& image_dir,
               const std::string& thresholds_s, int task, const fs::path& out) {
  const auto thresholds = stage("config", [&] {
    task_from_index(task);
    return parse_thresholds(thresholds_s);
  });
  EtSam model = stage("load-checkpoint", [&] { return load_model(ckpt); });
  model->eval();
  const auto gts = stage("data", [&] { return parse_hiertext_json(gt_path, image_dir); });

  std::vector<DatasetEvaluator> evs(thresholds.size());
  std::vector<std::vector<std::size_t>> points(thresholds.size());
  stage("ablate", [&] {
    InferenceConfig icfg;
    for (const auto& gt : gts) {
      const EncodedImage enc = encode(model, gt.image, task_from_index(task));
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        icfg.point_threshold = thresholds[t];
        const InferenceResult r = detect(model, enc, task_from_index(task), icfg);
        points[t].push_back(r.peaks.size());
        evs[t].add(r.detections, gt);
      }
    }
    return 0;
  });

  nlohmann::ordered_json j;
  j["task"] = task;
  j["images"] = gts.size();
  bool monotone = true;
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    nlohmann::ordered_json row;
    row["threshold"] = thresholds[t];
    std::size_t total = 0;
    for (std::size_t n : points[t]) total += n;
    row["points_total"] = total;
    row["points_mean"] = gts.empty() ? 0.0 : static_cast<double>(total) / gts.size();
    row["points_per_image"] = points[t];
    row["metrics"] = nlohmann::json::parse(evs[t].to_json());
    j["rows"].push_back(row);
    if (t > 0) {
      for (std::size_t i = 0; i < gts.size(); ++i) {
        if (thresholds[t] >= thresholds[t - 1] && points[t][i] > points[t - 1][i]) {
          monotone = false;
        }
      }
    }
  }
  j["points_monotone"] = monotone;
  Manifest manifest(out, "ablate");
  fs::create_directories(out);
  write_text(out / "ablation.json", j.dump(2) + "\n");
  manifest.add(out / "ablation.json");
  manifest.write();

  std::printf("%-9s %9s %8s %8s %8s %8s\n", "threshold", "points", "word F", "word R",
              "line F", "line R");
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    std::size_t total = 0;
    for (std::size_t n : points[t]) total += n;
    const auto w = evs[t].report(EvalLevel::kWord);
    const auto l = evs[t].report(EvalLevel::kLine);
    std::printf("%-9.2f %9zu %8.2f %8.2f %8.2f %8.2f\n", thresholds[t], total, 100 * w.f,
                100 * w.r, 100 * l.f, 100 * l.r);
  }
  if (!monotone) {
    throw StageError("ablate", "point counts increased with the threshold");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"etsam: hierarchical text segmentation with sparse point prompts"};
  app.require_subcommand(1);

  std::string spec, out, config, resume, ckpt, gt, pred_dir, image_dir;
  std::string thresholds = "0.5,0.6,0.7,0.8";
  std::vector<std::string> overrides, images;
  int task = 0, log_every = 50;
  double iou = 0.5;
  std::optional<double> threshold;
  bool save_heatmap = false, save_overlay = false;

  auto* mk = app.add_subcommand("make-data", "render a synthetic dataset");
  mk->add_option("--spec", spec, "scene spec file (key = value)")->required();
  mk->add_option("--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "joint training");
  tr->add_option("--config", config, "run config file")->required();
  tr->add_option("--set", overrides, "override a config key (key=value)");
  tr->add_option("--out", out, "output directory (overrides out_dir)");
  tr->add_option("--resume", resume, "checkpoint to resume from");
  tr->add_option("--log-every", log_every, "progress print interval");

  auto* in = app.add_subcommand("infer", "predict masks for images");
  in->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  in->add_option("--images", images, "image files or directories")->required();
  in->add_option("--task", task, "0 multi-level, 1 word, 2 line");
  in->add_option("--threshold", threshold, "point threshold");
  in->add_option("--config", config, "run config for inference keys");
  in->add_option("--set", overrides, "override a config key (key=value)");
  in->add_option("--out", out, "output directory")->required();
  in->add_flag("--save-heatmap", save_heatmap, "write heatmap PNGs");
  in->add_flag("--overlay", save_overlay, "write colour-coded overlays");

  auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
  ev->add_option("--pred", pred_dir, "directory of prediction JSON files")->required();
  ev->add_option("--gt", gt, "ground-truth annotation file")->required();
  ev->add_option("--out", out, "output directory")->required();
  ev->add_option("--iou", iou, "match IoU threshold");

  auto* ab = app.add_subcommand("ablate", "point-threshold sweep");
  ab->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  ab->add_option("--gt", gt, "ground-truth annotation file")->required();
  ab->add_option("--images", image_dir, "image directory")->required();
  ab->add_option("--thresholds", thresholds, "comma-separated thresholds");
  ab->add_option("--task", task, "0 multi-level, 1 word, 2 line");
  ab->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (mk->parsed()) return cmd_make_data(spec, out);
    if (tr->parsed()) return cmd_train(config, overrides, out, resume, log_every);
    if (in->parsed()) {
      return cmd_infer(ckpt, images, task, threshold, config, overrides, out, save_heatmap,
                       save_overlay);
    }
    if (ev->parsed()) return cmd_eval(pred_dir, gt, out, iou);
    if (ab->parsed()) return cmd_ablate(ckpt, gt, image_dir, thresholds, task, out);
  } catch (const StageError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [main]: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
