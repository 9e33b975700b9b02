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
#include "etsam/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "etsam/augment.hpp"
#include "etsam/trainer.hpp"

namespace etsam {

namespace F = torch::nn::functional;
using torch::indexing::Slice;

const torch::Tensor& PointOutputs::logits(Granularity g) const {
  switch (g) {
    case Granularity::kWord: return word_logits;
    case Granularity::kWordGroup: return group_logits;
    case Granularity::kLine: return line_logits;
    case Granularity::kParagraph: return para_logits;
  }
  throw std::out_of_range("bad granularity");
}

PointOutputs run_points(EtSam& model, const torch::Tensor& image_emb,
                        const std::vector<Point>& points, Task task, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("run_points: batch_size must be >= 1");
  torch::NoGradGuard guard;
  const auto& cfg = model->config();
  const int lo = cfg.heatmap_grid(), hi = cfg.highres_grid();
  const auto opt = torch::TensorOptions().dtype(model->dtype());
  PointOutputs out;
  if (points.empty()) {
    out.word_logits = torch::zeros({0, hi, hi}, opt);
    out.group_logits = torch::zeros({0, hi, hi}, opt);
    out.line_logits = torch::zeros({0, lo, lo}, opt);
    out.para_logits = torch::zeros({0, lo, lo}, opt);
    out.iou = torch::zeros({0, 4}, opt);
    return out;
  }
  std::vector<torch::Tensor> w, wg, l, p, iou;
  for (std::size_t s = 0; s < points.size(); s += batch_size) {
    const std::size_t e = std::min(points.size(), s + static_cast<std::size_t>(batch_size));
    std::vector<std::pair<double, double>> xy;
    for (std::size_t i = s; i < e; ++i) xy.emplace_back(points[i].x, points[i].y);
    PointPrompts pp = model->encode_points(single_point_prompts(xy, cfg.points_per_prompt));
    const MaskBundle b = model->hm_decode(image_emb, pp, task_index(task));
    w.push_back(b.logits(0));
    wg.push_back(b.logits(1));
    l.push_back(b.logits(2));
    p.push_back(b.logits(3));
    iou.push_back(b.iou_pred);
    ++out.batches;
  }
  out.word_logits = torch::cat(w, 0).contiguous();
  out.group_logits = torch::cat(wg, 0).contiguous();
  out.line_logits = torch::cat(l, 0).contiguous();
  out.para_logits = torch::cat(p, 0).contiguous();
  out.iou = torch::cat(iou, 0);
  return out;
}

EncodedImage encode(EtSam& model, const cv::Mat& rgb01, Task task) {
  if (rgb01.empty()) throw InferenceError("empty image");
  if (!model->all_finite()) throw InferenceError("model weights contain NaN or Inf");
  torch::NoGradGuard guard;
  const int size = model->config().input_size;
  EncodedImage out;
  out.width = rgb01.cols;
  out.height = rgb01.rows;
  HierSample tmp;
  tmp.width = rgb01.cols;
  tmp.height = rgb01.rows;
  tmp.image = rgb01;
  const HierSample boxed = letterbox(tmp, size);
  out.scale = letterbox_scale(rgb01.cols, rgb01.rows, size);
  out.embedding = model->encode_image(image_to_tensor(boxed.image, size, model->dtype()));
  const auto pd = model->point_decode(out.embedding, task_index(task));
  if (!torch::isfinite(pd.heatmap).all().item<bool>()) {
    throw InferenceError("heatmap contains NaN or Inf");
  }
  out.heatmap = tensor_to_grid(pd.heatmap[0]);
  return out;
}

Mask binarize(const torch::Tensor& logits, const EncodedImage& img, int canvas) {
  torch::NoGradGuard guard;
  auto up = F::interpolate(logits.reshape({1, 1, logits.size(-2), logits.size(-1)}),
                           F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{canvas, canvas})
                               .mode(torch::kBilinear)
                               .align_corners(false));
  const int ch = std::min<int>(canvas, static_cast<int>(std::lround(img.height * img.scale)));
  const int cw = std::min<int>(canvas, static_cast<int>(std::lround(img.width * img.scale)));
  up = up.index({Slice(), Slice(), Slice(0, ch), Slice(0, cw)});
  if (ch != img.height || cw != img.width) {
    up = F::interpolate(up, F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{img.height, img.width})
                                .mode(torch::kBilinear)
                                .align_corners(false));
  }
  const auto bin = (up[0][0] > 0).to(torch::kUInt8).contiguous();
  Mask m(img.height, img.width);
  std::memcpy(m.data(), bin.data_ptr<std::uint8_t>(), m.values().size());
  return m;
}

namespace {

Detection make_det(Mask mask, double score, Granularity g, int point) {
  Detection d;
  d.mask = std::move(mask);
  d.score = score;
  d.granularity = g;
  d.source_point = point;
  return d;
}

// IoU filter then Matrix NMS on one channel.
std::vector<Detection> filter_and_suppress(EtSam& model, const PointOutputs& po,
                                           const EncodedImage& img, Granularity g,
                                           const InferenceConfig& cfg) {
  const auto scores = po.iou.select(1, static_cast<int>(g)).to(torch::kFloat64).contiguous();
  const double* sp = scores.data_ptr<double>();
  std::vector<Mask> masks;
  std::vector<double> kept_scores;
  std::vector<int> src;
  for (int64_t i = 0; i < po.size(); ++i) {
    if (sp[i] < cfg.iou_threshold) continue;
    Mask m = binarize(po.logits(g)[i], img, model->config().input_size);
    if (mask_area(m) == 0) continue;
    masks.push_back(std::move(m));
    kept_scores.push_back(sp[i]);
    src.push_back(static_cast<int>(i));
  }
  const NmsResult nms = matrix_nms(masks, kept_scores, cfg.nms);
  std::vector<Detection> out;
  for (int k : nms.kept) out.push_back(make_det(std::move(masks[k]), kept_scores[k], g, src[k]));
  return out;
}

}  // namespace

InferenceResult detect(EtSam& model, const EncodedImage& img, Task task,
                       const InferenceConfig& cfg) {
  InferenceResult res;
  res.detections.task = task;
  PeakConfig pc = cfg.peaks;
  pc.stride = kHeatmapStride;
  res.peaks = extract_peaks(img.heatmap, cfg.point_threshold, pc);
  std::vector<Point> points;
  for (const auto& p : res.peaks) points.push_back(p.point);
  const PointOutputs po = run_points(model, img.embedding, points, task, cfg.batch_size);
  if (po.size() > 0 && !torch::isfinite(po.iou).all().item<bool>()) {
    throw InferenceError("decoder produced NaN scores");
  }
  DetectionSet& ds = res.detections;
  const int canvas = model->config().input_size;

  if (task == Task::kWord) {
    ds.words = filter_and_suppress(model, po, img, Granularity::kWord, cfg);
    return res;
  }
  if (task == Task::kLine) {
    ds.lines = filter_and_suppress(model, po, img, Granularity::kLine, cfg);
    return res;
  }

  const auto iou = po.iou.to(torch::kFloat64).contiguous();
  auto score = [&iou](int64_t i, Granularity g) {
    return iou[i][static_cast<int>(g)].item<double>();
  };

  // Lines: IoU filter (remembering every point that passed) then Matrix NMS.
  std::vector<int> passed;
  std::vector<Mask> line_masks;
  std::vector<double> line_scores;
  for (int64_t i = 0; i < po.size(); ++i) {
    const double s = score(i, Granularity::kLine);
    if (s < cfg.iou_threshold) continue;
    Mask m = binarize(po.line_logits[i], img, canvas);
    if (mask_area(m) == 0) continue;
    passed.push_back(static_cast<int>(i));
    line_masks.push_back(std::move(m));
    line_scores.push_back(s);
  }
  const NmsResult nms = matrix_nms(line_masks, line_scores, cfg.nms);

  for (int k : nms.kept) {
    const int i = passed[k];
    ds.lines.push_back(make_det(line_masks[k], line_scores[k], Granularity::kLine, i));
    Mask g = binarize(po.group_logits[i], img, canvas);
    if (mask_area(g) > 0) {
      ds.word_groups.push_back(
          make_det(std::move(g), score(i, Granularity::kWordGroup), Granularity::kWordGroup, i));
    }
    Mask p = binarize(po.para_logits[i], img, canvas);
    if (mask_area(p) > 0) {
      ds.paragraphs.push_back(
          make_det(std::move(p), score(i, Granularity::kParagraph), Granularity::kParagraph, i));
    }
  }
  for (std::size_t k = 0; k < passed.size(); ++k) {
    const int i = passed[k];
    Mask w = binarize(po.word_logits[i], img, canvas);
    if (mask_area(w) > 0) {
      ds.words.push_back(make_det(std::move(w), score(i, Granularity::kWord), Granularity::kWord, i));
    }
  }

  // Layout: union-find over paragraph masks; lines without a paragraph mask
  // form their own cluster.
  std::vector<Mask> para_masks;
  for (const auto& p : ds.paragraphs) para_masks.push_back(p.mask);
  const ClusterResult cl = layout_cluster(para_masks, cfg.cluster_tau);
  std::vector<int> cluster_of_point(po.size(), -1);
  for (std::size_t k = 0; k < ds.paragraphs.size(); ++k) {
    ds.paragraphs[k].cluster = cl.label[k];
    cluster_of_point[ds.paragraphs[k].source_point] = cl.label[k];
  }
  int next = cl.count;
  for (auto& l : ds.lines) {
    if (cluster_of_point[l.source_point] < 0) cluster_of_point[l.source_point] = next++;
    l.cluster = cluster_of_point[l.source_point];
  }
  ds.num_clusters = next;
  for (auto& g : ds.word_groups) g.cluster = cluster_of_point[g.source_point];
  // Words follow the surviving line that best overlaps their own point's line.
  for (auto& w : ds.words) {
    if (cluster_of_point[w.source_point] >= 0) {
      w.cluster = cluster_of_point[w.source_point];
      continue;
    }
    const auto it = std::find(passed.begin(), passed.end(), w.source_point);
    const Mask& own = line_masks[it - passed.begin()];
    double best = 0.0;
    for (const auto& l : ds.lines) {
      const double v = mask_iou(own, l.mask);
      if (v > best) best = v, w.cluster = l.cluster;
    }
  }
  return res;
}

InferenceResult infer(EtSam& model, const cv::Mat& rgb01, Task task, const InferenceConfig& cfg) {
  return detect(model, encode(model, rgb01, task), task, cfg);
}

}  // namespace etsam
