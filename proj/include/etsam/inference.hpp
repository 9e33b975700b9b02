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
#pragma once

#include <stdexcept>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "etsam/annotations.hpp"
#include "etsam/model.hpp"
#include "etsam/postprocess.hpp"

namespace etsam {

struct InferenceConfig {
  double point_threshold = 0.7;
  double iou_threshold = 0.5;
  // Decay exp(-iou^2 / 0.5) = exp(-2 iou^2), the usual Matrix NMS setting.
  MatrixNmsConfig nms{0.5, 0.5, DecayKernel::kGaussian};
  double cluster_tau = 0.5;
  int batch_size = 100;
  PeakConfig peaks;
};

class InferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw decoder outputs for K single-point prompts.
struct PointOutputs {
  torch::Tensor word_logits;   // (K, 1.5*S/4, 1.5*S/4)
  torch::Tensor group_logits;  // (K, 1.5*S/4, 1.5*S/4)
  torch::Tensor line_logits;   // (K, S/4, S/4)
  torch::Tensor para_logits;   // (K, S/4, S/4)
  torch::Tensor iou;           // (K, 4)
  int batches = 0;             // forward passes used

  std::int64_t size() const { return iou.defined() ? iou.size(0) : 0; }
  const torch::Tensor& logits(Granularity g) const;
};

// Decodes the points in consecutive batches of `batch_size`; the output does
// not depend on the partition.
PointOutputs run_points(EtSam& model, const torch::Tensor& image_emb,
                        const std::vector<Point>& points, Task task, int batch_size = 100);

// Image prepared for decoding: letterboxed to S, encoded, with its heatmap.
struct EncodedImage {
  int width = 0;   // original image size
  int height = 0;
  double scale = 1.0;  // original px -> canvas px
  torch::Tensor embedding;
  Grid<double> heatmap;  // S/4 x S/4
};

EncodedImage encode(EtSam& model, const cv::Mat& rgb01, Task task);

// Logit map -> binary mask at the original image resolution: bilinear
// upsampling to the S canvas, crop of the letterboxed area, threshold at 0.
Mask binarize(const torch::Tensor& logits, const EncodedImage& img, int canvas);

struct InferenceResult {
  DetectionSet detections;
  std::vector<Peak> peaks;
};

// Task 0: IoU filter and Matrix NMS on lines, words gated by their point's line
// score, word groups and paragraphs kept with surviving lines, union-find
// layout over paragraphs. Tasks 1/2: IoU filter then Matrix NMS on the word or
// line channel.
InferenceResult detect(EtSam& model, const EncodedImage& img, Task task,
                       const InferenceConfig& cfg);
InferenceResult infer(EtSam& model, const cv::Mat& rgb01, Task task, const InferenceConfig& cfg);

}  // namespace etsam
