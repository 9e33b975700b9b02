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

#include <cstdint>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace etsam {

// Shapes follow the promptable-decoder layout: embeddings on an S/16 grid,
// heatmap and line/paragraph masks on S/4, word/word-group masks on 1.5 * S/4.
struct ModelConfig {
  int input_size = 1024;
  int embed_dim = 256;
  int patch_size = 16;
  int encoder_depth = 2;
  int encoder_heads = 8;
  int encoder_mlp_dim = 1024;
  int encoder_window = 8;  // attention window on the embedding grid; 0 = global
  int adapter_dim = 32;
  bool freeze_backbone = true;  // also freezes the prompt encoder
  int decoder_depth = 2;
  int decoder_heads = 8;
  int decoder_mlp_dim = 2048;
  int attention_downsample = 2;
  int upscale_dim = 64;
  int mask_dim = 32;
  int hr_dim = 16;
  int num_tasks = 3;
  int points_per_prompt = 2;
  int iou_hidden = 256;
  int decode_chunk = 16;  // prompts per internal HM-decoder pass
  std::uint64_t init_seed = 0;

  int embed_grid() const { return input_size / patch_size; }
  int heatmap_grid() const { return input_size / 4; }
  int highres_grid() const { return heatmap_grid() * 3 / 2; }

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  // S = 256 configuration sized for desk-scale training.
  static ModelConfig toy();
};

// (B, C, H, W) layer norm over channels.
class LayerNorm2dImpl : public torch::nn::Module {
 public:
  explicit LayerNorm2dImpl(int channels, double eps = 1e-6);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::Tensor weight_, bias_;
  double eps_;
};
TORCH_MODULE(LayerNorm2d);

// Multi-layer perceptron with ReLU between layers.
class MlpImpl : public torch::nn::Module {
 public:
  MlpImpl(int in, int hidden, int out, int layers);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::ModuleList layers_;
};
TORCH_MODULE(Mlp);

// Bottleneck adapter; the up-projection starts at zero so a fresh adapter is
// an identity on the residual stream.
class AdapterImpl : public torch::nn::Module {
 public:
  AdapterImpl(int dim, int bottleneck);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Linear down_{nullptr}, up_{nullptr};
};
TORCH_MODULE(Adapter);

// Multi-head attention over (B, N, D) with an optional internal downsampling
// of the projection width.
class AttentionImpl : public torch::nn::Module {
 public:
  AttentionImpl(int dim, int heads, int downsample = 1);
  torch::Tensor forward(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v);

 private:
  int heads_;
  int internal_;
  torch::nn::Linear q_{nullptr}, k_{nullptr}, v_{nullptr}, out_{nullptr};
};
TORCH_MODULE(Attention);

class EncoderBlockImpl : public torch::nn::Module {
 public:
  EncoderBlockImpl(const ModelConfig& cfg);
  // x: (B, G, G, D)
  torch::Tensor forward(const torch::Tensor& x);

  Adapter adapter{nullptr};

 private:
  int window_;
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  Attention attn_{nullptr};
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(EncoderBlock);

// Stand-in for the large pretrained ViT: patch embedding, a few transformer
// blocks with adapters, and a conv neck. Output (B, D, S/16, S/16).
class ImageEncoderImpl : public torch::nn::Module {
 public:
  explicit ImageEncoderImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& images);
  void set_backbone_frozen(bool frozen);

 private:
  ModelConfig cfg_;
  torch::nn::Conv2d patch_embed_{nullptr};
  torch::Tensor pos_embed_;
  torch::nn::ModuleList blocks_;
  torch::nn::Conv2d neck1_{nullptr}, neck2_{nullptr};
  LayerNorm2d neck_norm1_{nullptr}, neck_norm2_{nullptr};
  torch::Tensor pixel_mean_, pixel_std_;
};
TORCH_MODULE(ImageEncoder);

// Fixed random-frequency sinusoidal positional encoding plus learned
// foreground and padding embeddings.
class PromptEncoderImpl : public torch::nn::Module {
 public:
  explicit PromptEncoderImpl(const ModelConfig& cfg);

  // coords: (K, Np, 2) input pixels (x, y); valid: (K, Np) bool.
  torch::Tensor encode_points(const torch::Tensor& coords, const torch::Tensor& valid);
  // (1, D, G, G) encoding of the embedding-grid cell centers.
  torch::Tensor dense_pe();

 private:
  torch::Tensor encode_unit(const torch::Tensor& xy01);

  ModelConfig cfg_;
  torch::Tensor gaussian_;
  torch::Tensor foreground_, padding_;
};
TORCH_MODULE(PromptEncoder);

class TwoWayBlockImpl : public torch::nn::Module {
 public:
  TwoWayBlockImpl(const ModelConfig& cfg, bool skip_first_pe);
  std::pair<torch::Tensor, torch::Tensor> forward(torch::Tensor queries, torch::Tensor keys,
                                                  const torch::Tensor& query_pe,
                                                  const torch::Tensor& key_pe);

 private:
  bool skip_first_pe_;
  Attention self_attn_{nullptr}, token_to_image_{nullptr}, image_to_token_{nullptr};
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr}, norm3_{nullptr}, norm4_{nullptr};
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(TwoWayBlock);

// Tokens attend to the image and the image attends back; a final
// token-to-image attention refines the tokens.
class TwoWayTransformerImpl : public torch::nn::Module {
 public:
  explicit TwoWayTransformerImpl(const ModelConfig& cfg);
  // image: (B, D, G, G); tokens: (B, T, D). Returns tokens and (B, G*G, D).
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& image,
                                                  const torch::Tensor& image_pe,
                                                  const torch::Tensor& tokens);

 private:
  torch::nn::ModuleList blocks_;
  Attention final_attn_{nullptr};
  torch::nn::LayerNorm norm_final_{nullptr};
};
TORCH_MODULE(TwoWayTransformer);

// Two stride-2 transposed convolutions: (B, D, G, G) -> (B, mask_dim, 4G, 4G).
class UpscalerImpl : public torch::nn::Module {
 public:
  explicit UpscalerImpl(const ModelConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::ConvTranspose2d up1_{nullptr}, up2_{nullptr};
  LayerNorm2d norm_{nullptr};
};
TORCH_MODULE(Upscaler);

struct PointDecoderOutput {
  torch::Tensor heatmap;   // (B, S/4, S/4) in [0, 1]
  torch::Tensor logits;    // (B, S/4, S/4)
  torch::Tensor features;  // F_p, (B, S/4, S/4, mask_dim)
  torch::Tensor token;     // refined output token, (B, D)
};

// Word-heatmap head: one learnable output token modulated by a task token.
class PointDecoderImpl : public torch::nn::Module {
 public:
  explicit PointDecoderImpl(const ModelConfig& cfg);
  PointDecoderOutput forward(const torch::Tensor& image_emb, const torch::Tensor& image_pe,
                             int task_id);

  torch::Tensor output_token;  // (1, D)
  torch::Tensor task_tokens;   // (N_task, D)

 private:
  ModelConfig cfg_;
  TwoWayTransformer transformer_{nullptr};
  Upscaler upscaler_{nullptr};
  Mlp hyper_{nullptr};
};
TORCH_MODULE(PointDecoder);

// Per-prompt outputs; channel order is [word, word_group] and [line, paragraph].
struct MaskBundle {
  torch::Tensor word_logits;      // M_w,wg: (K, 1.5*S/4, 1.5*S/4, 2)
  torch::Tensor line_logits;      // M_l,p:  (K, S/4, S/4, 2)
  torch::Tensor iou_pred;         // (K, 4) in [0, 1]
  torch::Tensor lowres_features;  // F_lr: (K, S/4, S/4, mask_dim)
  torch::Tensor highres_features; // F_hr: (K, 1.5*S/4, 1.5*S/4, hr_dim)

  std::int64_t size() const { return iou_pred.defined() ? iou_pred.size(0) : 0; }
  // (K, H, W) logits of one granularity (0 word, 1 word group, 2 line, 3 paragraph).
  torch::Tensor logits(int granularity) const;
};

class HMDecoderImpl : public torch::nn::Module {
 public:
  explicit HMDecoderImpl(const ModelConfig& cfg);
  // image_emb: (1, D, G, G); point_tokens: (K, Np, D).
  MaskBundle forward(const torch::Tensor& image_emb, const torch::Tensor& image_pe,
                     const torch::Tensor& point_tokens, int task_id);

  torch::Tensor output_tokens;  // (1, 4, D)
  torch::Tensor task_tokens;    // (N_task, 4, D)

 private:
  MaskBundle decode_chunk(const torch::Tensor& image_emb, const torch::Tensor& image_pe,
                          const torch::Tensor& point_tokens, int task_id);

  ModelConfig cfg_;
  TwoWayTransformer transformer_{nullptr};
  Upscaler upscaler_{nullptr};
  torch::nn::Conv2d hr_conv_{nullptr};
  Mlp line_hyper_{nullptr}, word_hyper_{nullptr};
  torch::nn::ModuleList iou_heads_;
};
TORCH_MODULE(HMDecoder);

// Point prompts for K masks with up to Np points each.
struct PointPrompts {
  torch::Tensor coords;  // (K, Np, 2) float, input pixels
  torch::Tensor valid;   // (K, Np) bool
  torch::Tensor tokens;  // (K, Np, D) after encoding

  std::int64_t size() const { return coords.defined() ? coords.size(0) : 0; }
};

// Builds single-point prompts (padding the remaining slots).
PointPrompts single_point_prompts(const std::vector<std::pair<double, double>>& xy, int np);

class EtSamImpl : public torch::nn::Module {
 public:
  explicit EtSamImpl(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  torch::Tensor encode_image(const torch::Tensor& images);
  PointDecoderOutput point_decode(const torch::Tensor& image_emb, int task_id);
  PointPrompts encode_points(PointPrompts prompts);
  MaskBundle hm_decode(const torch::Tensor& image_emb, const PointPrompts& prompts, int task_id);

  // Parameters the optimizer updates (respects freeze_backbone).
  std::vector<torch::Tensor> trainable_parameters();
  bool all_finite();
  torch::ScalarType dtype();

  ImageEncoder encoder{nullptr};
  PromptEncoder prompt_encoder{nullptr};
  PointDecoder point_decoder{nullptr};
  HMDecoder hm_decoder{nullptr};

 private:
  void check_task(int task_id) const;

  ModelConfig cfg_;
};
TORCH_MODULE(EtSam);

// RGB CV_32FC3 image in [0, 1] -> (1, 3, size, size), resized when needed.
torch::Tensor image_to_tensor(const cv::Mat& rgb01, int size,
                              torch::ScalarType dtype = torch::kFloat32);

}  // namespace etsam
