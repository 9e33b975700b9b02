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
#include "etsam/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include <opencv2/imgproc.hpp>

namespace etsam {

namespace F = torch::nn::functional;
using torch::indexing::Slice;

namespace {

std::string shape_str(const torch::Tensor& t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void ModelConfig::validate() const {
  require(input_size > 0 && input_size % 16 == 0, "input_size must be a positive multiple of 16");
  require(patch_size == 16, "patch_size must be 16");
  require(embed_dim > 0 && embed_dim % 2 == 0, "embed_dim must be positive and even");
  require(encoder_heads > 0 && embed_dim % encoder_heads == 0,
          "embed_dim must be divisible by encoder_heads");
  require(decoder_heads > 0 && attention_downsample > 0 &&
              (embed_dim / attention_downsample) % decoder_heads == 0,
          "embed_dim / attention_downsample must be divisible by decoder_heads");
  require(encoder_window >= 0, "encoder_window must be >= 0");
  require(encoder_window == 0 || embed_grid() % encoder_window == 0,
          "encoder_window must divide the embedding grid");
  require(encoder_depth >= 0 && decoder_depth >= 1, "bad depth");
  require(adapter_dim > 0 && encoder_mlp_dim > 0 && decoder_mlp_dim > 0, "bad width");
  require(upscale_dim > 0 && mask_dim > 0 && hr_dim > 0 && iou_hidden > 0, "bad head width");
  require(num_tasks == 3, "num_tasks must be 3");
  require(points_per_prompt >= 1, "points_per_prompt must be >= 1");
  require(decode_chunk >= 1, "decode_chunk must be >= 1");
  require(highres_grid() * 2 == heatmap_grid() * 3, "highres grid must be 1.5x heatmap grid");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j{
      {"input_size", input_size},         {"embed_dim", embed_dim},
      {"patch_size", patch_size},         {"encoder_depth", encoder_depth},
      {"encoder_heads", encoder_heads},   {"encoder_mlp_dim", encoder_mlp_dim},
      {"encoder_window", encoder_window}, {"adapter_dim", adapter_dim},
      {"freeze_backbone", freeze_backbone},
      {"decoder_depth", decoder_depth},   {"decoder_heads", decoder_heads},
      {"decoder_mlp_dim", decoder_mlp_dim},
      {"attention_downsample", attention_downsample},
      {"upscale_dim", upscale_dim},       {"mask_dim", mask_dim},
      {"hr_dim", hr_dim},                 {"num_tasks", num_tasks},
      {"points_per_prompt", points_per_prompt},
      {"iou_hidden", iou_hidden},         {"decode_chunk", decode_chunk},
      {"init_seed", init_seed}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("input_size", c.input_size);
  get("embed_dim", c.embed_dim);
  get("patch_size", c.patch_size);
  get("encoder_depth", c.encoder_depth);
  get("encoder_heads", c.encoder_heads);
  get("encoder_mlp_dim", c.encoder_mlp_dim);
  get("encoder_window", c.encoder_window);
  get("adapter_dim", c.adapter_dim);
  get("freeze_backbone", c.freeze_backbone);
  get("decoder_depth", c.decoder_depth);
  get("decoder_heads", c.decoder_heads);
  get("decoder_mlp_dim", c.decoder_mlp_dim);
  get("attention_downsample", c.attention_downsample);
  get("upscale_dim", c.upscale_dim);
  get("mask_dim", c.mask_dim);
  get("hr_dim", c.hr_dim);
  get("num_tasks", c.num_tasks);
  get("points_per_prompt", c.points_per_prompt);
  get("iou_hidden", c.iou_hidden);
  get("decode_chunk", c.decode_chunk);
  get("init_seed", c.init_seed);
  c.validate();
  return c;
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.input_size = 256;
  c.embed_dim = 64;
  c.encoder_depth = 2;
  c.encoder_heads = 4;
  c.encoder_mlp_dim = 128;
  c.encoder_window = 0;
  c.adapter_dim = 16;
  c.decoder_depth = 2;
  c.decoder_heads = 4;
  c.decoder_mlp_dim = 256;
  c.upscale_dim = 32;
  c.iou_hidden = 64;
  c.decode_chunk = 32;
  return c;
}

// ---------------------------------------------------------------------------

LayerNorm2dImpl::LayerNorm2dImpl(int channels, double eps) : eps_(eps) {
  weight_ = register_parameter("weight", torch::ones({channels}));
  bias_ = register_parameter("bias", torch::zeros({channels}));
}

torch::Tensor LayerNorm2dImpl::forward(const torch::Tensor& x) {
  const auto u = x.mean(1, true);
  const auto s = (x - u).pow(2).mean(1, true);
  const auto y = (x - u) / torch::sqrt(s + eps_);
  return weight_.view({1, -1, 1, 1}) * y + bias_.view({1, -1, 1, 1});
}

MlpImpl::MlpImpl(int in, int hidden, int out, int layers) {
  require(layers >= 1, "Mlp needs at least one layer");
  layers_ = register_module("layers", torch::nn::ModuleList());
  for (int i = 0; i < layers; ++i) {
    const int a = i == 0 ? in : hidden;
    const int b = i == layers - 1 ? out : hidden;
    layers_->push_back(torch::nn::Linear(a, b));
  }
}

torch::Tensor MlpImpl::forward(torch::Tensor x) {
  const std::size_t n = layers_->size();
  for (std::size_t i = 0; i < n; ++i) {
    x = layers_[i]->as<torch::nn::Linear>()->forward(x);
    if (i + 1 < n) x = torch::relu(x);
  }
  return x;
}

AdapterImpl::AdapterImpl(int dim, int bottleneck) {
  down_ = register_module("down", torch::nn::Linear(dim, bottleneck));
  up_ = register_module("up", torch::nn::Linear(bottleneck, dim));
  torch::NoGradGuard guard;
  up_->weight.zero_();
  up_->bias.zero_();
}

torch::Tensor AdapterImpl::forward(const torch::Tensor& x) {
  return up_->forward(torch::gelu(down_->forward(x)));
}

AttentionImpl::AttentionImpl(int dim, int heads, int downsample)
    : heads_(heads), internal_(dim / downsample) {
  q_ = register_module("q_proj", torch::nn::Linear(dim, internal_));
  k_ = register_module("k_proj", torch::nn::Linear(dim, internal_));
  v_ = register_module("v_proj", torch::nn::Linear(dim, internal_));
  out_ = register_module("out_proj", torch::nn::Linear(internal_, dim));
}

torch::Tensor AttentionImpl::forward(const torch::Tensor& q, const torch::Tensor& k,
                                     const torch::Tensor& v) {
  const int64_t dh = internal_ / heads_;
  auto split = [&](const torch::Tensor& t) {
    return t.reshape({t.size(0), t.size(1), heads_, dh}).transpose(1, 2);
  };
  const auto qh = split(q_->forward(q));
  const auto kh = split(k_->forward(k));
  const auto vh = split(v_->forward(v));
  const auto attn =
      torch::softmax(torch::matmul(qh, kh.transpose(-2, -1)) / std::sqrt(double(dh)), -1);
  auto out = torch::matmul(attn, vh).transpose(1, 2).reshape({q.size(0), q.size(1), internal_});
  return out_->forward(out);
}

EncoderBlockImpl::EncoderBlockImpl(const ModelConfig& cfg) : window_(cfg.encoder_window) {
  const int d = cfg.embed_dim;
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  attn_ = register_module("attn", Attention(d, cfg.encoder_heads));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  fc1_ = register_module("fc1", torch::nn::Linear(d, cfg.encoder_mlp_dim));
  fc2_ = register_module("fc2", torch::nn::Linear(cfg.encoder_mlp_dim, d));
  adapter = register_module("adapter", Adapter(d, cfg.adapter_dim));
}

torch::Tensor EncoderBlockImpl::forward(const torch::Tensor& x) {
  const int64_t b = x.size(0), g = x.size(1), d = x.size(3);
  auto h = norm1_->forward(x);
  if (window_ > 0 && window_ < g) {
    const int64_t w = window_, n = g / w;
    auto win = h.reshape({b, n, w, n, w, d}).permute({0, 1, 3, 2, 4, 5}).reshape({-1, w * w, d});
    win = attn_->forward(win, win, win);
    h = win.reshape({b, n, n, w, w, d}).permute({0, 1, 3, 2, 4, 5}).reshape({b, g, g, d});
  } else {
    auto flat = h.reshape({b, g * g, d});
    h = attn_->forward(flat, flat, flat).reshape({b, g, g, d});
  }
  auto y = x + h;
  const auto n2 = norm2_->forward(y);
  return y + fc2_->forward(torch::gelu(fc1_->forward(n2))) + adapter->forward(n2);
}

ImageEncoderImpl::ImageEncoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  const int d = cfg.embed_dim, g = cfg.embed_grid();
  patch_embed_ = register_module(
      "patch_embed",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(3, d, cfg.patch_size).stride(cfg.patch_size)));
  pos_embed_ = register_parameter("pos_embed", torch::randn({1, g, g, d}) * 0.02);
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < cfg.encoder_depth; ++i) blocks_->push_back(EncoderBlock(cfg));
  neck1_ = register_module("neck1", torch::nn::Conv2d(torch::nn::Conv2dOptions(d, d, 1).bias(false)));
  neck_norm1_ = register_module("neck_norm1", LayerNorm2d(d));
  neck2_ = register_module(
      "neck2", torch::nn::Conv2d(torch::nn::Conv2dOptions(d, d, 3).padding(1).bias(false)));
  neck_norm2_ = register_module("neck_norm2", LayerNorm2d(d));
  pixel_mean_ = register_buffer("pixel_mean",
                                torch::tensor({0.485f, 0.456f, 0.406f}).view({1, 3, 1, 1}));
  pixel_std_ = register_buffer("pixel_std",
                               torch::tensor({0.229f, 0.224f, 0.225f}).view({1, 3, 1, 1}));
}

torch::Tensor ImageEncoderImpl::forward(const torch::Tensor& images) {
  const int s = cfg_.input_size;
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != s || images.size(3) != s) {
    throw std::invalid_argument("encode_image: expected (B, 3, " + std::to_string(s) + ", " +
                                std::to_string(s) + "), got " + shape_str(images));
  }
  auto x = (images.to(pixel_mean_.scalar_type()) - pixel_mean_) / pixel_std_;
  x = patch_embed_->forward(x).permute({0, 2, 3, 1}) + pos_embed_;
  for (const auto& blk : *blocks_) x = blk->as<EncoderBlock>()->forward(x);
  x = x.permute({0, 3, 1, 2});
  x = neck_norm1_->forward(neck1_->forward(x));
  return neck_norm2_->forward(neck2_->forward(x));
}

void ImageEncoderImpl::set_backbone_frozen(bool frozen) {
  for (auto& item : named_parameters(true)) {
    const bool adapter = item.key().find("adapter") != std::string::npos;
    item.value().set_requires_grad(adapter || !frozen);
  }
}

PromptEncoderImpl::PromptEncoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  const int d = cfg.embed_dim;
  gaussian_ = register_buffer("gaussian", torch::randn({2, d / 2}));
  foreground_ = register_parameter("foreground", torch::randn({1, d}) * 0.02);
  padding_ = register_parameter("padding", torch::randn({1, d}) * 0.02);
}

torch::Tensor PromptEncoderImpl::encode_unit(const torch::Tensor& xy01) {
  auto c = (2.0 * xy01.to(gaussian_.scalar_type()) - 1.0);
  c = torch::matmul(c, gaussian_) * (2.0 * std::numbers::pi);
  return torch::cat({torch::sin(c), torch::cos(c)}, -1);
}

torch::Tensor PromptEncoderImpl::encode_points(const torch::Tensor& coords,
                                               const torch::Tensor& valid) {
  if (coords.dim() != 3 || coords.size(2) != 2) {
    throw std::invalid_argument("encode_points: coords must be (K, Np, 2), got " +
                                shape_str(coords));
  }
  if (valid.dim() != 2 || valid.size(0) != coords.size(0) || valid.size(1) != coords.size(1)) {
    throw std::invalid_argument("encode_points: validity " + shape_str(valid) +
                                " does not match coords " + shape_str(coords));
  }
  const int64_t k = coords.size(0), np = coords.size(1);
  const auto vb = valid.to(torch::kBool);
  if (k > 0) {
    const auto in_range = (coords >= 0).logical_and(coords < cfg_.input_size).all(-1);
    if (!in_range.logical_or(vb.logical_not()).all().item<bool>()) {
      throw std::out_of_range("encode_points: coordinate outside [0, " +
                              std::to_string(cfg_.input_size) + ")");
    }
  }
  const auto pe = encode_unit((coords + 0.5) / double(cfg_.input_size));
  const auto fg = pe + foreground_.view({1, 1, -1});
  const auto pad = padding_.view({1, 1, -1}).expand({k, np, cfg_.embed_dim});
  return torch::where(vb.unsqueeze(-1), fg, pad);
}

torch::Tensor PromptEncoderImpl::dense_pe() {
  const int g = cfg_.embed_grid();
  const auto lin = (torch::arange(g, gaussian_.options()) + 0.5) / double(g);
  const auto grid = torch::meshgrid({lin, lin}, "ij");  // (y, x)
  const auto xy = torch::stack({grid[1], grid[0]}, -1);
  return encode_unit(xy).permute({2, 0, 1}).unsqueeze(0);
}

TwoWayBlockImpl::TwoWayBlockImpl(const ModelConfig& cfg, bool skip_first_pe)
    : skip_first_pe_(skip_first_pe) {
  const int d = cfg.embed_dim;
  auto ln = [d] { return torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})); };
  self_attn_ = register_module("self_attn", Attention(d, cfg.decoder_heads));
  norm1_ = register_module("norm1", ln());
  token_to_image_ = register_module(
      "token_to_image", Attention(d, cfg.decoder_heads, cfg.attention_downsample));
  norm2_ = register_module("norm2", ln());
  fc1_ = register_module("fc1", torch::nn::Linear(d, cfg.decoder_mlp_dim));
  fc2_ = register_module("fc2", torch::nn::Linear(cfg.decoder_mlp_dim, d));
  norm3_ = register_module("norm3", ln());
  image_to_token_ = register_module(
      "image_to_token", Attention(d, cfg.decoder_heads, cfg.attention_downsample));
  norm4_ = register_module("norm4", ln());
}

std::pair<torch::Tensor, torch::Tensor> TwoWayBlockImpl::forward(torch::Tensor queries,
                                                                 torch::Tensor keys,
                                                                 const torch::Tensor& query_pe,
                                                                 const torch::Tensor& key_pe) {
  if (skip_first_pe_) {
    queries = self_attn_->forward(queries, queries, queries);
  } else {
    const auto q = queries + query_pe;
    queries = queries + self_attn_->forward(q, q, queries);
  }
  queries = norm1_->forward(queries);

  auto q = queries + query_pe;
  auto k = keys + key_pe;
  queries = norm2_->forward(queries + token_to_image_->forward(q, k, keys));

  queries = norm3_->forward(queries + fc2_->forward(torch::relu(fc1_->forward(queries))));

  q = queries + query_pe;
  k = keys + key_pe;
  keys = norm4_->forward(keys + image_to_token_->forward(k, q, queries));
  return {queries, keys};
}

TwoWayTransformerImpl::TwoWayTransformerImpl(const ModelConfig& cfg) {
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < cfg.decoder_depth; ++i) blocks_->push_back(TwoWayBlock(cfg, i == 0));
  final_attn_ = register_module(
      "final_attn", Attention(cfg.embed_dim, cfg.decoder_heads, cfg.attention_downsample));
  norm_final_ = register_module(
      "norm_final", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.embed_dim})));
}

std::pair<torch::Tensor, torch::Tensor> TwoWayTransformerImpl::forward(
    const torch::Tensor& image, const torch::Tensor& image_pe, const torch::Tensor& tokens) {
  auto keys = image.flatten(2).permute({0, 2, 1});
  const auto key_pe = image_pe.flatten(2).permute({0, 2, 1});
  auto queries = tokens;
  for (const auto& blk : *blocks_) {
    std::tie(queries, keys) = blk->as<TwoWayBlock>()->forward(queries, keys, tokens, key_pe);
  }
  const auto q = queries + tokens;
  const auto k = keys + key_pe;
  queries = norm_final_->forward(queries + final_attn_->forward(q, k, keys));
  return {queries, keys};
}

UpscalerImpl::UpscalerImpl(const ModelConfig& cfg) {
  using Opt = torch::nn::ConvTranspose2dOptions;
  up1_ = register_module("up1", torch::nn::ConvTranspose2d(
                                    Opt(cfg.embed_dim, cfg.upscale_dim, 2).stride(2)));
  norm_ = register_module("norm", LayerNorm2d(cfg.upscale_dim));
  up2_ = register_module(
      "up2", torch::nn::ConvTranspose2d(Opt(cfg.upscale_dim, cfg.mask_dim, 2).stride(2)));
}

torch::Tensor UpscalerImpl::forward(const torch::Tensor& x) {
  return torch::gelu(up2_->forward(torch::gelu(norm_->forward(up1_->forward(x)))));
}

PointDecoderImpl::PointDecoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  const int d = cfg.embed_dim;
  output_token = register_parameter("output_token", torch::randn({1, d}) * 0.02);
  task_tokens = register_parameter("task_tokens", torch::randn({cfg.num_tasks, d}) * 0.02);
  transformer_ = register_module("transformer", TwoWayTransformer(cfg));
  upscaler_ = register_module("upscaler", Upscaler(cfg));
  hyper_ = register_module("hyper", Mlp(d, d, cfg.mask_dim, 3));
}

PointDecoderOutput PointDecoderImpl::forward(const torch::Tensor& image_emb,
                                             const torch::Tensor& image_pe, int task_id) {
  const int64_t b = image_emb.size(0), g = image_emb.size(2);
  const auto tok = (output_token + task_tokens[task_id].unsqueeze(0))
                       .unsqueeze(0)
                       .expand({b, 1, cfg_.embed_dim});
  auto [hs, src] =
      transformer_->forward(image_emb, image_pe.expand({b, -1, -1, -1}), tok);
  const auto token = hs.select(1, 0);
  const auto feat =
      upscaler_->forward(src.transpose(1, 2).reshape({b, cfg_.embed_dim, g, g}));
  const auto h = hyper_->forward(token);
  PointDecoderOutput out;
  out.logits = torch::einsum("bc,bchw->bhw", {h, feat});
  out.heatmap = torch::sigmoid(out.logits);
  out.features = feat.permute({0, 2, 3, 1});
  out.token = token;
  return out;
}

torch::Tensor MaskBundle::logits(int granularity) const {
  if (granularity < 0 || granularity > 3) throw std::out_of_range("granularity out of range");
  return granularity < 2 ? word_logits.select(3, granularity)
                         : line_logits.select(3, granularity - 2);
}

HMDecoderImpl::HMDecoderImpl(const ModelConfig& cfg) : cfg_(cfg) {
  const int d = cfg.embed_dim;
  output_tokens = register_parameter("output_tokens", torch::randn({1, 4, d}) * 0.02);
  task_tokens =
      register_parameter("task_tokens", torch::randn({cfg.num_tasks, 4, d}) * 0.02);
  transformer_ = register_module("transformer", TwoWayTransformer(cfg));
  upscaler_ = register_module("upscaler", Upscaler(cfg));
  hr_conv_ = register_module(
      "hr_conv",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.mask_dim, cfg.hr_dim, 3).padding(1)));
  line_hyper_ = register_module("line_hyper", Mlp(d, d, cfg.mask_dim, 3));
  word_hyper_ = register_module("word_hyper", Mlp(d, d, cfg.hr_dim, 3));
  iou_heads_ = register_module("iou_heads", torch::nn::ModuleList());
  for (int i = 0; i < 4; ++i) iou_heads_->push_back(Mlp(d, cfg.iou_hidden, 1, 3));
}

MaskBundle HMDecoderImpl::decode_chunk(const torch::Tensor& image_emb,
                                       const torch::Tensor& image_pe,
                                       const torch::Tensor& point_tokens, int task_id) {
  const int64_t k = point_tokens.size(0), d = cfg_.embed_dim, g = image_emb.size(2);
  const auto head = (output_tokens + task_tokens[task_id].unsqueeze(0)).expand({k, 4, d});
  const auto tokens = torch::cat({head, point_tokens.to(head.scalar_type())}, 1);
  auto [hs, src] = transformer_->forward(image_emb.expand({k, -1, -1, -1}),
                                         image_pe.expand({k, -1, -1, -1}), tokens);
  const auto th = hs.index({Slice(), Slice(0, 4)});
  const auto f_lr = upscaler_->forward(src.transpose(1, 2).reshape({k, d, g, g}));
  const int hr = cfg_.highres_grid();
  const auto f_hr = hr_conv_->forward(F::interpolate(
      f_lr, F::InterpolateFuncOptions()
                .size(std::vector<int64_t>{hr, hr})
                .mode(torch::kBilinear)
                .align_corners(false)));
  const auto lp = line_hyper_->forward(th.index({Slice(), Slice(2, 4)}));
  const auto wwg = word_hyper_->forward(th.index({Slice(), Slice(0, 2)}));

  std::vector<torch::Tensor> ious;
  for (int i = 0; i < 4; ++i) {
    ious.push_back(iou_heads_[i]->as<Mlp>()->forward(th.select(1, i)));
  }
  MaskBundle b;
  b.line_logits = torch::einsum("kcm,kmhw->khwc", {lp, f_lr});
  b.word_logits = torch::einsum("kcm,kmhw->khwc", {wwg, f_hr});
  b.iou_pred = torch::sigmoid(torch::cat(ious, 1));
  b.lowres_features = f_lr.permute({0, 2, 3, 1});
  b.highres_features = f_hr.permute({0, 2, 3, 1});
  return b;
}

MaskBundle HMDecoderImpl::forward(const torch::Tensor& image_emb, const torch::Tensor& image_pe,
                                  const torch::Tensor& point_tokens, int task_id) {
  if (image_emb.dim() != 4 || image_emb.size(0) != 1) {
    throw std::invalid_argument("hm_decode: expected a single image embedding, got " +
                                shape_str(image_emb));
  }
  if (point_tokens.dim() != 3 || point_tokens.size(2) != cfg_.embed_dim) {
    throw std::invalid_argument("hm_decode: point tokens must be (K, Np, D), got " +
                                shape_str(point_tokens));
  }
  const int64_t k = point_tokens.size(0);
  const int64_t lo = cfg_.heatmap_grid(), hi = cfg_.highres_grid();
  if (k == 0) {
    const auto opt = output_tokens.options();
    MaskBundle b;
    b.word_logits = torch::zeros({0, hi, hi, 2}, opt);
    b.line_logits = torch::zeros({0, lo, lo, 2}, opt);
    b.iou_pred = torch::zeros({0, 4}, opt);
    b.lowres_features = torch::zeros({0, lo, lo, cfg_.mask_dim}, opt);
    b.highres_features = torch::zeros({0, hi, hi, cfg_.hr_dim}, opt);
    return b;
  }
  if (k <= cfg_.decode_chunk) return decode_chunk(image_emb, image_pe, point_tokens, task_id);

  std::vector<MaskBundle> parts;
  for (int64_t s = 0; s < k; s += cfg_.decode_chunk) {
    const int64_t e = std::min(k, s + cfg_.decode_chunk);
    parts.push_back(
        decode_chunk(image_emb, image_pe, point_tokens.index({Slice(s, e)}), task_id));
  }
  auto cat = [&parts](auto field) {
    std::vector<torch::Tensor> ts;
    for (auto& p : parts) ts.push_back(p.*field);
    return torch::cat(ts, 0);
  };
  MaskBundle b;
  b.word_logits = cat(&MaskBundle::word_logits);
  b.line_logits = cat(&MaskBundle::line_logits);
  b.iou_pred = cat(&MaskBundle::iou_pred);
  b.lowres_features = cat(&MaskBundle::lowres_features);
  b.highres_features = cat(&MaskBundle::highres_features);
  return b;
}

PointPrompts single_point_prompts(const std::vector<std::pair<double, double>>& xy, int np) {
  const auto k = static_cast<int64_t>(xy.size());
  PointPrompts p;
  p.coords = torch::zeros({k, np, 2}, torch::kFloat64);
  p.valid = torch::zeros({k, np}, torch::kBool);
  auto c = p.coords.accessor<double, 3>();
  auto v = p.valid.accessor<bool, 2>();
  for (int64_t i = 0; i < k; ++i) {
    c[i][0][0] = xy[i].first;
    c[i][0][1] = xy[i].second;
    v[i][0] = true;
  }
  return p;
}

EtSamImpl::EtSamImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  torch::manual_seed(cfg_.init_seed);
  encoder = register_module("encoder", ImageEncoder(cfg_));
  prompt_encoder = register_module("prompt_encoder", PromptEncoder(cfg_));
  point_decoder = register_module("point_decoder", PointDecoder(cfg_));
  hm_decoder = register_module("hm_decoder", HMDecoder(cfg_));
  encoder->set_backbone_frozen(cfg_.freeze_backbone);
  for (auto& p : prompt_encoder->parameters()) p.set_requires_grad(!cfg_.freeze_backbone);
}

void EtSamImpl::check_task(int task_id) const {
  if (task_id < 0 || task_id >= cfg_.num_tasks) {
    throw std::out_of_range("task_id " + std::to_string(task_id) + " out of range");
  }
}

torch::Tensor EtSamImpl::encode_image(const torch::Tensor& images) {
  return encoder->forward(images.to(dtype()));
}

PointDecoderOutput EtSamImpl::point_decode(const torch::Tensor& image_emb, int task_id) {
  check_task(task_id);
  return point_decoder->forward(image_emb, prompt_encoder->dense_pe(), task_id);
}

PointPrompts EtSamImpl::encode_points(PointPrompts prompts) {
  prompts.tokens = prompt_encoder->encode_points(prompts.coords, prompts.valid);
  return prompts;
}

MaskBundle EtSamImpl::hm_decode(const torch::Tensor& image_emb, const PointPrompts& prompts,
                                int task_id) {
  check_task(task_id);
  torch::Tensor tokens = prompts.tokens;
  if (!tokens.defined()) {
    tokens = prompt_encoder->encode_points(prompts.coords, prompts.valid);
  } else if (prompts.valid.defined() && prompts.valid.size(0) != tokens.size(0)) {
    throw std::invalid_argument("hm_decode: mismatched K between tokens and validity");
  }
  return hm_decoder->forward(image_emb, prompt_encoder->dense_pe(), tokens, task_id);
}

std::vector<torch::Tensor> EtSamImpl::trainable_parameters() {
  std::vector<torch::Tensor> out;
  for (auto& p : parameters(true)) {
    if (p.requires_grad()) out.push_back(p);
  }
  return out;
}

bool EtSamImpl::all_finite() {
  torch::NoGradGuard guard;
  for (const auto& p : parameters(true)) {
    if (!torch::isfinite(p).all().item<bool>()) return false;
  }
  return true;
}

torch::ScalarType EtSamImpl::dtype() { return parameters(true).front().scalar_type(); }

torch::Tensor image_to_tensor(const cv::Mat& rgb01, int size, torch::ScalarType dtype) {
  if (rgb01.empty() || rgb01.type() != CV_32FC3) {
    throw std::invalid_argument("image_to_tensor: expected a CV_32FC3 image");
  }
  cv::Mat img = rgb01;
  if (img.rows != size || img.cols != size) {
    cv::resize(rgb01, img, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  }
  if (!img.isContinuous()) img = img.clone();
  return torch::from_blob(img.data, {1, size, size, 3}, torch::kFloat32)
      .permute({0, 3, 1, 2})
      .clone()
      .to(dtype);
}

}  // namespace etsam
