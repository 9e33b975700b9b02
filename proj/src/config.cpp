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
#include "etsam/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace etsam {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + what);
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad(key, v, "an integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) bad(key, v, "a number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v, "a boolean");
}

IntRange to_range(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  std::string a, b;
  is >> a >> b;
  IntRange r;
  r.min = static_cast<int>(to_int(key, a));
  r.max = b.empty() ? r.min : static_cast<int>(to_int(key, b));
  return r;
}

void check_unit(const std::string& name, double v) {
  if (!(v > 0 && v < 1)) {
    throw ConfigError(name + " must lie in (0, 1), got " + std::to_string(v));
  }
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(n) + ": empty key");
    if (kv.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
    }
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

std::pair<std::string, std::string> parse_override(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || trim(s.substr(0, eq)).empty()) {
    throw ConfigError("override '" + s + "' must look like key=value");
  }
  return {trim(s.substr(0, eq)), trim(s.substr(eq + 1))};
}

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("ETSAM_SEED");
  if (!v || !*v) return std::nullopt;
  return static_cast<std::uint64_t>(to_int("ETSAM_SEED", v));
}

RunConfig run_config_from(const KeyValues& kv, const std::filesystem::path& base_dir) {
  RunConfig c;
  if (!kv.count("version")) throw ConfigError("config is missing the 'version' key");
  c.version = static_cast<int>(to_int("version", kv.at("version")));
  if (c.version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(c.version));
  }
  if (kv.count("model.preset")) {
    const auto& p = kv.at("model.preset");
    if (p == "toy") {
      c.model = ModelConfig::toy();
    } else if (p == "default") {
      c.model = ModelConfig{};
    } else {
      throw ConfigError("model.preset must be 'toy' or 'default', got '" + p + "'");
    }
  }
  auto path = [&base_dir](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  auto source = [&](std::optional<DataSource>& dst, const std::string& v, bool images) {
    if (!dst) dst = DataSource{};
    if (images) {
      dst->images = path(v);
    } else {
      dst->annotations = path(v);
    }
  };

  std::map<std::string, Setter> set;
  auto& m = c.model;
  auto& t = c.train;
  auto& inf = c.infer;
  auto int_field = [](auto& field) {
    return [&field](const std::string& k, const std::string& v) {
      field = static_cast<std::remove_reference_t<decltype(field)>>(to_int(k, v));
    };
  };
  auto dbl_field = [](double& field) {
    return [&field](const std::string& k, const std::string& v) { field = to_double(k, v); };
  };
  auto bool_field = [](bool& field) {
    return [&field](const std::string& k, const std::string& v) { field = to_bool(k, v); };
  };
  set["version"] = [](const std::string&, const std::string&) {};
  set["model.preset"] = [](const std::string&, const std::string&) {};
  set["seed"] = int_field(c.seed);
  set["out_dir"] = [&](const std::string&, const std::string& v) { c.out_dir = v; };
  set["model.input_size"] = int_field(m.input_size);
  set["model.embed_dim"] = int_field(m.embed_dim);
  set["model.encoder_depth"] = int_field(m.encoder_depth);
  set["model.encoder_heads"] = int_field(m.encoder_heads);
  set["model.encoder_mlp_dim"] = int_field(m.encoder_mlp_dim);
  set["model.encoder_window"] = int_field(m.encoder_window);
  set["model.adapter_dim"] = int_field(m.adapter_dim);
  set["model.freeze_backbone"] = bool_field(m.freeze_backbone);
  set["model.decoder_depth"] = int_field(m.decoder_depth);
  set["model.decoder_heads"] = int_field(m.decoder_heads);
  set["model.decoder_mlp_dim"] = int_field(m.decoder_mlp_dim);
  set["model.upscale_dim"] = int_field(m.upscale_dim);
  set["model.iou_hidden"] = int_field(m.iou_hidden);
  set["model.decode_chunk"] = int_field(m.decode_chunk);
  set["model.init_seed"] = int_field(m.init_seed);
  set["train.steps"] = int_field(t.steps);
  set["train.lr"] = dbl_field(t.lr);
  set["train.weight_decay"] = dbl_field(t.weight_decay);
  set["train.lr_decay_step"] = int_field(t.lr_decay_step);
  set["train.augment"] = bool_field(t.augment);
  set["train.double"] = bool_field(t.use_double);
  set["train.pseudo_label_step"] = int_field(t.pseudo_label_step);
  set["train.pseudo_dilation"] = int_field(t.pseudo_dilation);
  set["train.checkpoint_every"] = int_field(t.checkpoint_every);
  set["train.threads"] = int_field(t.threads);
  set["train.max_prompts"] = int_field(t.prompts.max_prompts);
  set["train.heatmap"] = [&t](const std::string& k, const std::string& v) {
    if (v == "centerline") {
      t.heatmap_kind = HeatmapKind::kCenterLine;
    } else if (v == "centerpoint") {
      t.heatmap_kind = HeatmapKind::kCenterPoint;
    } else {
      bad(k, v, "'centerline' or 'centerpoint'");
    }
  };
  set["heatmap.beta"] = dbl_field(t.heatmap.beta);
  set["heatmap.kappa"] = dbl_field(t.heatmap.kappa);
  set["heatmap.sigma_min"] = dbl_field(t.heatmap.sigma_min);
  set["heatmap.truncate"] = dbl_field(t.heatmap.truncate);
  set["infer.point_threshold"] = dbl_field(inf.point_threshold);
  set["infer.iou_threshold"] = dbl_field(inf.iou_threshold);
  set["infer.nms_threshold"] = dbl_field(inf.nms.threshold);
  set["infer.nms_sigma"] = dbl_field(inf.nms.sigma);
  set["infer.nms_kernel"] = [&inf](const std::string& k, const std::string& v) {
    if (v == "gaussian") {
      inf.nms.kernel = DecayKernel::kGaussian;
    } else if (v == "linear") {
      inf.nms.kernel = DecayKernel::kLinear;
    } else {
      bad(k, v, "'gaussian' or 'linear'");
    }
  };
  set["infer.cluster_tau"] = dbl_field(inf.cluster_tau);
  set["infer.batch_size"] = int_field(inf.batch_size);
  set["infer.max_points"] = int_field(inf.peaks.max_points);
  set["eval.iou_threshold"] = dbl_field(c.eval_iou);
  for (const char* cat : {"multi", "word", "line"}) {
    auto& dst = std::string(cat) == "multi" ? c.multi : std::string(cat) == "word" ? c.word : c.line;
    set[std::string("data.") + cat] = [&dst, source](const std::string&, const std::string& v) {
      source(dst, v, false);
    };
    set[std::string("data.") + cat + "_images"] =
        [&dst, source](const std::string&, const std::string& v) { source(dst, v, true); };
  }

  for (const auto& [k, v] : kv) {
    auto it = set.find(k);
    if (it == set.end()) throw ConfigError("unknown config key '" + k + "'");
    it->second(k, v);
  }
  for (auto* d : {&c.multi, &c.word, &c.line}) {
    if (*d && d->value().images.empty()) {
      const auto dir = d->value().annotations.parent_path();
      d->value().images = std::filesystem::is_directory(dir / "images") ? dir / "images" : dir;
    }
  }
  if (auto s = seed_from_env()) c.seed = *s;
  t.seed = c.seed;
  return c;
}

void RunConfig::validate(bool check_paths) const {
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  check_unit("infer.point_threshold", infer.point_threshold);
  check_unit("infer.iou_threshold", infer.iou_threshold);
  check_unit("infer.nms_threshold", infer.nms.threshold);
  check_unit("infer.cluster_tau", infer.cluster_tau);
  check_unit("eval.iou_threshold", eval_iou);
  if (!(infer.nms.sigma > 0)) throw ConfigError("infer.nms_sigma must be > 0");
  if (infer.batch_size < 1) throw ConfigError("infer.batch_size must be >= 1");
  if (train.steps < 0) throw ConfigError("train.steps must be >= 0");
  if (!(train.lr >= 0)) throw ConfigError("train.lr must be >= 0");
  if (train.threads < 1) throw ConfigError("train.threads must be >= 1");
  if (check_paths) {
    for (const auto* d : {&multi, &word, &line}) {
      if (!*d) continue;
      if (!std::filesystem::is_regular_file((*d)->annotations)) {
        throw ConfigError("annotation file not found: " + (*d)->annotations.string());
      }
      if (!std::filesystem::is_directory((*d)->images)) {
        throw ConfigError("image directory not found: " + (*d)->images.string());
      }
    }
  }
}

std::string RunConfig::describe() const {
  std::ostringstream os;
  os << "version=" << version << " seed=" << seed << " S=" << model.input_size
     << " D=" << model.embed_dim << " steps=" << train.steps << " lr=" << train.lr
     << " point_threshold=" << infer.point_threshold;
  return os.str();
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  KeyValues kv = read_key_values(path);
  for (const auto& o : overrides) {
    auto [k, v] = parse_override(o);
    kv[k] = v;
  }
  return run_config_from(kv, path.parent_path());
}

DataSpec data_spec_from(const KeyValues& kv) {
  DataSpec d;
  auto& s = d.scene;
  std::map<std::string, Setter> set;
  set["version"] = [](const std::string& k, const std::string& v) {
    if (to_int(k, v) != kConfigVersion) throw ConfigError("unsupported spec version " + v);
  };
  set["seed"] = [&s](const std::string& k, const std::string& v) { s.seed = to_int(k, v); };
  set["multi"] = [&d](const std::string& k, const std::string& v) { d.multi = to_int(k, v); };
  set["word_only"] = [&d](const std::string& k, const std::string& v) {
    d.word_only = to_int(k, v);
  };
  set["line_only"] = [&d](const std::string& k, const std::string& v) {
    d.line_only = to_int(k, v);
  };
  set["width"] = [&s](const std::string& k, const std::string& v) { s.width = to_int(k, v); };
  set["height"] = [&s](const std::string& k, const std::string& v) { s.height = to_int(k, v); };
  set["paragraphs"] = [&s](const std::string& k, const std::string& v) {
    s.paragraphs = to_range(k, v);
  };
  set["lines_per_paragraph"] = [&s](const std::string& k, const std::string& v) {
    s.lines_per_paragraph = to_range(k, v);
  };
  set["words_per_line"] = [&s](const std::string& k, const std::string& v) {
    s.words_per_line = to_range(k, v);
  };
  set["word_height"] = [&s](const std::string& k, const std::string& v) {
    s.word_height = to_range(k, v);
  };
  set["word_width"] = [&s](const std::string& k, const std::string& v) {
    s.word_width = to_range(k, v);
  };
  set["curvature"] = [&s](const std::string& k, const std::string& v) {
    s.curvature = to_bool(k, v);
  };
  set["clutter_density"] = [&s](const std::string& k, const std::string& v) {
    s.clutter_density = to_double(k, v);
  };
  for (const auto& [k, v] : kv) {
    auto it = set.find(k);
    if (it == set.end()) throw ConfigError("unknown spec key '" + k + "'");
    it->second(k, v);
  }
  if (d.multi < 0 || d.word_only < 0 || d.line_only < 0) {
    throw ConfigError("image counts must be >= 0");
  }
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("scene spec: ") + e.what());
  }
  if (auto seed = seed_from_env()) s.seed = *seed;
  return d;
}

}  // namespace etsam
