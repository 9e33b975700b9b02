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
#include "etsam/annotations.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "json.hpp"

namespace etsam {

using nlohmann::json;

int task_index(Task t) { return static_cast<int>(t); }

Task task_from_index(int id) {
  if (id < 0 || id >= kNumTasks) {
    throw std::out_of_range("task id " + std::to_string(id) + " out of range [0, 3)");
  }
  return static_cast<Task>(id);
}

const char* granularity_name(Granularity g) {
  switch (g) {
    case Granularity::kWord: return "word";
    case Granularity::kWordGroup: return "word_group";
    case Granularity::kLine: return "line";
    case Granularity::kParagraph: return "paragraph";
  }
  return "?";
}

Granularity granularity_from_name(const std::string& name) {
  for (int g = 0; g < kNumGranularities; ++g) {
    if (name == granularity_name(static_cast<Granularity>(g))) return static_cast<Granularity>(g);
  }
  throw std::invalid_argument("unknown granularity '" + name + "'");
}

const WordAnn* HierSample::find_word(int id) const {
  for (const auto& w : words) {
    if (w.id == id) return &w;
  }
  return nullptr;
}

const LineAnn* HierSample::find_line(int id) const {
  for (const auto& l : lines) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

int HierSample::line_index_of_word(int word_id) const {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& ids = lines[i].word_ids;
    if (std::find(ids.begin(), ids.end(), word_id) != ids.end()) return static_cast<int>(i);
  }
  return -1;
}

int HierSample::paragraph_index_of_line(int line_id) const {
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    const auto& ids = paragraphs[i].line_ids;
    if (std::find(ids.begin(), ids.end(), line_id) != ids.end()) return static_cast<int>(i);
  }
  return -1;
}

bool same_annotations(const HierSample& a, const HierSample& b) {
  return a.image_id == b.image_id && a.width == b.width && a.height == b.height &&
         a.task == b.task && a.words == b.words && a.lines == b.lines &&
         a.paragraphs == b.paragraphs;
}

Task infer_task(const HierSample& s) {
  const bool w = s.has_words(), l = s.has_lines(), p = s.has_paragraphs();
  if (w && l && p) return Task::kMulti;
  if (w && !l && !p) return Task::kWord;
  if (!w && l) return Task::kLine;
  if (!w && !l && !p) return Task::kMulti;
  throw ParseError("image '" + s.image_id +
                   "': unsupported annotation levels (words=" + std::to_string(w) +
                   ", lines=" + std::to_string(l) + ", paragraphs=" + std::to_string(p) + ")");
}

void link_check(const HierSample& s) {
  std::set<int> word_ids, line_ids, para_ids;
  for (const auto& w : s.words) {
    if (!word_ids.insert(w.id).second) {
      throw ParseError("image '" + s.image_id + "': duplicate word id " + std::to_string(w.id));
    }
  }
  for (const auto& l : s.lines) {
    if (!line_ids.insert(l.id).second) {
      throw ParseError("image '" + s.image_id + "': duplicate line id " + std::to_string(l.id));
    }
    for (int wid : l.word_ids) {
      if (!word_ids.count(wid)) {
        throw LinkError("image '" + s.image_id + "': line " + std::to_string(l.id) +
                        " references missing word id " + std::to_string(wid));
      }
    }
  }
  for (const auto& p : s.paragraphs) {
    if (!para_ids.insert(p.id).second) {
      throw ParseError("image '" + s.image_id + "': duplicate paragraph id " +
                       std::to_string(p.id));
    }
    for (int lid : p.line_ids) {
      if (!line_ids.count(lid)) {
        throw LinkError("image '" + s.image_id + "': paragraph " + std::to_string(p.id) +
                        " references missing line id " + std::to_string(lid));
      }
    }
  }
}

namespace {

class Parser {
 public:
  HierSample parse(const json& a, const std::string& where) {
    sample_ = HierSample{};
    next_word_ = next_line_ = next_para_ = 0;
    if (!a.is_object()) throw ParseError(where + ": expected object");
    if (!a.contains("image_id") || !a["image_id"].is_string()) {
      throw ParseError(where + ": missing string field 'image_id'");
    }
    sample_.image_id = a["image_id"].get<std::string>();
    sample_.width = int_field(a, "image_width", where, 0);
    sample_.height = int_field(a, "image_height", where, 0);

    if (a.contains("paragraphs")) {
      const json& ps = array_field(a, "paragraphs", where);
      for (std::size_t i = 0; i < ps.size(); ++i) {
        parse_paragraph(ps[i], where + ".paragraphs[" + std::to_string(i) + "]");
      }
    }
    if (a.contains("lines")) {
      const json& ls = array_field(a, "lines", where);
      for (std::size_t i = 0; i < ls.size(); ++i) {
        parse_line(ls[i], where + ".lines[" + std::to_string(i) + "]", true);
      }
    }
    if (a.contains("words")) {
      const json& ws = array_field(a, "words", where);
      for (std::size_t i = 0; i < ws.size(); ++i) {
        parse_word(ws[i], where + ".words[" + std::to_string(i) + "]");
      }
    }

    auto by_id = [](const auto& x, const auto& y) { return x.id < y.id; };
    std::stable_sort(sample_.words.begin(), sample_.words.end(), by_id);
    std::stable_sort(sample_.lines.begin(), sample_.lines.end(), by_id);
    std::stable_sort(sample_.paragraphs.begin(), sample_.paragraphs.end(), by_id);
    link_check(sample_);

    if (a.contains("task")) {
      if (!a["task"].is_number_integer()) throw ParseError(where + ".task: expected integer");
      try {
        sample_.task = task_from_index(a["task"].get<int>());
      } catch (const std::out_of_range& e) {
        throw ParseError(where + ".task: " + e.what());
      }
      check_task_levels(where);
    } else {
      sample_.task = infer_task(sample_);
    }
    return std::move(sample_);
  }

 private:
  static int int_field(const json& o, const char* key, const std::string& where, int fallback) {
    if (!o.contains(key)) return fallback;
    if (!o[key].is_number_integer() || o[key].get<int>() < 0) {
      throw ParseError(where + "." + key + ": expected non-negative integer");
    }
    return o[key].get<int>();
  }

  static const json& array_field(const json& o, const char* key, const std::string& where) {
    const json& v = o[key];
    if (!v.is_array()) throw ParseError(where + "." + key + ": expected array");
    return v;
  }

  static std::vector<int> id_list(const json& o, const char* key, const std::string& where) {
    std::vector<int> ids;
    for (const auto& v : array_field(o, key, where)) {
      if (!v.is_number_integer()) throw ParseError(where + "." + key + ": expected integer ids");
      ids.push_back(v.get<int>());
    }
    return ids;
  }

  static Polygon parse_vertices(const json& o, const std::string& where) {
    const std::string at = where + ".vertices";
    const json& vs = o["vertices"];
    if (!vs.is_array()) throw ParseError(at + ": expected array of [x, y] pairs");
    Polygon poly;
    for (const auto& v : vs) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ParseError(at + ": expected array of [x, y] pairs");
      }
      poly.points.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    if (poly.points.size() < 3) throw ParseError(at + ": polygon needs at least 3 vertices");
    return poly;
  }

  int take_id(const json& o, int& counter, const std::string& where) {
    if (o.contains("id")) {
      if (!o["id"].is_number_integer()) throw ParseError(where + ".id: expected integer");
      const int id = o["id"].get<int>();
      counter = std::max(counter, id + 1);
      return id;
    }
    return counter++;
  }

  int parse_word(const json& w, const std::string& where) {
    if (!w.is_object()) throw ParseError(where + ": expected object");
    if (!w.contains("vertices")) throw ParseError(where + ": word without 'vertices'");
    WordAnn ann;
    ann.polygon = parse_vertices(w, where);
    ann.id = take_id(w, next_word_, where);
    sample_.words.push_back(std::move(ann));
    return sample_.words.back().id;
  }

  // Returns the line id, or nullopt when the entry is only a container for
  // words (word-level files keep the nesting but carry no line geometry).
  std::optional<int> parse_line(const json& l, const std::string& where, bool top_level) {
    if (!l.is_object()) throw ParseError(where + ": expected object");
    std::vector<int> word_ids;
    if (l.contains("words")) {
      const json& ws = array_field(l, "words", where);
      for (std::size_t i = 0; i < ws.size(); ++i) {
        word_ids.push_back(parse_word(ws[i], where + ".words[" + std::to_string(i) + "]"));
      }
    }
    if (l.contains("word_ids")) {
      for (int id : id_list(l, "word_ids", where)) word_ids.push_back(id);
    }
    if (!l.contains("vertices")) {
      if (top_level) throw ParseError(where + ": line without 'vertices'");
      return std::nullopt;
    }
    LineAnn ann;
    ann.polygon = parse_vertices(l, where);
    ann.id = take_id(l, next_line_, where);
    ann.word_ids = std::move(word_ids);
    sample_.lines.push_back(std::move(ann));
    return sample_.lines.back().id;
  }

  void parse_paragraph(const json& p, const std::string& where) {
    if (!p.is_object()) throw ParseError(where + ": expected object");
    std::vector<int> line_ids;
    if (p.contains("lines")) {
      const json& ls = array_field(p, "lines", where);
      for (std::size_t i = 0; i < ls.size(); ++i) {
        if (auto id = parse_line(ls[i], where + ".lines[" + std::to_string(i) + "]", false)) {
          line_ids.push_back(*id);
        }
      }
    }
    if (p.contains("line_ids")) {
      for (int id : id_list(p, "line_ids", where)) line_ids.push_back(id);
    }
    const bool has_region = p.contains("vertices");
    if (!has_region && line_ids.empty()) return;  // pure container
    ParagraphAnn ann;
    if (has_region) ann.polygon = parse_vertices(p, where);
    ann.id = take_id(p, next_para_, where);
    ann.line_ids = std::move(line_ids);
    sample_.paragraphs.push_back(std::move(ann));
  }

  void check_task_levels(const std::string& where) const {
    const auto& s = sample_;
    const bool empty = !s.has_words() && !s.has_lines() && !s.has_paragraphs();
    if (empty) return;
    bool ok = true;
    switch (s.task) {
      case Task::kMulti: ok = s.has_words() && s.has_lines() && s.has_paragraphs(); break;
      case Task::kWord: ok = s.has_words(); break;
      case Task::kLine: ok = s.has_lines(); break;
    }
    if (!ok) {
      throw ParseError(where + ".task: task " + std::to_string(task_index(s.task)) +
                       " lacks its required annotation levels");
    }
  }

  HierSample sample_;
  int next_word_ = 0, next_line_ = 0, next_para_ = 0;
};

json vertices_json(const Polygon& poly) {
  json vs = json::array();
  for (const auto& p : poly.points) vs.push_back({p.x, p.y});
  return vs;
}

json word_json(const WordAnn& w) { return {{"id", w.id}, {"vertices", vertices_json(w.polygon)}}; }

json line_json(const HierSample& s, const LineAnn& l) {
  json out = {{"id", l.id}, {"vertices", vertices_json(l.polygon)}};
  json words = json::array();
  for (int wid : l.word_ids) {
    if (const WordAnn* w = s.find_word(wid)) words.push_back(word_json(*w));
  }
  out["words"] = std::move(words);
  return out;
}

}  // namespace

std::vector<HierSample> parse_hiertext_string(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("annotations") || !root["annotations"].is_array()) {
    throw ParseError("root: expected object with array field 'annotations'");
  }
  std::vector<HierSample> out;
  Parser parser;
  const json& anns = root["annotations"];
  for (std::size_t i = 0; i < anns.size(); ++i) {
    out.push_back(parser.parse(anns[i], "annotations[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<HierSample> parse_hiertext_json(
    const std::filesystem::path& path, const std::optional<std::filesystem::path>& image_root) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open annotation file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  std::vector<HierSample> samples = parse_hiertext_string(buf.str());
  if (image_root) {
    for (auto& s : samples) {
      std::filesystem::path img = *image_root / (s.image_id + ".png");
      if (!std::filesystem::exists(img)) img = *image_root / (s.image_id + ".jpg");
      s.image = load_image(img);
      if ((s.width && s.width != s.image.cols) || (s.height && s.height != s.image.rows)) {
        throw ParseError("image '" + s.image_id + "': declared size " + std::to_string(s.width) +
                         "x" + std::to_string(s.height) + " does not match " + img.string());
      }
      s.width = s.image.cols;
      s.height = s.image.rows;
    }
  }
  return samples;
}

std::string serialize_hiertext(const std::vector<HierSample>& samples) {
  json anns = json::array();
  for (const auto& s : samples) {
    json a = {{"image_id", s.image_id},
              {"image_width", s.width},
              {"image_height", s.height},
              {"task", task_index(s.task)}};
    std::set<int> nested_lines, nested_words;
    json paras = json::array();
    for (const auto& p : s.paragraphs) {
      json pj = {{"id", p.id}};
      if (p.polygon) pj["vertices"] = vertices_json(*p.polygon);
      json lines = json::array();
      for (int lid : p.line_ids) {
        if (const LineAnn* l = s.find_line(lid)) {
          lines.push_back(line_json(s, *l));
          nested_lines.insert(lid);
          nested_words.insert(l->word_ids.begin(), l->word_ids.end());
        }
      }
      pj["lines"] = std::move(lines);
      paras.push_back(std::move(pj));
    }
    json loose_lines = json::array();
    for (const auto& l : s.lines) {
      if (nested_lines.count(l.id)) continue;
      loose_lines.push_back(line_json(s, l));
      nested_words.insert(l.word_ids.begin(), l.word_ids.end());
    }
    json loose_words = json::array();
    for (const auto& w : s.words) {
      if (!nested_words.count(w.id)) loose_words.push_back(word_json(w));
    }
    if (!paras.empty()) a["paragraphs"] = std::move(paras);
    if (!loose_lines.empty()) a["lines"] = std::move(loose_lines);
    if (!loose_words.empty()) a["words"] = std::move(loose_words);
    anns.push_back(std::move(a));
  }
  return json{{"annotations", std::move(anns)}}.dump(1);
}

void write_hiertext_json(const std::filesystem::path& path, const std::vector<HierSample>& samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_hiertext(samples) << "\n";
}

cv::Mat load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot read image " + path.string());
  cv::Mat rgb, out;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  rgb.convertTo(out, CV_32FC3, 1.0 / 255.0);
  return out;
}

void save_image(const std::filesystem::path& path, const cv::Mat& rgb01) {
  cv::Mat u8, bgr;
  rgb01.convertTo(u8, CV_8UC3, 255.0);
  cv::cvtColor(u8, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) throw std::runtime_error("cannot write " + path.string());
}

Mask word_mask(const HierSample& s, std::size_t word_index, int rows, int cols, double scale) {
  return rasterize(s.words.at(word_index).polygon, rows, cols, scale).mask;
}

Mask line_mask(const HierSample& s, std::size_t line_index, int rows, int cols, double scale) {
  return rasterize(s.lines.at(line_index).polygon, rows, cols, scale).mask;
}

Mask word_group_mask(const HierSample& s, std::size_t line_index, int rows, int cols,
                     double scale) {
  Mask m(rows, cols);
  for (int wid : s.lines.at(line_index).word_ids) {
    if (const WordAnn* w = s.find_word(wid)) {
      mask_union_into(m, rasterize(w->polygon, rows, cols, scale).mask);
    }
  }
  return m;
}

Mask paragraph_mask(const HierSample& s, std::size_t para_index, int rows, int cols,
                    double scale) {
  const ParagraphAnn& p = s.paragraphs.at(para_index);
  if (p.polygon) return rasterize(*p.polygon, rows, cols, scale).mask;
  Mask m(rows, cols);
  for (int lid : p.line_ids) {
    if (const LineAnn* l = s.find_line(lid)) {
      mask_union_into(m, rasterize(l->polygon, rows, cols, scale).mask);
    }
  }
  return m;
}

}  // namespace etsam
