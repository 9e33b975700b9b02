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

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "etsam/geometry.hpp"

namespace etsam {

// Which annotation levels a sample carries, and so which task prompt it
// trains: multi-level, word-only, or line-only.
enum class Task : int { kMulti = 0, kWord = 1, kLine = 2 };
inline constexpr int kNumTasks = 3;

int task_index(Task t);
Task task_from_index(int id);

enum class Granularity : int { kWord = 0, kWordGroup = 1, kLine = 2, kParagraph = 3 };
inline constexpr int kNumGranularities = 4;
const char* granularity_name(Granularity g);
Granularity granularity_from_name(const std::string& name);

struct WordAnn {
  int id = 0;
  Polygon polygon;
  friend bool operator==(const WordAnn&, const WordAnn&) = default;
};

struct LineAnn {
  int id = 0;
  Polygon polygon;
  std::vector<int> word_ids;
  friend bool operator==(const LineAnn&, const LineAnn&) = default;
};

struct ParagraphAnn {
  int id = 0;
  // Explicit region; when absent the paragraph is the union of its lines.
  std::optional<Polygon> polygon;
  std::vector<int> line_ids;
  friend bool operator==(const ParagraphAnn&, const ParagraphAnn&) = default;
};

struct HierSample {
  std::string image_id;
  int width = 0;
  int height = 0;
  cv::Mat image;  // CV_32FC3, RGB in [0, 1]; may be empty until loaded
  std::vector<WordAnn> words;
  std::vector<LineAnn> lines;
  std::vector<ParagraphAnn> paragraphs;
  Task task = Task::kMulti;

  bool has_words() const { return !words.empty(); }
  bool has_lines() const { return !lines.empty(); }
  bool has_paragraphs() const { return !paragraphs.empty(); }

  const WordAnn* find_word(int id) const;
  const LineAnn* find_line(int id) const;

  // Index of the line whose word_ids contain `word_id`, or -1.
  int line_index_of_word(int word_id) const;
  // Index of the paragraph whose line_ids contain `line_id`, or -1.
  int paragraph_index_of_line(int line_id) const;
};

// Annotations-only equality (ignores pixels).
bool same_annotations(const HierSample& a, const HierSample& b);

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LinkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Task implied by the levels present: all three -> multi, words only -> word,
// lines without words -> line. Throws ParseError for other combinations.
Task infer_task(const HierSample& s);

// Checks id uniqueness and that every referenced id resolves.
void link_check(const HierSample& s);

// HierText-style annotation file. Accepts the nested form
//   {"annotations":[{"image_id":..,"paragraphs":[{"lines":[{"vertices":..,
//     "words":[{"vertices":..}]}]}]}]}
// plus top-level "words"/"lines" arrays for single-level files and explicit
// "id"/"word_ids"/"line_ids" links. Unknown fields (text, legible, ...) are
// ignored. When `image_root` is set, <image_root>/<image_id>.png is loaded.
std::vector<HierSample> parse_hiertext_string(const std::string& text);
std::vector<HierSample> parse_hiertext_json(
    const std::filesystem::path& path,
    const std::optional<std::filesystem::path>& image_root = std::nullopt);

std::string serialize_hiertext(const std::vector<HierSample>& samples);
void write_hiertext_json(const std::filesystem::path& path,
                         const std::vector<HierSample>& samples);

// Loads an 8-bit image as CV_32FC3 RGB in [0, 1].
cv::Mat load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const cv::Mat& rgb01);

// Instance masks on a rows x cols grid whose cells are 1/scale image pixels.
Mask word_mask(const HierSample& s, std::size_t word_index, int rows, int cols, double scale);
Mask line_mask(const HierSample& s, std::size_t line_index, int rows, int cols, double scale);
// Union of the words that share the line ("intra-line words"); empty when the
// sample has no word annotations.
Mask word_group_mask(const HierSample& s, std::size_t line_index, int rows, int cols,
                     double scale);
Mask paragraph_mask(const HierSample& s, std::size_t para_index, int rows, int cols,
                    double scale);

}  // namespace etsam
