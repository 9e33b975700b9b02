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

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "etsam/annotations.hpp"
#include "etsam/synthdata.hpp"

namespace etsam {
namespace {

const char* kMinimal = R"({"annotations":[{"image_id":"a","width":40,"height":20,
  "paragraphs":[{"lines":[{"vertices":[[0,0],[30,0],[30,10],[0,10]],
    "words":[{"vertices":[[0,0],[12,0],[12,10],[0,10]]},
             {"vertices":[[15,0],[30,0],[30,10],[15,10]]}]}]}]}]})";

TEST(ParseHierText, MinimalMultiLevel) {
  const auto v = parse_hiertext_string(kMinimal);
  ASSERT_EQ(v.size(), 1u);
  const auto& s = v[0];
  EXPECT_EQ(s.task, Task::kMulti);
  EXPECT_EQ(s.words.size(), 2u);
  ASSERT_EQ(s.lines.size(), 1u);
  EXPECT_EQ(s.lines[0].word_ids.size(), 2u);
  ASSERT_EQ(s.paragraphs.size(), 1u);
  EXPECT_EQ(s.paragraphs[0].line_ids, std::vector<int>{s.lines[0].id});
  EXPECT_EQ(s.line_index_of_word(s.words[1].id), 0);
  EXPECT_EQ(s.paragraph_index_of_line(s.lines[0].id), 0);
}

TEST(ParseHierText, WordsOnly) {
  const auto v = parse_hiertext_string(
      R"({"annotations":[{"image_id":"w","width":8,"height":8,
          "words":[{"vertices":[[0,0],[4,0],[4,4]]}]}]})");
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].task, Task::kWord);
}

TEST(ParseHierText, LinesOnly) {
  const auto v = parse_hiertext_string(
      R"({"annotations":[{"image_id":"l","width":8,"height":8,
          "lines":[{"vertices":[[0,0],[4,0],[4,4]]}]}]})");
  EXPECT_EQ(v[0].task, Task::kLine);
}

TEST(ParseHierText, DanglingWordIdIsLinkError) {
  EXPECT_THROW(parse_hiertext_string(
                   R"({"annotations":[{"image_id":"x","width":8,"height":8,
                   "words":[{"id":1,"vertices":[[0,0],[4,0],[4,4]]}],
                   "lines":[{"id":2,"vertices":[[0,0],[4,0],[4,4]],"word_ids":[1,7]}]}]})"),
               LinkError);
}

TEST(ParseHierText, SchemaViolationsNameTheRecord) {
  try {
    parse_hiertext_string(R"({"annotations":[{"image_id":"bad","words":[{"vertices":[[0,0]]}]}]})");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("annotations[0]"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_hiertext_string("{"), ParseError);
  EXPECT_THROW(parse_hiertext_string(R"({"images":[]})"), ParseError);
  EXPECT_THROW(parse_hiertext_string(R"({"annotations":[{"paragraphs":[]}]})"), ParseError);
}

TEST(ParseHierText, IgnoresUnknownFields) {
  const auto v = parse_hiertext_string(
      R"({"annotations":[{"image_id":"t","width":8,"height":8,
          "words":[{"vertices":[[0,0],[4,0],[4,4]],"text":"hi","legible":true}]}]})");
  EXPECT_EQ(v[0].words.size(), 1u);
}

TEST(ParseHierText, RoundTripSynthetic) {
  std::vector<HierSample> in;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.curvature = seed % 2 == 1;
    HierSample s = generate(spec);
    if (seed == 4) s = degrade(s, DegradeMode::kWordOnly);
    if (seed == 5) s = degrade(s, DegradeMode::kLineOnly);
    in.push_back(std::move(s));
  }
  const auto out = parse_hiertext_string(serialize_hiertext(in));
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_TRUE(same_annotations(in[i], out[i])) << in[i].image_id;
    EXPECT_EQ(out[i].task, in[i].task);
  }
  // Second pass is a fixed point.
  EXPECT_EQ(serialize_hiertext(out), serialize_hiertext(in));
}

TEST(ParseHierText, FileWithImages) {
  const auto dir = std::filesystem::temp_directory_path() / "etsam_ann_test";
  std::filesystem::create_directories(dir);
  SceneSpec spec;
  spec.seed = 42;
  const HierSample s = generate(spec);
  save_image(dir / (s.image_id + ".png"), s.image);
  write_hiertext_json(dir / "gt.json", {s});
  const auto v = parse_hiertext_json(dir / "gt.json", dir);
  ASSERT_EQ(v.size(), 1u);
  ASSERT_FALSE(v[0].image.empty());
  EXPECT_EQ(v[0].image.type(), CV_32FC3);
  EXPECT_EQ(v[0].image.cols, s.width);
  cv::Mat diff;
  cv::absdiff(v[0].image, s.image, diff);
  double mx = 0;
  cv::minMaxLoc(diff.reshape(1), nullptr, &mx);
  EXPECT_LE(mx, 0.5 / 255 + 1e-6);
  EXPECT_THROW(parse_hiertext_json(dir / "missing.json"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST(Masks, GroupAndParagraphUnions) {
  const auto s = parse_hiertext_string(kMinimal)[0];
  const Mask w0 = word_mask(s, 0, 20, 40, 1.0);
  const Mask w1 = word_mask(s, 1, 20, 40, 1.0);
  const Mask g = word_group_mask(s, 0, 20, 40, 1.0);
  EXPECT_EQ(mask_area(w0), 120);
  EXPECT_EQ(mask_area(w1), 150);
  EXPECT_EQ(mask_area(g), 270);
  EXPECT_EQ(mask_area(line_mask(s, 0, 20, 40, 1.0)), 300);
  EXPECT_EQ(mask_area(paragraph_mask(s, 0, 20, 40, 1.0)), 300);
  EXPECT_EQ(mask_area(word_mask(s, 0, 10, 20, 0.5)), 30);
}

TEST(Tasks, IndexRoundTrip) {
  for (int i = 0; i < kNumTasks; ++i) EXPECT_EQ(task_index(task_from_index(i)), i);
  EXPECT_THROW(task_from_index(3), std::out_of_range);
  for (int g = 0; g < kNumGranularities; ++g) {
    const auto gr = static_cast<Granularity>(g);
    EXPECT_EQ(granularity_from_name(granularity_name(gr)), gr);
  }
}

}  // namespace
}  // namespace etsam
