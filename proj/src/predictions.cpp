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
#include "etsam/predictions.hpp"

#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace etsam {

using nlohmann::json;

Rle rle_encode(const Mask& m) {
  Rle out{m.rows(), m.cols(), {}};
  std::uint8_t current = 0;
  std::int64_t run = 0;
  for (int c = 0; c < m.cols(); ++c) {
    for (int r = 0; r < m.rows(); ++r) {
      const std::uint8_t v = m(r, c) ? 1 : 0;
      if (v != current) {
        out.counts.push_back(run);
        current = v;
        run = 0;
      }
      ++run;
    }
  }
  out.counts.push_back(run);
  return out;
}

Mask rle_decode(const Rle& rle) {
  Mask m(rle.rows, rle.cols);
  const std::int64_t total = static_cast<std::int64_t>(rle.rows) * rle.cols;
  std::int64_t sum = 0;
  for (auto n : rle.counts) {
    if (n < 0) throw std::invalid_argument("rle: negative run length");
    sum += n;
  }
  if (sum != total) {
    throw std::invalid_argument("rle: runs cover " + std::to_string(sum) + " cells, mask has " +
                                std::to_string(total));
  }
  std::int64_t pos = 0;
  std::uint8_t v = 0;
  for (auto n : rle.counts) {
    for (std::int64_t k = 0; k < n; ++k, ++pos) {
      if (v) m(static_cast<int>(pos % rle.rows), static_cast<int>(pos / rle.rows)) = 1;
    }
    v ^= 1;
  }
  return m;
}

std::string prediction_to_json(const PredictionFile& pred) {
  json dets = json::array();
  for (int g = 0; g < kNumGranularities; ++g) {
    const auto gran = static_cast<Granularity>(g);
    for (const auto& d : pred.detections.of(gran)) {
      const Rle rle = rle_encode(d.mask);
      json j = {{"granularity", granularity_name(gran)},
                {"score", d.score},
                {"cluster", d.cluster >= 0 ? json(d.cluster) : json(nullptr)},
                {"mask_rle", {{"size", {rle.rows, rle.cols}}, {"counts", rle.counts}}}};
      dets.push_back(std::move(j));
    }
  }
  return json{{"image_id", pred.image_id}, {"task", task_index(pred.task)}, {"detections", dets}}
      .dump();
}

PredictionFile prediction_from_json(const std::string& text) {
  PredictionFile out;
  try {
    const json j = json::parse(text);
    out.image_id = j.at("image_id").get<std::string>();
    out.task = task_from_index(j.at("task").get<int>());
    out.detections.task = out.task;
    int max_cluster = -1;
    for (const auto& d : j.at("detections")) {
      Detection det;
      det.granularity = granularity_from_name(d.at("granularity").get<std::string>());
      det.score = d.at("score").get<double>();
      det.cluster = d.at("cluster").is_null() ? -1 : d.at("cluster").get<int>();
      max_cluster = std::max(max_cluster, det.cluster);
      const auto& rj = d.at("mask_rle");
      Rle rle;
      rle.rows = rj.at("size").at(0).get<int>();
      rle.cols = rj.at("size").at(1).get<int>();
      rle.counts = rj.at("counts").get<std::vector<std::int64_t>>();
      det.mask = rle_decode(rle);
      out.detections.of(det.granularity).push_back(std::move(det));
    }
    out.detections.num_clusters = max_cluster + 1;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed prediction file: ") + e.what());
  }
  return out;
}

void write_prediction(const std::filesystem::path& path, const PredictionFile& pred) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << prediction_to_json(pred) << "\n";
}

PredictionFile read_prediction(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prediction file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return prediction_from_json(buf.str());
}

}  // namespace etsam
