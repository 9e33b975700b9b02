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

#include <random>

#include <opencv2/core.hpp>

#include "etsam/annotations.hpp"
#include "etsam/heatmap.hpp"

namespace etsam {

struct AugmentConfig {
  double brightness = 0.2;  // additive, uniform in [-b, b]
  double contrast = 0.2;    // factor in [1 - c, 1 + c]
  double saturation = 0.2;  // factor in [1 - s, 1 + s]
  double max_angle_deg = 15.0;
  double scale_min = 0.5;
  double scale_max = 2.0;
};

struct AugmentParams {
  double brightness = 0.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double angle = 0.0;  // radians, counter-clockwise on screen
  double scale = 1.0;

  bool geometric_identity() const { return angle == 0.0 && scale == 1.0; }
  bool color_identity() const {
    return brightness == 0.0 && contrast == 1.0 && saturation == 1.0;
  }
};

AugmentParams random_augment(std::mt19937_64& rng, const AugmentConfig& cfg = {});

// Rotation by `angle` and scaling by `scale` about the image centre.
cv::Matx23d augment_affine(const AugmentParams& p, double width, double height);
Point apply_affine(const cv::Matx23d& m, Point p);

struct Augmented {
  HierSample sample;
  Heatmap heat;
};

// Jitters colours, then warps the image, every polygon and the target heatmap
// with the same affine. Instances whose centroid leaves the canvas are
// dropped along with their links.
Augmented augment(const HierSample& sample, const Heatmap& heat, const AugmentParams& p);

// Scales the sample uniformly so its longer side is `size`, then pads the
// bottom/right with black to size x size.
HierSample letterbox(const HierSample& sample, int size);
double letterbox_scale(int width, int height, int size);

}  // namespace etsam
