/* Copyright 2026 The SealPC Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <string>
#include <vector>

#include "seal/common.hpp"

namespace seal {

// Dense RGB raster, channel values in [0, 1], row-major, 3 per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;

  double* pixel(int x, int y) {
    return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
  const double* pixel(int x, int y) const {
    return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
};

void validate(const Image& img);

// Binary PPM (P6), maxval 255. Channels quantize as round(v * 255).
Image load_ppm(const std::string& path);
void save_ppm(const std::string& path, const Image& img);

}  // namespace seal
