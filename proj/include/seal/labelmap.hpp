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

#include <cstdint>
#include <string>
#include <vector>

#include "seal/common.hpp"

namespace seal {

// Raster value meaning "no segment". Matches the reserved maximum of the
// 16-bit PGM encoding, so in-memory and on-disk forms agree.
inline constexpr uint16_t kUnlabeledId = 65535;

// Dense per-pixel segment id raster. Labeled ids are contiguous in
// [0, num_segments); unlabeled pixels hold kUnlabeledId.
struct LabelMap {
  int width = 0;
  int height = 0;
  int num_segments = 0;
  std::vector<uint16_t> ids;  // row-major, size width*height

  uint16_t at(int x, int y) const {
    return ids[static_cast<size_t>(y) * width + x];
  }
  uint16_t& at(int x, int y) {
    return ids[static_cast<size_t>(y) * width + x];
  }
};

// Throws std::invalid_argument when sizes disagree or an id is out of range.
void validate(const LabelMap& map);

// Binary PGM (P5), maxval 65535, big-endian 16-bit samples. 65535 is
// reserved for unlabeled pixels. On load, raw ids are relabeled to a
// contiguous range in ascending raw-value order.
LabelMap load_labelmap(const std::string& path);
void save_labelmap(const std::string& path, const LabelMap& map);

}  // namespace seal
