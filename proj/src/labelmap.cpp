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
#include "seal/labelmap.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

namespace seal {

void validate(const LabelMap& map) {
  if (map.width <= 0 || map.height <= 0)
    throw std::invalid_argument("LabelMap: non-positive dimensions");
  if (map.ids.size() != static_cast<size_t>(map.width) * map.height)
    throw std::invalid_argument("LabelMap: raster size mismatch");
  if (map.num_segments < 0 || map.num_segments > kUnlabeledId)
    throw std::invalid_argument("LabelMap: segment count out of range");
  for (uint16_t id : map.ids) {
    if (id != kUnlabeledId && id >= map.num_segments)
      throw std::invalid_argument("LabelMap: id exceeds num_segments");
  }
}

namespace {

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

long parse_long(const std::string& tok, const char* what) {
  if (tok.empty()) throw IoError(std::string("pgm: missing ") + what);
  char* end = nullptr;
  long v = std::strtol(tok.c_str(), &end, 10);
  if (end == nullptr || *end != '\0')
    throw IoError(std::string("pgm: bad ") + what + " '" + tok + "'");
  return v;
}

}  // namespace

LabelMap load_labelmap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("pgm: cannot open " + path);

  if (next_token(in) != "P5") throw IoError("pgm: not a P5 file: " + path);
  long w = parse_long(next_token(in), "width");
  long h = parse_long(next_token(in), "height");
  long maxval = parse_long(next_token(in), "maxval");
  if (w <= 0 || h <= 0) throw IoError("pgm: non-positive dimensions");
  if (maxval != 65535) throw IoError("pgm: maxval must be 65535");

  size_t n = static_cast<size_t>(w) * h;
  std::vector<unsigned char> raw(n * 2);
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (static_cast<size_t>(in.gcount()) != raw.size())
    throw IoError("pgm: truncated payload in " + path);

  LabelMap map;
  map.width = static_cast<int>(w);
  map.height = static_cast<int>(h);
  map.ids.resize(n);
  std::map<uint16_t, uint16_t> remap;
  for (size_t i = 0; i < n; ++i) {
    uint16_t v = static_cast<uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    if (v != kUnlabeledId) remap.emplace(v, 0);
    map.ids[i] = v;
  }
  uint16_t next = 0;
  for (auto& kv : remap) kv.second = next++;
  for (size_t i = 0; i < n; ++i) {
    if (map.ids[i] != kUnlabeledId) map.ids[i] = remap[map.ids[i]];
  }
  map.num_segments = static_cast<int>(remap.size());
  return map;
}

void save_labelmap(const std::string& path, const LabelMap& map) {
  validate(map);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("pgm: cannot write " + path);
  out << "P5\n" << map.width << " " << map.height << "\n65535\n";
  std::vector<unsigned char> raw(map.ids.size() * 2);
  for (size_t i = 0; i < map.ids.size(); ++i) {
    raw[2 * i] = static_cast<unsigned char>(map.ids[i] >> 8);
    raw[2 * i + 1] = static_cast<unsigned char>(map.ids[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
  if (!out) throw IoError("pgm: write failure on " + path);
}

}  // namespace seal
