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
#include "seal/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>

namespace seal {

void validate(const Image& img) {
  if (img.width <= 0 || img.height <= 0)
    throw std::invalid_argument("image: non-positive dimensions");
  if (img.rgb.size() != static_cast<size_t>(img.width) * img.height * 3)
    throw std::invalid_argument("image: buffer size mismatch");
  for (double v : img.rgb) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("image: channel outside [0, 1]");
  }
}

namespace {

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
  if (tok.empty()) throw IoError(std::string("ppm: missing ") + what);
  char* end = nullptr;
  long v = std::strtol(tok.c_str(), &end, 10);
  if (end == nullptr || *end != '\0')
    throw IoError(std::string("ppm: bad ") + what + " '" + tok + "'");
  return v;
}

}  // namespace

Image load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("ppm: cannot open " + path);
  if (next_token(in) != "P6") throw IoError("ppm: not a P6 file: " + path);
  long w = parse_long(next_token(in), "width");
  long h = parse_long(next_token(in), "height");
  long maxval = parse_long(next_token(in), "maxval");
  if (w <= 0 || h <= 0) throw IoError("ppm: non-positive dimensions");
  if (maxval != 255) throw IoError("ppm: maxval must be 255");

  size_t n = static_cast<size_t>(w) * h * 3;
  std::vector<unsigned char> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (static_cast<size_t>(in.gcount()) != n)
    throw IoError("ppm: truncated payload in " + path);

  Image img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.rgb.resize(n);
  for (size_t i = 0; i < n; ++i) img.rgb[i] = raw[i] / 255.0;
  return img;
}

void save_ppm(const std::string& path, const Image& img) {
  validate(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("ppm: cannot write " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.rgb.size());
  for (size_t i = 0; i < img.rgb.size(); ++i)
    raw[i] = static_cast<unsigned char>(std::lround(img.rgb[i] * 255.0));
  out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
  if (!out) throw IoError("ppm: write failure on " + path);
}

}  // namespace seal
