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
#include <memory>
#include <string>
#include <vector>

#include "seal/common.hpp"
#include "seal/geom.hpp"
#include "seal/image.hpp"

namespace seal::nn {

inline constexpr double kNormEpsilon = 1e-12;

// Named trainable value. Parameters live outside any graph; a graph binds
// them per forward pass and the optimizer writes updates back.
struct Parameter {
  std::string name;
  int rows = 0, cols = 0;
  std::vector<double> value;
};

class ParamRegistry {
 public:
  Parameter& create(const std::string& name, int rows, int cols,
                    double init_value = 0.0);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Parameter>>& all() const { return items_; }

  // Order-sensitive FNV-1a digest over names, shapes, and raw values.
  uint64_t checksum() const;

  // Container format: magic "SEALCK1\n", u32 count, then per parameter a
  // u16 name length, the name, u32 rank, u32 dims, f64 payload. All
  // little-endian.
  void save(const std::string& path) const;
  // Replaces values; the file must carry exactly the registered names with
  // matching shapes.
  void load(const std::string& path);

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
};

class Graph;

enum class PoolMode { kMean, kMax };

// Lightweight handle into a graph's node table.
class Tensor {
 public:
  Tensor() = default;
  int rows() const;
  int cols() const;
  const std::vector<double>& value() const;
  const std::vector<double>& grad() const;
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Tensor(Graph* graph, int index) : graph_(graph), index_(index) {}
  Graph* graph_ = nullptr;
  int index_ = -1;
};

// Append-only tape of matrix operations. Nodes are recorded in topological
// order by construction; backward() sweeps the tape once in reverse and
// accumulates adjoints additively. Recording is single-writer and a graph
// is evaluated from one thread at a time.
class Graph {
 public:
  Graph();
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Tensor input(int rows, int cols, std::vector<double> data);
  Tensor param(Parameter& p);

  Tensor matmul(Tensor a, Tensor b);
  Tensor matmul_nt(Tensor a, Tensor b);  // a * b^T
  Tensor add(Tensor a, Tensor b);
  Tensor sub(Tensor a, Tensor b);
  Tensor scale(Tensor a, double factor);
  Tensor add_rowvec(Tensor a, Tensor row);  // row is 1 x cols, broadcast
  Tensor relu(Tensor a);
  Tensor exp_elem(Tensor a);
  Tensor log_elem(Tensor a);
  Tensor concat_rows(Tensor a, Tensor b);
  Tensor select_rows(Tensor a, std::vector<int> row_indices);
  // Rows divided by max(l2 norm, kNormEpsilon).
  Tensor l2_normalize_rows(Tensor a);
  // group_of_row: one entry per row, -1 to skip, else [0, num_groups).
  // Every group must be non-empty.
  Tensor pool_by_group(Tensor a, std::vector<int> group_of_row,
                       int num_groups, PoolMode mode);
  // Input rows are an h x w grid (row-major), cols are channels; output is
  // the (h*ratio) x (w*ratio) grid, align-corners-false sampling.
  Tensor bilinear_upsample(Tensor a, int height, int width, int ratio);
  Tensor log_sum_exp_rows(Tensor a);                    // -> rows x 1
  Tensor gather_cols(Tensor a, std::vector<int> col_of_row);  // -> rows x 1
  Tensor mean_all(Tensor a);                            // -> 1 x 1

  // Seeds d(loss)/d(loss) = 1 and fills grads for every contributing node.
  // loss must be a 1x1 tensor in this graph.
  void backward(Tensor loss);

  // (parameter, gradient) pairs for every bound parameter, in bind order.
  std::vector<std::pair<Parameter*, const std::vector<double>*>> param_grads()
      const;

  size_t node_count() const;

 private:
  friend class Tensor;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Zero at step == total_steps exactly, lr0 at step 0.
double cosine_lr(int step, int total_steps, double lr0);

struct OptimizerConfig {
  double lr0 = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  double dampening = 0.1;
  int total_steps = 1;
};

// SGD with momentum, weight decay, and dampening under a cosine schedule:
//   g   <- grad + weight_decay * theta
//   buf <- momentum * buf + (1 - dampening) * g
//   theta <- theta - lr(step) * buf
class SgdOptimizer {
 public:
  explicit SgdOptimizer(const OptimizerConfig& cfg);

  double current_lr() const;
  int step_count() const { return step_; }

  void step(
      const std::vector<std::pair<Parameter*, const std::vector<double>*>>&
          grads);

  // Momentum buffer for a parameter name; null before the first update.
  const std::vector<double>* buffer(const std::string& name) const;

 private:
  OptimizerConfig cfg_;
  int step_ = 0;
  std::vector<std::pair<std::string, std::vector<double>>> buffers_;
};

struct EncoderConfig {
  int point_feature_dim = 1;  // per-point features beyond position
  int hidden = 64;
  int channels = 32;      // backbone output width
  int embed_dim = 16;     // projection head output width
  int image_stride = 1;   // encoder output is (H/stride) x (W/stride)
  int upsample_ratio = 1; // image head upsampling factor
  double input_scale = 0.1;  // multiplies xyz before the point MLP
};

// One-hidden-layer MLP applied per point to (scaled xyz, features).
class PointEncoder {
 public:
  PointEncoder(ParamRegistry& registry, const EncoderConfig& cfg, Rng& init);
  Tensor forward(Graph& g, const geom::PointCloud& cloud) const;
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  Parameter* w1_;
  Parameter* b1_;
  Parameter* w2_;
  Parameter* b2_;
};

// One-hidden-layer MLP applied per output cell to (mean rgb over the
// stride block, normalized cell center x, y).
class ImageEncoder {
 public:
  ImageEncoder(ParamRegistry& registry, const EncoderConfig& cfg, Rng& init);
  // Output rows: (H/stride) * (W/stride), row-major over cells.
  Tensor forward(Graph& g, const Image& img) const;

 private:
  EncoderConfig cfg_;
  Parameter* w1_;
  Parameter* b1_;
  Parameter* w2_;
  Parameter* b2_;
};

// Point head: linear to embed_dim, then row normalization.
// Image head: 1x1 convolution (linear per cell), bilinear upsampling by
// upsample_ratio, then row normalization.
class ProjectionHeads {
 public:
  ProjectionHeads(ParamRegistry& registry, const EncoderConfig& cfg, Rng& init);
  Tensor point_head(Graph& g, Tensor point_features) const;
  Tensor image_head(Graph& g, Tensor image_features, int grid_h,
                    int grid_w) const;

 private:
  EncoderConfig cfg_;
  Parameter* pw_;
  Parameter* pb_;
  Parameter* iw_;
  Parameter* ib_;
};

}  // namespace seal::nn
