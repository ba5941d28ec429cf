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
#include "seal/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace seal::nn {

Parameter& ParamRegistry::create(const std::string& name, int rows, int cols,
                                 double init_value) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("parameter '" + name + "': bad shape");
  if (find(name) != nullptr)
    throw std::invalid_argument("parameter '" + name + "' already exists");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->rows = rows;
  p->cols = cols;
  p->value.assign(static_cast<size_t>(rows) * cols, init_value);
  items_.push_back(std::move(p));
  return *items_.back();
}

Parameter* ParamRegistry::find(const std::string& name) {
  for (auto& p : items_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParamRegistry::find(const std::string& name) const {
  for (const auto& p : items_)
    if (p->name == name) return p.get();
  return nullptr;
}

uint64_t ParamRegistry::checksum() const {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, size_t len) {
    const unsigned char* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& p : items_) {
    mix(p->name.data(), p->name.size());
    int32_t shape[2] = {p->rows, p->cols};
    mix(shape, sizeof shape);
    mix(p->value.data(), p->value.size() * sizeof(double));
  }
  return h;
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'E', 'A', 'L', 'C', 'K', '1', '\n'};

template <typename T>
void write_le(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
  char buf[sizeof(T)];
  in.read(buf, sizeof(T));
  if (static_cast<size_t>(in.gcount()) != sizeof(T))
    throw IoError("checkpoint: truncated file " + path);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void ParamRegistry::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out.write(kCheckpointMagic, 8);
  write_le<uint32_t>(out, static_cast<uint32_t>(items_.size()));
  for (const auto& p : items_) {
    write_le<uint16_t>(out, static_cast<uint16_t>(p->name.size()));
    out.write(p->name.data(), p->name.size());
    write_le<uint32_t>(out, 2);
    write_le<uint32_t>(out, static_cast<uint32_t>(p->rows));
    write_le<uint32_t>(out, static_cast<uint32_t>(p->cols));
    for (double v : p->value) write_le<double>(out, v);
  }
  if (!out) throw IoError("checkpoint: write failure on " + path);
}

void ParamRegistry::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IoError("checkpoint: bad magic in " + path);
  uint32_t count = read_le<uint32_t>(in, path);
  if (count != items_.size())
    throw IoError("checkpoint: parameter count mismatch in " + path);

  std::map<std::string, std::vector<double>> loaded;
  std::map<std::string, std::pair<int, int>> shapes;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t len = read_le<uint16_t>(in, path);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (static_cast<size_t>(in.gcount()) != len)
      throw IoError("checkpoint: truncated file " + path);
    uint32_t rank = read_le<uint32_t>(in, path);
    if (rank != 2) throw IoError("checkpoint: unsupported rank in " + path);
    uint32_t rows = read_le<uint32_t>(in, path);
    uint32_t cols = read_le<uint32_t>(in, path);
    std::vector<double> vals(static_cast<size_t>(rows) * cols);
    for (auto& v : vals) v = read_le<double>(in, path);
    if (loaded.count(name))
      throw IoError("checkpoint: duplicate parameter '" + name + "'");
    loaded[name] = std::move(vals);
    shapes[name] = {static_cast<int>(rows), static_cast<int>(cols)};
  }
  for (auto& p : items_) {
    auto it = loaded.find(p->name);
    if (it == loaded.end())
      throw IoError("checkpoint: missing parameter '" + p->name + "' in " +
                    path);
    auto sh = shapes[p->name];
    if (sh.first != p->rows || sh.second != p->cols)
      throw IoError("checkpoint: shape mismatch for '" + p->name + "' in " +
                    path);
    p->value = std::move(it->second);
  }
}

namespace {

enum class Op {
  kInput,
  kParam,
  kMatmul,
  kMatmulNT,
  kAdd,
  kSub,
  kScale,
  kAddRowvec,
  kRelu,
  kExp,
  kLog,
  kConcatRows,
  kSelectRows,
  kL2NormalizeRows,
  kPoolMean,
  kPoolMax,
  kBilinearUpsample,
  kLogSumExpRows,
  kGatherCols,
  kMeanAll,
};

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kMatmul: return "matmul";
    case Op::kMatmulNT: return "matmul_nt";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kScale: return "scale";
    case Op::kAddRowvec: return "add_rowvec";
    case Op::kRelu: return "relu";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kConcatRows: return "concat_rows";
    case Op::kSelectRows: return "select_rows";
    case Op::kL2NormalizeRows: return "l2_normalize_rows";
    case Op::kPoolMean: return "pool_mean";
    case Op::kPoolMax: return "pool_max";
    case Op::kBilinearUpsample: return "bilinear_upsample";
    case Op::kLogSumExpRows: return "log_sum_exp_rows";
    case Op::kGatherCols: return "gather_cols";
    case Op::kMeanAll: return "mean_all";
  }
  return "?";
}

struct Node {
  Op op;
  int a = -1, b = -1;
  int rows = 0, cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  double scalar = 0.0;
  std::vector<int> indices;
  int grid_h = 0, grid_w = 0, ratio = 0;
  Parameter* param = nullptr;
};

}  // namespace

struct Graph::Impl {
  std::vector<Node> nodes;
  std::vector<std::pair<Parameter*, int>> params;

  int append(Node node, int node_id_hint) {
    (void)node_id_hint;
    for (double v : node.value) {
      if (!std::isfinite(v))
        throw NumericError(std::string("graph: non-finite value in ") +
                           op_name(node.op) + " node #" +
                           std::to_string(nodes.size()));
    }
    node.grad.assign(node.value.size(), 0.0);
    nodes.push_back(std::move(node));
    return static_cast<int>(nodes.size()) - 1;
  }
};

Graph::Graph() : impl_(std::make_unique<Impl>()) {}
Graph::~Graph() = default;

size_t Graph::node_count() const { return impl_->nodes.size(); }

int Tensor::rows() const { return graph_->impl_->nodes[index_].rows; }
int Tensor::cols() const { return graph_->impl_->nodes[index_].cols; }
const std::vector<double>& Tensor::value() const {
  return graph_->impl_->nodes[index_].value;
}
const std::vector<double>& Tensor::grad() const {
  return graph_->impl_->nodes[index_].grad;
}

namespace {

void check_tensor(const Tensor& t, const Graph* g, const char* ctx) {
  if (!t.valid())
    throw std::invalid_argument(std::string(ctx) + ": invalid tensor handle");
  (void)g;
}

}  // namespace

Tensor Graph::input(int rows, int cols, std::vector<double> data) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("input: shape must be positive");
  if (data.size() != static_cast<size_t>(rows) * cols)
    throw std::invalid_argument("input: data size does not match shape");
  Node n;
  n.op = Op::kInput;
  n.rows = rows;
  n.cols = cols;
  n.value = std::move(data);
  return Tensor(this, impl_->append(std::move(n), 0));
}

Tensor Graph::param(Parameter& p) {
  if (p.value.size() != static_cast<size_t>(p.rows) * p.cols)
    throw std::invalid_argument("param: registry value size mismatch");
  for (const auto& [bound, idx] : impl_->params)
    if (bound == &p) return Tensor(this, idx);
  Node n;
  n.op = Op::kParam;
  n.rows = p.rows;
  n.cols = p.cols;
  n.value = p.value;
  n.param = &p;
  int idx = impl_->append(std::move(n), 0);
  impl_->params.emplace_back(&p, idx);
  return Tensor(this, idx);
}

Tensor Graph::matmul(Tensor a, Tensor b) {
  check_tensor(a, this, "matmul");
  check_tensor(b, this, "matmul");
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree");
  const auto& av = a.value();
  const auto& bv = b.value();
  int m = a.rows(), k = a.cols(), n = b.cols();
  Node node;
  node.op = Op::kMatmul;
  node.a = a.index_;
  node.b = b.index_;
  node.rows = m;
  node.cols = n;
  node.value.assign(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < k; ++l) {
      double x = av[static_cast<size_t>(i) * k + l];
      if (x == 0.0) continue;
      for (int j = 0; j < n; ++j)
        node.value[static_cast<size_t>(i) * n + j] +=
            x * bv[static_cast<size_t>(l) * n + j];
    }
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::matmul_nt(Tensor a, Tensor b) {
  check_tensor(a, this, "matmul_nt");
  check_tensor(b, this, "matmul_nt");
  if (a.cols() != b.cols())
    throw std::invalid_argument("matmul_nt: inner dimensions disagree");
  const auto& av = a.value();
  const auto& bv = b.value();
  int m = a.rows(), k = a.cols(), n = b.rows();
  Node node;
  node.op = Op::kMatmulNT;
  node.a = a.index_;
  node.b = b.index_;
  node.rows = m;
  node.cols = n;
  node.value.assign(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int l = 0; l < k; ++l)
        s += av[static_cast<size_t>(i) * k + l] *
             bv[static_cast<size_t>(j) * k + l];
      node.value[static_cast<size_t>(i) * n + j] = s;
    }
  return Tensor(this, impl_->append(std::move(node), 0));
}

namespace {

Node elementwise_node(Op op, const Tensor& a, const Tensor& b,
                      const char* ctx) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(ctx) + ": shape mismatch");
  Node node;
  node.op = op;
  node.rows = a.rows();
  node.cols = a.cols();
  node.value.resize(a.value().size());
  return node;
}

}  // namespace

Tensor Graph::add(Tensor a, Tensor b) {
  check_tensor(a, this, "add");
  check_tensor(b, this, "add");
  Node node = elementwise_node(Op::kAdd, a, b, "add");
  node.a = a.index_;
  node.b = b.index_;
  for (size_t i = 0; i < node.value.size(); ++i)
    node.value[i] = a.value()[i] + b.value()[i];
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::sub(Tensor a, Tensor b) {
  check_tensor(a, this, "sub");
  check_tensor(b, this, "sub");
  Node node = elementwise_node(Op::kSub, a, b, "sub");
  node.a = a.index_;
  node.b = b.index_;
  for (size_t i = 0; i < node.value.size(); ++i)
    node.value[i] = a.value()[i] - b.value()[i];
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::scale(Tensor a, double factor) {
  check_tensor(a, this, "scale");
  if (!std::isfinite(factor))
    throw std::invalid_argument("scale: non-finite factor");
  Node node;
  node.op = Op::kScale;
  node.a = a.index_;
  node.rows = a.rows();
  node.cols = a.cols();
  node.scalar = factor;
  node.value.resize(a.value().size());
  for (size_t i = 0; i < node.value.size(); ++i)
    node.value[i] = factor * a.value()[i];
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::add_rowvec(Tensor a, Tensor row) {
  check_tensor(a, this, "add_rowvec");
  check_tensor(row, this, "add_rowvec");
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_rowvec: row must be 1 x cols(a)");
  Node node;
  node.op = Op::kAddRowvec;
  node.a = a.index_;
  node.b = row.index_;
  node.rows = a.rows();
  node.cols = a.cols();
  node.value.resize(a.value().size());
  for (int i = 0; i < node.rows; ++i)
    for (int j = 0; j < node.cols; ++j)
      node.value[static_cast<size_t>(i) * node.cols + j] =
          a.value()[static_cast<size_t>(i) * node.cols + j] + row.value()[j];
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::relu(Tensor a) {
  check_tensor(a, this, "relu");
  Node node;
  node.op = Op::kRelu;
  node.a = a.index_;
  node.rows = a.rows();
  node.cols = a.cols();
  node.value.resize(a.value().size());
  for (size_t i = 0; i < node.value.size(); ++i)
    node.value[i] = a.value()[i] > 0.0 ? a.value()[i] : 0.0;
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::exp_elem(Tensor a) {
  check_tensor(a, this, "exp");
  Node node;
  node.op = Op::kExp;
  node.a = a.index_;
  node.rows = a.rows();
  node.cols = a.cols();
  node.value.resize(a.value().size());
  for (size_t i = 0; i < node.value.size(); ++i)
    node.value[i] = std::exp(a.value()[i]);
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::log_elem(Tensor a) {
  check_tensor(a, this, "log");
  Node node;
  node.op = Op::kLog;
  node.a = a.index_;
  node.rows = a.rows();
  node.cols = a.cols();
  node.value.resize(a.value().size());
  for (size_t i = 0; i < node.value.size(); ++i)
    node.value[i] = std::log(a.value()[i]);
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::concat_rows(Tensor a, Tensor b) {
  check_tensor(a, this, "concat_rows");
  check_tensor(b, this, "concat_rows");
  if (a.cols() != b.cols())
    throw std::invalid_argument("concat_rows: column counts disagree");
  Node node;
  node.op = Op::kConcatRows;
  node.a = a.index_;
  node.b = b.index_;
  node.rows = a.rows() + b.rows();
  node.cols = a.cols();
  node.value = a.value();
  node.value.insert(node.value.end(), b.value().begin(), b.value().end());
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::select_rows(Tensor a, std::vector<int> row_indices) {
  check_tensor(a, this, "select_rows");
  if (row_indices.empty())
    throw std::invalid_argument("select_rows: empty index list");
  for (int idx : row_indices)
    if (idx < 0 || idx >= a.rows())
      throw std::invalid_argument("select_rows: index out of range");
  Node node;
  node.op = Op::kSelectRows;
  node.a = a.index_;
  node.rows = static_cast<int>(row_indices.size());
  node.cols = a.cols();
  node.indices = std::move(row_indices);
  node.value.resize(static_cast<size_t>(node.rows) * node.cols);
  for (int i = 0; i < node.rows; ++i)
    std::copy_n(a.value().begin() +
                    static_cast<size_t>(node.indices[i]) * node.cols,
                node.cols, node.value.begin() + static_cast<size_t>(i) * node.cols);
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::l2_normalize_rows(Tensor a) {
  check_tensor(a, this, "l2_normalize_rows");
  Node node;
  node.op = Op::kL2NormalizeRows;
  node.a = a.index_;
  node.rows = a.rows();
  node.cols = a.cols();
  node.value.resize(a.value().size());
  for (int i = 0; i < node.rows; ++i) {
    double sq = 0.0;
    for (int j = 0; j < node.cols; ++j) {
      double v = a.value()[static_cast<size_t>(i) * node.cols + j];
      sq += v * v;
    }
    double norm = std::max(std::sqrt(sq), kNormEpsilon);
    for (int j = 0; j < node.cols; ++j)
      node.value[static_cast<size_t>(i) * node.cols + j] =
          a.value()[static_cast<size_t>(i) * node.cols + j] / norm;
  }
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::pool_by_group(Tensor a, std::vector<int> group_of_row,
                            int num_groups, PoolMode mode) {
  check_tensor(a, this, "pool_by_group");
  if (num_groups < 1)
    throw std::invalid_argument("pool_by_group: need at least one group");
  if (group_of_row.size() != static_cast<size_t>(a.rows()))
    throw std::invalid_argument("pool_by_group: one group id per row required");
  std::vector<int> counts(num_groups, 0);
  for (int gid : group_of_row) {
    if (gid < -1 || gid >= num_groups)
      throw std::invalid_argument("pool_by_group: group id out of range");
    if (gid >= 0) counts[gid]++;
  }
  for (int c : counts)
    if (c == 0) throw std::invalid_argument("pool_by_group: empty group");

  Node node;
  node.op = mode == PoolMode::kMean ? Op::kPoolMean : Op::kPoolMax;
  node.a = a.index_;
  node.rows = num_groups;
  node.cols = a.cols();
  node.indices = std::move(group_of_row);
  node.value.assign(static_cast<size_t>(num_groups) * node.cols, 0.0);
  if (mode == PoolMode::kMean) {
    for (size_t r = 0; r < node.indices.size(); ++r) {
      int gid = node.indices[r];
      if (gid < 0) continue;
      for (int j = 0; j < node.cols; ++j)
        node.value[static_cast<size_t>(gid) * node.cols + j] +=
            a.value()[r * node.cols + j];
    }
    for (int gid = 0; gid < num_groups; ++gid)
      for (int j = 0; j < node.cols; ++j)
        node.value[static_cast<size_t>(gid) * node.cols + j] /= counts[gid];
  } else {
    std::vector<bool> seen(num_groups, false);
    for (size_t r = 0; r < node.indices.size(); ++r) {
      int gid = node.indices[r];
      if (gid < 0) continue;
      for (int j = 0; j < node.cols; ++j) {
        double v = a.value()[r * node.cols + j];
        double& cur = node.value[static_cast<size_t>(gid) * node.cols + j];
        if (!seen[gid] || v > cur) cur = v;
      }
      seen[gid] = true;
    }
  }
  return Tensor(this, impl_->append(std::move(node), 0));
}

namespace {

// Align-corners-false sample positions: index and blend weight for the low
// neighbor; the high neighbor is clamped.
void upsample_taps(int in_dim, int ratio, std::vector<int>& lo,
                   std::vector<int>& hi, std::vector<double>& t) {
  int out_dim = in_dim * ratio;
  lo.resize(out_dim);
  hi.resize(out_dim);
  t.resize(out_dim);
  for (int o = 0; o < out_dim; ++o) {
    double src = (o + 0.5) / ratio - 0.5;
    double f = std::floor(src);
    int i0 = static_cast<int>(f);
    double frac = src - f;
    lo[o] = std::clamp(i0, 0, in_dim - 1);
    hi[o] = std::clamp(i0 + 1, 0, in_dim - 1);
    t[o] = frac;
  }
}

}  // namespace

Tensor Graph::bilinear_upsample(Tensor a, int height, int width, int ratio) {
  check_tensor(a, this, "bilinear_upsample");
  if (height < 1 || width < 1 || ratio < 1)
    throw std::invalid_argument("bilinear_upsample: bad grid or ratio");
  if (a.rows() != height * width)
    throw std::invalid_argument("bilinear_upsample: rows != height * width");
  const int c = a.cols();
  const int oh = height * ratio, ow = width * ratio;
  std::vector<int> xlo, xhi, ylo, yhi;
  std::vector<double> xt, yt;
  upsample_taps(width, ratio, xlo, xhi, xt);
  upsample_taps(height, ratio, ylo, yhi, yt);

  Node node;
  node.op = Op::kBilinearUpsample;
  node.a = a.index_;
  node.rows = oh * ow;
  node.cols = c;
  node.grid_h = height;
  node.grid_w = width;
  node.ratio = ratio;
  node.value.assign(static_cast<size_t>(oh) * ow * c, 0.0);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      size_t out_row = static_cast<size_t>(oy) * ow + ox;
      size_t r00 = static_cast<size_t>(ylo[oy]) * width + xlo[ox];
      size_t r01 = static_cast<size_t>(ylo[oy]) * width + xhi[ox];
      size_t r10 = static_cast<size_t>(yhi[oy]) * width + xlo[ox];
      size_t r11 = static_cast<size_t>(yhi[oy]) * width + xhi[ox];
      double w00 = (1 - yt[oy]) * (1 - xt[ox]);
      double w01 = (1 - yt[oy]) * xt[ox];
      double w10 = yt[oy] * (1 - xt[ox]);
      double w11 = yt[oy] * xt[ox];
      for (int j = 0; j < c; ++j)
        node.value[out_row * c + j] = w00 * a.value()[r00 * c + j] +
                                      w01 * a.value()[r01 * c + j] +
                                      w10 * a.value()[r10 * c + j] +
                                      w11 * a.value()[r11 * c + j];
    }
  }
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::log_sum_exp_rows(Tensor a) {
  check_tensor(a, this, "log_sum_exp_rows");
  Node node;
  node.op = Op::kLogSumExpRows;
  node.a = a.index_;
  node.rows = a.rows();
  node.cols = 1;
  node.value.resize(a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    const double* row = a.value().data() + static_cast<size_t>(i) * a.cols();
    double m = row[0];
    for (int j = 1; j < a.cols(); ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += std::exp(row[j] - m);
    node.value[i] = m + std::log(s);
  }
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::gather_cols(Tensor a, std::vector<int> col_of_row) {
  check_tensor(a, this, "gather_cols");
  if (col_of_row.size() != static_cast<size_t>(a.rows()))
    throw std::invalid_argument("gather_cols: one column index per row");
  for (int j : col_of_row)
    if (j < 0 || j >= a.cols())
      throw std::invalid_argument("gather_cols: column index out of range");
  Node node;
  node.op = Op::kGatherCols;
  node.a = a.index_;
  node.rows = a.rows();
  node.cols = 1;
  node.indices = std::move(col_of_row);
  node.value.resize(a.rows());
  for (int i = 0; i < a.rows(); ++i)
    node.value[i] =
        a.value()[static_cast<size_t>(i) * a.cols() + node.indices[i]];
  return Tensor(this, impl_->append(std::move(node), 0));
}

Tensor Graph::mean_all(Tensor a) {
  check_tensor(a, this, "mean_all");
  Node node;
  node.op = Op::kMeanAll;
  node.a = a.index_;
  node.rows = 1;
  node.cols = 1;
  double s = 0.0;
  for (double v : a.value()) s += v;
  node.value.assign(1, s / static_cast<double>(a.value().size()));
  return Tensor(this, impl_->append(std::move(node), 0));
}

void Graph::backward(Tensor loss) {
  check_tensor(loss, this, "backward");
  if (loss.graph_ != this)
    throw std::invalid_argument("backward: tensor belongs to another graph");
  Node& ln = impl_->nodes[loss.index_];
  if (ln.rows != 1 || ln.cols != 1)
    throw std::invalid_argument("backward: loss must be a 1x1 tensor");

  auto& nodes = impl_->nodes;
  std::vector<bool> touched(nodes.size(), false);
  for (auto& n : nodes) std::fill(n.grad.begin(), n.grad.end(), 0.0);
  ln.grad[0] = 1.0;
  touched[loss.index_] = true;

  for (int i = loss.index_; i >= 0; --i) {
    if (!touched[i]) continue;
    Node& n = nodes[i];
    Node* a = n.a >= 0 ? &nodes[n.a] : nullptr;
    Node* b = n.b >= 0 ? &nodes[n.b] : nullptr;
    auto touch = [&](int idx) {
      if (idx >= 0) touched[idx] = true;
    };
    switch (n.op) {
      case Op::kInput:
      case Op::kParam:
        break;
      case Op::kMatmul: {
        int m = n.rows, k = a->cols, c = n.cols;
        for (int r = 0; r < m; ++r)
          for (int j = 0; j < c; ++j) {
            double g = n.grad[static_cast<size_t>(r) * c + j];
            if (g == 0.0) continue;
            for (int l = 0; l < k; ++l) {
              a->grad[static_cast<size_t>(r) * k + l] +=
                  g * b->value[static_cast<size_t>(l) * c + j];
              b->grad[static_cast<size_t>(l) * c + j] +=
                  g * a->value[static_cast<size_t>(r) * k + l];
            }
          }
        touch(n.a);
        touch(n.b);
        break;
      }
      case Op::kMatmulNT: {
        int m = n.rows, k = a->cols, c = n.cols;
        for (int r = 0; r < m; ++r)
          for (int j = 0; j < c; ++j) {
            double g = n.grad[static_cast<size_t>(r) * c + j];
            if (g == 0.0) continue;
            for (int l = 0; l < k; ++l) {
              a->grad[static_cast<size_t>(r) * k + l] +=
                  g * b->value[static_cast<size_t>(j) * k + l];
              b->grad[static_cast<size_t>(j) * k + l] +=
                  g * a->value[static_cast<size_t>(r) * k + l];
            }
          }
        touch(n.a);
        touch(n.b);
        break;
      }
      case Op::kAdd:
        for (size_t e = 0; e < n.grad.size(); ++e) {
          a->grad[e] += n.grad[e];
          b->grad[e] += n.grad[e];
        }
        touch(n.a);
        touch(n.b);
        break;
      case Op::kSub:
        for (size_t e = 0; e < n.grad.size(); ++e) {
          a->grad[e] += n.grad[e];
          b->grad[e] -= n.grad[e];
        }
        touch(n.a);
        touch(n.b);
        break;
      case Op::kScale:
        for (size_t e = 0; e < n.grad.size(); ++e)
          a->grad[e] += n.scalar * n.grad[e];
        touch(n.a);
        break;
      case Op::kAddRowvec:
        for (int r = 0; r < n.rows; ++r)
          for (int j = 0; j < n.cols; ++j) {
            double g = n.grad[static_cast<size_t>(r) * n.cols + j];
            a->grad[static_cast<size_t>(r) * n.cols + j] += g;
            b->grad[j] += g;
          }
        touch(n.a);
        touch(n.b);
        break;
      case Op::kRelu:
        for (size_t e = 0; e < n.grad.size(); ++e)
          if (a->value[e] > 0.0) a->grad[e] += n.grad[e];
        touch(n.a);
        break;
      case Op::kExp:
        for (size_t e = 0; e < n.grad.size(); ++e)
          a->grad[e] += n.grad[e] * n.value[e];
        touch(n.a);
        break;
      case Op::kLog:
        for (size_t e = 0; e < n.grad.size(); ++e)
          a->grad[e] += n.grad[e] / a->value[e];
        touch(n.a);
        break;
      case Op::kConcatRows: {
        size_t asz = a->value.size();
        for (size_t e = 0; e < asz; ++e) a->grad[e] += n.grad[e];
        for (size_t e = 0; e < b->value.size(); ++e)
          b->grad[e] += n.grad[asz + e];
        touch(n.a);
        touch(n.b);
        break;
      }
      case Op::kSelectRows:
        for (int r = 0; r < n.rows; ++r)
          for (int j = 0; j < n.cols; ++j)
            a->grad[static_cast<size_t>(n.indices[r]) * n.cols + j] +=
                n.grad[static_cast<size_t>(r) * n.cols + j];
        touch(n.a);
        break;
      case Op::kL2NormalizeRows:
        for (int r = 0; r < n.rows; ++r) {
          const double* x = a->value.data() + static_cast<size_t>(r) * n.cols;
          const double* y = n.value.data() + static_cast<size_t>(r) * n.cols;
          const double* g = n.grad.data() + static_cast<size_t>(r) * n.cols;
          double sq = 0.0;
          for (int j = 0; j < n.cols; ++j) sq += x[j] * x[j];
          double norm = std::sqrt(sq);
          double* ga = a->grad.data() + static_cast<size_t>(r) * n.cols;
          if (norm > kNormEpsilon) {
            double dot = 0.0;
            for (int j = 0; j < n.cols; ++j) dot += g[j] * y[j];
            for (int j = 0; j < n.cols; ++j)
              ga[j] += (g[j] - dot * y[j]) / norm;
          } else {
            for (int j = 0; j < n.cols; ++j) ga[j] += g[j] / kNormEpsilon;
          }
        }
        touch(n.a);
        break;
      case Op::kPoolMean: {
        std::vector<int> counts(n.rows, 0);
        for (int gid : n.indices)
          if (gid >= 0) counts[gid]++;
        for (size_t r = 0; r < n.indices.size(); ++r) {
          int gid = n.indices[r];
          if (gid < 0) continue;
          for (int j = 0; j < n.cols; ++j)
            a->grad[r * n.cols + j] +=
                n.grad[static_cast<size_t>(gid) * n.cols + j] / counts[gid];
        }
        touch(n.a);
        break;
      }
      case Op::kPoolMax: {
        // Gradient flows to the first row attaining each maximum.
        std::vector<int> argmax(static_cast<size_t>(n.rows) * n.cols, -1);
        for (size_t r = 0; r < n.indices.size(); ++r) {
          int gid = n.indices[r];
          if (gid < 0) continue;
          for (int j = 0; j < n.cols; ++j) {
            size_t cell = static_cast<size_t>(gid) * n.cols + j;
            if (argmax[cell] == -1 &&
                a->value[r * n.cols + j] == n.value[cell])
              argmax[cell] = static_cast<int>(r);
          }
        }
        for (int gid = 0; gid < n.rows; ++gid)
          for (int j = 0; j < n.cols; ++j) {
            size_t cell = static_cast<size_t>(gid) * n.cols + j;
            a->grad[static_cast<size_t>(argmax[cell]) * n.cols + j] +=
                n.grad[cell];
          }
        touch(n.a);
        break;
      }
      case Op::kBilinearUpsample: {
        std::vector<int> xlo, xhi, ylo, yhi;
        std::vector<double> xt, yt;
        upsample_taps(n.grid_w, n.ratio, xlo, xhi, xt);
        upsample_taps(n.grid_h, n.ratio, ylo, yhi, yt);
        int ow = n.grid_w * n.ratio, oh = n.grid_h * n.ratio;
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            size_t out_row = static_cast<size_t>(oy) * ow + ox;
            size_t r00 = static_cast<size_t>(ylo[oy]) * n.grid_w + xlo[ox];
            size_t r01 = static_cast<size_t>(ylo[oy]) * n.grid_w + xhi[ox];
            size_t r10 = static_cast<size_t>(yhi[oy]) * n.grid_w + xlo[ox];
            size_t r11 = static_cast<size_t>(yhi[oy]) * n.grid_w + xhi[ox];
            double w00 = (1 - yt[oy]) * (1 - xt[ox]);
            double w01 = (1 - yt[oy]) * xt[ox];
            double w10 = yt[oy] * (1 - xt[ox]);
            double w11 = yt[oy] * xt[ox];
            for (int j = 0; j < n.cols; ++j) {
              double g = n.grad[out_row * n.cols + j];
              if (g == 0.0) continue;
              a->grad[r00 * n.cols + j] += w00 * g;
              a->grad[r01 * n.cols + j] += w01 * g;
              a->grad[r10 * n.cols + j] += w10 * g;
              a->grad[r11 * n.cols + j] += w11 * g;
            }
          }
        touch(n.a);
        break;
      }
      case Op::kLogSumExpRows:
        for (int r = 0; r < n.rows; ++r) {
          double g = n.grad[r];
          if (g == 0.0) continue;
          for (int j = 0; j < a->cols; ++j) {
            double p = std::exp(a->value[static_cast<size_t>(r) * a->cols + j] -
                                n.value[r]);
            a->grad[static_cast<size_t>(r) * a->cols + j] += g * p;
          }
        }
        touch(n.a);
        break;
      case Op::kGatherCols:
        for (int r = 0; r < n.rows; ++r)
          a->grad[static_cast<size_t>(r) * a->cols + n.indices[r]] += n.grad[r];
        touch(n.a);
        break;
      case Op::kMeanAll: {
        double g = n.grad[0] / static_cast<double>(a->value.size());
        for (size_t e = 0; e < a->grad.size(); ++e) a->grad[e] += g;
        touch(n.a);
        break;
      }
    }
  }
}

std::vector<std::pair<Parameter*, const std::vector<double>*>>
Graph::param_grads() const {
  std::vector<std::pair<Parameter*, const std::vector<double>*>> out;
  for (const auto& [p, idx] : impl_->params)
    out.emplace_back(p, &impl_->nodes[idx].grad);
  return out;
}

double cosine_lr(int step, int total_steps, double lr0) {
  if (total_steps < 1)
    throw std::invalid_argument("cosine_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("cosine_lr: step outside [0, total_steps]");
  if (step == total_steps) return 0.0;
  return lr0 * 0.5 *
         (1.0 + std::cos(3.14159265358979323846 * step / total_steps));
}

SgdOptimizer::SgdOptimizer(const OptimizerConfig& cfg) : cfg_(cfg) {
  if (!(cfg.lr0 > 0)) throw std::invalid_argument("sgd: lr0 must be positive");
  if (cfg.total_steps < 1)
    throw std::invalid_argument("sgd: total_steps must be >= 1");
}

double SgdOptimizer::current_lr() const {
  return cosine_lr(step_, cfg_.total_steps, cfg_.lr0);
}

void SgdOptimizer::step(
    const std::vector<std::pair<Parameter*, const std::vector<double>*>>&
        grads) {
  double lr = current_lr();
  for (const auto& [param, grad] : grads) {
    if (grad->size() != param->value.size())
      throw std::invalid_argument("sgd: gradient shape mismatch for '" +
                                  param->name + "'");
    std::vector<double>* buf = nullptr;
    for (auto& [name, b] : buffers_) {
      if (name == param->name) {
        buf = &b;
        break;
      }
    }
    if (buf == nullptr) {
      buffers_.emplace_back(param->name,
                            std::vector<double>(param->value.size(), 0.0));
      buf = &buffers_.back().second;
    }
    for (size_t i = 0; i < param->value.size(); ++i) {
      double g = (*grad)[i] + cfg_.weight_decay * param->value[i];
      (*buf)[i] = cfg_.momentum * (*buf)[i] + (1.0 - cfg_.dampening) * g;
      param->value[i] -= lr * (*buf)[i];
      if (!std::isfinite(param->value[i]))
        throw NumericError("sgd: non-finite parameter '" + param->name + "'");
    }
  }
  ++step_;
}

const std::vector<double>* SgdOptimizer::buffer(const std::string& name) const {
  for (const auto& [n, b] : buffers_)
    if (n == name) return &b;
  return nullptr;
}

namespace {

void he_init(Parameter& p, int fan_in, Rng& rng) {
  double std = std::sqrt(2.0 / fan_in);
  for (auto& v : p.value) v = rng.normal(std);
}

void linear_init(Parameter& p, int fan_in, Rng& rng) {
  double std = std::sqrt(1.0 / fan_in);
  for (auto& v : p.value) v = rng.normal(std);
}

}  // namespace

PointEncoder::PointEncoder(ParamRegistry& registry, const EncoderConfig& cfg,
                           Rng& init)
    : cfg_(cfg) {
  int in = 3 + cfg.point_feature_dim;
  w1_ = &registry.create("point_enc.w1", in, cfg.hidden);
  b1_ = &registry.create("point_enc.b1", 1, cfg.hidden);
  w2_ = &registry.create("point_enc.w2", cfg.hidden, cfg.channels);
  b2_ = &registry.create("point_enc.b2", 1, cfg.channels);
  he_init(*w1_, in, init);
  he_init(*w2_, cfg.hidden, init);
}

Tensor PointEncoder::forward(Graph& g, const geom::PointCloud& cloud) const {
  if (cloud.size() == 0)
    throw std::invalid_argument("point encoder: empty cloud");
  if (cloud.feature_dim != cfg_.point_feature_dim)
    throw std::invalid_argument("point encoder: feature dim mismatch");
  int n = cloud.size();
  int in = 3 + cfg_.point_feature_dim;
  std::vector<double> data(static_cast<size_t>(n) * in);
  for (int i = 0; i < n; ++i) {
    data[static_cast<size_t>(i) * in + 0] =
        cloud.positions[i].x() * cfg_.input_scale;
    data[static_cast<size_t>(i) * in + 1] =
        cloud.positions[i].y() * cfg_.input_scale;
    data[static_cast<size_t>(i) * in + 2] =
        cloud.positions[i].z() * cfg_.input_scale;
    for (int f = 0; f < cfg_.point_feature_dim; ++f)
      data[static_cast<size_t>(i) * in + 3 + f] =
          cloud.features[static_cast<size_t>(i) * cfg_.point_feature_dim + f];
  }
  Tensor x = g.input(n, in, std::move(data));
  Tensor h = g.relu(g.add_rowvec(g.matmul(x, g.param(*w1_)), g.param(*b1_)));
  return g.add_rowvec(g.matmul(h, g.param(*w2_)), g.param(*b2_));
}

ImageEncoder::ImageEncoder(ParamRegistry& registry, const EncoderConfig& cfg,
                           Rng& init)
    : cfg_(cfg) {
  w1_ = &registry.create("image_enc.w1", 5, cfg.hidden);
  b1_ = &registry.create("image_enc.b1", 1, cfg.hidden);
  w2_ = &registry.create("image_enc.w2", cfg.hidden, cfg.channels);
  b2_ = &registry.create("image_enc.b2", 1, cfg.channels);
  he_init(*w1_, 5, init);
  he_init(*w2_, cfg.hidden, init);
}

Tensor ImageEncoder::forward(Graph& g, const Image& img) const {
  validate(img);
  int s = cfg_.image_stride;
  if (s < 1 || img.width % s != 0 || img.height % s != 0)
    throw std::invalid_argument("image encoder: stride must divide image size");
  int bw = img.width / s, bh = img.height / s;
  std::vector<double> data(static_cast<size_t>(bw) * bh * 5);
  for (int by = 0; by < bh; ++by)
    for (int bx = 0; bx < bw; ++bx) {
      double r = 0, gg = 0, b = 0;
      for (int dy = 0; dy < s; ++dy)
        for (int dx = 0; dx < s; ++dx) {
          const double* p = img.pixel(bx * s + dx, by * s + dy);
          r += p[0];
          gg += p[1];
          b += p[2];
        }
      double inv = 1.0 / (s * s);
      size_t row = static_cast<size_t>(by) * bw + bx;
      data[row * 5 + 0] = r * inv;
      data[row * 5 + 1] = gg * inv;
      data[row * 5 + 2] = b * inv;
      data[row * 5 + 3] = (bx + 0.5) / bw;
      data[row * 5 + 4] = (by + 0.5) / bh;
    }
  Tensor x = g.input(bh * bw, 5, std::move(data));
  Tensor h = g.relu(g.add_rowvec(g.matmul(x, g.param(*w1_)), g.param(*b1_)));
  return g.add_rowvec(g.matmul(h, g.param(*w2_)), g.param(*b2_));
}

ProjectionHeads::ProjectionHeads(ParamRegistry& registry,
                                 const EncoderConfig& cfg, Rng& init)
    : cfg_(cfg) {
  pw_ = &registry.create("point_head.w", cfg.channels, cfg.embed_dim);
  pb_ = &registry.create("point_head.b", 1, cfg.embed_dim);
  iw_ = &registry.create("image_head.w", cfg.channels, cfg.embed_dim);
  ib_ = &registry.create("image_head.b", 1, cfg.embed_dim);
  linear_init(*pw_, cfg.channels, init);
  linear_init(*iw_, cfg.channels, init);
}

Tensor ProjectionHeads::point_head(Graph& g, Tensor point_features) const {
  return g.l2_normalize_rows(
      g.add_rowvec(g.matmul(point_features, g.param(*pw_)), g.param(*pb_)));
}

Tensor ProjectionHeads::image_head(Graph& g, Tensor image_features, int grid_h,
                                   int grid_w) const {
  Tensor conv =
      g.add_rowvec(g.matmul(image_features, g.param(*iw_)), g.param(*ib_));
  Tensor up = g.bilinear_upsample(conv, grid_h, grid_w, cfg_.upsample_ratio);
  return g.l2_normalize_rows(up);
}

}  // namespace seal::nn
