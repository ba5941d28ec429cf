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
#include "seal/objectives.hpp"

#include <numeric>
#include <stdexcept>

namespace seal::objectives {

using nn::Graph;
using nn::PoolMode;
using nn::Tensor;

void validate(const LossConfig& cfg) {
  if (!(cfg.temperature > 0))
    throw std::invalid_argument("loss config: temperature must be positive");
  if (cfg.w_vfm < 0 || cfg.w_tmp < 0 || cfg.w_p2s < 0)
    throw std::invalid_argument("loss config: weights must be nonnegative");
  if (cfg.temporal_offset < 1)
    throw std::invalid_argument("loss config: temporal offset must be >= 1");
}

Tensor info_nce(Graph& g, Tensor q, Tensor k, double temperature) {
  if (!(temperature > 0))
    throw std::invalid_argument("info_nce: temperature must be positive");
  if (q.rows() != k.rows())
    throw std::invalid_argument("info_nce: row counts differ");
  Tensor logits = g.scale(g.matmul_nt(q, k), 1.0 / temperature);
  std::vector<int> diag(q.rows());
  std::iota(diag.begin(), diag.end(), 0);
  return g.mean_all(
      g.sub(g.log_sum_exp_rows(logits), g.gather_cols(logits, diag)));
}

Tensor loss_vfm(Graph& g, Tensor pixel_embed,
                const std::vector<int>& group_of_pixel, Tensor point_embed,
                const std::vector<int>& group_of_point, int num_groups,
                double temperature) {
  if (num_groups < 1)
    throw std::invalid_argument("loss_vfm: no surviving groups");
  Tensor q = g.l2_normalize_rows(
      g.pool_by_group(pixel_embed, group_of_pixel, num_groups,
                      PoolMode::kMean));
  Tensor k = g.l2_normalize_rows(
      g.pool_by_group(point_embed, group_of_point, num_groups,
                      PoolMode::kMean));
  return info_nce(g, q, k, temperature);
}

namespace {

// Per-point softmax terms against the target rows, averaged within each
// anchor segment and then over segments. anchor_group entries are compact
// ids covering [0, num_groups).
Tensor grouped_contrast(Graph& g, Tensor anchors,
                        const std::vector<int>& anchor_group, Tensor targets,
                        int num_groups, double temperature) {
  Tensor logits = g.scale(g.matmul_nt(anchors, targets), 1.0 / temperature);
  Tensor terms =
      g.sub(g.log_sum_exp_rows(logits), g.gather_cols(logits, anchor_group));
  Tensor per_segment =
      g.pool_by_group(terms, anchor_group, num_groups, PoolMode::kMean);
  return g.mean_all(per_segment);
}

// Indices and compact segment ids of the rows whose segment id maps to a
// shared slot; remap[id] is the compact id or -1.
void collect_anchors(const partition::SegmentLabels& seg,
                     const std::vector<int>& remap, std::vector<int>& rows,
                     std::vector<int>& compact) {
  rows.clear();
  compact.clear();
  for (size_t i = 0; i < seg.labels.size(); ++i) {
    int id = seg.labels[i];
    if (id < 0 || remap[id] < 0) continue;
    rows.push_back(static_cast<int>(i));
    compact.push_back(remap[id]);
  }
}

Tensor directional_temporal(Graph& g, Tensor anchors_feats,
                            const partition::SegmentLabels& anchor_seg,
                            Tensor target_feats,
                            const partition::SegmentLabels& target_seg,
                            const std::vector<int>& remap, int num_shared,
                            double temperature) {
  std::vector<int> target_group(target_seg.labels.size(), -1);
  for (size_t i = 0; i < target_seg.labels.size(); ++i) {
    int id = target_seg.labels[i];
    if (id >= 0 && remap[id] >= 0) target_group[i] = remap[id];
  }
  Tensor targets = g.pool_by_group(target_feats, target_group, num_shared,
                                   PoolMode::kMean);
  std::vector<int> rows, compact;
  collect_anchors(anchor_seg, remap, rows, compact);
  Tensor anchors = g.select_rows(anchors_feats, rows);
  return grouped_contrast(g, anchors, compact, targets, num_shared,
                          temperature);
}

}  // namespace

Tensor loss_temporal(Graph& g, Tensor feats_a,
                     const partition::SegmentLabels& seg_a, Tensor feats_b,
                     const partition::SegmentLabels& seg_b,
                     double temperature) {
  if (!(temperature > 0))
    throw std::invalid_argument("loss_temporal: temperature must be positive");
  if (seg_a.labels.size() != static_cast<size_t>(feats_a.rows()) ||
      seg_b.labels.size() != static_cast<size_t>(feats_b.rows()))
    throw std::invalid_argument("loss_temporal: one segment id per row");
  int max_id = std::max(seg_a.num_segments, seg_b.num_segments);
  std::vector<int> count_a(max_id, 0), count_b(max_id, 0);
  for (int id : seg_a.labels)
    if (id >= 0) count_a[id]++;
  for (int id : seg_b.labels)
    if (id >= 0) count_b[id]++;
  std::vector<int> remap(max_id, -1);
  int num_shared = 0;
  for (int id = 0; id < max_id; ++id)
    if (count_a[id] > 0 && count_b[id] > 0) remap[id] = num_shared++;
  if (num_shared == 0)
    throw std::invalid_argument("loss_temporal: no shared segments");

  Tensor forward = directional_temporal(g, feats_a, seg_a, feats_b, seg_b,
                                        remap, num_shared, temperature);
  Tensor backward = directional_temporal(g, feats_b, seg_b, feats_a, seg_a,
                                         remap, num_shared, temperature);
  return g.add(forward, backward);
}

Tensor loss_p2s(Graph& g, Tensor feats, const partition::SegmentLabels& seg,
                double temperature) {
  if (!(temperature > 0))
    throw std::invalid_argument("loss_p2s: temperature must be positive");
  if (seg.labels.size() != static_cast<size_t>(feats.rows()))
    throw std::invalid_argument("loss_p2s: one segment id per row");
  std::vector<int> count(seg.num_segments, 0);
  for (int id : seg.labels)
    if (id >= 0) count[id]++;
  std::vector<int> remap(seg.num_segments, -1);
  int num_present = 0;
  for (int id = 0; id < seg.num_segments; ++id)
    if (count[id] > 0) remap[id] = num_present++;
  if (num_present == 0)
    throw std::invalid_argument("loss_p2s: no populated segments");

  std::vector<int> cluster_group(seg.labels.size(), -1);
  for (size_t i = 0; i < seg.labels.size(); ++i)
    if (seg.labels[i] >= 0) cluster_group[i] = remap[seg.labels[i]];
  Tensor clusters =
      g.pool_by_group(feats, cluster_group, num_present, PoolMode::kMax);

  std::vector<int> rows, compact;
  collect_anchors(seg, remap, rows, compact);
  Tensor anchors = g.select_rows(feats, rows);
  return grouped_contrast(g, anchors, compact, clusters, num_present,
                          temperature);
}

Tensor total_loss(Graph& g, const LossConfig& cfg, Tensor vfm, Tensor tmp,
                  Tensor p2s) {
  validate(cfg);
  return g.add(g.add(g.scale(vfm, cfg.w_vfm), g.scale(tmp, cfg.w_tmp)),
               g.scale(p2s, cfg.w_p2s));
}

}  // namespace seal::objectives
