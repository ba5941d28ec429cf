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

#include <vector>

#include "seal/nn.hpp"
#include "seal/partition.hpp"

namespace seal::objectives {

struct LossConfig {
  double temperature = 0.07;
  double w_vfm = 1.0;
  double w_tmp = 1.0;
  double w_p2s = 1.0;
  int temporal_offset = 1;  // frame gap for the temporal pair
};

void validate(const LossConfig& cfg);

// Softmax contrast between M paired unit rows: row i of q scores against
// every row of k with row i as the positive. Stabilized log-sum-exp form,
// averaged over rows.
nn::Tensor info_nce(nn::Graph& g, nn::Tensor q, nn::Tensor k,
                    double temperature);

// Cross-modal grouped contrast. Both modalities are mean-pooled over a
// shared group id space (-1 skips a row), pooled rows are renormalized,
// and the pixel side anchors the contrast against the point side. Every
// group must be populated on both sides.
nn::Tensor loss_vfm(nn::Graph& g, nn::Tensor pixel_embed,
                    const std::vector<int>& group_of_pixel,
                    nn::Tensor point_embed,
                    const std::vector<int>& group_of_point, int num_groups,
                    double temperature);

// Symmetric cross-frame consistency. Targets are per-segment means of the
// other frame; each point scores against all target means, per-point terms
// are averaged within their segment, and the result is averaged over
// segments. Only segment ids present in both frames participate; returns
// the sum of both directions.
nn::Tensor loss_temporal(nn::Graph& g, nn::Tensor feats_a,
                         const partition::SegmentLabels& seg_a,
                         nn::Tensor feats_b,
                         const partition::SegmentLabels& seg_b,
                         double temperature);

// Points pulled toward their own segment's max-pooled cluster row, scored
// against all cluster rows. Noise points are excluded; per-point terms are
// averaged within segments and then over segments.
nn::Tensor loss_p2s(nn::Graph& g, nn::Tensor feats,
                    const partition::SegmentLabels& seg, double temperature);

// w_vfm * vfm + w_tmp * tmp + w_p2s * p2s.
nn::Tensor total_loss(nn::Graph& g, const LossConfig& cfg, nn::Tensor vfm,
                      nn::Tensor tmp, nn::Tensor p2s);

}  // namespace seal::objectives
