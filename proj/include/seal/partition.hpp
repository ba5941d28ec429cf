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

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "seal/geom.hpp"
#include "seal/image.hpp"
#include "seal/labelmap.hpp"

namespace seal::partition {

struct SlicParams {
  int n_segments = 150;
  double compactness = 10.0;
  int iters = 10;
  uint64_t seed = 0;
};

// Local k-means over (r, g, b, x, y) started from a regular seed grid,
// distance d = d_color + (compactness / S) * d_xy, followed by a
// connectivity pass that absorbs undersized fragments. Every pixel ends
// up labeled; the run is deterministic.
LabelMap slic(const Image& img, const SlicParams& params);

inline constexpr uint32_t kNoSuperpoint = 0xffffffffu;

struct SuperpointAssignment {
  std::vector<uint32_t> point_to_superpoint;  // kNoSuperpoint if unmatched
  int num_superpoints = 0;
  std::vector<uint16_t> kept_superpixels;  // superpoint id -> superpixel id
};

// Groups matched points by superpixel id, dropping superpixels with fewer
// than min_pair_count matches and relabeling survivors contiguously in
// ascending superpixel order.
SuperpointAssignment superpoints_from_pairs(const geom::PairSet& pairs,
                                            int n_points, int min_pair_count);

struct PlaneModel {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // unit length
  double offset = 0.0;  // plane is normal . p + offset = 0
};

struct PlaneFit {
  PlaneModel plane;
  double inlier_threshold = 0.0;
  std::vector<char> inlier_mask;  // one per input point
  int inlier_count = 0;
};

// Best-of-iters three-point hypotheses scored by inlier count (ties by
// lower mean inlier residual), then a least-squares refit on the winning
// inliers. The returned mask is recomputed against the refit plane.
PlaneFit ransac_plane(const std::vector<Eigen::Vector3d>& points, int iters,
                      double inlier_threshold, uint64_t seed);

inline constexpr int kNoiseSegment = -1;

struct SegmentLabels {
  std::vector<int> labels;  // kNoiseSegment or [0, num_segments)
  int num_segments = 0;
};

// Density clustering with exact Euclidean eps-neighborhoods (a point
// belongs to its own neighborhood). Core points flood in index order;
// border points join the first core neighbor in index order; the rest is
// noise.
SegmentLabels cluster(const std::vector<Eigen::Vector3d>& points, double eps,
                      int min_pts);

// Slices aggregated segment labels back to per-frame views. Ids stay
// shared across views: the same instance keeps the same id in each frame.
std::vector<SegmentLabels> segment_views(const geom::AggregatedCloud& agg,
                                         const SegmentLabels& aggregated);

}  // namespace seal::partition
