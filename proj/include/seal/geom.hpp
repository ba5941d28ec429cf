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
#include <optional>
#include <string>
#include <vector>

#include "seal/common.hpp"
#include "seal/labelmap.hpp"

namespace seal::geom {

// Points closer to the image plane than this are treated as invisible.
inline constexpr double kDepthEpsilon = 1e-6;

// SE(3) element kept as rotation + translation and composed analytically.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

RigidTransform identity_transform();
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& t);

inline Eigen::Vector3d apply(const RigidTransform& t, const Eigen::Vector3d& p) {
  return t.rotation * p + t.translation;
}

// True when rotation^T rotation = I within tol and det(rotation) = +1.
bool is_rigid(const RigidTransform& t, double tol = 1e-9);

RigidTransform rotation_z(double angle);
RigidTransform rotation_axis_angle(const Eigen::Vector3d& axis, double angle);

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
};

void validate(const CameraIntrinsics& k);

// Full lidar-to-pixel chain for one camera: the lidar capture and the
// camera capture each carry their own ego pose, bridged through the
// global frame.
struct CalibrationChain {
  RigidTransform lidar_to_ego_tl;
  RigidTransform ego_tl_to_global;
  RigidTransform global_to_ego_tc;
  RigidTransform ego_tc_to_camera;
  CameraIntrinsics intrinsics;
};

struct Projection {
  double u = 0, v = 0, depth = 0;
};

// Pinhole projection of a lidar-frame point through the full chain.
// Empty when depth <= kDepthEpsilon or (u,v) leaves [0,w) x [0,h).
std::optional<Projection> project_point(const CalibrationChain& chain,
                                        const Eigen::Vector3d& p);

struct PointCloud {
  std::vector<Eigen::Vector3d> positions;
  int feature_dim = 0;
  std::vector<double> features;  // size() * feature_dim, row-major
  std::vector<uint16_t> labels;  // empty, or one per point

  int size() const { return static_cast<int>(positions.size()); }
  bool has_labels() const { return !labels.empty(); }
};

void validate(const PointCloud& cloud);

struct FrameSequence {
  std::vector<PointCloud> frames;
  std::vector<RigidTransform> ego_poses;  // lidar-ego to global, per frame
  std::vector<double> timestamps;         // strictly increasing
};

struct Pair {
  uint32_t point_index = 0;
  int px = 0, py = 0;
  uint16_t superpixel = 0;
};

using PairSet = std::vector<Pair>;

// One pair per visible point whose landing pixel carries a superpixel id.
// Pixel coordinates come from flooring (u, v).
PairSet build_pairs(const PointCloud& cloud, const CalibrationChain& chain,
                    const LabelMap& superpixels);

struct AggregatedCloud {
  PointCloud cloud;                 // positions in the global frame
  std::vector<uint32_t> frame_of;   // per aggregated point
  std::vector<uint32_t> local_of;   // per aggregated point
  std::vector<size_t> offsets;      // frames + 1 entries
};

// Concatenates frames into the global frame, preserving per-frame order.
AggregatedCloud aggregate_frames(const FrameSequence& seq);

// Plain-text calibration file: an [intrinsics] section plus one
// [extrinsic.<name>] section per chain link, '#' comments allowed.
CalibrationChain load_calibration(const std::string& path);
void save_calibration(const std::string& path, const CalibrationChain& chain);

// Binary point cloud container (magic "SEALPC1\n", little-endian payload,
// f32 positions and features, u16 labels behind a has-labels byte).
PointCloud load_point_cloud(const std::string& path);
void save_point_cloud(const std::string& path, const PointCloud& cloud);

}  // namespace seal::geom
