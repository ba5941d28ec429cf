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

#include "seal/geom.hpp"
#include "seal/image.hpp"
#include "seal/labelmap.hpp"

namespace seal::synth {

// Surface classes of the synthetic world.
inline constexpr uint16_t kClassGround = 0;
inline constexpr uint16_t kClassVehicle = 1;
inline constexpr uint16_t kClassPole = 2;
inline constexpr uint16_t kClassWall = 3;
inline constexpr int kNumClasses = 4;

// Background (ground and sky) shares instance id 0; objects count from 1.
inline constexpr uint32_t kBackgroundInstance = 0;

// Sensor rig, fixed relative to the ego frame.
inline constexpr double kLidarHeight = 1.8;
inline constexpr int kLidarBeams = 16;
inline constexpr double kMinElevationDeg = -24.0;
inline constexpr double kMaxElevationDeg = 2.0;

struct EgoPose {
  double x = 0, y = 0, yaw = 0;
};

struct SceneSpec {
  uint64_t seed = 0;
  double extent = 40.0;  // side length of the square world, meters
  int num_vehicles = 4;
  int num_poles = 3;
  int num_walls = 2;
  std::vector<EgoPose> trajectory;  // one pose per tick
};

void validate(const SceneSpec& spec);

// Straight drive through the world with a gentle heading change.
std::vector<EgoPose> default_trajectory(int ticks, double extent);

// Key=value capture of a SceneSpec, one `pose` line per tick.
void save_scene_spec(const std::string& path, const SceneSpec& spec);
SceneSpec load_scene_spec(const std::string& path);

enum class ObjectShape { kBox, kCylinder };

struct SceneObject {
  ObjectShape shape = ObjectShape::kBox;
  uint16_t cls = kClassVehicle;
  uint32_t instance = 0;
  Eigen::Vector3d center{0, 0, 0};  // box center / cylinder axis base
  Eigen::Vector3d half{0, 0, 0};    // box half extents
  double radius = 0, height = 0;    // cylinder only
};

struct Scene {
  SceneSpec spec;
  std::vector<SceneObject> objects;
};

// Axis-aligned bounds of an object footprint, for overlap checks.
void object_aabb(const SceneObject& obj, Eigen::Vector3d& lo,
                 Eigen::Vector3d& hi);

// Deterministic world synthesis: rejection-sampled non-overlapping objects
// kept clear of the trajectory. Throws runtime_error when placement fails
// after bounded retries.
Scene gen_scene(const SceneSpec& spec);

// Rig transforms.
geom::RigidTransform ego_to_global(const EgoPose& pose);
geom::RigidTransform lidar_to_ego();
geom::RigidTransform ego_to_camera();
geom::CameraIntrinsics default_intrinsics();

// Projection chain for a lidar sweep captured at tick tl viewed by the
// camera at tick tc.
geom::CalibrationChain rig_chain(const EgoPose& lidar_pose,
                                 const EgoPose& camera_pose,
                                 const geom::CameraIntrinsics& k);

struct LidarSweep {
  geom::PointCloud cloud;           // sensor frame, labeled, intensity feature
  std::vector<uint32_t> instances;  // per point
  std::vector<int> rings;           // beam index per point
};

// First-hit ray cast over a beams x azimuth_steps polar grid.
LidarSweep simulate_lidar(const Scene& scene, const EgoPose& pose, int beams,
                          int azimuth_steps, double max_range);

struct RenderResult {
  Image image;
  LabelMap labels;                  // connected components of instances
  std::vector<uint32_t> instances;  // per pixel, row-major
};

// Per-pixel ray cast: class palette shaded by depth, plus the instance
// component map.
RenderResult render_camera(const Scene& scene,
                           const geom::CalibrationChain& chain);

struct AugmentParams {
  bool rotate = true;       // z-rotation by a uniform angle
  bool flip = true;         // 50% point flip across x or y
  bool cuboid_drop = true;  // random cuboid removal with a pair floor
  bool image_flip = true;   // 50% horizontal image flip
  bool crop = true;         // random crop, resized back to full size
};

struct AugmentRecord {
  double angle = 0.0;
  int flip_axis = -1;  // -1 none, 0 x, 1 y
  bool dropped_cuboid = false;
  Eigen::Vector3d cuboid_lo{0, 0, 0};
  Eigen::Vector3d cuboid_hi{0, 0, 0};
  bool flipped_image = false;
  int crop_x = 0, crop_y = 0, crop_w = 0, crop_h = 0;
};

struct AugmentedPair {
  geom::PointCloud cloud;
  Image image;
  LabelMap labels;
  geom::PairSet pairs;  // superpixel field re-sampled from `labels`
  AugmentRecord record;
};

// Minimum pair count every destructive step must keep, measured against
// the pre-augmentation pair count: the fixed 1024 floor, or three quarters
// of the original pairs when fewer than that exist.
int pair_floor(int pairs_before);

// Joint point/image augmentation with pair bookkeeping. Destructive steps
// resample until the floor holds and are skipped after bounded retries.
AugmentedPair augment_pair(const geom::PointCloud& cloud, const Image& image,
                           const LabelMap& labels, const geom::PairSet& pairs,
                           const AugmentParams& params, uint64_t seed);

// Replays the point-side transforms of a record onto another cloud so a
// temporal partner stays geometrically consistent.
geom::PointCloud apply_point_record(const geom::PointCloud& cloud,
                                    const AugmentRecord& record);

enum class CorruptionKind { kBeamDrop, kJitter, kPointDrop };

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kJitter;
  int level = 1;  // 1..3
};

void validate(const CorruptionSpec& spec);

CorruptionKind parse_corruption_kind(const std::string& name);
std::string corruption_kind_name(CorruptionKind kind);

// Per-level parameters.
double jitter_sigma(int level);       // 0.02 / 0.05 / 0.10 m
double beam_drop_probability(int level);  // 0.25 / 0.50 / 0.75
double point_drop_fraction(int level);    // 0.10 / 0.30 / 0.50

// Individual corruptions; corrupt() dispatches on the spec.
geom::PointCloud jitter_points(const geom::PointCloud& cloud, double sigma,
                               uint64_t seed);
geom::PointCloud drop_points(const geom::PointCloud& cloud, double fraction,
                             uint64_t seed);
// Rings are recovered from per-point elevation against the fixed beam fan.
geom::PointCloud drop_beams(const geom::PointCloud& cloud, double probability,
                            uint64_t seed);

geom::PointCloud corrupt(const geom::PointCloud& cloud,
                         const CorruptionSpec& spec, uint64_t seed);

}  // namespace seal::synth
