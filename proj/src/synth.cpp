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
#include "seal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "seal/common.hpp"

namespace seal::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRayEpsilon = 1e-9;

constexpr double kAlbedo[kNumClasses] = {0.35, 0.80, 0.95, 0.55};
constexpr double kPalette[kNumClasses][3] = {{0.34, 0.36, 0.33},
                                             {0.20, 0.45, 0.85},
                                             {0.90, 0.85, 0.20},
                                             {0.75, 0.30, 0.25}};
constexpr double kSkyColor[3] = {0.62, 0.78, 0.95};

}  // namespace

void validate(const SceneSpec& spec) {
  if (!(spec.extent > 0))
    throw std::invalid_argument("scene spec: extent must be positive");
  if (spec.num_vehicles < 0 || spec.num_poles < 0 || spec.num_walls < 0)
    throw std::invalid_argument("scene spec: negative object count");
  if (spec.trajectory.size() < 2)
    throw std::invalid_argument("scene spec: trajectory needs >= 2 poses");
}

std::vector<EgoPose> default_trajectory(int ticks, double extent) {
  if (ticks < 2)
    throw std::invalid_argument("trajectory: need at least two ticks");
  std::vector<EgoPose> poses;
  double x = -extent * 0.25, y = -extent * 0.05, yaw = 0.0;
  for (int i = 0; i < ticks; ++i) {
    poses.push_back({x, y, yaw});
    x += 1.5 * std::cos(yaw);
    y += 1.5 * std::sin(yaw);
    yaw += 0.03;
  }
  return poses;
}

void save_scene_spec(const std::string& path, const SceneSpec& spec) {
  std::ofstream out(path);
  if (!out) throw IoError("scene spec: cannot write " + path);
  char buf[160];
  out << "seed = " << spec.seed << "\n";
  std::snprintf(buf, sizeof buf, "extent = %.17g\n", spec.extent);
  out << buf;
  out << "vehicles = " << spec.num_vehicles << "\n";
  out << "poles = " << spec.num_poles << "\n";
  out << "walls = " << spec.num_walls << "\n";
  for (const auto& p : spec.trajectory) {
    std::snprintf(buf, sizeof buf, "pose = %.17g %.17g %.17g\n", p.x, p.y,
                  p.yaw);
    out << buf;
  }
  if (!out) throw IoError("scene spec: write failure on " + path);
}

SceneSpec load_scene_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("scene spec: cannot open " + path);
  SceneSpec spec;
  bool have_seed = false, have_extent = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string key, eq;
    if (!(ls >> key)) continue;
    if (!(ls >> eq) || eq != "=")
      throw IoError("scene spec: malformed line " + std::to_string(lineno) +
                    " in " + path);
    auto fail = [&]() {
      throw IoError("scene spec: bad value at line " + std::to_string(lineno) +
                    " in " + path);
    };
    if (key == "seed") {
      if (!(ls >> spec.seed)) fail();
      have_seed = true;
    } else if (key == "extent") {
      if (!(ls >> spec.extent)) fail();
      have_extent = true;
    } else if (key == "vehicles") {
      if (!(ls >> spec.num_vehicles)) fail();
    } else if (key == "poles") {
      if (!(ls >> spec.num_poles)) fail();
    } else if (key == "walls") {
      if (!(ls >> spec.num_walls)) fail();
    } else if (key == "pose") {
      EgoPose p;
      if (!(ls >> p.x >> p.y >> p.yaw)) fail();
      spec.trajectory.push_back(p);
    } else {
      throw IoError("scene spec: unknown key '" + key + "' in " + path);
    }
  }
  if (!have_seed || !have_extent)
    throw IoError("scene spec: missing seed or extent in " + path);
  try {
    validate(spec);
  } catch (const std::invalid_argument& e) {
    throw IoError("scene spec: " + std::string(e.what()) + " in " + path);
  }
  return spec;
}

void object_aabb(const SceneObject& obj, Eigen::Vector3d& lo,
                 Eigen::Vector3d& hi) {
  if (obj.shape == ObjectShape::kBox) {
    lo = obj.center - obj.half;
    hi = obj.center + obj.half;
  } else {
    lo = {obj.center.x() - obj.radius, obj.center.y() - obj.radius, 0.0};
    hi = {obj.center.x() + obj.radius, obj.center.y() + obj.radius,
          obj.height};
  }
}

namespace {

bool aabb_overlap(const Eigen::Vector3d& lo1, const Eigen::Vector3d& hi1,
                  const Eigen::Vector3d& lo2, const Eigen::Vector3d& hi2) {
  for (int a = 0; a < 3; ++a)
    if (std::max(lo1[a], lo2[a]) >= std::min(hi1[a], hi2[a])) return false;
  return true;
}

bool clear_of_trajectory(const SceneSpec& spec, const Eigen::Vector3d& lo,
                         const Eigen::Vector3d& hi) {
  constexpr double kClearance = 1.5;
  for (const auto& p : spec.trajectory) {
    if (p.x > lo.x() - kClearance && p.x < hi.x() + kClearance &&
        p.y > lo.y() - kClearance && p.y < hi.y() + kClearance)
      return false;
  }
  return true;
}

}  // namespace

Scene gen_scene(const SceneSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  Scene scene;
  scene.spec = spec;
  uint32_t next_instance = 1;
  const double hw = spec.extent / 2.0 - 0.5;

  auto place = [&](uint16_t cls) {
    constexpr int kAttempts = 100;
    constexpr double kSpacing = 0.4;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      SceneObject obj;
      obj.cls = cls;
      if (cls == kClassVehicle) {
        obj.shape = ObjectShape::kBox;
        obj.half = {rng.uniform(0.8, 1.2), rng.uniform(1.8, 2.6),
                    rng.uniform(0.6, 0.9)};
      } else if (cls == kClassWall) {
        obj.shape = ObjectShape::kBox;
        obj.half = {rng.uniform(2.0, 4.0), rng.uniform(0.12, 0.2),
                    rng.uniform(1.0, 1.6)};
        if (rng.uniform() < 0.5) std::swap(obj.half.x(), obj.half.y());
      } else {
        obj.shape = ObjectShape::kCylinder;
        obj.radius = rng.uniform(0.1, 0.2);
        obj.height = rng.uniform(3.0, 5.0);
      }
      double rx = obj.shape == ObjectShape::kBox ? obj.half.x() : obj.radius;
      double ry = obj.shape == ObjectShape::kBox ? obj.half.y() : obj.radius;
      double cx = rng.uniform(-(hw - rx), hw - rx);
      double cy = rng.uniform(-(hw - ry), hw - ry);
      if (obj.shape == ObjectShape::kBox)
        obj.center = {cx, cy, obj.half.z()};
      else
        obj.center = {cx, cy, 0.0};

      Eigen::Vector3d lo, hi;
      object_aabb(obj, lo, hi);
      Eigen::Vector3d pad{kSpacing, kSpacing, 0.0};
      bool ok = clear_of_trajectory(spec, lo, hi);
      for (size_t i = 0; ok && i < scene.objects.size(); ++i) {
        Eigen::Vector3d plo, phi;
        object_aabb(scene.objects[i], plo, phi);
        if (aabb_overlap(lo - pad, hi + pad, plo, phi)) ok = false;
      }
      if (!ok) continue;
      obj.instance = next_instance++;
      scene.objects.push_back(obj);
      return;
    }
    throw std::runtime_error("scene generation: object placement failed");
  };

  for (int i = 0; i < spec.num_vehicles; ++i) place(kClassVehicle);
  for (int i = 0; i < spec.num_poles; ++i) place(kClassPole);
  for (int i = 0; i < spec.num_walls; ++i) place(kClassWall);
  return scene;
}

geom::RigidTransform ego_to_global(const EgoPose& pose) {
  geom::RigidTransform t = geom::rotation_z(pose.yaw);
  t.translation = {pose.x, pose.y, 0.0};
  return t;
}

geom::RigidTransform lidar_to_ego() {
  geom::RigidTransform t;
  t.rotation = Eigen::Matrix3d::Identity();
  t.translation = {0.0, 0.0, kLidarHeight};
  return t;
}

geom::RigidTransform ego_to_camera() {
  geom::RigidTransform t;
  // Camera: x right, y down, z forward; mounted at (0.2, 0, 1.6) on the ego.
  t.rotation << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  t.translation = -(t.rotation * Eigen::Vector3d{0.2, 0.0, 1.6});
  return t;
}

geom::CameraIntrinsics default_intrinsics() {
  return {240.0, 240.0, 208.0, 112.0, 416, 224};
}

geom::CalibrationChain rig_chain(const EgoPose& lidar_pose,
                                 const EgoPose& camera_pose,
                                 const geom::CameraIntrinsics& k) {
  geom::CalibrationChain chain;
  chain.lidar_to_ego_tl = lidar_to_ego();
  chain.ego_tl_to_global = ego_to_global(lidar_pose);
  chain.global_to_ego_tc = geom::inverse(ego_to_global(camera_pose));
  chain.ego_tc_to_camera = ego_to_camera();
  chain.intrinsics = k;
  return chain;
}

namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  uint16_t cls = 0;
  uint32_t instance = kBackgroundInstance;
  bool valid = false;
};

bool ray_ground(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                double extent, double& t) {
  if (std::abs(d.z()) < 1e-12) return false;
  double tt = -o.z() / d.z();
  if (tt <= kRayEpsilon) return false;
  double x = o.x() + tt * d.x(), y = o.y() + tt * d.y();
  if (std::abs(x) > extent / 2 || std::abs(y) > extent / 2) return false;
  t = tt;
  return true;
}

bool ray_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
             const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
             double& t) {
  double tnear = -std::numeric_limits<double>::infinity();
  double tfar = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double t1 = (lo[a] - o[a]) / d[a];
    double t2 = (hi[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    tnear = std::max(tnear, t1);
    tfar = std::min(tfar, t2);
    if (tnear > tfar) return false;
  }
  if (tnear <= kRayEpsilon) return false;
  t = tnear;
  return true;
}

bool ray_cylinder(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                  const SceneObject& obj, double& t) {
  double dx = d.x(), dy = d.y();
  double a = dx * dx + dy * dy;
  if (a < 1e-16) return false;
  double ox = o.x() - obj.center.x(), oy = o.y() - obj.center.y();
  double b = 2.0 * (dx * ox + dy * oy);
  double c = ox * ox + oy * oy - obj.radius * obj.radius;
  double disc = b * b - 4 * a * c;
  if (disc < 0) return false;
  double sq = std::sqrt(disc);
  for (double tt : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
    if (tt <= kRayEpsilon) continue;
    double z = o.z() + tt * d.z();
    if (z >= 0.0 && z <= obj.height) {
      t = tt;
      return true;
    }
  }
  return false;
}

Hit cast_ray(const Scene& scene, const Eigen::Vector3d& o,
             const Eigen::Vector3d& d) {
  Hit best;
  double t;
  if (ray_ground(o, d, scene.spec.extent, t)) {
    best = {t, kClassGround, kBackgroundInstance, true};
  }
  for (const auto& obj : scene.objects) {
    bool hit;
    if (obj.shape == ObjectShape::kBox) {
      Eigen::Vector3d lo, hi;
      object_aabb(obj, lo, hi);
      hit = ray_box(o, d, lo, hi, t);
    } else {
      hit = ray_cylinder(o, d, obj, t);
    }
    if (hit && t < best.t) best = {t, obj.cls, obj.instance, true};
  }
  return best;
}

}  // namespace

LidarSweep simulate_lidar(const Scene& scene, const EgoPose& pose, int beams,
                          int azimuth_steps, double max_range) {
  if (beams < 1 || azimuth_steps < 1)
    throw std::invalid_argument("lidar: beams and azimuth steps must be >= 1");
  LidarSweep sweep;
  sweep.cloud.feature_dim = 1;
  if (max_range <= 0) return sweep;

  geom::RigidTransform sensor =
      geom::compose(ego_to_global(pose), lidar_to_ego());
  Eigen::Vector3d origin = sensor.translation;
  double min_e = kMinElevationDeg * kPi / 180.0;
  double max_e = kMaxElevationDeg * kPi / 180.0;
  for (int b = 0; b < beams; ++b) {
    double elev =
        beams == 1 ? (min_e + max_e) / 2
                   : min_e + (max_e - min_e) * b / (beams - 1);
    double ce = std::cos(elev), se = std::sin(elev);
    for (int a = 0; a < azimuth_steps; ++a) {
      double az = 2.0 * kPi * a / azimuth_steps;
      Eigen::Vector3d dir_sensor{ce * std::cos(az), ce * std::sin(az), se};
      Hit hit = cast_ray(scene, origin, sensor.rotation * dir_sensor);
      if (!hit.valid || hit.t > max_range) continue;
      sweep.cloud.positions.push_back(hit.t * dir_sensor);
      sweep.cloud.features.push_back(kAlbedo[hit.cls] *
                                     (1.0 - 0.5 * hit.t / max_range));
      sweep.cloud.labels.push_back(hit.cls);
      sweep.instances.push_back(hit.instance);
      sweep.rings.push_back(b);
    }
  }
  return sweep;
}

RenderResult render_camera(const Scene& scene,
                           const geom::CalibrationChain& chain) {
  geom::validate(chain.intrinsics);
  const auto& k = chain.intrinsics;
  geom::RigidTransform cam_from_global =
      geom::compose(chain.ego_tc_to_camera, chain.global_to_ego_tc);
  geom::RigidTransform global_from_cam = geom::inverse(cam_from_global);
  Eigen::Vector3d origin = global_from_cam.translation;

  RenderResult out;
  out.image.width = k.width;
  out.image.height = k.height;
  out.image.rgb.resize(static_cast<size_t>(k.width) * k.height * 3);
  out.instances.resize(static_cast<size_t>(k.width) * k.height);

  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      Eigen::Vector3d dir_cam{(u + 0.5 - k.cx) / k.fx,
                              (v + 0.5 - k.cy) / k.fy, 1.0};
      dir_cam.normalize();
      Hit hit = cast_ray(scene, origin, global_from_cam.rotation * dir_cam);
      double* px = out.image.pixel(u, v);
      size_t idx = static_cast<size_t>(v) * k.width + u;
      if (hit.valid) {
        double shade = 0.45 + 0.55 * std::exp(-hit.t / 25.0);
        for (int c = 0; c < 3; ++c) px[c] = kPalette[hit.cls][c] * shade;
        out.instances[idx] = hit.instance;
      } else {
        for (int c = 0; c < 3; ++c) px[c] = kSkyColor[c];
        out.instances[idx] = kBackgroundInstance;
      }
    }
  }

  // Connected components (4-neighborhood) of the instance raster, ids in
  // first-visit raster order.
  out.labels.width = k.width;
  out.labels.height = k.height;
  out.labels.ids.assign(static_cast<size_t>(k.width) * k.height,
                        kUnlabeledId);
  int next_id = 0;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      if (out.labels.at(x, y) != kUnlabeledId) continue;
      uint32_t inst = out.instances[static_cast<size_t>(y) * k.width + x];
      if (next_id >= kUnlabeledId)
        throw std::runtime_error("render: segment id space exhausted");
      uint16_t id = static_cast<uint16_t>(next_id++);
      out.labels.at(x, y) = id;
      queue.push_back({x, y});
      while (!queue.empty()) {
        auto [qx, qy] = queue.front();
        queue.pop_front();
        const int nx[4] = {qx - 1, qx + 1, qx, qx};
        const int ny[4] = {qy, qy, qy - 1, qy + 1};
        for (int n = 0; n < 4; ++n) {
          if (nx[n] < 0 || nx[n] >= k.width || ny[n] < 0 || ny[n] >= k.height)
            continue;
          if (out.labels.at(nx[n], ny[n]) != kUnlabeledId) continue;
          if (out.instances[static_cast<size_t>(ny[n]) * k.width + nx[n]] !=
              inst)
            continue;
          out.labels.at(nx[n], ny[n]) = id;
          queue.push_back({nx[n], ny[n]});
        }
      }
    }
  }
  out.labels.num_segments = next_id;
  return out;
}

int pair_floor(int pairs_before) {
  return std::min(1024, (3 * pairs_before + 3) / 4);
}

namespace {

geom::PointCloud filter_cloud(const geom::PointCloud& cloud,
                              const std::vector<char>& keep,
                              std::vector<int>* old_to_new) {
  geom::PointCloud out;
  out.feature_dim = cloud.feature_dim;
  if (old_to_new) old_to_new->assign(cloud.size(), -1);
  for (int i = 0; i < cloud.size(); ++i) {
    if (!keep[i]) continue;
    if (old_to_new) (*old_to_new)[i] = out.size();
    out.positions.push_back(cloud.positions[i]);
    for (int f = 0; f < cloud.feature_dim; ++f)
      out.features.push_back(
          cloud.features[static_cast<size_t>(i) * cloud.feature_dim + f]);
    if (cloud.has_labels()) out.labels.push_back(cloud.labels[i]);
  }
  return out;
}

void rotate_flip(geom::PointCloud& cloud, double angle, int flip_axis) {
  double c = std::cos(angle), s = std::sin(angle);
  for (auto& p : cloud.positions) {
    double x = c * p.x() - s * p.y();
    double y = s * p.x() + c * p.y();
    p.x() = x;
    p.y() = y;
    if (flip_axis == 0) p.x() = -p.x();
    if (flip_axis == 1) p.y() = -p.y();
  }
}

bool in_cuboid(const Eigen::Vector3d& p, const Eigen::Vector3d& lo,
               const Eigen::Vector3d& hi) {
  return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() &&
         p.y() <= hi.y() && p.z() >= lo.z() && p.z() <= hi.z();
}

}  // namespace

AugmentedPair augment_pair(const geom::PointCloud& cloud, const Image& image,
                           const LabelMap& labels, const geom::PairSet& pairs,
                           const AugmentParams& params, uint64_t seed) {
  if (labels.width != image.width || labels.height != image.height)
    throw std::invalid_argument("augment: labelmap and image sizes disagree");
  for (const auto& pr : pairs)
    if (pr.point_index >= static_cast<uint32_t>(cloud.size()) ||
        pr.px < 0 || pr.px >= image.width || pr.py < 0 ||
        pr.py >= image.height)
      throw std::invalid_argument("augment: pair outside cloud or image");

  Rng rng(seed);
  AugmentedPair out;
  out.cloud = cloud;
  out.image = image;
  out.labels = labels;
  out.pairs = pairs;
  AugmentRecord& rec = out.record;

  if (params.rotate) rec.angle = rng.uniform(0.0, 2.0 * kPi);
  if (params.flip && rng.uniform() < 0.5)
    rec.flip_axis = static_cast<int>(rng.uniform_int(2));
  rotate_flip(out.cloud, rec.angle, rec.flip_axis);

  const int floor_count = pair_floor(static_cast<int>(pairs.size()));

  if (params.cuboid_drop && out.cloud.size() > 0) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      const Eigen::Vector3d& anchor =
          out.cloud.positions[rng.uniform_int(out.cloud.size())];
      Eigen::Vector3d half{rng.uniform(1.5, 4.0), rng.uniform(1.5, 4.0),
                           rng.uniform(1.0, 3.0)};
      Eigen::Vector3d lo = anchor - half, hi = anchor + half;
      std::vector<char> keep(out.cloud.size(), 1);
      for (int i = 0; i < out.cloud.size(); ++i)
        if (in_cuboid(out.cloud.positions[i], lo, hi)) keep[i] = 0;
      int surviving = 0;
      for (const auto& pr : out.pairs)
        if (keep[pr.point_index]) ++surviving;
      if (surviving < floor_count) continue;
      std::vector<int> remap;
      out.cloud = filter_cloud(out.cloud, keep, &remap);
      geom::PairSet kept;
      for (auto pr : out.pairs) {
        if (remap[pr.point_index] < 0) continue;
        pr.point_index = static_cast<uint32_t>(remap[pr.point_index]);
        kept.push_back(pr);
      }
      out.pairs = std::move(kept);
      rec.dropped_cuboid = true;
      rec.cuboid_lo = lo;
      rec.cuboid_hi = hi;
      break;
    }
  }

  const int w = image.width, h = image.height;
  if (params.image_flip && rng.uniform() < 0.5) {
    rec.flipped_image = true;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w / 2; ++x) {
        for (int c = 0; c < 3; ++c)
          std::swap(out.image.pixel(x, y)[c],
                    out.image.pixel(w - 1 - x, y)[c]);
        std::swap(out.labels.at(x, y), out.labels.at(w - 1 - x, y));
      }
    for (auto& pr : out.pairs) pr.px = w - 1 - pr.px;
  }

  if (params.crop) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      double s = rng.uniform(0.7, 1.0);
      int cw = std::max(1, static_cast<int>(std::lround(w * s)));
      int ch = std::max(1, static_cast<int>(std::lround(h * s)));
      int cx0 = static_cast<int>(rng.uniform_int(w - cw + 1));
      int cy0 = static_cast<int>(rng.uniform_int(h - ch + 1));
      int surviving = 0;
      for (const auto& pr : out.pairs)
        if (pr.px >= cx0 && pr.px < cx0 + cw && pr.py >= cy0 &&
            pr.py < cy0 + ch)
          ++surviving;
      if (surviving < floor_count) continue;

      Image resized;
      resized.width = w;
      resized.height = h;
      resized.rgb.resize(static_cast<size_t>(w) * h * 3);
      LabelMap relabeled;
      relabeled.width = w;
      relabeled.height = h;
      relabeled.num_segments = out.labels.num_segments;
      relabeled.ids.resize(static_cast<size_t>(w) * h);
      for (int y = 0; y < h; ++y) {
        int sy = cy0 + std::min(ch - 1, static_cast<int>(
                                            (y + 0.5) * ch / h));
        for (int x = 0; x < w; ++x) {
          int sx = cx0 + std::min(cw - 1, static_cast<int>(
                                              (x + 0.5) * cw / w));
          for (int c = 0; c < 3; ++c)
            resized.pixel(x, y)[c] = out.image.pixel(sx, sy)[c];
          relabeled.at(x, y) = out.labels.at(sx, sy);
        }
      }
      geom::PairSet kept;
      for (auto pr : out.pairs) {
        if (pr.px < cx0 || pr.px >= cx0 + cw || pr.py < cy0 ||
            pr.py >= cy0 + ch)
          continue;
        pr.px = static_cast<int>((pr.px - cx0 + 0.5) * w / cw);
        pr.py = static_cast<int>((pr.py - cy0 + 0.5) * h / ch);
        kept.push_back(pr);
      }
      out.image = std::move(resized);
      out.labels = std::move(relabeled);
      out.pairs = std::move(kept);
      rec.crop_x = cx0;
      rec.crop_y = cy0;
      rec.crop_w = cw;
      rec.crop_h = ch;
      break;
    }
  }

  // Correspondence ids always come from the transformed labelmap.
  geom::PairSet labeled;
  for (auto pr : out.pairs) {
    uint16_t id = out.labels.at(pr.px, pr.py);
    if (id == kUnlabeledId) continue;
    pr.superpixel = id;
    labeled.push_back(pr);
  }
  out.pairs = std::move(labeled);
  return out;
}

geom::PointCloud apply_point_record(const geom::PointCloud& cloud,
                                    const AugmentRecord& record) {
  geom::PointCloud out = cloud;
  rotate_flip(out, record.angle, record.flip_axis);
  if (record.dropped_cuboid) {
    std::vector<char> keep(out.size(), 1);
    for (int i = 0; i < out.size(); ++i)
      if (in_cuboid(out.positions[i], record.cuboid_lo, record.cuboid_hi))
        keep[i] = 0;
    out = filter_cloud(out, keep, nullptr);
  }
  return out;
}

void validate(const CorruptionSpec& spec) {
  if (spec.level < 1 || spec.level > 3)
    throw std::invalid_argument("corruption: level must be in 1..3");
}

CorruptionKind parse_corruption_kind(const std::string& name) {
  if (name == "beam-drop") return CorruptionKind::kBeamDrop;
  if (name == "jitter") return CorruptionKind::kJitter;
  if (name == "point-drop") return CorruptionKind::kPointDrop;
  throw std::invalid_argument("corruption: unknown kind '" + name + "'");
}

std::string corruption_kind_name(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kBeamDrop: return "beam-drop";
    case CorruptionKind::kJitter: return "jitter";
    case CorruptionKind::kPointDrop: return "point-drop";
  }
  throw std::invalid_argument("corruption: bad kind value");
}

double jitter_sigma(int level) {
  const double sigmas[3] = {0.02, 0.05, 0.10};
  if (level < 1 || level > 3)
    throw std::invalid_argument("corruption: level must be in 1..3");
  return sigmas[level - 1];
}

double beam_drop_probability(int level) {
  const double probs[3] = {0.25, 0.50, 0.75};
  if (level < 1 || level > 3)
    throw std::invalid_argument("corruption: level must be in 1..3");
  return probs[level - 1];
}

double point_drop_fraction(int level) {
  const double fracs[3] = {0.10, 0.30, 0.50};
  if (level < 1 || level > 3)
    throw std::invalid_argument("corruption: level must be in 1..3");
  return fracs[level - 1];
}

geom::PointCloud jitter_points(const geom::PointCloud& cloud, double sigma,
                               uint64_t seed) {
  if (sigma < 0)
    throw std::invalid_argument("jitter: sigma must be nonnegative");
  Rng rng(seed);
  geom::PointCloud out = cloud;
  for (auto& p : out.positions) {
    p.x() += rng.normal(sigma);
    p.y() += rng.normal(sigma);
    p.z() += rng.normal(sigma);
  }
  return out;
}

geom::PointCloud drop_points(const geom::PointCloud& cloud, double fraction,
                             uint64_t seed) {
  if (fraction < 0 || fraction > 1)
    throw std::invalid_argument("point drop: fraction must be in [0, 1]");
  Rng rng(seed);
  int n = cloud.size();
  int dropped = static_cast<int>(std::lround(fraction * n));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<char> keep(n, 1);
  for (int i = 0; i < dropped; ++i) keep[order[i]] = 0;
  return filter_cloud(cloud, keep, nullptr);
}

geom::PointCloud drop_beams(const geom::PointCloud& cloud, double probability,
                            uint64_t seed) {
  if (probability < 0 || probability > 1)
    throw std::invalid_argument("beam drop: probability must be in [0, 1]");
  Rng rng(seed);
  std::vector<char> ring_dropped(kLidarBeams);
  for (int r = 0; r < kLidarBeams; ++r)
    ring_dropped[r] = rng.uniform() < probability ? 1 : 0;

  double min_e = kMinElevationDeg * kPi / 180.0;
  double max_e = kMaxElevationDeg * kPi / 180.0;
  double step = (max_e - min_e) / (kLidarBeams - 1);
  std::vector<char> keep(cloud.size(), 1);
  for (int i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.positions[i];
    double range_xy = std::hypot(p.x(), p.y());
    double elev = std::atan2(p.z(), range_xy);
    int ring = static_cast<int>(std::lround((elev - min_e) / step));
    ring = std::clamp(ring, 0, kLidarBeams - 1);
    if (ring_dropped[ring]) keep[i] = 0;
  }
  return filter_cloud(cloud, keep, nullptr);
}

geom::PointCloud corrupt(const geom::PointCloud& cloud,
                         const CorruptionSpec& spec, uint64_t seed) {
  validate(spec);
  switch (spec.kind) {
    case CorruptionKind::kBeamDrop:
      return drop_beams(cloud, beam_drop_probability(spec.level), seed);
    case CorruptionKind::kJitter:
      return jitter_points(cloud, jitter_sigma(spec.level), seed);
    case CorruptionKind::kPointDrop:
      return drop_points(cloud, point_drop_fraction(spec.level), seed);
  }
  throw std::invalid_argument("corruption: bad kind value");
}

}  // namespace seal::synth
