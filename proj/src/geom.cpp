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
#include "seal/geom.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace seal::geom {

RigidTransform identity_transform() { return RigidTransform{}; }

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

RigidTransform inverse(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation);
  return out;
}

bool is_rigid(const RigidTransform& t, double tol) {
  Eigen::Matrix3d gram = t.rotation.transpose() * t.rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol)
    return false;
  return std::abs(t.rotation.determinant() - 1.0) <= tol;
}

RigidTransform rotation_z(double angle) {
  return rotation_axis_angle(Eigen::Vector3d::UnitZ(), angle);
}

RigidTransform rotation_axis_angle(const Eigen::Vector3d& axis, double angle) {
  RigidTransform out;
  out.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  return out;
}

void validate(const CameraIntrinsics& k) {
  if (!(k.fx > 0) || !(k.fy > 0))
    throw std::invalid_argument("intrinsics: focal lengths must be positive");
  if (k.width <= 0 || k.height <= 0)
    throw std::invalid_argument("intrinsics: non-positive image size");
  if (!std::isfinite(k.cx) || !std::isfinite(k.cy))
    throw std::invalid_argument("intrinsics: non-finite principal point");
}

std::optional<Projection> project_point(const CalibrationChain& chain,
                                        const Eigen::Vector3d& p) {
  Eigen::Vector3d cam = apply(
      chain.ego_tc_to_camera,
      apply(chain.global_to_ego_tc,
            apply(chain.ego_tl_to_global, apply(chain.lidar_to_ego_tl, p))));
  double z = cam.z();
  if (!(z > kDepthEpsilon)) return std::nullopt;
  const CameraIntrinsics& k = chain.intrinsics;
  double u = k.fx * cam.x() / z + k.cx;
  double v = k.fy * cam.y() / z + k.cy;
  if (!(u >= 0.0) || !(u < k.width) || !(v >= 0.0) || !(v < k.height))
    return std::nullopt;
  return Projection{u, v, z};
}

void validate(const PointCloud& cloud) {
  size_t n = cloud.positions.size();
  if (cloud.feature_dim < 0)
    throw std::invalid_argument("cloud: negative feature dim");
  if (cloud.features.size() != n * static_cast<size_t>(cloud.feature_dim))
    throw std::invalid_argument("cloud: feature buffer size mismatch");
  if (!cloud.labels.empty() && cloud.labels.size() != n)
    throw std::invalid_argument("cloud: label count mismatch");
  for (const auto& p : cloud.positions) {
    if (!p.allFinite())
      throw std::invalid_argument("cloud: non-finite position");
  }
  for (double f : cloud.features) {
    if (!std::isfinite(f))
      throw std::invalid_argument("cloud: non-finite feature");
  }
}

PairSet build_pairs(const PointCloud& cloud, const CalibrationChain& chain,
                    const LabelMap& superpixels) {
  validate(chain.intrinsics);
  if (superpixels.width != chain.intrinsics.width ||
      superpixels.height != chain.intrinsics.height)
    throw std::invalid_argument("build_pairs: label map size != image size");
  PairSet out;
  for (int i = 0; i < cloud.size(); ++i) {
    auto proj = project_point(chain, cloud.positions[i]);
    if (!proj) continue;
    int px = static_cast<int>(std::floor(proj->u));
    int py = static_cast<int>(std::floor(proj->v));
    uint16_t id = superpixels.at(px, py);
    if (id == kUnlabeledId) continue;
    out.push_back(Pair{static_cast<uint32_t>(i), px, py, id});
  }
  return out;
}

AggregatedCloud aggregate_frames(const FrameSequence& seq) {
  size_t k = seq.frames.size();
  if (k == 0) throw std::invalid_argument("aggregate: empty sequence");
  if (seq.ego_poses.size() != k || seq.timestamps.size() != k)
    throw std::invalid_argument("aggregate: frame/pose/timestamp mismatch");
  for (size_t i = 1; i < k; ++i) {
    if (!(seq.timestamps[i] > seq.timestamps[i - 1]))
      throw std::invalid_argument("aggregate: timestamps not increasing");
  }
  int feature_dim = seq.frames[0].feature_dim;
  bool labeled = seq.frames[0].has_labels();
  for (const auto& f : seq.frames) {
    validate(f);
    if (f.feature_dim != feature_dim)
      throw std::invalid_argument("aggregate: feature dim mismatch");
    if (f.has_labels() != labeled)
      throw std::invalid_argument("aggregate: inconsistent labeling");
  }

  AggregatedCloud out;
  out.cloud.feature_dim = feature_dim;
  out.offsets.push_back(0);
  for (size_t fi = 0; fi < k; ++fi) {
    const PointCloud& frame = seq.frames[fi];
    for (int j = 0; j < frame.size(); ++j) {
      out.cloud.positions.push_back(
          apply(seq.ego_poses[fi], frame.positions[j]));
      out.frame_of.push_back(static_cast<uint32_t>(fi));
      out.local_of.push_back(static_cast<uint32_t>(j));
    }
    out.cloud.features.insert(out.cloud.features.end(), frame.features.begin(),
                              frame.features.end());
    if (labeled)
      out.cloud.labels.insert(out.cloud.labels.end(), frame.labels.begin(),
                              frame.labels.end());
    out.offsets.push_back(out.cloud.positions.size());
  }
  return out;
}

namespace {

struct Section {
  std::map<std::string, std::vector<double>> entries;
};

std::map<std::string, Section> parse_sections(std::istream& in,
                                              const std::string& path) {
  std::map<std::string, Section> sections;
  std::string current;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key.front() == '[') {
      if (key.back() != ']')
        throw IoError(path + ":" + std::to_string(lineno) +
                      ": malformed section header");
      current = key.substr(1, key.size() - 2);
      sections[current];
      continue;
    }
    if (current.empty())
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": value outside any section");
    std::vector<double> vals;
    std::string tok;
    while (ls >> tok) {
      if (tok == "=") continue;
      try {
        size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        vals.push_back(v);
      } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(lineno) +
                      ": bad numeric value '" + tok + "'");
      }
    }
    if (vals.empty())
      throw IoError(path + ":" + std::to_string(lineno) + ": key '" + key +
                    "' has no values");
    sections[current].entries[key] = std::move(vals);
  }
  return sections;
}

double scalar_field(const Section& s, const std::string& key,
                    const std::string& path) {
  auto it = s.entries.find(key);
  if (it == s.entries.end() || it->second.size() != 1)
    throw IoError(path + ": missing scalar '" + key + "'");
  return it->second[0];
}

RigidTransform transform_field(const std::map<std::string, Section>& sections,
                               const std::string& name,
                               const std::string& path) {
  auto it = sections.find("extrinsic." + name);
  if (it == sections.end())
    throw IoError(path + ": missing section [extrinsic." + name + "]");
  auto r = it->second.entries.find("r");
  auto t = it->second.entries.find("t");
  if (r == it->second.entries.end() || r->second.size() != 9)
    throw IoError(path + ": [extrinsic." + name + "] needs 9-value 'r'");
  if (t == it->second.entries.end() || t->second.size() != 3)
    throw IoError(path + ": [extrinsic." + name + "] needs 3-value 't'");
  RigidTransform out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.rotation(i, j) = r->second[3 * i + j];
  for (int i = 0; i < 3; ++i) out.translation(i) = t->second[i];
  if (!is_rigid(out, 1e-9))
    throw IoError(path + ": [extrinsic." + name + "] rotation not orthonormal");
  return out;
}

void write_transform(std::ostream& out, const std::string& name,
                     const RigidTransform& t) {
  out << "[extrinsic." << name << "]\n";
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "r %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                t.rotation(0, 0), t.rotation(0, 1), t.rotation(0, 2),
                t.rotation(1, 0), t.rotation(1, 1), t.rotation(1, 2),
                t.rotation(2, 0), t.rotation(2, 1), t.rotation(2, 2));
  out << buf;
  std::snprintf(buf, sizeof buf, "t %.17g %.17g %.17g\n", t.translation(0),
                t.translation(1), t.translation(2));
  out << buf;
}

}  // namespace

CalibrationChain load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("calibration: cannot open " + path);
  auto sections = parse_sections(in, path);
  auto it = sections.find("intrinsics");
  if (it == sections.end())
    throw IoError(path + ": missing [intrinsics] section");

  CalibrationChain chain;
  chain.intrinsics.fx = scalar_field(it->second, "fx", path);
  chain.intrinsics.fy = scalar_field(it->second, "fy", path);
  chain.intrinsics.cx = scalar_field(it->second, "cx", path);
  chain.intrinsics.cy = scalar_field(it->second, "cy", path);
  chain.intrinsics.width =
      static_cast<int>(scalar_field(it->second, "width", path));
  chain.intrinsics.height =
      static_cast<int>(scalar_field(it->second, "height", path));
  try {
    validate(chain.intrinsics);
  } catch (const std::invalid_argument& e) {
    throw IoError(path + ": " + e.what());
  }
  chain.lidar_to_ego_tl = transform_field(sections, "lidar_to_ego_tl", path);
  chain.ego_tl_to_global = transform_field(sections, "ego_tl_to_global", path);
  chain.global_to_ego_tc = transform_field(sections, "global_to_ego_tc", path);
  chain.ego_tc_to_camera = transform_field(sections, "ego_tc_to_camera", path);
  return chain;
}

void save_calibration(const std::string& path, const CalibrationChain& chain) {
  std::ofstream out(path);
  if (!out) throw IoError("calibration: cannot write " + path);
  char buf[256];
  out << "[intrinsics]\n";
  std::snprintf(buf, sizeof buf, "fx %.17g\nfy %.17g\ncx %.17g\ncy %.17g\n",
                chain.intrinsics.fx, chain.intrinsics.fy, chain.intrinsics.cx,
                chain.intrinsics.cy);
  out << buf;
  out << "width " << chain.intrinsics.width << "\n";
  out << "height " << chain.intrinsics.height << "\n";
  write_transform(out, "lidar_to_ego_tl", chain.lidar_to_ego_tl);
  write_transform(out, "ego_tl_to_global", chain.ego_tl_to_global);
  write_transform(out, "global_to_ego_tc", chain.global_to_ego_tc);
  write_transform(out, "ego_tc_to_camera", chain.ego_tc_to_camera);
  if (!out) throw IoError("calibration: write failure on " + path);
}

namespace {

constexpr char kCloudMagic[8] = {'S', 'E', 'A', 'L', 'P', 'C', '1', '\n'};

template <typename T>
void write_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (static_cast<size_t>(in.gcount()) != sizeof(T))
    throw IoError("point cloud: truncated file " + path);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

PointCloud load_point_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("point cloud: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kCloudMagic, 8) != 0)
    throw IoError("point cloud: bad magic in " + path);
  uint32_t n = read_le<uint32_t>(in, path);
  uint32_t l = read_le<uint32_t>(in, path);
  PointCloud cloud;
  cloud.feature_dim = static_cast<int>(l);
  cloud.positions.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    float x = read_le<float>(in, path);
    float y = read_le<float>(in, path);
    float z = read_le<float>(in, path);
    cloud.positions[i] = Eigen::Vector3d(x, y, z);
  }
  cloud.features.resize(static_cast<size_t>(n) * l);
  for (auto& f : cloud.features) f = read_le<float>(in, path);
  uint8_t has_labels = read_le<uint8_t>(in, path);
  if (has_labels > 1)
    throw IoError("point cloud: bad has-labels byte in " + path);
  if (has_labels == 1) {
    cloud.labels.resize(n);
    for (auto& lab : cloud.labels) lab = read_le<uint16_t>(in, path);
  }
  validate(cloud);
  return cloud;
}

void save_point_cloud(const std::string& path, const PointCloud& cloud) {
  validate(cloud);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("point cloud: cannot write " + path);
  out.write(kCloudMagic, 8);
  write_le<uint32_t>(out, static_cast<uint32_t>(cloud.size()));
  write_le<uint32_t>(out, static_cast<uint32_t>(cloud.feature_dim));
  for (const auto& p : cloud.positions) {
    write_le<float>(out, static_cast<float>(p.x()));
    write_le<float>(out, static_cast<float>(p.y()));
    write_le<float>(out, static_cast<float>(p.z()));
  }
  for (double f : cloud.features) write_le<float>(out, static_cast<float>(f));
  write_le<uint8_t>(out, cloud.has_labels() ? 1 : 0);
  for (uint16_t lab : cloud.labels) write_le<uint16_t>(out, lab);
  if (!out) throw IoError("point cloud: write failure on " + path);
}

}  // namespace seal::geom
