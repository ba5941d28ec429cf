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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "seal/geom.hpp"
#include "support/oracles.hpp"

using seal::geom::CalibrationChain;
using seal::geom::PointCloud;
using seal::geom::RigidTransform;

namespace {

RigidTransform random_transform(seal::Rng& rng, double t_range = 5.0) {
  auto r = oracle::rodrigues(rng.uniform(-1, 1), rng.uniform(-1, 1),
                             rng.uniform(-1, 1) + 2.0, rng.uniform(0, 6.28));
  RigidTransform out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.rotation(i, j) = r[3 * i + j];
  for (int i = 0; i < 3; ++i)
    out.translation(i) = rng.uniform(-t_range, t_range);
  return out;
}

oracle::Mat4 to_mat4(const RigidTransform& t) {
  double r[9], tr[3];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[3 * i + j] = t.rotation(i, j);
    tr[i] = t.translation(i);
  }
  return oracle::mat4_from_rt(r, tr);
}

std::filesystem::path temp_file(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "seal_geom_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("compose matches the homogeneous matrix product") {
  seal::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    RigidTransform a = random_transform(rng);
    RigidTransform b = random_transform(rng);
    RigidTransform c = seal::geom::compose(a, b);
    oracle::Mat4 ref = oracle::mat4_mul(to_mat4(a), to_mat4(b));
    oracle::Mat4 got = to_mat4(c);
    for (int i = 0; i < 16; ++i) CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("compose is associative within tolerance") {
  seal::Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    RigidTransform a = random_transform(rng);
    RigidTransform b = random_transform(rng);
    RigidTransform c = random_transform(rng);
    RigidTransform lhs = seal::geom::compose(seal::geom::compose(a, b), c);
    RigidTransform rhs = seal::geom::compose(a, seal::geom::compose(b, c));
    CHECK((lhs.rotation - rhs.rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((lhs.translation - rhs.translation).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("inverse composed with itself is the identity") {
  seal::Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    RigidTransform a = random_transform(rng);
    RigidTransform e = seal::geom::compose(a, seal::geom::inverse(a));
    CHECK((e.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-9);
    CHECK(e.translation.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(seal::geom::is_rigid(a, 1e-9));
  }
}

TEST_CASE("is_rigid rejects scaled and sheared matrices") {
  RigidTransform t;
  t.rotation(0, 0) = 2.0;
  CHECK_FALSE(seal::geom::is_rigid(t));
  RigidTransform s;
  s.rotation(0, 1) = 0.5;
  CHECK_FALSE(seal::geom::is_rigid(s));
  // Reflection: orthonormal but determinant -1.
  RigidTransform r;
  r.rotation(2, 2) = -1.0;
  CHECK_FALSE(seal::geom::is_rigid(r));
}

TEST_CASE("projection worked example with identity chain") {
  CalibrationChain chain;
  chain.intrinsics = {100.0, 100.0, 50.0, 30.0, 100, 60};
  auto proj = seal::geom::project_point(chain, Eigen::Vector3d(0, 0, 5));
  REQUIRE(proj.has_value());
  CHECK(proj->u == 50.0);
  CHECK(proj->v == 30.0);
  CHECK(proj->depth == 5.0);
}

TEST_CASE("projection matches the homogeneous pinhole oracle") {
  seal::Rng rng(14);
  int compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    CalibrationChain chain;
    chain.lidar_to_ego_tl = random_transform(rng, 1.0);
    chain.ego_tl_to_global = random_transform(rng, 5.0);
    chain.global_to_ego_tc = random_transform(rng, 5.0);
    chain.ego_tc_to_camera = random_transform(rng, 1.0);
    chain.intrinsics = {rng.uniform(50, 200), rng.uniform(50, 200),
                        rng.uniform(20, 80),  rng.uniform(20, 80),
                        160,                  120};
    Eigen::Vector3d p(rng.uniform(-10, 10), rng.uniform(-10, 10),
                      rng.uniform(-10, 10));

    oracle::Mat4 m = oracle::mat4_mul(
        to_mat4(chain.ego_tc_to_camera),
        oracle::mat4_mul(
            to_mat4(chain.global_to_ego_tc),
            oracle::mat4_mul(to_mat4(chain.ego_tl_to_global),
                             to_mat4(chain.lidar_to_ego_tl))));
    oracle::Vec3 cam = oracle::mat4_apply(m, {p.x(), p.y(), p.z()});
    auto proj = seal::geom::project_point(chain, p);
    if (cam[2] <= 1e-6) {
      CHECK_FALSE(proj.has_value());
      continue;
    }
    double u = chain.intrinsics.fx * cam[0] / cam[2] + chain.intrinsics.cx;
    double v = chain.intrinsics.fy * cam[1] / cam[2] + chain.intrinsics.cy;
    bool visible = u >= 0 && u < 160 && v >= 0 && v < 120;
    CHECK(proj.has_value() == visible);
    if (proj && visible) {
      ++compared;
      CHECK(std::abs(proj->u - u) < 1e-9);
      CHECK(std::abs(proj->v - v) < 1e-9);
      CHECK(std::abs(proj->depth - cam[2]) < 1e-9);
    }
  }
  CHECK(compared > 20);
}

TEST_CASE("points behind the camera or outside the frame are invisible") {
  CalibrationChain chain;
  chain.intrinsics = {100.0, 100.0, 50.0, 30.0, 100, 60};
  CHECK_FALSE(seal::geom::project_point(chain, {0, 0, -5}).has_value());
  CHECK_FALSE(seal::geom::project_point(chain, {0, 0, 0}).has_value());
  // Lands at u = 150, outside a 100-wide image.
  CHECK_FALSE(seal::geom::project_point(chain, {5, 0, 5}).has_value());
  // u = 99.9 is just inside.
  CHECK(seal::geom::project_point(chain, {2.495, 0, 5}).has_value());
}

TEST_CASE("build_pairs keeps visible points on labeled pixels") {
  CalibrationChain chain;
  chain.intrinsics = {1.0, 1.0, 2.0, 2.0, 4, 4};
  seal::LabelMap map;
  map.width = 4;
  map.height = 4;
  map.num_segments = 2;
  map.ids.assign(16, seal::kUnlabeledId);
  map.at(2, 2) = 0;
  map.at(0, 2) = 1;

  PointCloud cloud;
  cloud.positions = {
      {0, 0, 1},    // pixel (2,2), id 0
      {-2, 0, 1},   // pixel (0,2), id 1
      {1, 1, 1},    // pixel (3,3), unlabeled
      {0, 0, -1},   // behind
      {0.4, 0.4, 1} // floor(2.4) = pixel (2,2), id 0
  };
  auto pairs = seal::geom::build_pairs(cloud, chain, map);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].point_index == 0);
  CHECK(pairs[0].px == 2);
  CHECK(pairs[0].py == 2);
  CHECK(pairs[0].superpixel == 0);
  CHECK(pairs[1].point_index == 1);
  CHECK(pairs[1].superpixel == 1);
  CHECK(pairs[2].point_index == 4);
  CHECK(pairs[2].superpixel == 0);
}

TEST_CASE("build_pairs rejects a label map that does not match the sensor") {
  CalibrationChain chain;
  chain.intrinsics = {1.0, 1.0, 2.0, 2.0, 4, 4};
  seal::LabelMap map;
  map.width = 8;
  map.height = 4;
  map.ids.assign(32, 0);
  map.num_segments = 1;
  PointCloud cloud;
  CHECK_THROWS_AS(seal::geom::build_pairs(cloud, chain, map),
                  std::invalid_argument);
}

TEST_CASE("aggregation is an exact order-preserving bijection") {
  seal::Rng rng(15);
  seal::geom::FrameSequence seq;
  std::vector<int> sizes = {17, 1, 33};
  for (int k = 0; k < 3; ++k) {
    PointCloud f;
    f.feature_dim = 2;
    for (int i = 0; i < sizes[k]; ++i) {
      f.positions.emplace_back(rng.uniform(-10, 10), rng.uniform(-10, 10),
                               rng.uniform(-10, 10));
      f.features.push_back(rng.uniform(0, 1));
      f.features.push_back(rng.uniform(0, 1));
      f.labels.push_back(static_cast<uint16_t>(rng.uniform_int(4)));
    }
    seq.frames.push_back(std::move(f));
    seq.ego_poses.push_back(random_transform(rng));
    seq.timestamps.push_back(k * 0.1);
  }

  auto agg = seal::geom::aggregate_frames(seq);
  REQUIRE(agg.cloud.size() == 51);
  REQUIRE(agg.offsets == std::vector<size_t>({0, 17, 18, 51}));

  for (int i = 0; i < agg.cloud.size(); ++i) {
    uint32_t k = agg.frame_of[i];
    uint32_t j = agg.local_of[i];
    REQUIRE(k < 3);
    REQUIRE(j < static_cast<uint32_t>(sizes[k]));
    CHECK(static_cast<size_t>(i) == agg.offsets[k] + j);

    const Eigen::Vector3d& orig = seq.frames[k].positions[j];
    oracle::Vec3 ref = oracle::mat4_apply(to_mat4(seq.ego_poses[k]),
                                          {orig.x(), orig.y(), orig.z()});
    for (int d = 0; d < 3; ++d)
      CHECK(std::abs(agg.cloud.positions[i][d] - ref[d]) < 1e-12);
    CHECK(agg.cloud.features[2 * i] == seq.frames[k].features[2 * j]);
    CHECK(agg.cloud.features[2 * i + 1] == seq.frames[k].features[2 * j + 1]);
    CHECK(agg.cloud.labels[i] == seq.frames[k].labels[j]);
  }
}

TEST_CASE("aggregation rejects malformed sequences") {
  seal::geom::FrameSequence empty;
  CHECK_THROWS_AS(seal::geom::aggregate_frames(empty), std::invalid_argument);

  seal::geom::FrameSequence seq;
  seq.frames.resize(2);
  seq.ego_poses.resize(2);
  seq.timestamps = {0.2, 0.1};
  CHECK_THROWS_AS(seal::geom::aggregate_frames(seq), std::invalid_argument);

  seq.timestamps = {0.1, 0.1};
  CHECK_THROWS_AS(seal::geom::aggregate_frames(seq), std::invalid_argument);

  seq.timestamps = {0.1, 0.2};
  seq.ego_poses.resize(1);
  CHECK_THROWS_AS(seal::geom::aggregate_frames(seq), std::invalid_argument);
}

TEST_CASE("calibration file round trip preserves every field") {
  seal::Rng rng(16);
  CalibrationChain chain;
  chain.lidar_to_ego_tl = random_transform(rng);
  chain.ego_tl_to_global = random_transform(rng);
  chain.global_to_ego_tc = random_transform(rng);
  chain.ego_tc_to_camera = random_transform(rng);
  chain.intrinsics = {123.25, 119.5, 51.75, 30.5, 416, 224};

  auto path = temp_file("roundtrip.calib");
  seal::geom::save_calibration(path.string(), chain);
  CalibrationChain back = seal::geom::load_calibration(path.string());

  CHECK(back.intrinsics.fx == chain.intrinsics.fx);
  CHECK(back.intrinsics.fy == chain.intrinsics.fy);
  CHECK(back.intrinsics.cx == chain.intrinsics.cx);
  CHECK(back.intrinsics.cy == chain.intrinsics.cy);
  CHECK(back.intrinsics.width == chain.intrinsics.width);
  CHECK(back.intrinsics.height == chain.intrinsics.height);
  auto same = [](const RigidTransform& a, const RigidTransform& b) {
    return a.rotation == b.rotation && a.translation == b.translation;
  };
  CHECK(same(back.lidar_to_ego_tl, chain.lidar_to_ego_tl));
  CHECK(same(back.ego_tl_to_global, chain.ego_tl_to_global));
  CHECK(same(back.global_to_ego_tc, chain.global_to_ego_tc));
  CHECK(same(back.ego_tc_to_camera, chain.ego_tc_to_camera));
}

TEST_CASE("calibration loader rejects malformed files") {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::FILE* f = std::fopen(p.string().c_str(), "w");
    std::fputs(text.c_str(), f);
    std::fclose(f);
  };

  auto p1 = temp_file("missing_section.calib");
  write(p1, "[intrinsics]\nfx 10\nfy 10\ncx 1\ncy 1\nwidth 4\nheight 4\n");
  CHECK_THROWS_AS(seal::geom::load_calibration(p1.string()), seal::IoError);

  auto p2 = temp_file("bad_rotation.calib");
  write(p2,
        "[intrinsics]\nfx 10\nfy 10\ncx 1\ncy 1\nwidth 4\nheight 4\n"
        "[extrinsic.lidar_to_ego_tl]\nr 2 0 0 0 1 0 0 0 1\nt 0 0 0\n"
        "[extrinsic.ego_tl_to_global]\nr 1 0 0 0 1 0 0 0 1\nt 0 0 0\n"
        "[extrinsic.global_to_ego_tc]\nr 1 0 0 0 1 0 0 0 1\nt 0 0 0\n"
        "[extrinsic.ego_tc_to_camera]\nr 1 0 0 0 1 0 0 0 1\nt 0 0 0\n");
  CHECK_THROWS_AS(seal::geom::load_calibration(p2.string()), seal::IoError);

  auto p3 = temp_file("junk_token.calib");
  write(p3, "[intrinsics]\nfx ten\n");
  CHECK_THROWS_AS(seal::geom::load_calibration(p3.string()), seal::IoError);

  CHECK_THROWS_AS(seal::geom::load_calibration("/nonexistent/x.calib"),
                  seal::IoError);
}

TEST_CASE("point cloud binary round trip is exact") {
  seal::Rng rng(17);
  PointCloud cloud;
  cloud.feature_dim = 3;
  for (int i = 0; i < 257; ++i) {
    // Values quantized to f32 so the on-disk format is lossless here.
    cloud.positions.emplace_back(static_cast<float>(rng.uniform(-50, 50)),
                                 static_cast<float>(rng.uniform(-50, 50)),
                                 static_cast<float>(rng.uniform(-5, 5)));
    for (int d = 0; d < 3; ++d)
      cloud.features.push_back(static_cast<float>(rng.uniform(0, 1)));
    cloud.labels.push_back(static_cast<uint16_t>(rng.uniform_int(4)));
  }
  auto path = temp_file("roundtrip.pc");
  seal::geom::save_point_cloud(path.string(), cloud);
  PointCloud back = seal::geom::load_point_cloud(path.string());
  REQUIRE(back.size() == cloud.size());
  REQUIRE(back.feature_dim == 3);
  CHECK(back.positions == cloud.positions);
  CHECK(back.features == cloud.features);
  CHECK(back.labels == cloud.labels);

  PointCloud unlabeled = cloud;
  unlabeled.labels.clear();
  seal::geom::save_point_cloud(path.string(), unlabeled);
  back = seal::geom::load_point_cloud(path.string());
  CHECK_FALSE(back.has_labels());
  CHECK(back.positions == cloud.positions);
}

TEST_CASE("point cloud loader rejects corrupt files") {
  auto path = temp_file("bad.pc");
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  std::fputs("NOTMAGIC", f);
  std::fclose(f);
  CHECK_THROWS_AS(seal::geom::load_point_cloud(path.string()), seal::IoError);

  // Valid magic, truncated body.
  f = std::fopen(path.string().c_str(), "wb");
  std::fputs("SEALPC1\n", f);
  uint32_t n = 100;
  std::fwrite(&n, 4, 1, f);
  std::fclose(f);
  CHECK_THROWS_AS(seal::geom::load_point_cloud(path.string()), seal::IoError);

  CHECK_THROWS_AS(seal::geom::load_point_cloud("/nonexistent/x.pc"),
                  seal::IoError);
}
