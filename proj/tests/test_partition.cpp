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
#include <set>

#include "seal/partition.hpp"
#include "support/oracles.hpp"

using seal::Image;
using seal::LabelMap;
using seal::partition::SegmentLabels;
using seal::partition::SlicParams;

namespace {

std::filesystem::path temp_file(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "seal_partition_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

Image solid_halves(int w, int h) {
  Image img;
  img.width = w;
  img.height = h;
  img.rgb.assign(static_cast<size_t>(w) * h * 3, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = w / 2; x < w; ++x) {
      double* p = img.pixel(x, y);
      p[0] = p[1] = p[2] = 1.0;
    }
  return img;
}

Image noise_image(int w, int h, uint64_t seed) {
  seal::Rng rng(seed);
  Image img;
  img.width = w;
  img.height = h;
  img.rgb.resize(static_cast<size_t>(w) * h * 3);
  for (auto& v : img.rgb) v = rng.uniform();
  return img;
}

// Blocky procedural scene: colored rectangles over a vertical gradient.
Image blocky_image(int w, int h, uint64_t seed) {
  seal::Rng rng(seed);
  Image img;
  img.width = w;
  img.height = h;
  img.rgb.resize(static_cast<size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double* p = img.pixel(x, y);
      p[0] = 0.2 + 0.3 * y / h;
      p[1] = 0.4;
      p[2] = 0.6 - 0.2 * y / h;
    }
  for (int b = 0; b < 12; ++b) {
    int bw = 8 + static_cast<int>(rng.uniform_int(40));
    int bh = 8 + static_cast<int>(rng.uniform_int(30));
    int x0 = static_cast<int>(rng.uniform_int(std::max(1, w - bw)));
    int y0 = static_cast<int>(rng.uniform_int(std::max(1, h - bh)));
    double col[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    for (int y = y0; y < std::min(h, y0 + bh); ++y)
      for (int x = x0; x < std::min(w, x0 + bw); ++x) {
        double* p = img.pixel(x, y);
        p[0] = col[0];
        p[1] = col[1];
        p[2] = col[2];
      }
  }
  return img;
}

}  // namespace

TEST_CASE("slic splits a two-tone image at the color boundary") {
  Image img = solid_halves(64, 64);
  SlicParams params;
  params.n_segments = 2;
  params.compactness = 0.0;
  LabelMap map = seal::partition::slic(img, params);
  CHECK(map.num_segments == 2);
  uint16_t left = map.at(0, 32);
  uint16_t right = map.at(63, 32);
  CHECK(left != right);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      if (x <= 30) CHECK(map.at(x, y) == left);
      if (x >= 33) CHECK(map.at(x, y) == right);
    }
}

TEST_CASE("slic labels every pixel with contiguous non-empty ids") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    Image img = noise_image(64, 48, seed);
    SlicParams params;
    params.n_segments = 12;
    LabelMap map = seal::partition::slic(img, params);
    seal::validate(map);
    REQUIRE(map.num_segments >= 1);
    std::vector<int> sizes(map.num_segments, 0);
    for (uint16_t id : map.ids) {
      REQUIRE(id != seal::kUnlabeledId);
      REQUIRE(id < map.num_segments);
      sizes[id]++;
    }
    for (int s : sizes) CHECK(s > 0);
  }
}

TEST_CASE("slic respects the segment budget on a structured image") {
  Image img = blocky_image(416, 224, 9);
  SlicParams params;
  params.n_segments = 150;
  LabelMap map = seal::partition::slic(img, params);
  CHECK(map.num_segments >= 100);
  CHECK(map.num_segments <= 160);
}

TEST_CASE("slic degenerate budgets") {
  Image img = noise_image(16, 16, 4);
  SlicParams one;
  one.n_segments = 1;
  LabelMap map = seal::partition::slic(img, one);
  CHECK(map.num_segments == 1);
  for (uint16_t id : map.ids) CHECK(id == 0);

  SlicParams over;
  over.n_segments = 257;
  CHECK_THROWS_AS(seal::partition::slic(img, over), std::invalid_argument);
  SlicParams zero;
  zero.n_segments = 0;
  CHECK_THROWS_AS(seal::partition::slic(img, zero), std::invalid_argument);
}

TEST_CASE("label map round trip preserves contiguous rasters") {
  seal::Rng rng(5);
  LabelMap map;
  map.width = 37;
  map.height = 11;
  map.num_segments = 6;
  map.ids.resize(37 * 11);
  for (auto& id : map.ids) {
    uint64_t draw = rng.uniform_int(7);
    id = draw == 6 ? seal::kUnlabeledId : static_cast<uint16_t>(draw);
  }
  // Make every id actually occur so the raster is contiguous.
  for (uint16_t s = 0; s < 6; ++s) map.ids[s] = s;

  auto path = temp_file("roundtrip.pgm");
  seal::partition::SlicParams unused;
  (void)unused;
  seal::save_labelmap(path.string(), map);
  LabelMap back = seal::load_labelmap(path.string());
  CHECK(back.width == map.width);
  CHECK(back.height == map.height);
  CHECK(back.num_segments == map.num_segments);
  CHECK(back.ids == map.ids);
}

TEST_CASE("label map loader relabels sparse ids in ascending order") {
  auto path = temp_file("sparse.pgm");
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  std::fputs("P5\n4 1\n65535\n", f);
  const uint16_t raw[4] = {9, 0, 5, 65535};
  for (uint16_t v : raw) {
    unsigned char hi = static_cast<unsigned char>(v >> 8);
    unsigned char lo = static_cast<unsigned char>(v & 0xff);
    std::fputc(hi, f);
    std::fputc(lo, f);
  }
  std::fclose(f);

  LabelMap map = seal::load_labelmap(path.string());
  CHECK(map.num_segments == 3);
  CHECK(map.ids == std::vector<uint16_t>({2, 0, 1, seal::kUnlabeledId}));
}

TEST_CASE("label map loader rejects malformed files") {
  auto path = temp_file("bad.pgm");
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  std::fputs("P2\n4 1\n65535\n", f);
  std::fclose(f);
  CHECK_THROWS_AS(seal::load_labelmap(path.string()), seal::IoError);

  f = std::fopen(path.string().c_str(), "wb");
  std::fputs("P5\n4 1\n255\n\0\0\0\0", f);
  std::fclose(f);
  CHECK_THROWS_AS(seal::load_labelmap(path.string()), seal::IoError);

  f = std::fopen(path.string().c_str(), "wb");
  std::fputs("P5\n4 1\n65535\n\0\0", f);
  std::fclose(f);
  CHECK_THROWS_AS(seal::load_labelmap(path.string()), seal::IoError);

  CHECK_THROWS_AS(seal::load_labelmap("/nonexistent/x.pgm"), seal::IoError);
}

TEST_CASE("superpoints keep superpixels with enough matched points") {
  seal::geom::PairSet pairs;
  auto add = [&pairs](uint32_t pt, uint16_t sp) {
    pairs.push_back({pt, 0, 0, sp});
  };
  add(0, 7);
  add(1, 7);
  add(2, 7);
  add(3, 2);
  add(4, 9);
  add(5, 9);

  auto a = seal::partition::superpoints_from_pairs(pairs, 8, 2);
  CHECK(a.num_superpoints == 2);
  REQUIRE(a.kept_superpixels == std::vector<uint16_t>({7, 9}));
  CHECK(a.point_to_superpoint[0] == 0);
  CHECK(a.point_to_superpoint[1] == 0);
  CHECK(a.point_to_superpoint[2] == 0);
  CHECK(a.point_to_superpoint[3] == seal::partition::kNoSuperpoint);
  CHECK(a.point_to_superpoint[4] == 1);
  CHECK(a.point_to_superpoint[5] == 1);
  CHECK(a.point_to_superpoint[6] == seal::partition::kNoSuperpoint);

  auto all = seal::partition::superpoints_from_pairs(pairs, 8, 1);
  CHECK(all.num_superpoints == 3);
  REQUIRE(all.kept_superpixels == std::vector<uint16_t>({2, 7, 9}));
  CHECK(all.point_to_superpoint[3] == 0);

  auto none = seal::partition::superpoints_from_pairs({}, 8, 1);
  CHECK(none.num_superpoints == 0);

  seal::geom::PairSet bad;
  bad.push_back({20, 0, 0, 1});
  CHECK_THROWS_AS(seal::partition::superpoints_from_pairs(bad, 8, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(seal::partition::superpoints_from_pairs(pairs, 8, 0),
                  std::invalid_argument);
}

TEST_CASE("ransac recovers an exact plane exactly") {
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      pts.emplace_back(i * 0.37 - 2.0, j * 0.21 - 1.0, 0.0);
  for (int i = 0; i < 10; ++i) pts.emplace_back(i * 0.1, 0.3, 5.0);

  auto fit = seal::partition::ransac_plane(pts, 64, 0.1, 3);
  CHECK(fit.inlier_count == 100);
  CHECK(std::abs(fit.plane.normal.z()) == 1.0);
  CHECK(fit.plane.normal.x() == 0.0);
  CHECK(fit.plane.normal.y() == 0.0);
  CHECK(fit.plane.offset == 0.0);
  for (int i = 0; i < 100; ++i) CHECK(fit.inlier_mask[i] == 1);
  for (int i = 100; i < 110; ++i) CHECK(fit.inlier_mask[i] == 0);
}

TEST_CASE("ransac inlier mask is consistent with the returned plane") {
  seal::Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Eigen::Vector3d> pts;
    auto axis = oracle::rodrigues(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                  rng.uniform(1, 2), rng.uniform(0, 6.28));
    Eigen::Matrix3d rot;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) rot(i, j) = axis[3 * i + j];
    for (int i = 0; i < 200; ++i) {
      Eigen::Vector3d local(rng.uniform(-3, 3), rng.uniform(-3, 3),
                            rng.normal(0.01));
      pts.push_back(rot * local);
    }
    for (int i = 0; i < 60; ++i)
      pts.emplace_back(rng.uniform(-3, 3), rng.uniform(-3, 3),
                       rng.uniform(-3, 3));

    auto fit = seal::partition::ransac_plane(pts, 128, 0.1, trial);
    CHECK(fit.inlier_count >= 200);
    int recount = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
      double r = std::abs(fit.plane.normal.dot(pts[i]) + fit.plane.offset);
      bool in = r <= fit.inlier_threshold;
      CHECK(static_cast<bool>(fit.inlier_mask[i]) == in);
      recount += in ? 1 : 0;
    }
    CHECK(recount == fit.inlier_count);
    CHECK(std::abs(fit.plane.normal.norm() - 1.0) < 1e-12);

    // True plane normal is the rotated z axis; compare via angle.
    Eigen::Vector3d truth = rot.col(2);
    double cosa = std::abs(truth.dot(fit.plane.normal));
    CHECK(std::acos(std::min(1.0, cosa)) < 1.0 * 3.14159265 / 180.0);
  }
}

TEST_CASE("ransac rejects unusable inputs") {
  std::vector<Eigen::Vector3d> two = {{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(seal::partition::ransac_plane(two, 10, 0.1, 0),
                  std::invalid_argument);

  std::vector<Eigen::Vector3d> line;
  for (int i = 0; i < 50; ++i) line.emplace_back(i * 0.1, 0.0, 0.0);
  CHECK_THROWS_AS(seal::partition::ransac_plane(line, 32, 0.1, 0),
                  std::invalid_argument);

  std::vector<Eigen::Vector3d> fine = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  CHECK_THROWS_AS(seal::partition::ransac_plane(fine, 0, 0.1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(seal::partition::ransac_plane(fine, 10, 0.0, 0),
                  std::invalid_argument);
}

TEST_CASE("clustering separates blobs and marks isolated points noise") {
  std::vector<Eigen::Vector3d> pts;
  seal::Rng rng(7);
  for (int i = 0; i < 30; ++i)
    pts.emplace_back(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.0);
  for (int i = 0; i < 25; ++i)
    pts.emplace_back(10 + rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.0);
  pts.emplace_back(100.0, 100.0, 100.0);

  auto seg = seal::partition::cluster(pts, 0.5, 5);
  CHECK(seg.num_segments == 2);
  for (int i = 1; i < 30; ++i) CHECK(seg.labels[i] == seg.labels[0]);
  for (int i = 31; i < 55; ++i) CHECK(seg.labels[i] == seg.labels[30]);
  CHECK(seg.labels[0] != seg.labels[30]);
  CHECK(seg.labels[55] == seal::partition::kNoiseSegment);
}

TEST_CASE("clustering matches the exhaustive reference on random instances") {
  seal::Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 1 + static_cast<int>(rng.uniform_int(200));
    std::vector<Eigen::Vector3d> pts;
    std::vector<std::array<double, 3>> raw;
    for (int i = 0; i < n; ++i) {
      std::array<double, 3> p = {rng.uniform(-2, 2), rng.uniform(-2, 2),
                                 rng.uniform(-2, 2)};
      raw.push_back(p);
      pts.emplace_back(p[0], p[1], p[2]);
    }
    double eps = rng.uniform(0.1, 1.2);
    int min_pts = 1 + static_cast<int>(rng.uniform_int(6));

    auto got = seal::partition::cluster(pts, eps, min_pts);
    auto ref = oracle::brute_force_cluster(raw, eps, min_pts);
    CHECK(got.num_segments == ref.num_clusters);
    CHECK(oracle::same_partition(got.labels, ref.labels));

    // Ids must be contiguous and non-empty.
    std::vector<int> sizes(got.num_segments, 0);
    for (int lab : got.labels) {
      if (lab == seal::partition::kNoiseSegment) continue;
      REQUIRE(lab >= 0);
      REQUIRE(lab < got.num_segments);
      sizes[lab]++;
    }
    for (int s : sizes) CHECK(s > 0);
    // Low min_pts guarantees every segment reaches min_pts members.
    if (min_pts <= 3) {
      for (int s : sizes) CHECK(s >= min_pts);
    }
  }
}

TEST_CASE("clustering rejects bad parameters") {
  std::vector<Eigen::Vector3d> pts = {{0, 0, 0}};
  CHECK_THROWS_AS(seal::partition::cluster(pts, 0.0, 5),
                  std::invalid_argument);
  CHECK_THROWS_AS(seal::partition::cluster(pts, 1.0, 0),
                  std::invalid_argument);
  auto empty = seal::partition::cluster({}, 1.0, 3);
  CHECK(empty.num_segments == 0);
  CHECK(empty.labels.empty());
}

TEST_CASE("segment views share ids across frames") {
  // Two frames, one blob spanning both: after aggregation the blob is one
  // segment, and each view must carry the same id for its half.
  seal::geom::FrameSequence seq;
  seal::geom::PointCloud f0, f1;
  for (int i = 0; i < 10; ++i) {
    f0.positions.emplace_back(0.05 * i, 0, 0);
    f1.positions.emplace_back(0.05 * i + 0.025, 0, 0);
  }
  // A second blob only visible in frame 1.
  for (int i = 0; i < 8; ++i) f1.positions.emplace_back(50 + 0.05 * i, 0, 0);
  seq.frames = {f0, f1};
  seq.ego_poses = {seal::geom::identity_transform(),
                   seal::geom::identity_transform()};
  seq.timestamps = {0.0, 0.1};

  auto agg = seal::geom::aggregate_frames(seq);
  auto seg = seal::partition::cluster(agg.cloud.positions, 0.2, 3);
  REQUIRE(seg.num_segments == 2);
  auto views = seal::partition::segment_views(agg, seg);
  REQUIRE(views.size() == 2);
  CHECK(views[0].num_segments == 2);
  CHECK(views[1].num_segments == 2);
  // The shared blob has one id in both frames.
  CHECK(views[0].labels[0] == views[1].labels[0]);
  for (int i = 0; i < 10; ++i) {
    CHECK(views[0].labels[i] == views[0].labels[0]);
    CHECK(views[1].labels[i] == views[0].labels[0]);
  }
  // The frame-1-only blob has the other id.
  for (int i = 10; i < 18; ++i) {
    CHECK(views[1].labels[i] != views[0].labels[0]);
    CHECK(views[1].labels[i] != seal::partition::kNoiseSegment);
  }

  SegmentLabels wrong;
  wrong.labels.assign(3, 0);
  wrong.num_segments = 1;
  CHECK_THROWS_AS(seal::partition::segment_views(agg, wrong),
                  std::invalid_argument);
}
