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
#include "seal/partition.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <queue>

namespace seal::partition {

namespace {

struct SlicCenter {
  double r, g, b, x, y;
};

double color_gradient(const Image& img, int x, int y) {
  int xm = std::max(0, x - 1), xp = std::min(img.width - 1, x + 1);
  int ym = std::max(0, y - 1), yp = std::min(img.height - 1, y + 1);
  const double* l = img.pixel(xm, y);
  const double* r = img.pixel(xp, y);
  const double* u = img.pixel(x, ym);
  const double* d = img.pixel(x, yp);
  double g = 0.0;
  for (int c = 0; c < 3; ++c) {
    g += (r[c] - l[c]) * (r[c] - l[c]);
    g += (d[c] - u[c]) * (d[c] - u[c]);
  }
  return g;
}

}  // namespace

LabelMap slic(const Image& img, const SlicParams& params) {
  validate(img);
  const int w = img.width, h = img.height;
  const long total = static_cast<long>(w) * h;
  const int n = params.n_segments;
  if (n < 1) throw std::invalid_argument("slic: n_segments must be >= 1");
  if (n > total)
    throw std::invalid_argument("slic: n_segments exceeds pixel count");
  if (n >= kUnlabeledId)
    throw std::invalid_argument("slic: n_segments exceeds id space");
  if (params.iters < 1) throw std::invalid_argument("slic: iters must be >= 1");

  const double S = std::sqrt(static_cast<double>(total) / n);
  const double ratio = params.compactness / S;

  // Seed grid sized to yield exactly n seeds, then each seed nudged to the
  // lowest-gradient pixel in its 3x3 neighborhood.
  int ny = std::max(1L, std::lround(std::sqrt(static_cast<double>(n) * h / w)));
  if (ny > n) ny = n;
  int nx = (n + ny - 1) / ny;
  std::vector<SlicCenter> centers;
  centers.reserve(n);
  for (int j = 0; j < ny && static_cast<int>(centers.size()) < n; ++j) {
    for (int i = 0; i < nx && static_cast<int>(centers.size()) < n; ++i) {
      int px = std::min(w - 1, static_cast<int>((i + 0.5) * w / nx));
      int py = std::min(h - 1, static_cast<int>((j + 0.5) * h / ny));
      int bx = px, by = py;
      double bg = color_gradient(img, px, py);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int qx = px + dx, qy = py + dy;
          if (qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
          double g = color_gradient(img, qx, qy);
          if (g < bg) {
            bg = g;
            bx = qx;
            by = qy;
          }
        }
      const double* p = img.pixel(bx, by);
      centers.push_back({p[0], p[1], p[2], static_cast<double>(bx),
                         static_cast<double>(by)});
    }
  }

  std::vector<int> labels(total, -1);
  std::vector<double> dist(total);
  const int k = static_cast<int>(centers.size());
  for (int it = 0; it < params.iters; ++it) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::max());
    std::fill(labels.begin(), labels.end(), -1);
    for (int c = 0; c < k; ++c) {
      const SlicCenter& ctr = centers[c];
      int x0 = std::max(0, static_cast<int>(std::floor(ctr.x - S)));
      int x1 = std::min(w - 1, static_cast<int>(std::ceil(ctr.x + S)));
      int y0 = std::max(0, static_cast<int>(std::floor(ctr.y - S)));
      int y1 = std::min(h - 1, static_cast<int>(std::ceil(ctr.y + S)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double* p = img.pixel(x, y);
          double dr = p[0] - ctr.r, dg = p[1] - ctr.g, db = p[2] - ctr.b;
          double dc = std::sqrt(dr * dr + dg * dg + db * db);
          double dx = x - ctr.x, dy = y - ctr.y;
          double dxy = std::sqrt(dx * dx + dy * dy);
          double d = dc + ratio * dxy;
          size_t idx = static_cast<size_t>(y) * w + x;
          if (d < dist[idx]) {
            dist[idx] = d;
            labels[idx] = c;
          }
        }
      }
    }
    // Pixels outside every search window fall back to a full scan.
    for (long idx = 0; idx < total; ++idx) {
      if (labels[idx] != -1) continue;
      int x = static_cast<int>(idx % w), y = static_cast<int>(idx / w);
      const double* p = img.pixel(x, y);
      double best = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        const SlicCenter& ctr = centers[c];
        double dr = p[0] - ctr.r, dg = p[1] - ctr.g, db = p[2] - ctr.b;
        double dx = x - ctr.x, dy = y - ctr.y;
        double d = std::sqrt(dr * dr + dg * dg + db * db) +
                   ratio * std::sqrt(dx * dx + dy * dy);
        if (d < best) {
          best = d;
          labels[idx] = c;
        }
      }
    }

    std::vector<std::array<double, 6>> acc(k, {0, 0, 0, 0, 0, 0});
    for (long idx = 0; idx < total; ++idx) {
      int x = static_cast<int>(idx % w), y = static_cast<int>(idx / w);
      const double* p = img.pixel(x, y);
      auto& a = acc[labels[idx]];
      a[0] += p[0];
      a[1] += p[1];
      a[2] += p[2];
      a[3] += x;
      a[4] += y;
      a[5] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (acc[c][5] == 0.0) continue;
      centers[c] = {acc[c][0] / acc[c][5], acc[c][1] / acc[c][5],
                    acc[c][2] / acc[c][5], acc[c][3] / acc[c][5],
                    acc[c][4] / acc[c][5]};
    }
  }

  // Connectivity: scan-order components; fragments smaller than a quarter
  // of the mean segment area melt into the neighbor seen first.
  const long min_size = std::max(1L, total / (4L * n));
  std::vector<int> final_labels(total, -1);
  std::vector<long> stack;
  int next_id = 0;
  for (long start = 0; start < total; ++start) {
    if (final_labels[start] != -1) continue;
    std::vector<long> comp;
    int adjacent = -1;
    stack.assign(1, start);
    final_labels[start] = -2;  // visiting marker
    while (!stack.empty()) {
      long idx = stack.back();
      stack.pop_back();
      comp.push_back(idx);
      int x = static_cast<int>(idx % w), y = static_cast<int>(idx / w);
      const int dx4[4] = {1, -1, 0, 0};
      const int dy4[4] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        int qx = x + dx4[d], qy = y + dy4[d];
        if (qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
        long q = static_cast<long>(qy) * w + qx;
        if (labels[q] == labels[start] && final_labels[q] == -1) {
          final_labels[q] = -2;
          stack.push_back(q);
        } else if (adjacent < 0 && final_labels[q] >= 0) {
          adjacent = final_labels[q];
        }
      }
    }
    int assigned;
    if (static_cast<long>(comp.size()) < min_size && adjacent >= 0) {
      assigned = adjacent;
    } else {
      assigned = next_id++;
    }
    for (long idx : comp) final_labels[idx] = assigned;
  }
  if (next_id >= kUnlabeledId)
    throw std::invalid_argument("slic: produced more segments than id space");

  LabelMap out;
  out.width = w;
  out.height = h;
  out.num_segments = next_id;
  out.ids.resize(total);
  for (long idx = 0; idx < total; ++idx)
    out.ids[idx] = static_cast<uint16_t>(final_labels[idx]);
  return out;
}

SuperpointAssignment superpoints_from_pairs(const geom::PairSet& pairs,
                                            int n_points, int min_pair_count) {
  if (n_points < 0)
    throw std::invalid_argument("superpoints: negative point count");
  if (min_pair_count < 1)
    throw std::invalid_argument("superpoints: min_pair_count must be >= 1");
  std::map<uint16_t, int> counts;
  for (const auto& pr : pairs) {
    if (pr.point_index >= static_cast<uint32_t>(n_points))
      throw std::invalid_argument("superpoints: pair references invalid point");
    if (pr.superpixel == kUnlabeledId)
      throw std::invalid_argument("superpoints: pair carries unlabeled pixel");
    counts[pr.superpixel]++;
  }
  SuperpointAssignment out;
  std::map<uint16_t, uint32_t> remap;
  for (const auto& [id, count] : counts) {
    if (count < min_pair_count) continue;
    remap[id] = static_cast<uint32_t>(out.kept_superpixels.size());
    out.kept_superpixels.push_back(id);
  }
  out.num_superpoints = static_cast<int>(out.kept_superpixels.size());
  out.point_to_superpoint.assign(n_points, kNoSuperpoint);
  for (const auto& pr : pairs) {
    auto it = remap.find(pr.superpixel);
    if (it != remap.end()) out.point_to_superpoint[pr.point_index] = it->second;
  }
  return out;
}

namespace {

struct PlaneScore {
  int count = -1;
  double mean_residual = std::numeric_limits<double>::max();

  bool better_than(const PlaneScore& o) const {
    if (count != o.count) return count > o.count;
    return mean_residual < o.mean_residual;
  }
};

PlaneScore score_plane(const std::vector<Eigen::Vector3d>& points,
                       const PlaneModel& plane, double threshold) {
  PlaneScore s;
  s.count = 0;
  double sum = 0.0;
  for (const auto& p : points) {
    double r = std::abs(plane.normal.dot(p) + plane.offset);
    if (r <= threshold) {
      ++s.count;
      sum += r;
    }
  }
  s.mean_residual = s.count > 0 ? sum / s.count : 0.0;
  return s;
}

}  // namespace

PlaneFit ransac_plane(const std::vector<Eigen::Vector3d>& points, int iters,
                      double inlier_threshold, uint64_t seed) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw std::invalid_argument("ransac_plane: need >= 3 points");
  if (iters < 1) throw std::invalid_argument("ransac_plane: iters must be >= 1");
  if (!(inlier_threshold > 0))
    throw std::invalid_argument("ransac_plane: threshold must be positive");

  Rng rng(seed);
  PlaneModel best;
  PlaneScore best_score;
  bool found = false;
  for (int it = 0; it < iters; ++it) {
    int i0 = static_cast<int>(rng.uniform_int(n));
    int i1 = i0, i2 = i0;
    while (i1 == i0) i1 = static_cast<int>(rng.uniform_int(n));
    while (i2 == i0 || i2 == i1) i2 = static_cast<int>(rng.uniform_int(n));
    Eigen::Vector3d cross =
        (points[i1] - points[i0]).cross(points[i2] - points[i0]);
    double norm = cross.norm();
    if (norm < 1e-12) continue;
    PlaneModel cand;
    cand.normal = cross / norm;
    cand.offset = -cand.normal.dot(points[i0]);
    PlaneScore s = score_plane(points, cand, inlier_threshold);
    if (!found || s.better_than(best_score)) {
      found = true;
      best = cand;
      best_score = s;
    }
  }
  if (!found)
    throw std::invalid_argument(
        "ransac_plane: degenerate input, no plane hypothesis");

  std::vector<int> inliers;
  double max_residual = 0.0;
  for (int i = 0; i < n; ++i) {
    double r = std::abs(best.normal.dot(points[i]) + best.offset);
    if (r <= inlier_threshold) {
      inliers.push_back(i);
      max_residual = std::max(max_residual, r);
    }
  }

  PlaneModel refit = best;
  // A zero-residual hypothesis is already the least-squares optimum.
  if (max_residual > 0.0 && inliers.size() >= 3) {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (int i : inliers) centroid += points[i];
    centroid /= static_cast<double>(inliers.size());
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (int i : inliers) {
      Eigen::Vector3d d = points[i] - centroid;
      scatter += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(scatter);
    Eigen::Vector3d normal = solver.eigenvectors().col(0);
    double norm = normal.norm();
    if (norm > 1e-12) {
      refit.normal = normal / norm;
      refit.offset = -refit.normal.dot(centroid);
    }
  }

  PlaneFit out;
  out.plane = refit;
  out.inlier_threshold = inlier_threshold;
  out.inlier_mask.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    double r = std::abs(refit.normal.dot(points[i]) + refit.offset);
    if (r <= inlier_threshold) {
      out.inlier_mask[i] = 1;
      ++out.inlier_count;
    }
  }
  return out;
}

namespace {

using Cell = std::array<int64_t, 3>;

Cell cell_of(const Eigen::Vector3d& p, double eps) {
  return {static_cast<int64_t>(std::floor(p.x() / eps)),
          static_cast<int64_t>(std::floor(p.y() / eps)),
          static_cast<int64_t>(std::floor(p.z() / eps))};
}

}  // namespace

SegmentLabels cluster(const std::vector<Eigen::Vector3d>& points, double eps,
                      int min_pts) {
  if (!(eps > 0)) throw std::invalid_argument("cluster: eps must be positive");
  if (min_pts < 1) throw std::invalid_argument("cluster: min_pts must be >= 1");
  const int n = static_cast<int>(points.size());

  std::map<Cell, std::vector<int>> grid;
  for (int i = 0; i < n; ++i) grid[cell_of(points[i], eps)].push_back(i);

  const double eps2 = eps * eps;
  std::vector<std::vector<int>> neigh(n);
  for (int i = 0; i < n; ++i) {
    Cell c = cell_of(points[i], eps);
    for (int64_t dz = -1; dz <= 1; ++dz)
      for (int64_t dy = -1; dy <= 1; ++dy)
        for (int64_t dx = -1; dx <= 1; ++dx) {
          auto it = grid.find(Cell{c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == grid.end()) continue;
          for (int j : it->second) {
            if ((points[i] - points[j]).squaredNorm() <= eps2)
              neigh[i].push_back(j);
          }
        }
    std::sort(neigh[i].begin(), neigh[i].end());
  }

  std::vector<bool> core(n);
  for (int i = 0; i < n; ++i)
    core[i] = static_cast<int>(neigh[i].size()) >= min_pts;

  SegmentLabels out;
  out.labels.assign(n, kNoiseSegment);
  std::vector<int> stack;
  for (int i = 0; i < n; ++i) {
    if (!core[i] || out.labels[i] != kNoiseSegment) continue;
    int id = out.num_segments++;
    out.labels[i] = id;
    stack.assign(1, i);
    while (!stack.empty()) {
      int p = stack.back();
      stack.pop_back();
      for (int q : neigh[p]) {
        if (core[q] && out.labels[q] == kNoiseSegment) {
          out.labels[q] = id;
          stack.push_back(q);
        }
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (core[i]) continue;
    for (int q : neigh[i]) {
      if (core[q]) {
        out.labels[i] = out.labels[q];
        break;
      }
    }
  }
  return out;
}

std::vector<SegmentLabels> segment_views(const geom::AggregatedCloud& agg,
                                         const SegmentLabels& aggregated) {
  if (aggregated.labels.size() != agg.cloud.positions.size())
    throw std::invalid_argument("segment_views: label count mismatch");
  std::vector<SegmentLabels> out;
  for (size_t k = 0; k + 1 < agg.offsets.size(); ++k) {
    SegmentLabels view;
    view.num_segments = aggregated.num_segments;
    view.labels.assign(aggregated.labels.begin() + agg.offsets[k],
                       aggregated.labels.begin() + agg.offsets[k + 1]);
    out.push_back(std::move(view));
  }
  return out;
}

}  // namespace seal::partition
