#include "talksplat/density.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "talksplat/common.hpp"

namespace talksplat::density {

void DensifyConfig::validate() const {
  check(grad_threshold >= 0 && size_threshold > 0, "bad densify thresholds");
  check(split_factor > 1.0, "split factor must exceed 1");
  check(clone_step >= 0, "negative clone step");
  check(interval > 0, "densify interval must be positive");
  check(prune_k > 0, "prune k must be positive");
}

void GradStats::reset(int count) {
  vec_sum.assign(static_cast<std::size_t>(count) * 3, 0.0);
  norm_sum.assign(static_cast<std::size_t>(count), 0.0);
  steps = 0;
}

void GradStats::accumulate(const std::vector<double>& mu_grad) {
  check(mu_grad.size() == vec_sum.size(),
        "grad stats: gradient size does not match splat count");
  for (std::size_t i = 0; i < norm_sum.size(); ++i) {
    const double* g = &mu_grad[3 * i];
    for (int a = 0; a < 3; ++a) vec_sum[3 * i + static_cast<std::size_t>(a)] += g[a];
    norm_sum[i] += std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
  }
  ++steps;
}

double GradStats::mean_norm(int i) const {
  if (steps == 0) return 0.0;
  return norm_sum[static_cast<std::size_t>(i)] / steps;
}

namespace {

struct RowRef {
  const splats::RiggedGaussianSet* set;
  int row;
};

void append_row(splats::RiggedGaussianSet& dst, const splats::RiggedGaussianSet& src,
                int row) {
  const auto r = static_cast<std::size_t>(row);
  for (int a = 0; a < 3; ++a) dst.mu_local.push_back(src.mu_local[3 * r + static_cast<std::size_t>(a)]);
  for (int a = 0; a < 4; ++a) dst.quat_local.push_back(src.quat_local[4 * r + static_cast<std::size_t>(a)]);
  for (int a = 0; a < 3; ++a) dst.log_scale.push_back(src.log_scale[3 * r + static_cast<std::size_t>(a)]);
  dst.opacity_logit.push_back(src.opacity_logit[r]);
  for (int a = 0; a < src.latent_dim; ++a)
    dst.latent.push_back(src.latent[r * static_cast<std::size_t>(src.latent_dim) + static_cast<std::size_t>(a)]);
  for (int a = 0; a < 3; ++a) dst.static_rgb.push_back(src.static_rgb[3 * r + static_cast<std::size_t>(a)]);
  dst.parent_face.push_back(src.parent_face[r]);
  ++dst.count;
}

// sample a point of the splat's own Gaussian, in the local (face) frame
Eigen::Vector3d sample_in_gaussian(const splats::RiggedGaussianSet& set, int row,
                                   Rng& rng) {
  const auto r = static_cast<std::size_t>(row);
  const Eigen::Quaterniond q(set.quat_local[4 * r], set.quat_local[4 * r + 1],
                             set.quat_local[4 * r + 2], set.quat_local[4 * r + 3]);
  Eigen::Vector3d n(rng.normal(), rng.normal(), rng.normal());
  for (int a = 0; a < 3; ++a) n(a) *= std::exp(set.log_scale[3 * r + static_cast<std::size_t>(a)]);
  Eigen::Map<const Eigen::Vector3d> mu(&set.mu_local[3 * r]);
  return mu + q.normalized().toRotationMatrix() * n;
}

}  // namespace

Restructure densify(const splats::RiggedGaussianSet& set, const GradStats& stats,
                    const std::vector<mesh::TriangleFrame>& frames,
                    const DensifyConfig& cfg, Rng& rng) {
  cfg.validate();
  check(stats.norm_sum.size() == static_cast<std::size_t>(set.count),
        "grad stats do not match splat count");

  Restructure out;
  out.set = set;
  out.source_row.resize(static_cast<std::size_t>(set.count));
  std::iota(out.source_row.begin(), out.source_row.end(), 0);

  for (int i = 0; i < set.count; ++i) {
    if (stats.mean_norm(i) <= cfg.grad_threshold) continue;
    const auto r = static_cast<std::size_t>(i);
    const int face = set.parent_face[r];
    check(face >= 0 && static_cast<std::size_t>(face) < frames.size(),
          strcat_("splat ", i, " parent face ", face, " has no frame"));
    const double k = frames[static_cast<std::size_t>(face)].scale;
    double max_scale = 0;
    for (int a = 0; a < 3; ++a)
      max_scale = std::max(max_scale, k * std::exp(set.log_scale[3 * r + static_cast<std::size_t>(a)]));

    if (max_scale < cfg.size_threshold) {
      // clone: duplicate, nudged along the accumulated gradient direction
      append_row(out.set, set, i);
      out.source_row.push_back(i);
      Eigen::Map<const Eigen::Vector3d> gsum(&stats.vec_sum[3 * r]);
      if (gsum.norm() > 0) {
        // world step of clone_step corresponds to (step/k) R^T d in the frame
        const Eigen::Vector3d dir =
            frames[static_cast<std::size_t>(face)].rotation.transpose() * gsum.normalized();
        const auto back = static_cast<std::size_t>(out.set.count - 1);
        for (int a = 0; a < 3; ++a)
          out.set.mu_local[3 * back + static_cast<std::size_t>(a)] += cfg.clone_step / k * dir(a);
      }
    } else {
      // split: the row becomes one child, a new row the other
      const Eigen::Vector3d c1 = sample_in_gaussian(set, i, rng);
      const Eigen::Vector3d c2 = sample_in_gaussian(set, i, rng);
      append_row(out.set, set, i);
      out.source_row.push_back(i);
      const auto back = static_cast<std::size_t>(out.set.count - 1);
      const double shrink = std::log(cfg.split_factor);
      for (int a = 0; a < 3; ++a) {
        out.set.mu_local[3 * r + static_cast<std::size_t>(a)] = c1(a);
        out.set.mu_local[3 * back + static_cast<std::size_t>(a)] = c2(a);
        out.set.log_scale[3 * r + static_cast<std::size_t>(a)] -= shrink;
        out.set.log_scale[3 * back + static_cast<std::size_t>(a)] -= shrink;
      }
    }
  }
  return out;
}

Restructure prune_topk(const splats::RiggedGaussianSet& set,
                       const std::vector<mesh::TriangleFrame>& frames,
                       int face_count, int k) {
  check(k > 0, "prune k must be positive");
  check(static_cast<std::size_t>(face_count) <= frames.size(),
        "prune: frames cover fewer faces than the mesh has");

  const auto score = splats::volume_score(set, frames);
  std::vector<int> order(static_cast<std::size_t>(set.count));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = score[static_cast<std::size_t>(a)];
    const double sb = score[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  });

  std::vector<char> keep(static_cast<std::size_t>(set.count), 0);
  for (int i = 0; i < std::min(k, set.count); ++i)
    keep[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;

  Restructure out;

  // floor: every face keeps its best splat even if it fell out of the top k
  std::vector<int> best_kept(static_cast<std::size_t>(face_count), -1);
  std::vector<int> best_any(static_cast<std::size_t>(face_count), -1);
  for (int i : order) {
    const auto f = static_cast<std::size_t>(set.parent_face[static_cast<std::size_t>(i)]);
    check(f < static_cast<std::size_t>(face_count), "parent face out of range");
    if (best_any[f] < 0) best_any[f] = i;
    if (keep[static_cast<std::size_t>(i)] && best_kept[f] < 0) best_kept[f] = i;
  }
  std::vector<int> fresh_faces;
  for (int f = 0; f < face_count; ++f) {
    if (best_kept[static_cast<std::size_t>(f)] >= 0) continue;
    if (best_any[static_cast<std::size_t>(f)] >= 0)
      keep[static_cast<std::size_t>(best_any[static_cast<std::size_t>(f)])] = 1;
    else
      fresh_faces.push_back(f);
  }

  out.set.count = 0;
  out.set.latent_dim = set.latent_dim;
  for (int i = 0; i < set.count; ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    append_row(out.set, set, i);
    out.source_row.push_back(i);
  }
  for (int f : fresh_faces) {
    // fresh centroid splat with bind-time defaults
    out.set.mu_local.insert(out.set.mu_local.end(), {0.0, 0.0, 0.0});
    out.set.quat_local.insert(out.set.quat_local.end(), {1.0, 0.0, 0.0, 0.0});
    out.set.log_scale.insert(out.set.log_scale.end(), 3, std::log(0.5));
    out.set.opacity_logit.push_back(0.0);
    out.set.latent.insert(out.set.latent.end(),
                          static_cast<std::size_t>(set.latent_dim), 0.0);
    out.set.static_rgb.insert(out.set.static_rgb.end(), 3, 0.5);
    out.set.parent_face.push_back(f);
    ++out.set.count;
    out.source_row.push_back(-1);
  }
  return out;
}

}  // namespace talksplat::density
