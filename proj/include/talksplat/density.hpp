#pragma once

#include <vector>

#include "talksplat/mesh.hpp"
#include "talksplat/rng.hpp"
#include "talksplat/splats.hpp"

namespace talksplat::density {

struct DensifyConfig {
  double grad_threshold = 2e-4;   // on the mean positional-gradient norm
  double size_threshold = 0.02;   // on the max global scale, world units
  double split_factor = 1.6;
  double clone_step = 0.01;       // world-space clone offset along the gradient
  int interval = 5000;            // optimizer steps between control events
  int prune_k = 25000;
  void validate() const;
};

// per-splat positional-gradient statistics accumulated between control events
struct GradStats {
  std::vector<double> vec_sum;   // [G,3] summed world-space mean gradients
  std::vector<double> norm_sum;  // [G]
  int steps = 0;

  void reset(int count);
  void accumulate(const std::vector<double>& mu_grad);  // [G,3]
  double mean_norm(int i) const;
};

// restructuring result: the new set plus, per new row, the source row in the
// old set (-1 for freshly created splats) so optimizer state can follow
struct Restructure {
  splats::RiggedGaussianSet set;
  std::vector<int> source_row;
};

// clone small / split large high-gradient splats; never removes a splat
Restructure densify(const splats::RiggedGaussianSet& set, const GradStats& stats,
                    const std::vector<mesh::TriangleFrame>& frames,
                    const DensifyConfig& cfg, Rng& rng);

// keep the k splats with the largest opacity-times-scale-volume score
// (ties to the lower index), then re-insert the best removed splat for any
// face left bare (or a fresh centroid splat if the face never had one)
Restructure prune_topk(const splats::RiggedGaussianSet& set,
                       const std::vector<mesh::TriangleFrame>& frames,
                       int face_count, int k);

}  // namespace talksplat::density
