#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "talksplat/mesh.hpp"
#include "talksplat/rng.hpp"
#include "talksplat/tensor.hpp"

namespace talksplat::splats {

// Gaussians rigged to mesh triangles. All per-splat attributes are stored in
// the local frame of the parent face; the global pose is recovered from the
// deformed mesh at evaluation time.
struct RiggedGaussianSet {
  int count = 0;
  int latent_dim = 0;
  std::vector<double> mu_local;       // [G,3]
  std::vector<double> quat_local;     // [G,4] wxyz, unit
  std::vector<double> log_scale;      // [G,3]
  std::vector<double> opacity_logit;  // [G]
  std::vector<double> latent;         // [G,L]
  std::vector<double> static_rgb;     // [G,3] fallback color path
  std::vector<int> parent_face;       // [G]

  void validate(int face_count) const;
  // true iff every face index in [0,face_count) parents at least one splat
  bool covers_all_faces(int face_count) const;
  // project quaternions back to unit norm (after optimizer steps)
  void normalize_quats();
  std::uint64_t content_hash() const;
};

// one splat per face: centroid binding, identity rotation, half-size scale,
// sigma = 1/2, small random latents
RiggedGaussianSet bind_gaussians(const mesh::BlendMesh& m, int latent_dim,
                                 std::uint64_t seed);

struct GlobalSplats {
  std::vector<double> mu;       // [G,3]   mu' = k R mu + T
  std::vector<double> quat;     // [G,4]   q'  = quat(R_face * R_local), w >= 0
  std::vector<double> scale;    // [G,3]   s'  = k exp(log_s)
  std::vector<double> opacity;  // [G]     sigma = sigmoid(logit)
  std::vector<double> cov;      // [G,9]   Sigma = R' S S^T R'^T
};

GlobalSplats to_global(const RiggedGaussianSet& set,
                       const std::vector<mesh::TriangleFrame>& frames);

// Sigma = R S S^T R^T for a unit quaternion (wxyz) and scale vector
Eigen::Matrix3d covariance(const Eigen::Vector4d& quat_wxyz,
                           const Eigen::Vector3d& s);

// per-splat volume score sigma * s'_x s'_y s'_z with global scales
std::vector<double> volume_score(const RiggedGaussianSet& set,
                                 const std::vector<mesh::TriangleFrame>& frames);

// tape leaves for the optimizable splat attributes
struct SplatParams {
  ad::Tensor mu_local;       // [G,3]
  ad::Tensor quat_local;     // [G,4]
  ad::Tensor log_scale;      // [G,3]
  ad::Tensor opacity_logit;  // [G,1]
};

SplatParams params_from_set(ad::Tape& tape, const RiggedGaussianSet& set);

struct SplatsOnTape {
  ad::Tensor mu;       // [G,3]
  ad::Tensor cov;      // [G,9]
  ad::Tensor opacity;  // [G,1]
};

// differentiable local -> global chain; gradients flow to the splat
// attributes and through `frames` to the mesh vertices
SplatsOnTape to_global_on_tape(const SplatParams& params,
                               const mesh::FramesOnTape& frames,
                               const std::vector<int>& parent_face);

}  // namespace talksplat::splats
