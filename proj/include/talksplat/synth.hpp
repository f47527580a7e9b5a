#pragma once

// Deterministic synthetic scene generator: a procedural head avatar with
// expression-correlated skin texture, a camera ring, and feature/expression
// tracks. synth_scene() writes a complete dataset that fit/train read back.

#include <string>
#include <vector>

#include "talksplat/camera.hpp"
#include "talksplat/color_model.hpp"
#include "talksplat/config.hpp"
#include "talksplat/dataset.hpp"
#include "talksplat/image.hpp"
#include "talksplat/mesh.hpp"
#include "talksplat/sequence.hpp"
#include "talksplat/splats.hpp"

namespace talksplat::engine {

// Ground-truth avatar. Rendering always uses the teeth-subdivided mesh so
// the mouth band carries sub-face detail; the dataset ships the base rig.
struct SynthTruth {
  mesh::BlendMesh base_mesh;
  mesh::BlendMesh truth_mesh;
  splats::RiggedGaussianSet set;  // rigged to truth_mesh, jittered
  color::ColorModel colors;
  std::vector<double> base_mod;      // [G,3] static tint (teeth shading folded in)
  std::vector<double> stripe_phase;  // [G] cheek stripe spatial phase
  std::vector<char> cheek;           // [G] carries the animated stripe
};

SynthTruth make_truth(const RunConfig& cfg);

// Cameras on a frontal arc (150 degrees, +z center) looking at the origin.
std::vector<cam::Camera> make_camera_ring(const RunConfig& cfg);

// Raw feature track for one sequence: seeded sinusoid mixtures per channel
// at cfg.feature_rate, sized so interpolation to cfg.video_rate yields
// exactly cfg.frames_per_seq frames.
seq::FeatureSequence make_features(const RunConfig& cfg, int sequence);

// Expression track at video rate. Component 0 is a scripted monotone
// quarter-sine mouth-open ramp; the rest are a squashed linear readout of
// the interpolated features.
seq::FeatureSequence make_expressions(const RunConfig& cfg,
                                      const seq::FeatureSequence& features);

img::ImageRGB render_truth(const SynthTruth& truth,
                           const std::vector<double>& psi,
                           const cam::Camera& camera);

// Geometric band predicates (centroid tests on the rest pose), usable on the
// base or any subdivided rig.
std::vector<char> cheek_faces(const mesh::BlendMesh& m);
std::vector<char> region_faces(const mesh::BlendMesh& m, mesh::Region region);

// Opaque canonical one-splat-per-face binding used for mask rendering.
splats::RiggedGaussianSet mask_binding(const mesh::BlendMesh& m);

// Binary indicator image of the flagged faces: flagged splats render white,
// the rest black (so occlusion is respected), threshold at 0.5.
img::ImageGray band_mask(const mesh::BlendMesh& m,
                         const splats::RiggedGaussianSet& binding,
                         const std::vector<char>& face_flags,
                         const std::vector<double>& psi,
                         const cam::Camera& camera);

// Write mesh, cameras, and per-sequence tracks + rendered frames under root.
void synth_scene(const RunConfig& cfg, const std::string& root);

}  // namespace talksplat::engine
