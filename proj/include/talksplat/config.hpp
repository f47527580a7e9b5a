#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "talksplat/density.hpp"
#include "talksplat/losses.hpp"

namespace talksplat::engine {

// Full run description. Parsed from `key = value` text; every knob is
// explicit here so a config echo pins a run completely.
struct RunConfig {
  std::uint64_t seed = 1;

  // procedural head
  int mesh_rings = 8;
  int mesh_segments = 12;
  int expr_dims = 4;
  bool subdivide_teeth = true;

  // cameras & images
  int camera_count = 4;
  double camera_radius = 4.2;
  double camera_fov_deg = 45.0;
  int image_size = 64;
  int holdout_camera = 1;  // excluded from training, used for metrics

  // synthetic data
  int sequences = 2;
  int frames_per_seq = 8;
  double feature_rate = 50.0;  // raw feature rate before interpolation
  double video_rate = 30.0;
  int audio_dim = 8;
  double truth_jitter = 0.25;  // perturbation of the ground-truth avatar
  bool truth_wrinkles = true;  // expression-correlated stripes on the cheeks

  // avatar
  int latent_dim = 8;

  // loss stack (weights shared by fit and sequence refinement)
  losses::LossWeights loss;
  int feature_levels = 3;
  int feature_channels = 8;
  int global_down = 32;  // resize target for the global feature loss
  int patch_count = 4;
  int patch_size = 16;

  // avatar fitting
  int fit_steps = 5000;
  double lr_mu = 2e-3;
  double lr_quat = 2e-3;
  double lr_scale = 5e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;
  double lr_latent = 2.5e-3;
  density::DensifyConfig densify;
  int densify_start = 500;
  int densify_stop = 4000;
  int log_every = 250;
  int checkpoint_every = 2500;

  // sequence training
  int seq_width = 64;
  int seq_heads = 4;
  int seq_ff = 1024;
  int pretrain_steps = 400;
  int warmup_steps = 2000;
  int alternations = 100;  // (a,b) pairs after warmup
  double lr_motion = 1e-3;
  double lr_encoder = 1e-3;
  int photo_frames = 2;  // frames rendered per (b) step

  void validate() const;
};

RunConfig parse_config(std::istream& is);
RunConfig parse_config_file(const std::string& path);
// Applies one `key = value` assignment (the CLI override path).
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);
// Canonical text form; parse(serialize(c)) == c field-for-field.
std::string serialize_config(const RunConfig& cfg);

}  // namespace talksplat::engine
