#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "talksplat/features.hpp"
#include "talksplat/image.hpp"
#include "talksplat/tensor.hpp"

namespace talksplat::losses {

struct LossWeights {
  double pos = 0.01;
  double scaling = 1.0;
  double global = 1.0;
  double patch = 0.001;
  double wrinkle = 10.0;
  double dssim = 0.2;
  void validate() const;
};

inline constexpr double kEpsPosition = 1.0;  // local (frame-relative) units
inline constexpr double kEpsScale = 0.6;

// mean absolute error
ad::Tensor l1(const ad::Tensor& pred, const ad::Tensor& gt);

// (1 - dssim_weight) * L1 + dssim_weight * (1 - SSIM) / 2
ad::Tensor l_rgb(const ad::Tensor& pred_hwc, const ad::Tensor& gt_hwc,
                 double dssim_weight);

// per-splat hinge on local offsets: sum_i || relu(|mu_i| - eps) ||_2
ad::Tensor l_position(const ad::Tensor& mu_local, double eps = kEpsPosition);
// same hinge on local scales exp(log_s)
ad::Tensor l_scaling(const ad::Tensor& log_scale, double eps = kEpsScale);

// G = F F^T / (C*H*W) for a [C,H,W] feature map
ad::Tensor gram(const ad::Tensor& fmap);

// content + style over a feature pyramid, inputs downscaled first
ad::Tensor l_global(const ad::Tensor& pred_hwc, const ad::Tensor& gt_hwc,
                    const feat::FeatureBackend& backend, int down_h, int down_w);

// anchors for masked patch sampling; depends only on (mask, seed)
std::vector<std::pair<int, int>> patch_anchors(const img::ImageGray& mask,
                                               std::uint64_t seed, int n_patches,
                                               int patch);

// mean over sampled mask-anchored patches of the content loss
ad::Tensor l_patch(const ad::Tensor& pred_hwc, const ad::Tensor& gt_hwc,
                   const img::ImageGray& mask, const feat::FeatureBackend& backend,
                   std::uint64_t seed, int n_patches = 16, int patch = 128);

// content-only feature distance (wrinkle backend)
ad::Tensor l_wrinkle(const ad::Tensor& pred_hwc, const ad::Tensor& gt_hwc,
                     const feat::FeatureBackend& backend);

// weighted sum; undefined members are skipped
struct LossTerms {
  ad::Tensor rgb;
  ad::Tensor position;
  ad::Tensor scaling;
  ad::Tensor global;
  ad::Tensor patch;
  ad::Tensor wrinkle;
};

ad::Tensor l_total(const LossTerms& terms, const LossWeights& weights);

// per-frame photometric term of the sequence trainer:
// rgb + global_weight * global + patch_weight * patch
ad::Tensor l_photo_frame(const ad::Tensor& rgb, const ad::Tensor& global,
                         const ad::Tensor& patch, const LossWeights& weights);

}  // namespace talksplat::losses
