#pragma once

#include <memory>
#include <string>
#include <vector>

#include "talksplat/rng.hpp"
#include "talksplat/tensor.hpp"

namespace talksplat::feat {

// Differentiable image-feature evaluator: [3,H,W] -> K feature maps
// [C_k,H_k,W_k]. Deterministic; shapes depend only on the input size.
class FeatureBackend {
 public:
  virtual ~FeatureBackend() = default;
  virtual std::vector<ad::Tensor> evaluate(const ad::Tensor& chw) const = 0;
  virtual std::string name() const = 0;
};

// Fixed seeded random 3x3 convolution pyramid: a lightweight stand-in for a
// pretrained perceptual network, exercising the same loss structure.
class ConvPyramid final : public FeatureBackend {
 public:
  ConvPyramid(std::uint64_t seed, int levels, int channels);
  std::vector<ad::Tensor> evaluate(const ad::Tensor& chw) const override;
  std::string name() const override { return "conv-pyramid"; }
  int levels() const { return levels_; }

 private:
  int levels_;
  int channels_;
  ad::ConvKernel stem_;
  std::vector<ad::ConvKernel> mids_;
};

// Gradient-energy pyramid: per level, |dI/dx|^2 + |dI/dy|^2 of the luminance
// via Sobel filters. Responds to fine-scale texture, ignores constant offsets.
class GradEnergyPyramid final : public FeatureBackend {
 public:
  explicit GradEnergyPyramid(int levels);
  std::vector<ad::Tensor> evaluate(const ad::Tensor& chw) const override;
  std::string name() const override { return "grad-energy-pyramid"; }
  int levels() const { return levels_; }

 private:
  int levels_;
};

}  // namespace talksplat::feat
