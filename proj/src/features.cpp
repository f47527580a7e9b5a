#include "talksplat/features.hpp"

#include <cmath>

#include "talksplat/common.hpp"

namespace talksplat::feat {

namespace {

ad::ConvKernel random_kernel(Rng& rng, int out_c, int in_c) {
  ad::ConvKernel k;
  k.out_c = out_c;
  k.in_c = in_c;
  k.kh = k.kw = 3;
  k.w.resize(static_cast<std::size_t>(out_c) * static_cast<std::size_t>(in_c) * 9);
  const double scale = std::sqrt(2.0 / (in_c * 9.0));
  for (auto& v : k.w) v = scale * rng.normal();
  return k;
}

void check_poolable(const ad::Tensor& t, int levels, const char* who) {
  check(t.ndim() == 3, strcat_(who, ": expected [C,H,W] input"));
  const int div = 1 << (levels - 1);
  check(t.dim(1) % div == 0 && t.dim(2) % div == 0,
        strcat_(who, ": image size ", t.dim(1), "x", t.dim(2),
                " not divisible by ", div));
}

}  // namespace

ConvPyramid::ConvPyramid(std::uint64_t seed, int levels, int channels)
    : levels_(levels), channels_(channels) {
  check(levels >= 1, "ConvPyramid: need at least one level");
  check(channels >= 1, "ConvPyramid: need at least one channel");
  Rng rng(derive_seed(seed, "conv-pyramid"));
  stem_ = random_kernel(rng, channels, 3);
  for (int l = 1; l < levels; ++l) mids_.push_back(random_kernel(rng, channels, channels));
}

std::vector<ad::Tensor> ConvPyramid::evaluate(const ad::Tensor& chw) const {
  check_poolable(chw, levels_, "ConvPyramid");
  check(chw.dim(0) == 3, "ConvPyramid: expected 3 input channels");
  std::vector<ad::Tensor> maps;
  auto f = ad::relu(ad::conv2d_fixed(chw, stem_, ad::Pad::kReflect));
  maps.push_back(f);
  for (int l = 1; l < levels_; ++l) {
    auto pooled = ad::avg_pool2(maps.back());
    maps.push_back(ad::relu(
        ad::conv2d_fixed(pooled, mids_[static_cast<std::size_t>(l - 1)], ad::Pad::kReflect)));
  }
  return maps;
}

GradEnergyPyramid::GradEnergyPyramid(int levels) : levels_(levels) {
  check(levels >= 1, "GradEnergyPyramid: need at least one level");
}

std::vector<ad::Tensor> GradEnergyPyramid::evaluate(const ad::Tensor& chw) const {
  check_poolable(chw, levels_, "GradEnergyPyramid");
  check(chw.dim(0) == 3, "GradEnergyPyramid: expected 3 input channels");

  // luminance as a fixed 1x1 convolution
  ad::ConvKernel lum;
  lum.out_c = 1;
  lum.in_c = 3;
  lum.kh = lum.kw = 1;
  lum.w = {0.299, 0.587, 0.114};
  // Sobel pair, 1/8 normalization
  const std::vector<double> sx{-0.125, 0, 0.125, -0.25, 0, 0.25, -0.125, 0, 0.125};
  const std::vector<double> sy{-0.125, -0.25, -0.125, 0, 0, 0, 0.125, 0.25, 0.125};

  std::vector<ad::Tensor> maps;
  auto level = ad::conv2d_fixed(chw, lum, ad::Pad::kZero);  // [1,H,W]
  for (int l = 0;; ++l) {
    auto gx = ad::conv2d_depthwise_fixed(level, 3, 3, sx, ad::Pad::kReflect);
    auto gy = ad::conv2d_depthwise_fixed(level, 3, 3, sy, ad::Pad::kReflect);
    maps.push_back(ad::add(ad::square(gx), ad::square(gy)));
    if (l + 1 >= levels_) break;
    level = ad::avg_pool2(level);
  }
  return maps;
}

}  // namespace talksplat::feat
