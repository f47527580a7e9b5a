#pragma once

#include <vector>

#include "talksplat/image.hpp"
#include "talksplat/tensor.hpp"

namespace talksplat::metrics {

inline constexpr double kPsnrCap = 99.0;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

double mse(const img::ImageRGB& a, const img::ImageRGB& b);
double psnr(const img::ImageRGB& a, const img::ImageRGB& b);  // dB, capped
double ssim(const img::ImageRGB& a, const img::ImageRGB& b);

// normalized separable Gaussian window, size x size
std::vector<double> gaussian_window(int size = kSsimWindow,
                                    double sigma = kSsimSigma);

// SSIM with pred on tape; gt may be a constant on the same tape. Mean over
// pixels and channels; 11x11 Gaussian window, reflect padding.
ad::Tensor ssim_on_tape(const ad::Tensor& pred_hwc, const ad::Tensor& gt_hwc);

}  // namespace talksplat::metrics
