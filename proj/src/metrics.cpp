#include "talksplat/metrics.hpp"

#include <cmath>

#include "talksplat/common.hpp"

namespace talksplat::metrics {

double mse(const img::ImageRGB& a, const img::ImageRGB& b) {
  check(a.same_size(b), "mse: image size mismatch");
  check(!a.px.empty(), "mse: empty image");
  double acc = 0;
  for (std::size_t i = 0; i < a.px.size(); ++i) {
    const double d = a.px[i] - b.px[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.px.size());
}

double psnr(const img::ImageRGB& a, const img::ImageRGB& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(m));
}

std::vector<double> gaussian_window(int size, double sigma) {
  check(size >= 1 && size % 2 == 1, "gaussian window size must be odd");
  std::vector<double> g(static_cast<std::size_t>(size));
  const int half = size / 2;
  double sum = 0;
  for (int i = 0; i < size; ++i) {
    const double d = i - half;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * sigma * sigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  std::vector<double> w(static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      w[static_cast<std::size_t>(i) * static_cast<std::size_t>(size) + static_cast<std::size_t>(j)] =
          g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)] / (sum * sum);
  return w;
}

ad::Tensor ssim_on_tape(const ad::Tensor& pred_hwc, const ad::Tensor& gt_hwc) {
  check(pred_hwc.shape() == gt_hwc.shape(),
        strcat_("ssim: shape mismatch ", ad::shape_str(pred_hwc.shape()), " vs ",
                ad::shape_str(gt_hwc.shape())));
  check(pred_hwc.ndim() == 3 && pred_hwc.dim(2) == 3, "ssim: expected [H,W,3]");
  const auto w = gaussian_window();
  auto filt = [&](const ad::Tensor& t) {
    return ad::conv2d_depthwise_fixed(t, kSsimWindow, kSsimWindow, w,
                                      ad::Pad::kReflect);
  };
  auto x = ad::chw_from_hwc(pred_hwc);
  auto y = ad::chw_from_hwc(gt_hwc);
  auto mx = filt(x);
  auto my = filt(y);
  auto mxx = ad::mul(mx, mx);
  auto myy = ad::mul(my, my);
  auto mxy = ad::mul(mx, my);
  auto vx = ad::sub(filt(ad::mul(x, x)), mxx);   // sigma_x^2
  auto vy = ad::sub(filt(ad::mul(y, y)), myy);   // sigma_y^2
  auto cxy = ad::sub(filt(ad::mul(x, y)), mxy);  // sigma_xy
  auto num = ad::mul(ad::add_scalar(ad::mul_scalar(mxy, 2.0), kSsimC1),
                     ad::add_scalar(ad::mul_scalar(cxy, 2.0), kSsimC2));
  auto den = ad::mul(ad::add_scalar(ad::add(mxx, myy), kSsimC1),
                     ad::add_scalar(ad::add(vx, vy), kSsimC2));
  return ad::mean_all(ad::div(num, den));
}

double ssim(const img::ImageRGB& a, const img::ImageRGB& b) {
  check(a.same_size(b), "ssim: image size mismatch");
  ad::Tape tape;
  auto ta = tape.input({a.height, a.width, 3}, a.px);
  auto tb = tape.input({b.height, b.width, 3}, b.px);
  return ssim_on_tape(ta, tb).value();
}

}  // namespace talksplat::metrics
