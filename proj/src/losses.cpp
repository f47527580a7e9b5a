#include "talksplat/losses.hpp"

#include "talksplat/common.hpp"
#include "talksplat/metrics.hpp"

namespace talksplat::losses {

void LossWeights::validate() const {
  for (double v : {pos, scaling, global, patch, wrinkle, dssim})
    check(v >= 0.0, "loss weights must be non-negative");
  check(dssim <= 1.0, "dssim weight must be at most 1");
}

ad::Tensor l1(const ad::Tensor& pred, const ad::Tensor& gt) {
  check(pred.shape() == gt.shape(),
        strcat_("l1: shape mismatch ", ad::shape_str(pred.shape()), " vs ",
                ad::shape_str(gt.shape())));
  return ad::mean_all(ad::abs(ad::sub(pred, gt)));
}

ad::Tensor l_rgb(const ad::Tensor& pred_hwc, const ad::Tensor& gt_hwc,
                 double dssim_weight) {
  check(dssim_weight >= 0.0 && dssim_weight <= 1.0, "bad dssim weight");
  auto term_l1 = ad::mul_scalar(l1(pred_hwc, gt_hwc), 1.0 - dssim_weight);
  auto dssim = ad::mul_scalar(
      ad::add_scalar(ad::neg(metrics::ssim_on_tape(pred_hwc, gt_hwc)), 1.0), 0.5);
  return ad::add(term_l1, ad::mul_scalar(dssim, dssim_weight));
}

namespace {

// sum_rows || relu(x - eps) ||_2 for non-negative magnitudes x
ad::Tensor hinge_norm(const ad::Tensor& magnitudes, double eps) {
  auto hinged = ad::relu(ad::add_scalar(magnitudes, -eps));
  return ad::sum_all(ad::rows_norm(hinged));
}

}  // namespace

ad::Tensor l_position(const ad::Tensor& mu_local, double eps) {
  check(mu_local.ndim() == 2 && mu_local.dim(1) == 3,
        "l_position: expected [G,3] local offsets");
  return hinge_norm(ad::abs(mu_local), eps);
}

ad::Tensor l_scaling(const ad::Tensor& log_scale, double eps) {
  check(log_scale.ndim() == 2 && log_scale.dim(1) == 3,
        "l_scaling: expected [G,3] log scales");
  return hinge_norm(ad::exp(log_scale), eps);
}

ad::Tensor gram(const ad::Tensor& fmap) {
  check(fmap.ndim() == 3, "gram: expected [C,H,W]");
  const int c = fmap.dim(0);
  const auto hw = static_cast<std::int64_t>(fmap.dim(1)) * fmap.dim(2);
  auto f = ad::reshape(fmap, {c, static_cast<int>(hw)});
  return ad::mul_scalar(ad::matmul(f, ad::transpose2(f)),
                        1.0 / static_cast<double>(c * hw));
}

namespace {

ad::Tensor sum_abs_diff(const ad::Tensor& a, const ad::Tensor& b) {
  return ad::sum_all(ad::abs(ad::sub(a, b)));
}

ad::Tensor content_loss(const std::vector<ad::Tensor>& fp,
                        const std::vector<ad::Tensor>& fg) {
  check(fp.size() == fg.size() && !fp.empty(), "feature map count drifted");
  ad::Tensor acc;
  for (std::size_t k = 0; k < fp.size(); ++k) {
    check(fp[k].shape() == fg[k].shape(), "feature map shape drifted");
    auto term = sum_abs_diff(fp[k], fg[k]);
    acc = k == 0 ? term : ad::add(acc, term);
  }
  return acc;
}

}  // namespace

ad::Tensor l_global(const ad::Tensor& pred_hwc, const ad::Tensor& gt_hwc,
                    const feat::FeatureBackend& backend, int down_h, int down_w) {
  check(pred_hwc.shape() == gt_hwc.shape(), "l_global: shape mismatch");
  auto down = [&](const ad::Tensor& t) {
    return ad::resize_bilinear(ad::chw_from_hwc(t), down_h, down_w);
  };
  auto fp = backend.evaluate(down(pred_hwc));
  auto fg = backend.evaluate(down(gt_hwc));
  auto loss = content_loss(fp, fg);
  for (std::size_t k = 0; k < fp.size(); ++k)
    loss = ad::add(loss, sum_abs_diff(gram(fp[k]), gram(fg[k])));
  return loss;
}

std::vector<std::pair<int, int>> patch_anchors(const img::ImageGray& mask,
                                               std::uint64_t seed, int n_patches,
                                               int patch) {
  check(n_patches >= 1, "need at least one patch");
  check(patch >= 1 && patch <= mask.height && patch <= mask.width,
        strcat_("patch size ", patch, " does not fit in ", mask.height, "x",
                mask.width));
  std::vector<std::pair<int, int>> valid;
  for (int y = 0; y + patch <= mask.height; ++y)
    for (int x = 0; x + patch <= mask.width; ++x)
      if (mask.at(y, x) > 0.5) valid.emplace_back(y, x);
  check(!valid.empty(), "no valid patch anchors in mask");
  Rng rng(derive_seed(seed, "patch-anchors"));
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(n_patches));
  for (int i = 0; i < n_patches; ++i)
    out.push_back(valid[static_cast<std::size_t>(rng.uniform_int(valid.size()))]);
  return out;
}

ad::Tensor l_patch(const ad::Tensor& pred_hwc, const ad::Tensor& gt_hwc,
                   const img::ImageGray& mask, const feat::FeatureBackend& backend,
                   std::uint64_t seed, int n_patches, int patch) {
  check(pred_hwc.shape() == gt_hwc.shape(), "l_patch: shape mismatch");
  check(pred_hwc.dim(0) == mask.height && pred_hwc.dim(1) == mask.width,
        "l_patch: mask size mismatch");
  auto anchors = patch_anchors(mask, seed, n_patches, patch);
  auto pc = ad::chw_from_hwc(pred_hwc);
  auto gc = ad::chw_from_hwc(gt_hwc);
  ad::Tensor acc;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto [y, x] = anchors[i];
    auto fp = backend.evaluate(ad::extract_patch(pc, y, x, patch));
    auto fg = backend.evaluate(ad::extract_patch(gc, y, x, patch));
    auto term = content_loss(fp, fg);
    acc = i == 0 ? term : ad::add(acc, term);
  }
  return ad::mul_scalar(acc, 1.0 / static_cast<double>(anchors.size()));
}

ad::Tensor l_wrinkle(const ad::Tensor& pred_hwc, const ad::Tensor& gt_hwc,
                     const feat::FeatureBackend& backend) {
  check(pred_hwc.shape() == gt_hwc.shape(), "l_wrinkle: shape mismatch");
  return content_loss(backend.evaluate(ad::chw_from_hwc(pred_hwc)),
                      backend.evaluate(ad::chw_from_hwc(gt_hwc)));
}

ad::Tensor l_total(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  check(terms.rgb.defined(), "l_total: rgb term is required");
  auto loss = terms.rgb;
  auto maybe = [&](const ad::Tensor& t, double w) {
    if (t.defined()) loss = ad::add(loss, ad::mul_scalar(t, w));
  };
  maybe(terms.position, weights.pos);
  maybe(terms.scaling, weights.scaling);
  maybe(terms.global, weights.global);
  maybe(terms.patch, weights.patch);
  maybe(terms.wrinkle, weights.wrinkle);
  return loss;
}

ad::Tensor l_photo_frame(const ad::Tensor& rgb, const ad::Tensor& global,
                         const ad::Tensor& patch, const LossWeights& weights) {
  weights.validate();
  auto loss = rgb;
  if (global.defined()) loss = ad::add(loss, ad::mul_scalar(global, weights.global));
  if (patch.defined()) loss = ad::add(loss, ad::mul_scalar(patch, weights.patch));
  return loss;
}

}  // namespace talksplat::losses
