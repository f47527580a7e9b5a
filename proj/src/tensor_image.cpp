#include <cmath>

#include "talksplat/tensor.hpp"

// Image ops over [C,H,W] tensors. Convolution kernels are fixed (seeded or
// analytic) banks, never learned, so no kernel gradients exist anywhere.

namespace talksplat::ad {

namespace {

void need_chw(const Tensor& x, const char* op) {
  check(x.ndim() == 3,
        strcat_(op, ": expected [C,H,W], got ", shape_str(x.shape())));
}

// Mirror-without-edge-repeat index (…2,1,0,1,2,… at the low edge).
int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

Tensor conv2d_fixed(const Tensor& x, const ConvKernel& k, Pad pad) {
  need_chw(x, "conv2d_fixed");
  Tape& tp = *x.tape();
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  check(k.in_c == C, strcat_("conv2d_fixed: kernel expects ", k.in_c,
                             " channels, image has ", C));
  check(k.kh % 2 == 1 && k.kw % 2 == 1, "conv2d_fixed: kernel must be odd");
  check(static_cast<int>(k.w.size()) == k.out_c * k.in_c * k.kh * k.kw,
        "conv2d_fixed: kernel weight count mismatch");
  const int ph = k.kh / 2, pw = k.kw / 2;
  Tensor out = tp.alloc({k.out_c, H, W});
  const double* px = x.data();
  double* po = out.data();
  auto xat = [&](int c, int i, int j) -> double {
    if (pad == Pad::kReflect) {
      return px[(static_cast<std::size_t>(c) * H + reflect(i, H)) * W +
                reflect(j, W)];
    }
    if (i < 0 || i >= H || j < 0 || j >= W) return 0.0;
    return px[(static_cast<std::size_t>(c) * H + i) * W + j];
  };
  for (int o = 0; o < k.out_c; ++o)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        double acc = 0.0;
        for (int c = 0; c < C; ++c)
          for (int u = 0; u < k.kh; ++u)
            for (int v = 0; v < k.kw; ++v)
              acc += k.w[((static_cast<std::size_t>(o) * C + c) * k.kh + u) *
                             k.kw +
                         v] *
                     xat(c, i + u - ph, j + v - pw);
        po[(static_cast<std::size_t>(o) * H + i) * W + j] = acc;
      }
  Tape* t = &tp;
  int xi = x.id(), oi = out.id();
  tp.record("conv2d_fixed", {xi}, oi, [t, xi, oi, k, pad, C, H, W, ph, pw]() {
    const auto& go = t->pass_grad(oi);
    auto& gx = t->grad_buf(xi);
    for (int o = 0; o < k.out_c; ++o)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          const double g =
              go[(static_cast<std::size_t>(o) * H + i) * W + j];
          if (g == 0.0) continue;
          for (int c = 0; c < C; ++c)
            for (int u = 0; u < k.kh; ++u)
              for (int v = 0; v < k.kw; ++v) {
                int ii = i + u - ph, jj = j + v - pw;
                if (pad == Pad::kReflect) {
                  ii = reflect(ii, H);
                  jj = reflect(jj, W);
                } else if (ii < 0 || ii >= H || jj < 0 || jj >= W) {
                  continue;
                }
                gx[(static_cast<std::size_t>(c) * H + ii) * W + jj] +=
                    g *
                    k.w[((static_cast<std::size_t>(o) * C + c) * k.kh + u) *
                            k.kw +
                        v];
              }
        }
  });
  return out;
}

Tensor conv2d_depthwise_fixed(const Tensor& x, int kh, int kw,
                              const std::vector<double>& w, Pad pad) {
  need_chw(x, "conv2d_depthwise_fixed");
  Tape& tp = *x.tape();
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  check(kh % 2 == 1 && kw % 2 == 1, "conv2d_depthwise_fixed: odd kernel only");
  check(static_cast<int>(w.size()) == kh * kw,
        "conv2d_depthwise_fixed: weight count mismatch");
  const int ph = kh / 2, pw = kw / 2;
  Tensor out = tp.alloc({C, H, W});
  const double* px = x.data();
  double* po = out.data();
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        double acc = 0.0;
        for (int u = 0; u < kh; ++u)
          for (int v = 0; v < kw; ++v) {
            int ii = i + u - ph, jj = j + v - pw;
            if (pad == Pad::kReflect) {
              ii = reflect(ii, H);
              jj = reflect(jj, W);
            } else if (ii < 0 || ii >= H || jj < 0 || jj >= W) {
              continue;
            }
            acc += w[static_cast<std::size_t>(u) * kw + v] *
                   px[(static_cast<std::size_t>(c) * H + ii) * W + jj];
          }
        po[(static_cast<std::size_t>(c) * H + i) * W + j] = acc;
      }
  Tape* t = &tp;
  int xi = x.id(), oi = out.id();
  tp.record("conv2d_depthwise_fixed", {xi}, oi,
            [t, xi, oi, kh, kw, w, pad, C, H, W, ph, pw]() {
              const auto& go = t->pass_grad(oi);
              auto& gx = t->grad_buf(xi);
              for (int c = 0; c < C; ++c)
                for (int i = 0; i < H; ++i)
                  for (int j = 0; j < W; ++j) {
                    const double g =
                        go[(static_cast<std::size_t>(c) * H + i) * W + j];
                    if (g == 0.0) continue;
                    for (int u = 0; u < kh; ++u)
                      for (int v = 0; v < kw; ++v) {
                        int ii = i + u - ph, jj = j + v - pw;
                        if (pad == Pad::kReflect) {
                          ii = reflect(ii, H);
                          jj = reflect(jj, W);
                        } else if (ii < 0 || ii >= H || jj < 0 || jj >= W) {
                          continue;
                        }
                        gx[(static_cast<std::size_t>(c) * H + ii) * W + jj] +=
                            g * w[static_cast<std::size_t>(u) * kw + v];
                      }
                  }
            });
  return out;
}

Tensor avg_pool2(const Tensor& x) {
  need_chw(x, "avg_pool2");
  Tape& tp = *x.tape();
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  check(H % 2 == 0 && W % 2 == 0,
        strcat_("avg_pool2: extents must be even, got ", H, "x", W));
  const int oh = H / 2, ow = W / 2;
  Tensor out = tp.alloc({C, oh, ow});
  const double* px = x.data();
  double* po = out.data();
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        const std::size_t b = (static_cast<std::size_t>(c) * H + 2 * i) * W;
        po[(static_cast<std::size_t>(c) * oh + i) * ow + j] =
            0.25 * (px[b + 2 * j] + px[b + 2 * j + 1] + px[b + W + 2 * j] +
                    px[b + W + 2 * j + 1]);
      }
  Tape* t = &tp;
  int xi = x.id(), oi = out.id();
  tp.record("avg_pool2", {xi}, oi, [t, xi, oi, C, H, W, oh, ow]() {
    const auto& go = t->pass_grad(oi);
    auto& gx = t->grad_buf(xi);
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          const double g =
              0.25 * go[(static_cast<std::size_t>(c) * oh + i) * ow + j];
          const std::size_t b = (static_cast<std::size_t>(c) * H + 2 * i) * W;
          gx[b + 2 * j] += g;
          gx[b + 2 * j + 1] += g;
          gx[b + W + 2 * j] += g;
          gx[b + W + 2 * j + 1] += g;
        }
  });
  return out;
}

Tensor resize_bilinear(const Tensor& x, int oh, int ow) {
  need_chw(x, "resize_bilinear");
  Tape& tp = *x.tape();
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  check(oh > 0 && ow > 0, "resize_bilinear: output extents must be positive");
  Tensor out = tp.alloc({C, oh, ow});
  // half-pixel-center sampling, clamped at the border
  auto src = [](int i, int n, int on) {
    double s = (i + 0.5) * static_cast<double>(n) / on - 0.5;
    if (s < 0.0) s = 0.0;
    if (s > n - 1.0) s = n - 1.0;
    return s;
  };
  const double* px = x.data();
  double* po = out.data();
  for (int i = 0; i < oh; ++i) {
    const double sy = src(i, H, oh);
    const int y0 = static_cast<int>(sy);
    const int y1 = y0 + 1 < H ? y0 + 1 : y0;
    const double ty = sy - y0;
    for (int j = 0; j < ow; ++j) {
      const double sx = src(j, W, ow);
      const int x0 = static_cast<int>(sx);
      const int x1 = x0 + 1 < W ? x0 + 1 : x0;
      const double tx = sx - x0;
      for (int c = 0; c < C; ++c) {
        const double* pc = px + static_cast<std::size_t>(c) * H * W;
        const double v =
            (1 - ty) * ((1 - tx) * pc[static_cast<std::size_t>(y0) * W + x0] +
                        tx * pc[static_cast<std::size_t>(y0) * W + x1]) +
            ty * ((1 - tx) * pc[static_cast<std::size_t>(y1) * W + x0] +
                  tx * pc[static_cast<std::size_t>(y1) * W + x1]);
        po[(static_cast<std::size_t>(c) * oh + i) * ow + j] = v;
      }
    }
  }
  Tape* t = &tp;
  int xi = x.id(), oi = out.id();
  tp.record("resize_bilinear", {xi}, oi, [t, xi, oi, C, H, W, oh, ow, src]() {
    const auto& go = t->pass_grad(oi);
    auto& gx = t->grad_buf(xi);
    for (int i = 0; i < oh; ++i) {
      const double sy = src(i, H, oh);
      const int y0 = static_cast<int>(sy);
      const int y1 = y0 + 1 < H ? y0 + 1 : y0;
      const double ty = sy - y0;
      for (int j = 0; j < ow; ++j) {
        const double sx = src(j, W, ow);
        const int x0 = static_cast<int>(sx);
        const int x1 = x0 + 1 < W ? x0 + 1 : x0;
        const double tx = sx - x0;
        for (int c = 0; c < C; ++c) {
          const double g = go[(static_cast<std::size_t>(c) * oh + i) * ow + j];
          if (g == 0.0) continue;
          double* gc = gx.data() + static_cast<std::size_t>(c) * H * W;
          gc[static_cast<std::size_t>(y0) * W + x0] += g * (1 - ty) * (1 - tx);
          gc[static_cast<std::size_t>(y0) * W + x1] += g * (1 - ty) * tx;
          gc[static_cast<std::size_t>(y1) * W + x0] += g * ty * (1 - tx);
          gc[static_cast<std::size_t>(y1) * W + x1] += g * ty * tx;
        }
      }
    }
  });
  return out;
}

Tensor chw_from_hwc(const Tensor& x) {
  check(x.ndim() == 3 && x.dim(2) == 3,
        strcat_("chw_from_hwc: expected [H,W,3], got ", shape_str(x.shape())));
  Tape& tp = *x.tape();
  const int H = x.dim(0), W = x.dim(1);
  Tensor out = tp.alloc({3, H, W});
  const double* px = x.data();
  double* po = out.data();
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j)
      for (int c = 0; c < 3; ++c)
        po[(static_cast<std::size_t>(c) * H + i) * W + j] =
            px[(static_cast<std::size_t>(i) * W + j) * 3 + c];
  Tape* t = &tp;
  int xi = x.id(), oi = out.id();
  tp.record("chw_from_hwc", {xi}, oi, [t, xi, oi, H, W]() {
    const auto& go = t->pass_grad(oi);
    auto& gx = t->grad_buf(xi);
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j)
        for (int c = 0; c < 3; ++c)
          gx[(static_cast<std::size_t>(i) * W + j) * 3 + c] +=
              go[(static_cast<std::size_t>(c) * H + i) * W + j];
  });
  return out;
}

Tensor extract_patch(const Tensor& x, int y0, int x0, int size) {
  need_chw(x, "extract_patch");
  Tape& tp = *x.tape();
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  check(size > 0 && y0 >= 0 && x0 >= 0 && y0 + size <= H && x0 + size <= W,
        strcat_("extract_patch: patch ", size, "x", size, " at (", y0, ",", x0,
                ") outside ", H, "x", W));
  Tensor out = tp.alloc({C, size, size});
  const double* px = x.data();
  double* po = out.data();
  for (int c = 0; c < C; ++c)
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j)
        po[(static_cast<std::size_t>(c) * size + i) * size + j] =
            px[(static_cast<std::size_t>(c) * H + y0 + i) * W + x0 + j];
  Tape* t = &tp;
  int xi = x.id(), oi = out.id();
  tp.record("extract_patch", {xi}, oi, [t, xi, oi, C, H, W, y0, x0, size]() {
    const auto& go = t->pass_grad(oi);
    auto& gx = t->grad_buf(xi);
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j)
          gx[(static_cast<std::size_t>(c) * H + y0 + i) * W + x0 + j] +=
              go[(static_cast<std::size_t>(c) * size + i) * size + j];
  });
  return out;
}

}  // namespace talksplat::ad
