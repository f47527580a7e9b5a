#include "talksplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "talksplat/common.hpp"

namespace talksplat::raster {

namespace {

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    check(std::isfinite(x), strcat_("non-finite ", what, " passed to renderer"));
}

void check_sizes(std::size_t g, const std::vector<double>& mu,
                 const std::vector<double>& cov, const std::vector<double>& opacity,
                 const std::vector<double>& colors) {
  check(mu.size() == g * 3, "render: mu size mismatch");
  check(cov.size() == g * 9, "render: cov size mismatch");
  check(opacity.size() == g, "render: opacity size mismatch");
  check(colors.size() == g * 3, "render: colors size mismatch");
  check_finite(mu, "mean");
  check_finite(cov, "covariance");
  check_finite(opacity, "opacity");
  check_finite(colors, "color");
  for (double c : colors)
    check(c >= 0.0 && c <= 1.0, "render: colors must lie in [0,1]");
}

std::vector<Projected> project_all(std::size_t g, const std::vector<double>& mu,
                                   const std::vector<double>& cov,
                                   const cam::Camera& camera) {
  std::vector<Projected> proj(g);
  for (std::size_t i = 0; i < g; ++i) {
    Eigen::Map<const Eigen::Vector3d> m(&mu[3 * i]);
    Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> s(&cov[9 * i]);
    proj[i] = project(m, s, camera);
  }
  return proj;
}

struct PixelEntry {
  double depth;
  int splat;
  double alpha;
  double gauss;
  bool clamped;
};

// shared blending rule: front-to-back with transmittance early-out
template <typename Entries>
void composite(const Entries& entries, const std::vector<double>& colors,
               const std::array<double, 3>& bg, double* rgb_out, double* alpha_out,
               int* n_used) {
  double t = 1.0;
  double acc[3] = {0, 0, 0};
  int used = 0;
  for (const auto& e : entries) {
    const double w = t * e.alpha;
    const double* c = &colors[3 * static_cast<std::size_t>(e.splat)];
    acc[0] += w * c[0];
    acc[1] += w * c[1];
    acc[2] += w * c[2];
    ++used;
    t *= 1.0 - e.alpha;
    if (t < kTransmitFloor) break;
  }
  for (int k = 0; k < 3; ++k) rgb_out[k] = acc[k] + t * bg[k];
  if (alpha_out) *alpha_out = 1.0 - t;
  if (n_used) *n_used = used;
}

}  // namespace

Projected project(const Eigen::Vector3d& mu_world, const Eigen::Matrix3d& cov_world,
                  const cam::Camera& camera) {
  Projected p;
  const Eigen::Vector3d pc = camera.to_cam(mu_world);
  const double x = pc(0), y = pc(1), z = pc(2);
  if (!(z > kNearPlane)) return p;
  p.depth = z;
  p.u = camera.fx * x / z + camera.cx;
  p.v = camera.fy * y / z + camera.cy;

  Eigen::Matrix<double, 2, 3> jac = Eigen::Matrix<double, 2, 3>::Zero();
  jac(0, 0) = camera.fx / z;
  jac(0, 2) = -camera.fx * x / (z * z);
  jac(1, 1) = camera.fy / z;
  jac(1, 2) = -camera.fy * y / (z * z);
  const Eigen::Matrix<double, 2, 3> m = jac * camera.rotation;
  const Eigen::Matrix2d c2 = m * cov_world * m.transpose();
  p.cov_a = c2(0, 0) + kBlurFloor;
  p.cov_b = c2(0, 1);
  p.cov_c = c2(1, 1) + kBlurFloor;
  const double det = p.cov_a * p.cov_c - p.cov_b * p.cov_b;
  check(det > 0.0, "projected covariance is singular");
  p.conic_a = p.cov_c / det;
  p.conic_b = -p.cov_b / det;
  p.conic_c = p.cov_a / det;

  // pixel centers possibly inside the 3-sigma ellipse: |dx| <= 3 sqrt(cov_a),
  // |dy| <= 3 sqrt(cov_c), with a small safety margin
  const double rx = 3.0 * std::sqrt(p.cov_a) + 1e-9;
  const double ry = 3.0 * std::sqrt(p.cov_c) + 1e-9;
  p.x0 = std::max(0, static_cast<int>(std::ceil(p.u - rx - 0.5)));
  p.x1 = std::min(camera.width - 1, static_cast<int>(std::floor(p.u + rx - 0.5)));
  p.y0 = std::max(0, static_cast<int>(std::ceil(p.v - ry - 0.5)));
  p.y1 = std::min(camera.height - 1, static_cast<int>(std::floor(p.v + ry - 0.5)));
  p.visible = p.x0 <= p.x1 && p.y0 <= p.y1;
  return p;
}

AlphaSample eval_alpha(const Projected& p, double sigma, double px, double py) {
  AlphaSample s;
  const double dx = px - p.u;
  const double dy = py - p.v;
  s.q = p.conic_a * dx * dx + 2.0 * p.conic_b * dx * dy + p.conic_c * dy * dy;
  if (s.q > kCutoffPower) return s;
  s.cut = false;
  s.gauss = std::exp(-0.5 * s.q);
  const double raw = sigma * s.gauss;
  s.clamped = raw > kAlphaClamp;
  s.alpha = s.clamped ? kAlphaClamp : raw;
  return s;
}

RenderOutput render(const std::vector<double>& mu, const std::vector<double>& cov,
                    const std::vector<double>& opacity,
                    const std::vector<double>& colors, const cam::Camera& camera,
                    const std::array<double, 3>& background) {
  camera.validate();
  const std::size_t g = opacity.size();
  check_sizes(g, mu, cov, opacity, colors);
  const int w = camera.width, h = camera.height;

  RenderOutput out;
  out.camera = camera;
  out.background = background;
  out.projected = project_all(g, mu, cov, camera);
  out.rgb = img::ImageRGB(h, w);
  out.alpha = img::ImageGray(h, w);
  out.pixel_lists.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), {});
  out.n_used.assign(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0);

  for (std::size_t i = 0; i < g; ++i) {
    const Projected& p = out.projected[i];
    if (!p.visible) continue;
    for (int y = p.y0; y <= p.y1; ++y) {
      for (int x = p.x0; x <= p.x1; ++x) {
        const auto s = eval_alpha(p, opacity[i], x + 0.5, y + 0.5);
        if (s.cut) continue;
        out.pixel_lists[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                        static_cast<std::size_t>(x)]
            .push_back(Contrib{static_cast<int>(i), s.alpha, s.gauss, s.clamped});
      }
    }
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                              static_cast<std::size_t>(x);
      auto& list = out.pixel_lists[pix];
      std::sort(list.begin(), list.end(), [&](const Contrib& a, const Contrib& b) {
        const double da = out.projected[static_cast<std::size_t>(a.splat)].depth;
        const double db = out.projected[static_cast<std::size_t>(b.splat)].depth;
        return da != db ? da < db : a.splat < b.splat;
      });
      composite(list, colors, background, &out.rgb.at(y, x, 0), &out.alpha.at(y, x),
                &out.n_used[pix]);
    }
  }
  return out;
}

RenderOutput render(const splats::RiggedGaussianSet& set,
                    const std::vector<mesh::TriangleFrame>& frames,
                    const std::vector<double>& colors, const cam::Camera& camera,
                    const std::array<double, 3>& background) {
  auto glob = splats::to_global(set, frames);
  return render(glob.mu, glob.cov, glob.opacity, colors, camera, background);
}

img::ImageRGB render_reference(const std::vector<double>& mu,
                               const std::vector<double>& cov,
                               const std::vector<double>& opacity,
                               const std::vector<double>& colors,
                               const cam::Camera& camera,
                               const std::array<double, 3>& background) {
  camera.validate();
  const std::size_t g = opacity.size();
  check_sizes(g, mu, cov, opacity, colors);
  auto proj = project_all(g, mu, cov, camera);

  img::ImageRGB im(camera.height, camera.width);
  std::vector<PixelEntry> entries;
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      entries.clear();
      for (std::size_t i = 0; i < g; ++i) {
        if (!proj[i].visible) continue;
        const auto s = eval_alpha(proj[i], opacity[i], x + 0.5, y + 0.5);
        if (s.cut) continue;
        entries.push_back(PixelEntry{proj[i].depth, static_cast<int>(i), s.alpha,
                                     s.gauss, s.clamped});
      }
      std::sort(entries.begin(), entries.end(),
                [](const PixelEntry& a, const PixelEntry& b) {
                  return a.depth != b.depth ? a.depth < b.depth
                                            : a.splat < b.splat;
                });
      composite(entries, colors, background, &im.at(y, x, 0), nullptr, nullptr);
    }
  }
  return im;
}

RenderGrads render_backward(const RenderOutput& out, const std::vector<double>& mu,
                            const std::vector<double>& cov,
                            const std::vector<double>& opacity,
                            const std::vector<double>& colors,
                            const std::vector<double>& grad_rgb) {
  const std::size_t g = opacity.size();
  const int w = out.camera.width, h = out.camera.height;
  check(!out.pixel_lists.empty() || g == 0 || h * w == 0,
        "render_backward: forward state missing");
  check(grad_rgb.size() == static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3,
        "render_backward: grad size mismatch");

  RenderGrads grads;
  grads.mu.assign(g * 3, 0.0);
  grads.cov.assign(g * 9, 0.0);
  grads.opacity.assign(g, 0.0);
  grads.colors.assign(g * 3, 0.0);

  // per-splat accumulators over all pixels
  std::vector<Eigen::Matrix2d> acc_conic(g, Eigen::Matrix2d::Zero());
  std::vector<double> acc_u(g, 0.0), acc_v(g, 0.0);

  std::vector<double> trans;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                              static_cast<std::size_t>(x);
      const auto& list = out.pixel_lists[pix];
      const int used = out.n_used[pix];
      if (used == 0) continue;
      const double* gpx = &grad_rgb[3 * pix];
      if (gpx[0] == 0.0 && gpx[1] == 0.0 && gpx[2] == 0.0) continue;

      trans.assign(static_cast<std::size_t>(used) + 1, 1.0);
      for (int i = 0; i < used; ++i)
        trans[static_cast<std::size_t>(i) + 1] =
            trans[static_cast<std::size_t>(i)] * (1.0 - list[static_cast<std::size_t>(i)].alpha);

      // suffix: contribution rendered behind entry i (later entries + bg)
      double suffix[3];
      for (int k = 0; k < 3; ++k)
        suffix[k] = trans[static_cast<std::size_t>(used)] * out.background[static_cast<std::size_t>(k)];

      for (int i = used - 1; i >= 0; --i) {
        const Contrib& e = list[static_cast<std::size_t>(i)];
        const auto gi = static_cast<std::size_t>(e.splat);
        const double ti = trans[static_cast<std::size_t>(i)];
        const double* c = &colors[3 * gi];

        const double wgt = ti * e.alpha;
        double dalpha = 0.0;
        for (int k = 0; k < 3; ++k) {
          grads.colors[3 * gi + static_cast<std::size_t>(k)] += wgt * gpx[k];
          dalpha += gpx[k] * (ti * c[k] - suffix[k] / (1.0 - e.alpha));
          suffix[k] += wgt * c[k];
        }
        if (e.clamped) continue;  // flat region of the alpha clamp

        grads.opacity[gi] += dalpha * e.gauss;
        const double gq = -0.5 * dalpha * opacity[gi] * e.gauss;
        const Projected& p = out.projected[gi];
        const double dx = x + 0.5 - p.u;
        const double dy = y + 0.5 - p.v;
        acc_conic[gi](0, 0) += gq * dx * dx;
        acc_conic[gi](0, 1) += gq * dx * dy;
        acc_conic[gi](1, 0) += gq * dx * dy;
        acc_conic[gi](1, 1) += gq * dy * dy;
        acc_u[gi] += gq * -2.0 * (p.conic_a * dx + p.conic_b * dy);
        acc_v[gi] += gq * -2.0 * (p.conic_b * dx + p.conic_c * dy);
      }
    }
  }

  // per-splat tail: conic -> 2d covariance -> projection -> world mean/cov
  const cam::Camera& camera = out.camera;
  for (std::size_t i = 0; i < g; ++i) {
    const Projected& p = out.projected[i];
    if (!p.visible) continue;
    const bool touched = acc_u[i] != 0.0 || acc_v[i] != 0.0 ||
                         acc_conic[i].squaredNorm() != 0.0;
    if (!touched) continue;

    Eigen::Matrix2d conic;
    conic << p.conic_a, p.conic_b, p.conic_b, p.conic_c;
    const Eigen::Matrix2d g2 = -conic * acc_conic[i] * conic;

    Eigen::Map<const Eigen::Vector3d> muw(&mu[3 * i]);
    Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> covw(&cov[9 * i]);
    const Eigen::Vector3d pc = camera.to_cam(muw);
    const double xx = pc(0), yy = pc(1), zz = pc(2);

    Eigen::Matrix<double, 2, 3> jac = Eigen::Matrix<double, 2, 3>::Zero();
    jac(0, 0) = camera.fx / zz;
    jac(0, 2) = -camera.fx * xx / (zz * zz);
    jac(1, 1) = camera.fy / zz;
    jac(1, 2) = -camera.fy * yy / (zz * zz);
    const Eigen::Matrix<double, 2, 3> m = jac * camera.rotation;

    const Eigen::Matrix3d gcov = m.transpose() * g2 * m;
    Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(&grads.cov[9 * i]) =
        gcov;

    const Eigen::Matrix<double, 2, 3> gm = 2.0 * g2 * m * covw;
    const Eigen::Matrix<double, 2, 3> gj = gm * camera.rotation.transpose();

    Eigen::Vector3d gpc = Eigen::Vector3d::Zero();
    const double z2 = zz * zz, z3 = z2 * zz;
    gpc(0) += gj(0, 2) * (-camera.fx / z2);
    gpc(1) += gj(1, 2) * (-camera.fy / z2);
    gpc(2) += gj(0, 0) * (-camera.fx / z2) + gj(0, 2) * (2.0 * camera.fx * xx / z3) +
              gj(1, 1) * (-camera.fy / z2) + gj(1, 2) * (2.0 * camera.fy * yy / z3);
    gpc(0) += acc_u[i] * camera.fx / zz;
    gpc(2) += acc_u[i] * (-camera.fx * xx / z2);
    gpc(1) += acc_v[i] * camera.fy / zz;
    gpc(2) += acc_v[i] * (-camera.fy * yy / z2);

    Eigen::Map<Eigen::Vector3d>(&grads.mu[3 * i]) +=
        camera.rotation.transpose() * gpc;
  }
  return grads;
}

ad::Tensor render_on_tape(const ad::Tensor& mu, const ad::Tensor& cov,
                          const ad::Tensor& opacity, const ad::Tensor& colors,
                          const cam::Camera& camera,
                          const std::array<double, 3>& background) {
  check(mu.defined() && cov.defined() && opacity.defined() && colors.defined(),
        "render_on_tape: undefined tensor");
  ad::Tape* tape = mu.tape();
  check(tape == cov.tape() && tape == opacity.tape() && tape == colors.tape(),
        "render_on_tape: operands on different tapes");
  const int g = mu.dim(0);
  check(mu.ndim() == 2 && mu.dim(1) == 3, "render_on_tape: mu must be [G,3]");
  check(cov.ndim() == 2 && cov.dim(0) == g && cov.dim(1) == 9,
        "render_on_tape: cov must be [G,9]");
  check((opacity.ndim() == 1 && opacity.dim(0) == g) ||
            (opacity.ndim() == 2 && opacity.dim(0) == g && opacity.dim(1) == 1),
        "render_on_tape: opacity must be [G] or [G,1]");
  check(colors.ndim() == 2 && colors.dim(0) == g && colors.dim(1) == 3,
        "render_on_tape: colors must be [G,3]");

  auto fwd = std::make_shared<RenderOutput>(
      render(mu.values(), cov.values(), opacity.values(), colors.values(), camera,
             background));

  ad::Tensor out = tape->alloc({camera.height, camera.width, 3});
  std::copy(fwd->rgb.px.begin(), fwd->rgb.px.end(), out.data());

  const int mi = mu.id(), ci = cov.id(), oi = opacity.id(), li = colors.id();
  const int outi = out.id();
  tape->record("render", {mi, ci, oi, li}, outi, [tape, fwd, mi, ci, oi, li, outi]() {
    const auto& go = tape->pass_grad(outi);
    const auto n_mu = static_cast<std::size_t>(tape->size_of(mi));
    const auto n_cov = static_cast<std::size_t>(tape->size_of(ci));
    const auto n_op = static_cast<std::size_t>(tape->size_of(oi));
    const auto n_col = static_cast<std::size_t>(tape->size_of(li));
    std::vector<double> vmu(tape->val(mi), tape->val(mi) + n_mu);
    std::vector<double> vcov(tape->val(ci), tape->val(ci) + n_cov);
    std::vector<double> vop(tape->val(oi), tape->val(oi) + n_op);
    std::vector<double> vcol(tape->val(li), tape->val(li) + n_col);
    auto grads = render_backward(*fwd, vmu, vcov, vop, vcol, go);
    auto add_into = [tape](int id, const std::vector<double>& src) {
      auto& dst = tape->grad_buf(id);
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
    };
    add_into(mi, grads.mu);
    add_into(ci, grads.cov);
    add_into(oi, grads.opacity);
    add_into(li, grads.colors);
  });
  return out;
}

}  // namespace talksplat::raster
