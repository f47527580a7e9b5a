#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "talksplat/camera.hpp"
#include "talksplat/image.hpp"
#include "talksplat/splats.hpp"
#include "talksplat/tensor.hpp"

namespace talksplat::raster {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kTransmitFloor = 1e-4;
inline constexpr double kCutoffPower = 9.0;  // Mahalanobis^2 at 3 sigma
inline constexpr double kBlurFloor = 0.3;    // px^2 added to both 2d axes

inline constexpr std::array<double, 3> kWhite{1.0, 1.0, 1.0};

struct Projected {
  bool visible = false;
  double u = 0, v = 0, depth = 0;
  double cov_a = 0, cov_b = 0, cov_c = 0;        // 2d covariance [[a,b],[b,c]]
  double conic_a = 0, conic_b = 0, conic_c = 0;  // its inverse
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;          // inclusive pixel bbox
};

// EWA perspective projection of one Gaussian; behind-near splats come back
// with visible = false
Projected project(const Eigen::Vector3d& mu_world, const Eigen::Matrix3d& cov_world,
                  const cam::Camera& camera);

struct AlphaSample {
  double alpha = 0;  // after the 0.99 clamp
  double gauss = 0;  // exp(-q/2)
  double q = 0;      // d^T conic d
  bool clamped = false;
  bool cut = true;  // q beyond the 3-sigma cutoff
};

// contribution of a projected splat at pixel center (px, py)
AlphaSample eval_alpha(const Projected& p, double sigma, double px, double py);

struct Contrib {
  int splat;
  double alpha;
  double gauss;
  bool clamped;
};

struct RenderOutput {
  img::ImageRGB rgb;
  img::ImageGray alpha;
  // forward state retained for the backward pass
  std::vector<std::vector<Contrib>> pixel_lists;  // depth-sorted per pixel
  std::vector<int> n_used;                        // consumed before early-out
  std::vector<Projected> projected;
  cam::Camera camera;
  std::array<double, 3> background{1, 1, 1};
};

// accelerated path: per-splat bounding boxes feed per-pixel contributor
// lists, sorted by (depth, splat index) and composited front to back
RenderOutput render(const std::vector<double>& mu,       // [G,3]
                    const std::vector<double>& cov,      // [G,9]
                    const std::vector<double>& opacity,  // [G]
                    const std::vector<double>& colors,   // [G,3]
                    const cam::Camera& camera,
                    const std::array<double, 3>& background = kWhite);

// convenience: rig the set to the frames, then render
RenderOutput render(const splats::RiggedGaussianSet& set,
                    const std::vector<mesh::TriangleFrame>& frames,
                    const std::vector<double>& colors, const cam::Camera& camera,
                    const std::array<double, 3>& background = kWhite);

// naive reference: every splat evaluated at every pixel, explicit sort,
// identical blending rules
img::ImageRGB render_reference(const std::vector<double>& mu,
                               const std::vector<double>& cov,
                               const std::vector<double>& opacity,
                               const std::vector<double>& colors,
                               const cam::Camera& camera,
                               const std::array<double, 3>& background = kWhite);

struct RenderGrads {
  std::vector<double> mu;       // [G,3]
  std::vector<double> cov;      // [G,9]
  std::vector<double> opacity;  // [G]
  std::vector<double> colors;   // [G,3]
};

// analytic adjoint of render() given dL/drgb
RenderGrads render_backward(const RenderOutput& out, const std::vector<double>& mu,
                            const std::vector<double>& cov,
                            const std::vector<double>& opacity,
                            const std::vector<double>& colors,
                            const std::vector<double>& grad_rgb);

// record the renderer on a tape: output is an [H,W,3] tensor whose backward
// routes into mu/cov/opacity/colors (and through them to mesh vertices)
ad::Tensor render_on_tape(const ad::Tensor& mu, const ad::Tensor& cov,
                          const ad::Tensor& opacity, const ad::Tensor& colors,
                          const cam::Camera& camera,
                          const std::array<double, 3>& background = kWhite);

}  // namespace talksplat::raster
