#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "talksplat/nn.hpp"
#include "talksplat/tensor.hpp"

namespace talksplat::color {

// Per-splat expression- and view-dependent color:
//   c_i = sigmoid(mlp(concat(psi, z_i, v_i)))
// with a shared two-layer MLP (hidden 64, tanh) batched over splats.
struct ColorModel {
  int expr_dim = 0;
  int latent_dim = 0;
  nn::ParamStore store{"color"};
  nn::Mlp mlp;
};

ColorModel make_color_model(int expr_dim, int latent_dim, std::uint64_t seed);

// psi is [E] or [1,E], z is [G,L], both on bound.tape; view_dirs ([G,3],
// unit rows, world frame) enter as constants so no gradient reaches the
// geometry through the view path. Returns [G,3] colors in (0,1).
ad::Tensor color_forward(const ColorModel& model, const nn::Bound& bound,
                         const ad::Tensor& psi, const ad::Tensor& z,
                         const std::vector<double>& view_dirs);

// Tape-free evaluation with the stored weights.
std::vector<double> color_forward_plain(const ColorModel& model,
                                        const std::vector<double>& psi,
                                        const std::vector<double>& z, int g,
                                        const std::vector<double>& view_dirs);

// Unit directions from the camera center toward each splat center, [G,3].
std::vector<double> view_dirs_toward(const std::vector<double>& mu_world,
                                     const Eigen::Vector3d& cam_center);

}  // namespace talksplat::color
