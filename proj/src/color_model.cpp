#include "talksplat/color_model.hpp"

#include <cmath>

#include "talksplat/common.hpp"

namespace talksplat::color {

ColorModel make_color_model(int expr_dim, int latent_dim, std::uint64_t seed) {
  check(expr_dim > 0, "color model needs a positive expression dim");
  check(latent_dim >= 0, "negative latent dim");
  ColorModel m;
  m.expr_dim = expr_dim;
  m.latent_dim = latent_dim;
  Rng rng(derive_seed(seed, "color-mlp"));
  m.mlp = nn::make_mlp(m.store, "color", {expr_dim + latent_dim + 3, 64, 3},
                       nn::Act::kTanh, rng);
  return m;
}

ad::Tensor color_forward(const ColorModel& model, const nn::Bound& bound,
                         const ad::Tensor& psi, const ad::Tensor& z,
                         const std::vector<double>& view_dirs) {
  check(psi.size() == model.expr_dim,
        strcat_("color: psi has ", psi.size(), " entries, expected ",
                model.expr_dim));
  check(z.ndim() == 2 && z.dim(1) == model.latent_dim,
        "color: latent matrix shape mismatch");
  const int g = z.dim(0);
  check(view_dirs.size() == static_cast<std::size_t>(g) * 3,
        "color: view_dirs size mismatch");
  for (int i = 0; i < g; ++i) {
    const double* v = &view_dirs[3 * static_cast<std::size_t>(i)];
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    check(std::fabs(n - 1.0) < 1e-6,
          strcat_("color: view dir ", i, " not unit (norm ", n, ")"));
  }

  auto& tape = *bound.tape;
  auto vd = tape.constant({g, 3}, view_dirs);
  auto x = ad::concat_cols({ad::broadcast_row(psi, g), z, vd});
  return ad::sigmoid(nn::mlp_forward(model.mlp, bound, x));
}

std::vector<double> color_forward_plain(const ColorModel& model,
                                        const std::vector<double>& psi,
                                        const std::vector<double>& z, int g,
                                        const std::vector<double>& view_dirs) {
  check(z.size() == static_cast<std::size_t>(g) * static_cast<std::size_t>(model.latent_dim),
        "color: latent size mismatch");
  ad::Tape tape;
  auto bound = nn::bind(tape, model.store);
  auto psi_t = tape.constant({static_cast<int>(psi.size())}, psi);
  auto z_t = tape.constant({g, model.latent_dim}, z);
  return color_forward(model, bound, psi_t, z_t, view_dirs).values();
}

std::vector<double> view_dirs_toward(const std::vector<double>& mu_world,
                                     const Eigen::Vector3d& cam_center) {
  check(mu_world.size() % 3 == 0, "mu_world must be [G,3]");
  std::vector<double> out(mu_world.size());
  for (std::size_t i = 0; i + 2 < mu_world.size(); i += 3) {
    Eigen::Map<const Eigen::Vector3d> mu(&mu_world[i]);
    const Eigen::Vector3d d = mu - cam_center;
    const double n = d.norm();
    check(n > 1e-12, "splat coincides with the camera center");
    for (int a = 0; a < 3; ++a) out[i + static_cast<std::size_t>(a)] = d(a) / n;
  }
  return out;
}

}  // namespace talksplat::color
