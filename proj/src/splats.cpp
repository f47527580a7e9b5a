#include "talksplat/splats.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "talksplat/common.hpp"

namespace talksplat::splats {

void RiggedGaussianSet::validate(int face_count) const {
  const auto g = static_cast<std::size_t>(count);
  check(count >= 0, "negative splat count");
  check(latent_dim >= 0, "negative latent dim");
  check(mu_local.size() == g * 3, "mu_local size mismatch");
  check(quat_local.size() == g * 4, "quat_local size mismatch");
  check(log_scale.size() == g * 3, "log_scale size mismatch");
  check(opacity_logit.size() == g, "opacity_logit size mismatch");
  check(latent.size() == g * static_cast<std::size_t>(latent_dim),
        "latent size mismatch");
  check(static_rgb.size() == g * 3, "static_rgb size mismatch");
  check(parent_face.size() == g, "parent_face size mismatch");
  for (std::size_t i = 0; i < g; ++i) {
    const double* q = &quat_local[4 * i];
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    check(std::fabs(n - 1.0) < 1e-10,
          strcat_("splat ", i, " quaternion not unit (norm ", n, ")"));
    check(parent_face[i] >= 0 && parent_face[i] < face_count,
          strcat_("splat ", i, " parent face ", parent_face[i],
                  " out of range [0,", face_count, ")"));
  }
}

bool RiggedGaussianSet::covers_all_faces(int face_count) const {
  std::vector<char> seen(static_cast<std::size_t>(face_count), 0);
  for (int f : parent_face)
    if (f >= 0 && f < face_count) seen[static_cast<std::size_t>(f)] = 1;
  for (char s : seen)
    if (!s) return false;
  return true;
}

void RiggedGaussianSet::normalize_quats() {
  for (int i = 0; i < count; ++i) {
    double* q = &quat_local[4 * static_cast<std::size_t>(i)];
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    check(n > 1e-12, strcat_("splat ", i, " quaternion collapsed to zero"));
    for (int k = 0; k < 4; ++k) q[k] /= n;
  }
}

std::uint64_t RiggedGaussianSet::content_hash() const {
  std::uint64_t h = fnv1a(&count, sizeof(count));
  h = fnv1a(&latent_dim, sizeof(latent_dim), h);
  auto mix = [&h](const auto& v) {
    if (!v.empty())
      h = fnv1a(v.data(), v.size() * sizeof(v[0]), h);
  };
  mix(mu_local);
  mix(quat_local);
  mix(log_scale);
  mix(opacity_logit);
  mix(latent);
  mix(static_rgb);
  mix(parent_face);
  return h;
}

RiggedGaussianSet bind_gaussians(const mesh::BlendMesh& m, int latent_dim,
                                 std::uint64_t seed) {
  check(latent_dim >= 0, "negative latent dim");
  const int g = m.face_count();
  RiggedGaussianSet set;
  set.count = g;
  set.latent_dim = latent_dim;
  set.mu_local.assign(static_cast<std::size_t>(g) * 3, 0.0);
  set.quat_local.assign(static_cast<std::size_t>(g) * 4, 0.0);
  for (int i = 0; i < g; ++i) set.quat_local[4 * static_cast<std::size_t>(i)] = 1.0;
  set.log_scale.assign(static_cast<std::size_t>(g) * 3, std::log(0.5));
  set.opacity_logit.assign(static_cast<std::size_t>(g), 0.0);  // sigma = 1/2
  Rng rng(derive_seed(seed, "splat-latents"));
  set.latent.resize(static_cast<std::size_t>(g) * static_cast<std::size_t>(latent_dim));
  for (auto& z : set.latent) z = 0.01 * rng.normal();
  set.static_rgb.assign(static_cast<std::size_t>(g) * 3, 0.5);
  set.parent_face.resize(static_cast<std::size_t>(g));
  for (int i = 0; i < g; ++i) set.parent_face[static_cast<std::size_t>(i)] = i;
  set.validate(m.face_count());
  return set;
}

Eigen::Matrix3d covariance(const Eigen::Vector4d& quat_wxyz,
                           const Eigen::Vector3d& s) {
  const Eigen::Quaterniond q(quat_wxyz(0), quat_wxyz(1), quat_wxyz(2),
                             quat_wxyz(3));
  const Eigen::Matrix3d m = q.toRotationMatrix() * s.asDiagonal();
  return m * m.transpose();
}

GlobalSplats to_global(const RiggedGaussianSet& set,
                       const std::vector<mesh::TriangleFrame>& frames) {
  const auto g = static_cast<std::size_t>(set.count);
  GlobalSplats out;
  out.mu.resize(g * 3);
  out.quat.resize(g * 4);
  out.scale.resize(g * 3);
  out.opacity.resize(g);
  out.cov.resize(g * 9);
  for (std::size_t i = 0; i < g; ++i) {
    const int f = set.parent_face[i];
    check(f >= 0 && static_cast<std::size_t>(f) < frames.size(),
          strcat_("splat ", i, " parent face ", f, " has no frame"));
    const auto& fr = frames[static_cast<std::size_t>(f)];
    const Eigen::Vector3d mu(set.mu_local[3 * i], set.mu_local[3 * i + 1],
                             set.mu_local[3 * i + 2]);
    const Eigen::Quaterniond ql(set.quat_local[4 * i], set.quat_local[4 * i + 1],
                                set.quat_local[4 * i + 2],
                                set.quat_local[4 * i + 3]);
    const Eigen::Vector3d mu_g = fr.scale * (fr.rotation * mu) + fr.translation;
    const Eigen::Matrix3d rot_g = fr.rotation * ql.normalized().toRotationMatrix();
    Eigen::Quaterniond qg(rot_g);
    qg.normalize();
    if (qg.w() < 0.0) qg.coeffs() = -qg.coeffs();  // canonical sign for export
    Eigen::Vector3d s_g;
    for (int k = 0; k < 3; ++k)
      s_g(k) = fr.scale * std::exp(set.log_scale[3 * i + static_cast<std::size_t>(k)]);
    const Eigen::Matrix3d m = rot_g * s_g.asDiagonal();
    const Eigen::Matrix3d cov = m * m.transpose();
    for (int k = 0; k < 3; ++k) out.mu[3 * i + static_cast<std::size_t>(k)] = mu_g(k);
    out.quat[4 * i] = qg.w();
    out.quat[4 * i + 1] = qg.x();
    out.quat[4 * i + 2] = qg.y();
    out.quat[4 * i + 3] = qg.z();
    for (int k = 0; k < 3; ++k) out.scale[3 * i + static_cast<std::size_t>(k)] = s_g(k);
    out.opacity[i] = 1.0 / (1.0 + std::exp(-set.opacity_logit[i]));
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        out.cov[9 * i + static_cast<std::size_t>(3 * r + c)] = cov(r, c);
  }
  return out;
}

std::vector<double> volume_score(const RiggedGaussianSet& set,
                                 const std::vector<mesh::TriangleFrame>& frames) {
  std::vector<double> score(static_cast<std::size_t>(set.count));
  for (std::size_t i = 0; i < static_cast<std::size_t>(set.count); ++i) {
    const int f = set.parent_face[i];
    check(f >= 0 && static_cast<std::size_t>(f) < frames.size(),
          strcat_("splat ", i, " parent face ", f, " has no frame"));
    const double k = frames[static_cast<std::size_t>(f)].scale;
    const double sigma = 1.0 / (1.0 + std::exp(-set.opacity_logit[i]));
    double vol = 1.0;
    for (int a = 0; a < 3; ++a) vol *= k * std::exp(set.log_scale[3 * i + static_cast<std::size_t>(a)]);
    score[i] = sigma * vol;
  }
  return score;
}

SplatParams params_from_set(ad::Tape& tape, const RiggedGaussianSet& set) {
  const int g = set.count;
  SplatParams p{
      tape.input({g, 3}, set.mu_local),
      tape.input({g, 4}, set.quat_local),
      tape.input({g, 3}, set.log_scale),
      tape.input({g, 1}, set.opacity_logit),
  };
  return p;
}

SplatsOnTape to_global_on_tape(const SplatParams& params,
                               const mesh::FramesOnTape& frames,
                               const std::vector<int>& parent_face) {
  const int g = params.mu_local.dim(0);
  check(static_cast<int>(parent_face.size()) == g,
        "parent_face count does not match splat count");
  auto rot_f = ad::gather_rows(frames.rot, parent_face);      // [G,9]
  auto trans_f = ad::gather_rows(frames.trans, parent_face);  // [G,3]
  auto k_f = ad::gather_rows(frames.scale, parent_face);      // [G,1]

  auto q_unit = ad::normalize_rows(params.quat_local);
  auto rot_local = ad::quat_to_rotmat(q_unit);        // [G,9]
  auto rot_g = ad::bmm3(rot_f, rot_local);            // R' = R_face R_local
  auto s_g = ad::mul_cols(ad::exp(params.log_scale), k_f);  // s' = k exp(ls)
  auto m = ad::colscale3(rot_g, s_g);                 // R' diag(s')
  auto cov = ad::bmm3(m, ad::transpose3(m));          // Sigma = M M^T

  auto mu_rot = ad::bmv3(rot_f, params.mu_local);
  auto mu = ad::add(ad::mul_cols(mu_rot, k_f), trans_f);  // mu' = k R mu + T

  auto opacity = ad::sigmoid(params.opacity_logit);
  return SplatsOnTape{mu, cov, opacity};
}

}  // namespace talksplat::splats
