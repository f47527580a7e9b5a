#include "talksplat/synth.hpp"

#include <cmath>
#include <filesystem>

#include "talksplat/common.hpp"
#include "talksplat/image_io.hpp"
#include "talksplat/rasterizer.hpp"
#include "talksplat/rng.hpp"

namespace talksplat::engine {

namespace fs = std::filesystem;

SynthTruth make_truth(const RunConfig& cfg) {
  SynthTruth t;
  t.base_mesh = mesh::make_head_mesh(cfg.mesh_rings, cfg.mesh_segments,
                                     cfg.expr_dims, derive_seed(cfg.seed, "head"));
  t.truth_mesh = mesh::subdivide_region(t.base_mesh, mesh::Region::kTeeth);
  t.set = splats::bind_gaussians(t.truth_mesh, cfg.latent_dim,
                                 derive_seed(cfg.seed, "truth-bind"));
  t.colors = color::make_color_model(cfg.expr_dims, cfg.latent_dim,
                                     derive_seed(cfg.seed, "truth-color"));

  // Perturb the canonical binding so the fit cannot simply inherit it.
  Rng rng(derive_seed(cfg.seed, "truth-jitter"));
  const double j = cfg.truth_jitter;
  const int g = t.set.count;
  for (auto& v : t.set.mu_local) v += 0.5 * j * rng.normal();
  for (int i = 0; i < g; ++i)
    for (int k = 1; k < 4; ++k)
      t.set.quat_local[4 * static_cast<std::size_t>(i) + static_cast<std::size_t>(k)] +=
          0.3 * j * rng.normal();
  t.set.normalize_quats();
  for (auto& v : t.set.log_scale) v += 0.5 * j * rng.normal();
  for (auto& v : t.set.opacity_logit) v = 1.5 + 0.4 * j * rng.normal();
  for (auto& v : t.set.latent) v = 1.2 * rng.normal();
  t.set.validate(t.truth_mesh.face_count());

  // Static structure: smooth positional tint, plus a high-frequency azimuth
  // shading on the teeth band at the subdivided-face scale.
  const auto rest = mesh::evaluate_mesh(t.truth_mesh,
                                        std::vector<double>(static_cast<std::size_t>(cfg.expr_dims), 0.0));
  const auto frames = mesh::triangle_frames(rest, t.truth_mesh.faces);
  const auto glob = splats::to_global(t.set, frames);
  const auto cheek_flag = cheek_faces(t.truth_mesh);
  t.base_mod.resize(static_cast<std::size_t>(g) * 3);
  t.stripe_phase.resize(static_cast<std::size_t>(g));
  t.cheek.assign(static_cast<std::size_t>(g), 0);
  for (int i = 0; i < g; ++i) {
    const double x = glob.mu[3 * static_cast<std::size_t>(i)];
    const double y = glob.mu[3 * static_cast<std::size_t>(i) + 1];
    const double z = glob.mu[3 * static_cast<std::size_t>(i) + 2];
    double mod[3] = {0.65 + 0.3 * std::sin(3.0 * x + 1.0),
                     0.65 + 0.3 * std::sin(3.0 * y + 2.0),
                     0.65 + 0.3 * std::sin(3.0 * z + 3.0)};
    const int face = t.set.parent_face[static_cast<std::size_t>(i)];
    if (t.truth_mesh.region_tags[static_cast<std::size_t>(face)] == mesh::Region::kTeeth) {
      const double shade = 0.55 + 0.45 * std::sin(12.0 * std::atan2(x, z) + 0.7);
      for (double& c : mod) c *= shade;
    }
    for (int c = 0; c < 3; ++c) t.base_mod[3 * static_cast<std::size_t>(i) + static_cast<std::size_t>(c)] = mod[c];
    t.stripe_phase[static_cast<std::size_t>(i)] = 9.0 * y + 4.0 * x;
    if (cfg.truth_wrinkles && cheek_flag[static_cast<std::size_t>(face)])
      t.cheek[static_cast<std::size_t>(i)] = 1;
  }
  return t;
}

std::vector<cam::Camera> make_camera_ring(const RunConfig& cfg) {
  const int n = cfg.camera_count;
  const double fov = cfg.camera_fov_deg * M_PI / 180.0;
  const double f = (cfg.image_size / 2.0) / std::tan(fov / 2.0);
  const double arc = 5.0 * M_PI / 6.0;  // frontal 150 degrees
  std::vector<cam::Camera> cams;
  cams.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double a = n == 1 ? 0.0 : arc * (static_cast<double>(i) / (n - 1) - 0.5);
    const Eigen::Vector3d eye(cfg.camera_radius * std::sin(a), 0.0,
                              cfg.camera_radius * std::cos(a));
    cams.push_back(cam::look_at(eye, Eigen::Vector3d::Zero(),
                                Eigen::Vector3d(0, 1, 0), f, f, cfg.image_size,
                                cfg.image_size));
  }
  return cams;
}

namespace {

// Raw length whose interpolation to video rate has exactly `frames` rows.
int raw_length(int frames, double feature_rate, double video_rate) {
  const int n0 = static_cast<int>(std::lround(frames * feature_rate / video_rate));
  for (int n = std::max(2, n0 - 3); n <= n0 + 3; ++n)
    if (static_cast<int>(std::lround(n * video_rate / feature_rate)) == frames)
      return n;
  check(false, "raw_length: no raw frame count maps to the requested length");
  return 0;
}

}  // namespace

seq::FeatureSequence make_features(const RunConfig& cfg, int sequence) {
  seq::FeatureSequence f;
  f.d = cfg.audio_dim;
  f.n = raw_length(cfg.frames_per_seq, cfg.feature_rate, cfg.video_rate);
  f.rate = cfg.feature_rate;
  f.data.resize(static_cast<std::size_t>(f.n) * static_cast<std::size_t>(f.d));
  Rng rng(derive_seed(cfg.seed, strcat_("features-", sequence)));
  std::vector<double> f1(static_cast<std::size_t>(f.d)), f2(static_cast<std::size_t>(f.d)),
      p1(static_cast<std::size_t>(f.d)), p2(static_cast<std::size_t>(f.d));
  for (int m = 0; m < f.d; ++m) {
    f1[static_cast<std::size_t>(m)] = rng.uniform(0.6, 4.0);
    f2[static_cast<std::size_t>(m)] = rng.uniform(0.6, 4.0);
    p1[static_cast<std::size_t>(m)] = rng.uniform(0, 2 * M_PI);
    p2[static_cast<std::size_t>(m)] = rng.uniform(0, 2 * M_PI);
  }
  for (int t = 0; t < f.n; ++t) {
    const double tau = t / cfg.feature_rate;
    for (int m = 0; m < f.d; ++m)
      f.data[static_cast<std::size_t>(t) * static_cast<std::size_t>(f.d) + static_cast<std::size_t>(m)] =
          0.6 * std::sin(2 * M_PI * f1[static_cast<std::size_t>(m)] * tau + p1[static_cast<std::size_t>(m)]) +
          0.4 * std::sin(2 * M_PI * f2[static_cast<std::size_t>(m)] * tau + p2[static_cast<std::size_t>(m)]);
  }
  return f;
}

seq::FeatureSequence make_expressions(const RunConfig& cfg,
                                      const seq::FeatureSequence& features) {
  const auto vid = seq::frequency_interpolate(features, cfg.video_rate);
  const int t_count = vid.n, e_count = cfg.expr_dims, d = vid.d;
  check(t_count >= 2, "make_expressions: need at least two frames");
  Rng rng(derive_seed(cfg.seed, "expr-readout"));
  std::vector<double> w(static_cast<std::size_t>(e_count) * static_cast<std::size_t>(d));
  for (auto& v : w) v = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  seq::FeatureSequence psi;
  psi.n = t_count;
  psi.d = e_count;
  psi.rate = cfg.video_rate;
  psi.data.resize(static_cast<std::size_t>(t_count) * static_cast<std::size_t>(e_count));
  for (int t = 0; t < t_count; ++t) {
    auto* row = &psi.data[static_cast<std::size_t>(t) * static_cast<std::size_t>(e_count)];
    row[0] = 0.8 * std::sin(0.5 * M_PI * t / (t_count - 1));
    for (int e = 1; e < e_count; ++e) {
      double s = 0;
      for (int m = 0; m < d; ++m)
        s += w[static_cast<std::size_t>(e) * static_cast<std::size_t>(d) + static_cast<std::size_t>(m)] *
             vid.data[static_cast<std::size_t>(t) * static_cast<std::size_t>(d) + static_cast<std::size_t>(m)];
      row[e] = 0.25 * std::tanh(s);
    }
  }
  return psi;
}

img::ImageRGB render_truth(const SynthTruth& truth,
                           const std::vector<double>& psi,
                           const cam::Camera& camera) {
  const auto pos = mesh::evaluate_mesh(truth.truth_mesh, psi);
  const auto frames = mesh::triangle_frames(pos, truth.truth_mesh.faces);
  const auto glob = splats::to_global(truth.set, frames);
  const auto vd = color::view_dirs_toward(glob.mu, camera.center());
  auto colors = color::color_forward_plain(truth.colors, psi, truth.set.latent,
                                           truth.set.count, vd);
  for (int i = 0; i < truth.set.count; ++i) {
    const double stripe =
        truth.cheek[static_cast<std::size_t>(i)]
            ? 0.72 + 0.28 * std::sin(truth.stripe_phase[static_cast<std::size_t>(i)] + 5.0 * psi[0])
            : 1.0;
    for (int c = 0; c < 3; ++c)
      colors[3 * static_cast<std::size_t>(i) + static_cast<std::size_t>(c)] *=
          truth.base_mod[3 * static_cast<std::size_t>(i) + static_cast<std::size_t>(c)] * stripe;
  }
  return raster::render(glob.mu, glob.cov, glob.opacity, colors, camera).rgb;
}

std::vector<char> cheek_faces(const mesh::BlendMesh& m) {
  std::vector<char> flags(static_cast<std::size_t>(m.face_count()), 0);
  for (int f = 0; f < m.face_count(); ++f) {
    if (m.region_tags[static_cast<std::size_t>(f)] != mesh::Region::kFace) continue;
    const int* idx = &m.faces[3 * static_cast<std::size_t>(f)];
    double cx = 0, cy = 0, cz = 0;
    for (int j = 0; j < 3; ++j) {
      cx += m.template_vertices[3 * static_cast<std::size_t>(idx[j])] / 3.0;
      cy += m.template_vertices[3 * static_cast<std::size_t>(idx[j]) + 1] / 3.0;
      cz += m.template_vertices[3 * static_cast<std::size_t>(idx[j]) + 2] / 3.0;
    }
    if (std::fabs(cx) > 0.22 && cz > 0.1 && cy > -1.05 && cy < 0.5)
      flags[static_cast<std::size_t>(f)] = 1;
  }
  return flags;
}

std::vector<char> region_faces(const mesh::BlendMesh& m, mesh::Region region) {
  std::vector<char> flags(static_cast<std::size_t>(m.face_count()), 0);
  for (int f = 0; f < m.face_count(); ++f)
    if (m.region_tags[static_cast<std::size_t>(f)] == region)
      flags[static_cast<std::size_t>(f)] = 1;
  return flags;
}

splats::RiggedGaussianSet mask_binding(const mesh::BlendMesh& m) {
  auto set = splats::bind_gaussians(m, 0, 0);
  for (auto& v : set.opacity_logit) v = 4.0;         // near-opaque
  for (auto& v : set.log_scale) v = std::log(0.35);  // tight indicator blobs
  return set;
}

img::ImageGray band_mask(const mesh::BlendMesh& m,
                         const splats::RiggedGaussianSet& binding,
                         const std::vector<char>& face_flags,
                         const std::vector<double>& psi,
                         const cam::Camera& camera) {
  check(static_cast<int>(face_flags.size()) == m.face_count(),
        "band_mask: flag count does not match mesh");
  const auto pos = mesh::evaluate_mesh(m, psi);
  const auto frames = mesh::triangle_frames(pos, m.faces);
  std::vector<double> colors(static_cast<std::size_t>(binding.count) * 3, 0.0);
  for (int i = 0; i < binding.count; ++i)
    if (face_flags[static_cast<std::size_t>(binding.parent_face[static_cast<std::size_t>(i)])])
      for (int c = 0; c < 3; ++c) colors[3 * static_cast<std::size_t>(i) + static_cast<std::size_t>(c)] = 1.0;
  const auto out = raster::render(binding, frames, colors, camera, {0, 0, 0});
  const auto lum = img::luminance(out.rgb);
  img::ImageGray mask(lum.height, lum.width);
  for (std::size_t i = 0; i < mask.px.size(); ++i) mask.px[i] = lum.px[i] > 0.5 ? 1.0 : 0.0;
  return mask;
}

void synth_scene(const RunConfig& cfg, const std::string& root) {
  cfg.validate();
  const auto truth = make_truth(cfg);
  const auto cams = make_camera_ring(cfg);
  fs::create_directories(root);
  mesh::save_mesh(root + "/mesh.obj", root + "/mesh.rig", truth.base_mesh);
  write_cameras(root + "/cameras.txt", cams);

  Dataset paths;  // only for frame_path
  paths.root = root;
  for (int s = 0; s < cfg.sequences; ++s) {
    const auto dir = sequence_dir(root, s);
    fs::create_directories(dir + "/frames");
    const auto feats = make_features(cfg, s);
    const auto psi = make_expressions(cfg, feats);
    write_fseq(dir + "/features.fseq", feats);
    write_fseq(dir + "/expressions.fseq", psi);

    seq::FeatureSequence verts;
    verts.n = psi.n;
    verts.d = 3 * truth.base_mesh.vertex_count();
    verts.rate = cfg.video_rate;
    verts.data.reserve(static_cast<std::size_t>(verts.n) * static_cast<std::size_t>(verts.d));
    for (int t = 0; t < psi.n; ++t) {
      const std::vector<double> row(psi.data.begin() + static_cast<std::ptrdiff_t>(t) * psi.d,
                                    psi.data.begin() + static_cast<std::ptrdiff_t>(t + 1) * psi.d);
      const auto pos = mesh::evaluate_mesh(truth.base_mesh, row);
      verts.data.insert(verts.data.end(), pos.begin(), pos.end());
      for (std::size_t c = 0; c < cams.size(); ++c)
        img::save_png(paths.frame_path(s, static_cast<int>(c), t),
                      render_truth(truth, row, cams[c]));
    }
    write_fseq(dir + "/vertices.fseq", verts);
  }
}

}  // namespace talksplat::engine
