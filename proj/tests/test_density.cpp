#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "talksplat/density.hpp"
#include "testers.hpp"

using namespace talksplat;
using namespace talksplat::density;
using namespace talksplat::splats;

namespace {

std::vector<mesh::TriangleFrame> identity_frames(int n) {
  std::vector<mesh::TriangleFrame> f(static_cast<std::size_t>(n));
  for (auto& fr : f) {
    fr.rotation = Eigen::Matrix3d::Identity();
    fr.translation = Eigen::Vector3d::Zero();
    fr.scale = 1.0;
  }
  return f;
}

std::vector<mesh::TriangleFrame> random_frames(int n, Rng& rng) {
  auto f = identity_frames(n);
  for (auto& fr : f) {
    Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q /= q.norm();
    fr.rotation = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
    fr.translation = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    fr.scale = std::exp(rng.uniform(-1.0, 1.0));
  }
  return f;
}

RiggedGaussianSet random_set(int g, int faces, Rng& rng) {
  RiggedGaussianSet s;
  s.count = g;
  s.latent_dim = 2;
  for (int i = 0; i < g; ++i) {
    for (int a = 0; a < 3; ++a) s.mu_local.push_back(rng.uniform(-0.3, 0.3));
    Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q /= q.norm();
    for (int a = 0; a < 4; ++a) s.quat_local.push_back(q(a));
    for (int a = 0; a < 3; ++a) s.log_scale.push_back(rng.uniform(-2.0, 0.5));
    s.opacity_logit.push_back(rng.uniform(-3.0, 3.0));
    for (int a = 0; a < 2; ++a) s.latent.push_back(rng.normal());
    for (int a = 0; a < 3; ++a) s.static_rgb.push_back(rng.uniform());
    // first rows cover every face so the floor stays quiet unless a test
    // breaks coverage on purpose
    s.parent_face.push_back(
        i < faces ? i : static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(faces))));
  }
  return s;
}

// independent score: sigma(logit) * prod_axis k*exp(log_s)
double oracle_score(const RiggedGaussianSet& s, const std::vector<mesh::TriangleFrame>& f, int i) {
  const auto r = static_cast<std::size_t>(i);
  const double k = f[static_cast<std::size_t>(s.parent_face[r])].scale;
  double v = 1.0 / (1.0 + std::exp(-s.opacity_logit[r]));
  for (int a = 0; a < 3; ++a) v *= k * std::exp(s.log_scale[3 * r + static_cast<std::size_t>(a)]);
  return v;
}

std::vector<double> row(const RiggedGaussianSet& s, int i) {
  const auto r = static_cast<std::size_t>(i);
  std::vector<double> v;
  for (int a = 0; a < 3; ++a) v.push_back(s.mu_local[3 * r + static_cast<std::size_t>(a)]);
  for (int a = 0; a < 4; ++a) v.push_back(s.quat_local[4 * r + static_cast<std::size_t>(a)]);
  for (int a = 0; a < 3; ++a) v.push_back(s.log_scale[3 * r + static_cast<std::size_t>(a)]);
  v.push_back(s.opacity_logit[r]);
  for (int a = 0; a < s.latent_dim; ++a)
    v.push_back(s.latent[r * static_cast<std::size_t>(s.latent_dim) + static_cast<std::size_t>(a)]);
  for (int a = 0; a < 3; ++a) v.push_back(s.static_rgb[3 * r + static_cast<std::size_t>(a)]);
  v.push_back(static_cast<double>(s.parent_face[r]));
  return v;
}

}  // namespace

TEST_CASE("grad stats accumulate vector sums and norm means") {
  GradStats st;
  st.reset(2);
  CHECK(st.steps == 0);
  CHECK(st.mean_norm(0) == 0.0);
  st.accumulate({3, 4, 0, 1, 0, 0});
  st.accumulate({0, 0, 0, 0, 2, 0});
  CHECK(st.steps == 2);
  CHECK(st.vec_sum[0] == 3.0);
  CHECK(st.vec_sum[4] == 2.0);
  CHECK(st.norm_sum[0] == doctest::Approx(5.0));         // |(3,4,0)|
  CHECK(st.mean_norm(0) == doctest::Approx(2.5));
  CHECK(st.mean_norm(1) == doctest::Approx(1.5));        // (1 + 2) / 2
  CHECK_THROWS(st.accumulate({1.0}));
}

TEST_CASE("densify config rejects bad values") {
  DensifyConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.split_factor = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = DensifyConfig{};
  cfg.interval = 0;
  CHECK_THROWS(cfg.validate());
  cfg = DensifyConfig{};
  cfg.prune_k = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("densify leaves sets with sub-threshold gradients untouched") {
  Rng rng(801);
  auto set = random_set(12, 4, rng);
  auto frames = random_frames(4, rng);
  GradStats st;
  st.reset(set.count);
  std::vector<double> g(static_cast<std::size_t>(set.count) * 3);
  for (auto& x : g) x = 1e-7 * rng.normal();
  st.accumulate(g);
  DensifyConfig cfg;
  auto out = densify(set, st, frames, cfg, rng);
  CHECK(out.set.count == set.count);
  CHECK(out.set.content_hash() == set.content_hash());
  for (int i = 0; i < set.count; ++i) CHECK(out.source_row[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("densify clones small splats along the mean gradient direction") {
  Rng rng(802);
  auto set = random_set(3, 2, rng);
  for (auto& x : set.log_scale) x = std::log(0.004);  // well under size threshold
  auto frames = identity_frames(2);
  frames[static_cast<std::size_t>(set.parent_face[1])].scale = 2.0;
  Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 2).normalized()).toRotationMatrix();
  frames[static_cast<std::size_t>(set.parent_face[1])].rotation = r;

  GradStats st;
  st.reset(3);
  std::vector<double> g(9, 0.0);
  g[3] = 6e-4;  // only splat 1 clears the threshold
  g[4] = -8e-4;
  st.accumulate(g);

  DensifyConfig cfg;
  auto out = densify(set, st, frames, cfg, rng);
  CHECK(out.set.count == 4);
  CHECK(out.source_row == std::vector<int>{0, 1, 2, 1});
  // original rows are untouched ("densify never removes splats")
  for (int i = 0; i < 3; ++i) CHECK(row(out.set, i) == row(set, i));
  // the clone shares everything but its nudged position
  auto parent = row(set, 1);
  auto clone = row(out.set, 3);
  for (std::size_t j = 3; j < parent.size(); ++j) CHECK(clone[j] == parent[j]);
  // offset = (step/k) R^T ghat, with k = 2 and ghat = (0.6,-0.8,0)
  const Eigen::Vector3d ghat(0.6, -0.8, 0.0);
  const Eigen::Vector3d off = cfg.clone_step / 2.0 * (r.transpose() * ghat);
  for (int a = 0; a < 3; ++a)
    CHECK(clone[static_cast<std::size_t>(a)] ==
          doctest::Approx(parent[static_cast<std::size_t>(a)] + off(a)).epsilon(1e-12));
}

TEST_CASE("densify splits large splats into two smaller resampled children") {
  Rng rng(803);
  auto set = random_set(2, 1, rng);
  auto frames = identity_frames(1);
  for (int a = 0; a < 3; ++a) set.log_scale[3 + static_cast<std::size_t>(a)] = std::log(0.5);

  GradStats st;
  st.reset(2);
  st.accumulate({0, 0, 0, 1e-3, 0, 0});

  DensifyConfig cfg;
  const auto parent = row(set, 1);
  auto out = densify(set, st, frames, cfg, rng);
  CHECK(out.set.count == 3);
  CHECK(out.source_row == std::vector<int>{0, 1, 1});
  CHECK(row(out.set, 0) == row(set, 0));

  for (int child : {1, 2}) {
    auto c = row(out.set, child);
    for (int a = 0; a < 3; ++a)  // scales shrink by the split factor
      CHECK(c[7 + static_cast<std::size_t>(a)] ==
            doctest::Approx(parent[7 + static_cast<std::size_t>(a)] - std::log(1.6)).epsilon(1e-12));
    for (std::size_t j = 3; j < 7; ++j) CHECK(c[j] == parent[j]);    // quat kept
    for (std::size_t j = 10; j < parent.size(); ++j) CHECK(c[j] == parent[j]);
  }
  // children are resampled inside the parent, so positions move and differ
  auto c1 = row(out.set, 1);
  auto c2 = row(out.set, 2);
  CHECK((c1[0] != parent[0] || c1[1] != parent[1] || c1[2] != parent[2]));
  CHECK((c1[0] != c2[0] || c1[1] != c2[1] || c1[2] != c2[2]));
  // resampling stays within a few parent sigmas of the parent mean
  for (int child : {1, 2}) {
    auto c = row(out.set, child);
    Eigen::Vector3d d(c[0] - parent[0], c[1] - parent[1], c[2] - parent[2]);
    CHECK(d.norm() < 6 * 0.5 * std::sqrt(3.0));
  }
}

TEST_CASE("densify picks clone vs split by the max global scale") {
  Rng rng(804);
  auto set = random_set(1, 1, rng);
  auto frames = identity_frames(1);
  frames[0].scale = 4.0;
  // local scale 0.006 -> global 0.024 > threshold 0.02, despite being "small" locally
  for (auto& x : set.log_scale) x = std::log(0.006);
  GradStats st;
  st.reset(1);
  st.accumulate({1e-3, 0, 0});
  DensifyConfig cfg;
  auto out = densify(set, st, frames, cfg, rng);
  CHECK(out.set.count == 2);
  CHECK(out.set.log_scale[0] == doctest::Approx(std::log(0.006) - std::log(1.6)));  // split

  frames[0].scale = 1.0;  // global 0.006 < threshold -> clone
  auto out2 = densify(set, st, frames, cfg, rng);
  CHECK(out2.set.count == 2);
  CHECK(out2.set.log_scale[0] == std::log(0.006));
}

TEST_CASE("densify is deterministic for a fixed rng seed") {
  Rng mk(805);
  auto set = random_set(30, 6, mk);
  auto frames = random_frames(6, mk);
  GradStats st;
  st.reset(set.count);
  std::vector<double> g(static_cast<std::size_t>(set.count) * 3);
  for (auto& x : g) x = 1e-3 * mk.normal();
  st.accumulate(g);
  DensifyConfig cfg;
  Rng r1(99), r2(99);
  auto a = densify(set, st, frames, cfg, r1);
  auto b = densify(set, st, frames, cfg, r2);
  CHECK(a.set.content_hash() == b.set.content_hash());
  CHECK(a.source_row == b.source_row);
  CHECK(a.set.count > set.count);
  a.set.validate(6);
}

TEST_CASE("prune is the identity when the set is within budget") {
  Rng rng(806);
  auto set = random_set(20, 5, rng);
  auto frames = random_frames(5, rng);
  auto out = prune_topk(set, frames, 5, 20);
  CHECK(out.set.content_hash() == set.content_hash());
  for (int i = 0; i < 20; ++i) CHECK(out.source_row[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("prune keeps the k largest volume scores in original order") {
  Rng rng(807);
  auto set = random_set(10, 1, rng);
  auto frames = identity_frames(1);
  // logits 40 -> sigma == 1, so the score is exactly the scale volume
  for (auto& x : set.opacity_logit) x = 40.0;
  for (int i = 0; i < 10; ++i)
    for (int a = 0; a < 3; ++a)
      set.log_scale[3 * static_cast<std::size_t>(i) + static_cast<std::size_t>(a)] =
          std::log(0.1 * (1.0 + ((7 * i + 3) % 10)));
  // volumes are (0.1*(1+(7i+3)%10))^3; the three largest sit at i = 2, 5, 8
  auto out = prune_topk(set, frames, 1, 3);
  CHECK(out.set.count == 3);
  CHECK(out.source_row == std::vector<int>{2, 5, 8});
  CHECK(row(out.set, 0) == row(set, 2));
  CHECK(row(out.set, 1) == row(set, 5));
  CHECK(row(out.set, 2) == row(set, 8));
}

TEST_CASE("prune breaks score ties toward the lower index") {
  Rng rng(808);
  auto set = random_set(6, 1, rng);
  auto frames = identity_frames(1);
  for (auto& x : set.opacity_logit) x = 0.0;
  for (auto& x : set.log_scale) x = std::log(0.3);  // all scores equal
  auto out = prune_topk(set, frames, 1, 4);
  CHECK(out.source_row == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("prune re-inserts the best removed splat for a face left bare") {
  Rng rng(809);
  auto set = random_set(6, 2, rng);
  auto frames = identity_frames(2);
  for (auto& x : set.opacity_logit) x = 40.0;
  // face 0 holds the three largest splats, face 1 only small ones
  for (int i = 0; i < 6; ++i) {
    set.parent_face[static_cast<std::size_t>(i)] = i < 3 ? 0 : 1;
    const double s = i < 3 ? 1.0 + i : 0.01 * (i - 2);
    for (int a = 0; a < 3; ++a)
      set.log_scale[3 * static_cast<std::size_t>(i) + static_cast<std::size_t>(a)] = std::log(s);
  }
  auto out = prune_topk(set, frames, 2, 3);
  // top 3 by volume are rows 0,1,2, all on face 0; row 5 is face 1's best
  CHECK(out.set.count == 4);
  CHECK(out.source_row == std::vector<int>{0, 1, 2, 5});
  CHECK(out.set.covers_all_faces(2));
}

TEST_CASE("prune appends a fresh centroid splat for a face with no splats") {
  Rng rng(810);
  auto set = random_set(8, 3, rng);
  auto frames = identity_frames(3);
  for (auto& f : set.parent_face) f = f == 2 ? 0 : f;  // nothing parents face 2
  auto out = prune_topk(set, frames, 3, 4);
  REQUIRE(out.set.count >= 5);
  const int last = out.set.count - 1;
  CHECK(out.source_row[static_cast<std::size_t>(last)] == -1);
  auto fresh = row(out.set, last);
  for (int a = 0; a < 3; ++a) CHECK(fresh[static_cast<std::size_t>(a)] == 0.0);  // centroid
  CHECK(fresh[3] == 1.0);  // identity quat
  for (int a = 0; a < 3; ++a)
    CHECK(fresh[7 + static_cast<std::size_t>(a)] == doctest::Approx(std::log(0.5)));
  CHECK(fresh[10] == 0.0);  // sigma = 1/2
  CHECK(fresh.back() == 2.0);
  CHECK(out.set.covers_all_faces(3));
  out.set.validate(3);
}

TEST_CASE("prune survivors match an independent sort oracle") {
  Rng rng(811);
  for (int trial = 0; trial < 60; ++trial) {
    const int faces = 1 + static_cast<int>(rng.uniform_int(8));
    const int g = faces + static_cast<int>(rng.uniform_int(120));
    const int k = 1 + static_cast<int>(rng.uniform_int(40));
    auto set = random_set(g, faces, rng);
    auto frames = random_frames(faces, rng);
    if (trial % 3 == 0)  // force ties
      for (int i = 0; i < g; ++i) {
        set.opacity_logit[static_cast<std::size_t>(i)] = 0.5;
        for (int a = 0; a < 3; ++a)
          set.log_scale[3 * static_cast<std::size_t>(i) + static_cast<std::size_t>(a)] =
              std::log(0.2 + 0.1 * (i % 3));
      }

    auto out = prune_topk(set, frames, faces, k);

    // oracle: full sort by (score desc, index asc), keep first k, then apply
    // the same per-face floor by hand
    std::vector<int> order(static_cast<std::size_t>(g));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double sa = oracle_score(set, frames, a);
      const double sb = oracle_score(set, frames, b);
      return sa != sb ? sa > sb : a < b;
    });
    std::set<int> kept(order.begin(), order.begin() + std::min(k, g));
    for (int f = 0; f < faces; ++f) {
      bool have = false;
      for (int i : kept) have = have || set.parent_face[static_cast<std::size_t>(i)] == f;
      if (have) continue;
      for (int i : order)
        if (set.parent_face[static_cast<std::size_t>(i)] == f) {
          kept.insert(i);
          break;
        }
    }
    std::vector<int> expect(kept.begin(), kept.end());  // original index order

    REQUIRE(out.source_row.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CHECK(out.source_row[i] == expect[i]);
      CHECK(row(out.set, static_cast<int>(i)) == row(set, expect[i]));
    }
    CHECK(out.set.covers_all_faces(faces));
    CHECK(out.set.count <= std::min(k, g) + faces);
  }
}

TEST_CASE("prune rejects invalid arguments") {
  Rng rng(812);
  auto set = random_set(4, 2, rng);
  auto frames = identity_frames(2);
  CHECK_THROWS(prune_topk(set, frames, 2, 0));
  CHECK_THROWS(prune_topk(set, frames, 3, 2));  // more faces than frames
}
