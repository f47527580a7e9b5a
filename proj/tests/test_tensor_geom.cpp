#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>

#include "doctest.h"
#include "testers.hpp"

using namespace talksplat;
using namespace talksplat::ad;
using gradcheck::central_diff_check;
using testers::randv;
using testers::readout;

namespace {

Eigen::Matrix3d unpack3(const std::vector<double>& v, int row) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      m(i, j) = v[9 * static_cast<std::size_t>(row) + 3 * i + j];
  return m;
}

}  // namespace

TEST_CASE("cross3: matches Eigen and is orthogonal to its inputs") {
  Rng rng(11);
  const int n = 8;
  auto av = randv(rng, n * 3), bv = randv(rng, n * 3);
  Tape tp;
  auto c = cross3(tp.input({n, 3}, av), tp.input({n, 3}, bv));
  auto cv = c.values();
  for (int r = 0; r < n; ++r) {
    Eigen::Vector3d a(av[3 * static_cast<std::size_t>(r)], av[3 * static_cast<std::size_t>(r) + 1], av[3 * static_cast<std::size_t>(r) + 2]);
    Eigen::Vector3d b(bv[3 * static_cast<std::size_t>(r)], bv[3 * static_cast<std::size_t>(r) + 1], bv[3 * static_cast<std::size_t>(r) + 2]);
    Eigen::Vector3d want = a.cross(b);
    for (int i = 0; i < 3; ++i)
      CHECK(cv[3 * static_cast<std::size_t>(r) + i] == doctest::Approx(want(i)).epsilon(1e-14));
    Eigen::Vector3d got(cv[3 * static_cast<std::size_t>(r)], cv[3 * static_cast<std::size_t>(r) + 1], cv[3 * static_cast<std::size_t>(r) + 2]);
    CHECK(std::fabs(got.dot(a)) < 1e-12);
    CHECK(std::fabs(got.dot(b)) < 1e-12);
  }
}

TEST_CASE("cross3: gradient vs finite differences") {
  Rng rng(13);
  const int n = 4;
  auto w = randv(rng, n * 3);
  auto program = [&](const std::vector<double>& p) {
    Tape tp;
    auto a = tp.input({n, 3}, std::vector<double>(p.begin(), p.begin() + n * 3));
    auto b = tp.input({n, 3}, std::vector<double>(p.begin() + n * 3, p.end()));
    auto loss = readout(cross3(a, b), w);
    tp.backward(loss);
    return std::make_pair(loss.value(), testers::concat(a.grad(), b.grad()));
  };
  CHECK(central_diff_check(program, randv(rng, 2 * n * 3)).max_rel_err < 1e-7);
}

TEST_CASE("normalize_rows: unit output, gradient, zero-row rejection") {
  Rng rng(17);
  const int n = 6, d = 4;
  auto xv = randv(rng, n * d, -2, 2);
  for (auto& x : xv) x += (x >= 0 ? 0.5 : -0.5);  // keep rows well away from 0
  Tape tp;
  auto y = normalize_rows(tp.input({n, d}, xv));
  auto yv = y.values();
  for (int r = 0; r < n; ++r) {
    double s = 0;
    for (int c = 0; c < d; ++c) s += yv[static_cast<std::size_t>(r) * d + c] * yv[static_cast<std::size_t>(r) * d + c];
    CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-13));
  }
  auto w = randv(rng, n * d);
  auto prog = testers::unary_program(
      {n, d}, w, [](Tape&, const Tensor& t) { return normalize_rows(t); });
  CHECK(central_diff_check(prog, xv).max_rel_err < 1e-6);

  auto z = tp.input({1, 3}, {0, 0, 0});
  CHECK_THROWS_WITH_AS(normalize_rows(z), doctest::Contains("zero row"),
                       std::runtime_error);
}

TEST_CASE("bmm3/bmv3/transpose3/colscale3: match Eigen per row") {
  Rng rng(19);
  const int n = 5;
  auto av = randv(rng, n * 9), bv = randv(rng, n * 9), vv = randv(rng, n * 3),
       sv = randv(rng, n * 3, 0.5, 2.0);
  Tape tp;
  auto A = tp.input({n, 9}, av);
  auto B = tp.input({n, 9}, bv);
  auto V = tp.input({n, 3}, vv);
  auto S = tp.input({n, 3}, sv);
  auto ab = bmm3(A, B).values();
  auto mv = bmv3(A, V).values();
  auto at = transpose3(A).values();
  auto cs = colscale3(A, S).values();
  for (int r = 0; r < n; ++r) {
    Eigen::Matrix3d ea = unpack3(av, r), eb = unpack3(bv, r);
    Eigen::Vector3d ev(vv[3 * static_cast<std::size_t>(r)], vv[3 * static_cast<std::size_t>(r) + 1], vv[3 * static_cast<std::size_t>(r) + 2]);
    Eigen::Vector3d es(sv[3 * static_cast<std::size_t>(r)], sv[3 * static_cast<std::size_t>(r) + 1], sv[3 * static_cast<std::size_t>(r) + 2]);
    Eigen::Matrix3d pab = ea * eb;
    Eigen::Vector3d pmv = ea * ev;
    Eigen::Matrix3d pat = ea.transpose();
    Eigen::Matrix3d pcs = ea * es.asDiagonal();
    for (int i = 0; i < 3; ++i) {
      CHECK(mv[3 * static_cast<std::size_t>(r) + i] == doctest::Approx(pmv(i)).epsilon(1e-13));
      for (int j = 0; j < 3; ++j) {
        CHECK(ab[9 * static_cast<std::size_t>(r) + 3 * i + j] == doctest::Approx(pab(i, j)).epsilon(1e-13));
        CHECK(at[9 * static_cast<std::size_t>(r) + 3 * i + j] == doctest::Approx(pat(i, j)).epsilon(1e-13));
        CHECK(cs[9 * static_cast<std::size_t>(r) + 3 * i + j] == doctest::Approx(pcs(i, j)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("row-matrix ops: gradients vs finite differences") {
  Rng rng(23);
  const int n = 3;
  {
    auto w = randv(rng, n * 9);
    auto program = [&](const std::vector<double>& p) {
      Tape tp;
      auto a = tp.input({n, 9}, std::vector<double>(p.begin(), p.begin() + n * 9));
      auto b = tp.input({n, 9}, std::vector<double>(p.begin() + n * 9, p.end()));
      auto loss = readout(bmm3(a, transpose3(b)), w);
      tp.backward(loss);
      return std::make_pair(loss.value(), testers::concat(a.grad(), b.grad()));
    };
    CHECK(central_diff_check(program, randv(rng, 2 * n * 9)).max_rel_err < 1e-6);
  }
  {
    auto w = randv(rng, n * 3);
    auto program = [&](const std::vector<double>& p) {
      Tape tp;
      auto m = tp.input({n, 9}, std::vector<double>(p.begin(), p.begin() + n * 9));
      auto v = tp.input({n, 3}, std::vector<double>(p.begin() + n * 9, p.end()));
      auto loss = readout(bmv3(m, v), w);
      tp.backward(loss);
      return std::make_pair(loss.value(), testers::concat(m.grad(), v.grad()));
    };
    CHECK(central_diff_check(program, randv(rng, n * 12)).max_rel_err < 1e-6);
  }
  {
    auto w = randv(rng, n * 9);
    auto program = [&](const std::vector<double>& p) {
      Tape tp;
      auto m = tp.input({n, 9}, std::vector<double>(p.begin(), p.begin() + n * 9));
      auto s = tp.input({n, 3}, std::vector<double>(p.begin() + n * 9, p.end()));
      auto loss = readout(colscale3(m, s), w);
      tp.backward(loss);
      return std::make_pair(loss.value(), testers::concat(m.grad(), s.grad()));
    };
    CHECK(central_diff_check(program, randv(rng, n * 12)).max_rel_err < 1e-6);
  }
  {
    auto w = randv(rng, n * 9);
    auto program = [&](const std::vector<double>& p) {
      Tape tp;
      auto c0 = tp.input({n, 3}, std::vector<double>(p.begin(), p.begin() + n * 3));
      auto c1 = tp.input({n, 3}, std::vector<double>(p.begin() + n * 3, p.begin() + 2 * n * 3));
      auto c2 = tp.input({n, 3}, std::vector<double>(p.begin() + 2 * n * 3, p.end()));
      auto loss = readout(mat3_from_cols(c0, c1, c2), w);
      tp.backward(loss);
      return std::make_pair(loss.value(),
                            testers::concat(testers::concat(c0.grad(), c1.grad()), c2.grad()));
    };
    CHECK(central_diff_check(program, randv(rng, 3 * n * 3)).max_rel_err < 1e-7);
  }
}

TEST_CASE("mat3_from_cols: columns land in the right slots") {
  Tape tp;
  auto c0 = tp.input({1, 3}, {1, 2, 3});
  auto c1 = tp.input({1, 3}, {4, 5, 6});
  auto c2 = tp.input({1, 3}, {7, 8, 9});
  auto m = mat3_from_cols(c0, c1, c2);
  CHECK(m.values() == std::vector<double>{1, 4, 7, 2, 5, 8, 3, 6, 9});
}

TEST_CASE("quat_to_rotmat: known rotations and Eigen agreement") {
  Tape tp;
  auto qi = tp.input({1, 4}, {1, 0, 0, 0});
  CHECK(quat_to_rotmat(qi).values() ==
        std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});

  // 90 degrees about z: w = cos(45°), z = sin(45°)
  const double c = std::sqrt(0.5);
  auto qz = tp.input({1, 4}, {c, 0, 0, c});
  auto r = quat_to_rotmat(qz).values();
  const std::vector<double> want{0, -1, 0, 1, 0, 0, 0, 0, 1};
  for (int i = 0; i < 9; ++i)
    CHECK(r[static_cast<std::size_t>(i)] == doctest::Approx(want[static_cast<std::size_t>(i)]).epsilon(1e-12));

  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    auto qv = randv(rng, 4, -1, 1);
    double norm = std::sqrt(qv[0] * qv[0] + qv[1] * qv[1] + qv[2] * qv[2] + qv[3] * qv[3]);
    for (auto& x : qv) x /= norm;
    Tape t2;
    auto m = quat_to_rotmat(t2.input({1, 4}, qv)).values();
    Eigen::Quaterniond q(qv[0], qv[1], qv[2], qv[3]);
    Eigen::Matrix3d em = q.toRotationMatrix();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(m[3 * static_cast<std::size_t>(i) + j] == doctest::Approx(em(i, j)).epsilon(1e-12));
    Eigen::Matrix3d mm = unpack3(m, 0);
    CHECK((mm * mm.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(mm.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("quat_to_rotmat: gradient vs finite differences (free 4-vector)") {
  Rng rng(31);
  const int n = 3;
  auto w = randv(rng, n * 9);
  auto prog = testers::unary_program(
      {n, 4}, w, [](Tape&, const Tensor& t) { return quat_to_rotmat(t); });
  CHECK(central_diff_check(prog, randv(rng, n * 4, -1, 1)).max_rel_err < 1e-6);
}

TEST_CASE("composed rotation chain: normalize -> rotmat -> product gradient") {
  Rng rng(37);
  const int n = 2;
  auto w = randv(rng, n * 3);
  auto program = [&](const std::vector<double>& p) {
    Tape tp;
    auto q = tp.input({n, 4}, std::vector<double>(p.begin(), p.begin() + n * 4));
    auto v = tp.input({n, 3}, std::vector<double>(p.begin() + n * 4, p.end()));
    auto R = quat_to_rotmat(normalize_rows(q));
    auto loss = readout(bmv3(R, v), w);
    tp.backward(loss);
    return std::make_pair(loss.value(), testers::concat(q.grad(), v.grad()));
  };
  auto x = randv(rng, n * 7, 0.2, 1.0);
  CHECK(central_diff_check(program, x).max_rel_err < 1e-6);
}
