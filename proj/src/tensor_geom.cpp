#include <cmath>

#include "talksplat/tensor.hpp"

// Rowwise small-geometry ops: each row of the operands is an independent
// 3-vector, unit quaternion (wxyz) or row-major 3x3 matrix packed as 9
// doubles. These are the building blocks of the mesh-frame and splat
// covariance gradient chain.

namespace talksplat::ad {

namespace {

void need_rows_of(const Tensor& a, int w, const char* op) {
  check(a.ndim() == 2 && a.dim(1) == w,
        strcat_(op, ": expected [N,", w, "], got ", shape_str(a.shape())));
}

}  // namespace

Tensor cross3(const Tensor& a, const Tensor& b) {
  need_rows_of(a, 3, "cross3");
  need_rows_of(b, 3, "cross3");
  Tape& tp = detail::same_tape(a, b, "cross3");
  detail::need_same_shape(a, b, "cross3");
  const int n = a.dim(0);
  Tensor out = tp.alloc({n, 3});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int r = 0; r < n; ++r) {
    const double* x = pa + 3 * static_cast<std::size_t>(r);
    const double* y = pb + 3 * static_cast<std::size_t>(r);
    double* o = po + 3 * static_cast<std::size_t>(r);
    o[0] = x[1] * y[2] - x[2] * y[1];
    o[1] = x[2] * y[0] - x[0] * y[2];
    o[2] = x[0] * y[1] - x[1] * y[0];
  }
  Tape* t = &tp;
  int ai = a.id(), bi = b.id(), oi = out.id();
  tp.record("cross3", {ai, bi}, oi, [t, ai, bi, oi, n]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    auto& gb = t->grad_buf(bi);
    const double* pa = t->val(ai);
    const double* pb = t->val(bi);
    // d(a x b): da += b x g, db += g x a
    for (int r = 0; r < n; ++r) {
      const std::size_t k = 3 * static_cast<std::size_t>(r);
      const double* x = pa + k;
      const double* y = pb + k;
      const double* g = go.data() + k;
      ga[k + 0] += y[1] * g[2] - y[2] * g[1];
      ga[k + 1] += y[2] * g[0] - y[0] * g[2];
      ga[k + 2] += y[0] * g[1] - y[1] * g[0];
      gb[k + 0] += g[1] * x[2] - g[2] * x[1];
      gb[k + 1] += g[2] * x[0] - g[0] * x[2];
      gb[k + 2] += g[0] * x[1] - g[1] * x[0];
    }
  });
  return out;
}

Tensor normalize_rows(const Tensor& a) {
  check(a.ndim() == 2, strcat_("normalize_rows: expected 2-D tensor, got ",
                               shape_str(a.shape())));
  Tape& tp = *a.tape();
  const int n = a.dim(0), d = a.dim(1);
  Tensor out = tp.alloc({n, d});
  const double* pa = a.data();
  double* po = out.data();
  std::vector<double> inv(n);
  for (int r = 0; r < n; ++r) {
    double acc = 0.0;
    for (int c = 0; c < d; ++c) {
      const double x = pa[static_cast<std::size_t>(r) * d + c];
      acc += x * x;
    }
    check(acc > 0.0, strcat_("normalize_rows: zero row ", r));
    inv[r] = 1.0 / std::sqrt(acc);
    for (int c = 0; c < d; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * d + c;
      po[k] = pa[k] * inv[r];
    }
  }
  Tape* t = &tp;
  int ai = a.id(), oi = out.id();
  tp.record("normalize_rows", {ai}, oi,
            [t, ai, oi, n, d, inv = std::move(inv)]() {
              const auto& go = t->pass_grad(oi);
              auto& ga = t->grad_buf(ai);
              const double* po = t->val(oi);
              // d(x/|x|) = (I - y y^T) / |x|
              for (int r = 0; r < n; ++r) {
                const std::size_t base = static_cast<std::size_t>(r) * d;
                double dot = 0.0;
                for (int c = 0; c < d; ++c) dot += go[base + c] * po[base + c];
                for (int c = 0; c < d; ++c)
                  ga[base + c] += inv[r] * (go[base + c] - po[base + c] * dot);
              }
            });
  return out;
}

Tensor bmm3(const Tensor& a, const Tensor& b) {
  need_rows_of(a, 9, "bmm3");
  need_rows_of(b, 9, "bmm3");
  Tape& tp = detail::same_tape(a, b, "bmm3");
  detail::need_same_shape(a, b, "bmm3");
  const int n = a.dim(0);
  Tensor out = tp.alloc({n, 9});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int r = 0; r < n; ++r) {
    const double* A = pa + 9 * static_cast<std::size_t>(r);
    const double* B = pb + 9 * static_cast<std::size_t>(r);
    double* C = po + 9 * static_cast<std::size_t>(r);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        C[3 * i + j] = A[3 * i + 0] * B[0 + j] + A[3 * i + 1] * B[3 + j] +
                       A[3 * i + 2] * B[6 + j];
  }
  Tape* t = &tp;
  int ai = a.id(), bi = b.id(), oi = out.id();
  tp.record("bmm3", {ai, bi}, oi, [t, ai, bi, oi, n]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    auto& gb = t->grad_buf(bi);
    const double* pa = t->val(ai);
    const double* pb = t->val(bi);
    for (int r = 0; r < n; ++r) {
      const std::size_t k = 9 * static_cast<std::size_t>(r);
      const double* A = pa + k;
      const double* B = pb + k;
      const double* G = go.data() + k;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const double g = G[3 * i + j];
          if (g == 0.0) continue;
          for (int l = 0; l < 3; ++l) {
            ga[k + 3 * i + l] += g * B[3 * l + j];  // dA = G B^T
            gb[k + 3 * l + j] += g * A[3 * i + l];  // dB = A^T G
          }
        }
    }
  });
  return out;
}

Tensor bmv3(const Tensor& m, const Tensor& v) {
  need_rows_of(m, 9, "bmv3");
  need_rows_of(v, 3, "bmv3");
  Tape& tp = detail::same_tape(m, v, "bmv3");
  check(m.dim(0) == v.dim(0), "bmv3: row counts differ");
  const int n = m.dim(0);
  Tensor out = tp.alloc({n, 3});
  const double* pm = m.data();
  const double* pv = v.data();
  double* po = out.data();
  for (int r = 0; r < n; ++r) {
    const double* M = pm + 9 * static_cast<std::size_t>(r);
    const double* x = pv + 3 * static_cast<std::size_t>(r);
    double* o = po + 3 * static_cast<std::size_t>(r);
    for (int i = 0; i < 3; ++i)
      o[i] = M[3 * i + 0] * x[0] + M[3 * i + 1] * x[1] + M[3 * i + 2] * x[2];
  }
  Tape* t = &tp;
  int mi = m.id(), vi = v.id(), oi = out.id();
  tp.record("bmv3", {mi, vi}, oi, [t, mi, vi, oi, n]() {
    const auto& go = t->pass_grad(oi);
    auto& gm = t->grad_buf(mi);
    auto& gv = t->grad_buf(vi);
    const double* pm = t->val(mi);
    const double* pv = t->val(vi);
    for (int r = 0; r < n; ++r) {
      const std::size_t km = 9 * static_cast<std::size_t>(r);
      const std::size_t kv = 3 * static_cast<std::size_t>(r);
      for (int i = 0; i < 3; ++i) {
        const double g = go[kv + i];
        if (g == 0.0) continue;
        for (int j = 0; j < 3; ++j) {
          gm[km + 3 * i + j] += g * pv[kv + j];
          gv[kv + j] += g * pm[km + 3 * i + j];
        }
      }
    }
  });
  return out;
}

Tensor transpose3(const Tensor& m) {
  need_rows_of(m, 9, "transpose3");
  Tape& tp = *m.tape();
  const int n = m.dim(0);
  Tensor out = tp.alloc({n, 9});
  const double* pm = m.data();
  double* po = out.data();
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        po[9 * static_cast<std::size_t>(r) + 3 * i + j] =
            pm[9 * static_cast<std::size_t>(r) + 3 * j + i];
  Tape* t = &tp;
  int mi = m.id(), oi = out.id();
  tp.record("transpose3", {mi}, oi, [t, mi, oi, n]() {
    const auto& go = t->pass_grad(oi);
    auto& gm = t->grad_buf(mi);
    for (int r = 0; r < n; ++r)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          gm[9 * static_cast<std::size_t>(r) + 3 * j + i] +=
              go[9 * static_cast<std::size_t>(r) + 3 * i + j];
  });
  return out;
}

Tensor colscale3(const Tensor& m, const Tensor& s) {
  need_rows_of(m, 9, "colscale3");
  need_rows_of(s, 3, "colscale3");
  Tape& tp = detail::same_tape(m, s, "colscale3");
  check(m.dim(0) == s.dim(0), "colscale3: row counts differ");
  const int n = m.dim(0);
  Tensor out = tp.alloc({n, 9});
  const double* pm = m.data();
  const double* ps = s.data();
  double* po = out.data();
  // (M diag(s))_ij = M_ij * s_j
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const std::size_t k = 9 * static_cast<std::size_t>(r) + 3 * i + j;
        po[k] = pm[k] * ps[3 * static_cast<std::size_t>(r) + j];
      }
  Tape* t = &tp;
  int mi = m.id(), si = s.id(), oi = out.id();
  tp.record("colscale3", {mi, si}, oi, [t, mi, si, oi, n]() {
    const auto& go = t->pass_grad(oi);
    auto& gm = t->grad_buf(mi);
    auto& gs = t->grad_buf(si);
    const double* pm = t->val(mi);
    const double* ps = t->val(si);
    for (int r = 0; r < n; ++r)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const std::size_t k = 9 * static_cast<std::size_t>(r) + 3 * i + j;
          const std::size_t kj = 3 * static_cast<std::size_t>(r) + j;
          gm[k] += go[k] * ps[kj];
          gs[kj] += go[k] * pm[k];
        }
  });
  return out;
}

Tensor mat3_from_cols(const Tensor& c0, const Tensor& c1, const Tensor& c2) {
  need_rows_of(c0, 3, "mat3_from_cols");
  need_rows_of(c1, 3, "mat3_from_cols");
  need_rows_of(c2, 3, "mat3_from_cols");
  Tape& tp = detail::same_tape(c0, c1, "mat3_from_cols");
  check(c2.tape() == &tp, "mat3_from_cols: operands on different tapes");
  check(c0.dim(0) == c1.dim(0) && c1.dim(0) == c2.dim(0),
        "mat3_from_cols: row counts differ");
  const int n = c0.dim(0);
  Tensor out = tp.alloc({n, 9});
  const double* p[3] = {c0.data(), c1.data(), c2.data()};
  double* po = out.data();
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        po[9 * static_cast<std::size_t>(r) + 3 * i + j] =
            p[j][3 * static_cast<std::size_t>(r) + i];
  Tape* t = &tp;
  int i0 = c0.id(), i1 = c1.id(), i2 = c2.id(), oi = out.id();
  tp.record("mat3_from_cols", {i0, i1, i2}, oi, [t, i0, i1, i2, oi, n]() {
    const auto& go = t->pass_grad(oi);
    std::vector<double>* g[3] = {&t->grad_buf(i0), &t->grad_buf(i1),
                                 &t->grad_buf(i2)};
    for (int r = 0; r < n; ++r)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          (*g[j])[3 * static_cast<std::size_t>(r) + i] +=
              go[9 * static_cast<std::size_t>(r) + 3 * i + j];
  });
  return out;
}

Tensor quat_to_rotmat(const Tensor& q) {
  need_rows_of(q, 4, "quat_to_rotmat");
  Tape& tp = *q.tape();
  const int n = q.dim(0);
  Tensor out = tp.alloc({n, 9});
  const double* pq = q.data();
  double* po = out.data();
  for (int r = 0; r < n; ++r) {
    const double* Q = pq + 4 * static_cast<std::size_t>(r);
    const double w = Q[0], x = Q[1], y = Q[2], z = Q[3];
    double* R = po + 9 * static_cast<std::size_t>(r);
    R[0] = 1 - 2 * (y * y + z * z);
    R[1] = 2 * (x * y - w * z);
    R[2] = 2 * (x * z + w * y);
    R[3] = 2 * (x * y + w * z);
    R[4] = 1 - 2 * (x * x + z * z);
    R[5] = 2 * (y * z - w * x);
    R[6] = 2 * (x * z - w * y);
    R[7] = 2 * (y * z + w * x);
    R[8] = 1 - 2 * (x * x + y * y);
  }
  Tape* t = &tp;
  int qi = q.id(), oi = out.id();
  tp.record("quat_to_rotmat", {qi}, oi, [t, qi, oi, n]() {
    const auto& go = t->pass_grad(oi);
    auto& gq = t->grad_buf(qi);
    const double* pq = t->val(qi);
    for (int r = 0; r < n; ++r) {
      const double* Q = pq + 4 * static_cast<std::size_t>(r);
      const double w = Q[0], x = Q[1], y = Q[2], z = Q[3];
      const double* G = go.data() + 9 * static_cast<std::size_t>(r);
      double* g = gq.data() + 4 * static_cast<std::size_t>(r);
      // entrywise partials of R(q); q is treated as free (the unit
      // constraint is enforced by normalize_rows upstream)
      g[0] += 2 * (-z * G[1] + y * G[2] + z * G[3] - x * G[5] - y * G[6] +
                   x * G[7]);
      g[1] += 2 * (y * G[1] + z * G[2] + y * G[3] - 2 * x * G[4] - w * G[5] +
                   z * G[6] + w * G[7] - 2 * x * G[8]);
      g[2] += 2 * (-2 * y * G[0] + x * G[1] + w * G[2] + x * G[3] + z * G[5] -
                   w * G[6] + z * G[7] - 2 * y * G[8]);
      g[3] += 2 * (-2 * z * G[0] - w * G[1] + x * G[2] + w * G[3] -
                   2 * z * G[4] + y * G[5] + x * G[6] + y * G[7]);
    }
  });
  return out;
}

}  // namespace talksplat::ad
