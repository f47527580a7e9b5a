#include "talksplat/tensor.hpp"

#include <cmath>
#include <cstring>
#include <utility>

namespace talksplat::ad {

std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    check(d >= 0, "negative tensor extent");
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// ---- Tensor ----------------------------------------------------------------

const Shape& Tensor::shape() const { return tape_->shape_of(id_); }
double* Tensor::data() { return tape_->val(id_); }
const double* Tensor::data() const { return tape_->val(id_); }

std::vector<double> Tensor::values() const {
  const double* p = data();
  return std::vector<double>(p, p + size());
}

std::vector<double> Tensor::grad() const { return tape_->grad_of(id_); }

double Tensor::value() const {
  check(size() == 1, "Tensor::value: tensor is not scalar");
  return data()[0];
}

// ---- Tape ------------------------------------------------------------------

Tensor Tape::input(Shape shape) {
  std::vector<double> v(static_cast<std::size_t>(numel(shape)), 0.0);
  return input(std::move(shape), std::move(v));
}

Tensor Tape::input(Shape shape, const double* src) {
  std::vector<double> v(src, src + numel(shape));
  return input(std::move(shape), std::move(v));
}

Tensor Tape::input(Shape shape, std::vector<double> v) {
  check(static_cast<std::int64_t>(v.size()) == numel(shape),
        strcat_("Tape::input: ", v.size(), " values for shape ",
                shape_str(shape)));
  check(!in_pass_, "Tape: cannot grow the tape during backward");
  nodes_.push_back(Node{std::move(shape), std::move(v), {}});
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::alloc(Shape shape) { return input(std::move(shape)); }

void Tape::record(const char* kind, std::vector<int> inputs, int output,
                  std::function<void()> backward) {
  records_.push_back(
      Record{kind, std::move(inputs), output, std::move(backward)});
}

std::vector<double>& Tape::grad_buf(int id) {
  check(in_pass_, "Tape::grad_buf outside backward pass");
  auto& g = pass_[id];
  if (g.empty()) g.assign(nodes_[id].val.size(), 0.0);
  return g;
}

const std::vector<double>& Tape::pass_grad(int id) {
  check(in_pass_ && !pass_[id].empty(),
        "Tape::pass_grad: node has no gradient in this pass");
  return pass_[id];
}

void Tape::backward(const Tensor& loss) {
  check(loss.tape() == this, "backward: loss lives on another tape");
  check(loss.size() == 1,
        strcat_("backward: loss must be scalar, got ",
                shape_str(loss.shape())));
  pass_.assign(nodes_.size(), {});
  in_pass_ = true;
  pass_[loss.id()].assign(1, 1.0);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (pass_[it->output].empty()) continue;  // no downstream gradient
    it->backward();
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (pass_[i].empty()) continue;
    auto& g = nodes_[i].grad;
    if (g.empty()) g.assign(nodes_[i].val.size(), 0.0);
    const auto& p = pass_[i];
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += p[j];
  }
  in_pass_ = false;
  pass_.clear();
  pass_.shrink_to_fit();
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.clear();
}

std::vector<double> Tape::grad_of(int id) const {
  const auto& n = nodes_[id];
  if (n.grad.empty()) return std::vector<double>(n.val.size(), 0.0);
  return n.grad;
}

// ---- helpers ----------------------------------------------------------------

namespace detail {

Tape& same_tape(const Tensor& a, const Tensor& b, const char* op) {
  check(a.defined() && b.defined(), strcat_(op, ": undefined tensor"));
  check(a.tape() == b.tape(), strcat_(op, ": operands on different tapes"));
  return *a.tape();
}

void need_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  check(a.shape() == b.shape(),
        strcat_(op, ": shape mismatch ", shape_str(a.shape()), " vs ",
                shape_str(b.shape())));
}

}  // namespace detail

namespace {

using detail::need_same_shape;
using detail::same_tape;

// Generic elementwise binary op. dfa/dfb produce local partials from (a, b,
// out) values.
template <typename F, typename DA, typename DB>
Tensor ew_binary(const char* kind, const Tensor& a, const Tensor& b, F f,
                 DA dfa, DB dfb) {
  Tape& tp = same_tape(a, b, kind);
  need_same_shape(a, b, kind);
  Tensor out = tp.alloc(a.shape());
  const std::int64_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
  Tape* t = &tp;
  int ai = a.id(), bi = b.id(), oi = out.id();
  tp.record(kind, {ai, bi}, oi, [t, ai, bi, oi, n, dfa, dfb]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    auto& gb = t->grad_buf(bi);
    const double* pa = t->val(ai);
    const double* pb = t->val(bi);
    const double* po = t->val(oi);
    for (std::int64_t i = 0; i < n; ++i) {
      ga[i] += go[i] * dfa(pa[i], pb[i], po[i]);
      gb[i] += go[i] * dfb(pa[i], pb[i], po[i]);
    }
  });
  return out;
}

template <typename F, typename DF>
Tensor ew_unary(const char* kind, const Tensor& a, F f, DF df) {
  Tape& tp = *a.tape();
  Tensor out = tp.alloc(a.shape());
  const std::int64_t n = a.size();
  const double* pa = a.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < n; ++i) po[i] = f(pa[i]);
  Tape* t = &tp;
  int ai = a.id(), oi = out.id();
  tp.record(kind, {ai}, oi, [t, ai, oi, n, df]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    const double* pa = t->val(ai);
    const double* po = t->val(oi);
    for (std::int64_t i = 0; i < n; ++i) ga[i] += go[i] * df(pa[i], po[i]);
  });
  return out;
}

void need_2d(const Tensor& a, const char* op) {
  check(a.ndim() == 2,
        strcat_(op, ": expected 2-D tensor, got ", shape_str(a.shape())));
}

}  // namespace

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

Tensor neg(const Tensor& a) {
  return ew_unary(
      "neg", a, [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return ew_unary(
      "add_scalar", a, [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return ew_unary(
      "mul_scalar", a, [c](double x) { return x * c; },
      [c](double, double) { return c; });
}

Tensor relu(const Tensor& a) {
  return ew_unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return ew_unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double o) { return 1.0 - o * o; });
}

Tensor sigmoid(const Tensor& a) {
  return ew_unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double o) { return o * (1.0 - o); });
}

Tensor exp(const Tensor& a) {
  return ew_unary(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double o) { return o; });
}

Tensor log(const Tensor& a) {
  return ew_unary(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  return ew_unary(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return ew_unary(
      "square", a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor sqrt_safe(const Tensor& a) {
  return ew_unary(
      "sqrt_safe", a,
      [](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; },
      [](double x, double o) { return x > 0.0 ? 0.5 / o : 0.0; });
}

// ---- shape / gather ----------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  Tape& tp = *a.tape();
  check(numel(shape) == a.size(),
        strcat_("reshape: ", shape_str(a.shape()), " -> ", shape_str(shape),
                " changes element count"));
  Tensor out = tp.alloc(shape);
  std::memcpy(out.data(), a.data(), sizeof(double) * a.size());
  Tape* t = &tp;
  int ai = a.id(), oi = out.id();
  std::int64_t n = a.size();
  tp.record("reshape", {ai}, oi, [t, ai, oi, n]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    for (std::int64_t i = 0; i < n; ++i) ga[i] += go[i];
  });
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  check(!xs.empty(), "concat_cols: no inputs");
  Tape& tp = *xs[0].tape();
  const int n = xs[0].dim(0);
  int dtot = 0;
  std::vector<int> ids, widths;
  for (const auto& x : xs) {
    need_2d(x, "concat_cols");
    check(x.tape() == &tp, "concat_cols: operands on different tapes");
    check(x.dim(0) == n, "concat_cols: row counts differ");
    ids.push_back(x.id());
    widths.push_back(x.dim(1));
    dtot += x.dim(1);
  }
  Tensor out = tp.alloc({n, dtot});
  double* po = out.data();
  int off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double* px = xs[k].data();
    const int w = widths[k];
    for (int r = 0; r < n; ++r)
      std::memcpy(po + static_cast<std::size_t>(r) * dtot + off,
                  px + static_cast<std::size_t>(r) * w, sizeof(double) * w);
    off += w;
  }
  Tape* t = &tp;
  int oi = out.id();
  tp.record("concat_cols", ids, oi, [t, ids, widths, oi, n, dtot]() {
    const auto& go = t->pass_grad(oi);
    int off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      auto& g = t->grad_buf(ids[k]);
      const int w = widths[k];
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < w; ++c)
          g[static_cast<std::size_t>(r) * w + c] +=
              go[static_cast<std::size_t>(r) * dtot + off + c];
      off += w;
    }
  });
  return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  need_2d(a, "slice_cols");
  Tape& tp = *a.tape();
  const int n = a.dim(0), d = a.dim(1);
  check(0 <= c0 && c0 < c1 && c1 <= d,
        strcat_("slice_cols: bad range [", c0, ",", c1, ") for width ", d));
  const int w = c1 - c0;
  Tensor out = tp.alloc({n, w});
  const double* pa = a.data();
  double* po = out.data();
  for (int r = 0; r < n; ++r)
    std::memcpy(po + static_cast<std::size_t>(r) * w,
                pa + static_cast<std::size_t>(r) * d + c0, sizeof(double) * w);
  Tape* t = &tp;
  int ai = a.id(), oi = out.id();
  tp.record("slice_cols", {ai}, oi, [t, ai, oi, n, d, c0, w]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < w; ++c)
        ga[static_cast<std::size_t>(r) * d + c0 + c] +=
            go[static_cast<std::size_t>(r) * w + c];
  });
  return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
  need_2d(a, "gather_rows");
  Tape& tp = *a.tape();
  const int n = a.dim(0), d = a.dim(1);
  const int m = static_cast<int>(idx.size());
  for (int i : idx)
    check(0 <= i && i < n, strcat_("gather_rows: index ", i, " out of [0,", n,
                                   ")"));
  Tensor out = tp.alloc({m, d});
  const double* pa = a.data();
  double* po = out.data();
  for (int r = 0; r < m; ++r)
    std::memcpy(po + static_cast<std::size_t>(r) * d,
                pa + static_cast<std::size_t>(idx[r]) * d, sizeof(double) * d);
  Tape* t = &tp;
  int ai = a.id(), oi = out.id();
  tp.record("gather_rows", {ai}, oi, [t, ai, oi, idx, d, m]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < d; ++c)
        ga[static_cast<std::size_t>(idx[r]) * d + c] +=
            go[static_cast<std::size_t>(r) * d + c];
  });
  return out;
}

Tensor broadcast_row(const Tensor& v, int n) {
  Tape& tp = *v.tape();
  const int d = static_cast<int>(v.size());
  check(v.ndim() == 1 || (v.ndim() == 2 && v.dim(0) == 1),
        strcat_("broadcast_row: expected [D] or [1,D], got ",
                shape_str(v.shape())));
  Tensor out = tp.alloc({n, d});
  const double* pv = v.data();
  double* po = out.data();
  for (int r = 0; r < n; ++r)
    std::memcpy(po + static_cast<std::size_t>(r) * d, pv, sizeof(double) * d);
  Tape* t = &tp;
  int vi = v.id(), oi = out.id();
  tp.record("broadcast_row", {vi}, oi, [t, vi, oi, n, d]() {
    const auto& go = t->pass_grad(oi);
    auto& gv = t->grad_buf(vi);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c)
        gv[c] += go[static_cast<std::size_t>(r) * d + c];
  });
  return out;
}

Tensor add_row(const Tensor& a, const Tensor& b) {
  need_2d(a, "add_row");
  Tape& tp = same_tape(a, b, "add_row");
  const int n = a.dim(0), d = a.dim(1);
  check(static_cast<int>(b.size()) == d &&
            (b.ndim() == 1 || (b.ndim() == 2 && b.dim(0) == 1)),
        strcat_("add_row: bias shape ", shape_str(b.shape()),
                " incompatible with ", shape_str(a.shape())));
  Tensor out = tp.alloc({n, d});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c)
      po[static_cast<std::size_t>(r) * d + c] =
          pa[static_cast<std::size_t>(r) * d + c] + pb[c];
  Tape* t = &tp;
  int ai = a.id(), bi = b.id(), oi = out.id();
  tp.record("add_row", {ai, bi}, oi, [t, ai, bi, oi, n, d]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    auto& gb = t->grad_buf(bi);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) {
        const double g = go[static_cast<std::size_t>(r) * d + c];
        ga[static_cast<std::size_t>(r) * d + c] += g;
        gb[c] += g;
      }
  });
  return out;
}

Tensor mul_cols(const Tensor& a, const Tensor& s) {
  need_2d(a, "mul_cols");
  Tape& tp = same_tape(a, s, "mul_cols");
  const int n = a.dim(0), d = a.dim(1);
  check(static_cast<int>(s.size()) == n &&
            (s.ndim() == 1 || (s.ndim() == 2 && s.dim(1) == 1)),
        strcat_("mul_cols: scale shape ", shape_str(s.shape()),
                " incompatible with ", shape_str(a.shape())));
  Tensor out = tp.alloc({n, d});
  const double* pa = a.data();
  const double* ps = s.data();
  double* po = out.data();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c)
      po[static_cast<std::size_t>(r) * d + c] =
          pa[static_cast<std::size_t>(r) * d + c] * ps[r];
  Tape* t = &tp;
  int ai = a.id(), si = s.id(), oi = out.id();
  tp.record("mul_cols", {ai, si}, oi, [t, ai, si, oi, n, d]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    auto& gs = t->grad_buf(si);
    const double* pa = t->val(ai);
    const double* ps = t->val(si);
    for (int r = 0; r < n; ++r) {
      double acc = 0.0;
      for (int c = 0; c < d; ++c) {
        const std::size_t k = static_cast<std::size_t>(r) * d + c;
        ga[k] += go[k] * ps[r];
        acc += go[k] * pa[k];
      }
      gs[r] += acc;
    }
  });
  return out;
}

// ---- linear algebra / reductions ---------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  need_2d(a, "matmul");
  need_2d(b, "matmul");
  Tape& tp = same_tape(a, b, "matmul");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  check(k == k2, strcat_("matmul: inner extents disagree: ",
                         shape_str(a.shape()), " x ", shape_str(b.shape())));
  Tensor out = tp.alloc({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < k; ++l) {
      const double av = pa[static_cast<std::size_t>(i) * k + l];
      if (av == 0.0) continue;
      const double* prow = pb + static_cast<std::size_t>(l) * n;
      double* orow = po + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * prow[j];
    }
  Tape* t = &tp;
  int ai = a.id(), bi = b.id(), oi = out.id();
  tp.record("matmul", {ai, bi}, oi, [t, ai, bi, oi, m, k, n]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    auto& gb = t->grad_buf(bi);
    const double* pa = t->val(ai);
    const double* pb = t->val(bi);
    // dA += G B^T, dB += A^T G
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        const double g = go[static_cast<std::size_t>(i) * n + j];
        if (g == 0.0) continue;
        for (int l = 0; l < k; ++l) {
          ga[static_cast<std::size_t>(i) * k + l] +=
              g * pb[static_cast<std::size_t>(l) * n + j];
          gb[static_cast<std::size_t>(l) * n + j] +=
              g * pa[static_cast<std::size_t>(i) * k + l];
        }
      }
  });
  return out;
}

Tensor transpose2(const Tensor& a) {
  need_2d(a, "transpose2");
  Tape& tp = *a.tape();
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = tp.alloc({n, m});
  const double* pa = a.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      po[static_cast<std::size_t>(j) * m + i] =
          pa[static_cast<std::size_t>(i) * n + j];
  Tape* t = &tp;
  int ai = a.id(), oi = out.id();
  tp.record("transpose2", {ai}, oi, [t, ai, oi, m, n]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        ga[static_cast<std::size_t>(i) * n + j] +=
            go[static_cast<std::size_t>(j) * m + i];
  });
  return out;
}

Tensor sum_all(const Tensor& a) {
  Tape& tp = *a.tape();
  Tensor out = tp.alloc({1});
  const std::int64_t n = a.size();
  const double* pa = a.data();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += pa[i];
  out.data()[0] = acc;
  Tape* t = &tp;
  int ai = a.id(), oi = out.id();
  tp.record("sum_all", {ai}, oi, [t, ai, oi, n]() {
    const double g = t->pass_grad(oi)[0];
    auto& ga = t->grad_buf(ai);
    for (std::int64_t i = 0; i < n; ++i) ga[i] += g;
  });
  return out;
}

Tensor mean_all(const Tensor& a) {
  check(a.size() > 0, "mean_all: empty tensor");
  return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor rows_norm(const Tensor& a) {
  need_2d(a, "rows_norm");
  Tape& tp = *a.tape();
  const int n = a.dim(0), d = a.dim(1);
  Tensor out = tp.alloc({n, 1});
  const double* pa = a.data();
  double* po = out.data();
  for (int r = 0; r < n; ++r) {
    double acc = 0.0;
    for (int c = 0; c < d; ++c) {
      const double x = pa[static_cast<std::size_t>(r) * d + c];
      acc += x * x;
    }
    po[r] = std::sqrt(acc);
  }
  Tape* t = &tp;
  int ai = a.id(), oi = out.id();
  tp.record("rows_norm", {ai}, oi, [t, ai, oi, n, d]() {
    const auto& go = t->pass_grad(oi);
    auto& ga = t->grad_buf(ai);
    const double* pa = t->val(ai);
    const double* po = t->val(oi);
    for (int r = 0; r < n; ++r) {
      if (po[r] == 0.0) continue;  // subgradient 0 at the kink
      const double g = go[r] / po[r];
      for (int c = 0; c < d; ++c) {
        const std::size_t k = static_cast<std::size_t>(r) * d + c;
        ga[k] += g * pa[k];
      }
    }
  });
  return out;
}

Tensor softmax_masked(const Tensor& logits, const BoolMat& mask) {
  Tape& tp = *logits.tape();
  const int nd = logits.ndim();
  check(nd == 2 || nd == 3,
        strcat_("softmax_masked: expected [R,C] or [h,R,C], got ",
                shape_str(logits.shape())));
  const int h = nd == 3 ? logits.dim(0) : 1;
  const int rows = logits.dim(nd - 2), cols = logits.dim(nd - 1);
  check(mask.rows == rows && mask.cols == cols,
        strcat_("softmax_masked: mask ", mask.rows, "x", mask.cols,
                " does not match logits ", shape_str(logits.shape())));
  for (int r = 0; r < rows; ++r) {
    bool any = false;
    for (int c = 0; c < cols; ++c) any = any || mask.at(r, c);
    check(any, strcat_("softmax_masked: row ", r, " is fully masked"));
  }
  Tensor out = tp.alloc(logits.shape());
  const double* pl = logits.data();
  double* po = out.data();
  for (int s = 0; s < h; ++s)
    for (int r = 0; r < rows; ++r) {
      const std::size_t base =
          (static_cast<std::size_t>(s) * rows + r) * cols;
      double mx = -1e300;
      for (int c = 0; c < cols; ++c)
        if (mask.at(r, c) && pl[base + c] > mx) mx = pl[base + c];
      double z = 0.0;
      for (int c = 0; c < cols; ++c) {
        if (mask.at(r, c)) {
          po[base + c] = std::exp(pl[base + c] - mx);
          z += po[base + c];
        } else {
          po[base + c] = 0.0;
        }
      }
      for (int c = 0; c < cols; ++c) po[base + c] /= z;
    }
  Tape* t = &tp;
  int li = logits.id(), oi = out.id();
  tp.record("softmax_masked", {li}, oi, [t, li, oi, h, rows, cols]() {
    const auto& go = t->pass_grad(oi);
    auto& gl = t->grad_buf(li);
    const double* po = t->val(oi);
    for (int s = 0; s < h; ++s)
      for (int r = 0; r < rows; ++r) {
        const std::size_t base =
            (static_cast<std::size_t>(s) * rows + r) * cols;
        double dot = 0.0;
        for (int c = 0; c < cols; ++c) dot += go[base + c] * po[base + c];
        // masked entries have s = 0, so their gradient vanishes on its own
        for (int c = 0; c < cols; ++c)
          gl[base + c] += po[base + c] * (go[base + c] - dot);
      }
  });
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  need_2d(x, "layer_norm");
  Tape& tp = *x.tape();
  check(gain.tape() == &tp && bias.tape() == &tp,
        "layer_norm: operands on different tapes");
  const int n = x.dim(0), d = x.dim(1);
  check(static_cast<int>(gain.size()) == d &&
            static_cast<int>(bias.size()) == d,
        strcat_("layer_norm: gain/bias must have ", d, " entries"));
  Tensor out = tp.alloc({n, d});
  std::vector<double> xhat(static_cast<std::size_t>(n) * d);
  std::vector<double> inv(n);
  const double* px = x.data();
  const double* pg = gain.data();
  const double* pb = bias.data();
  double* po = out.data();
  for (int r = 0; r < n; ++r) {
    const double* row = px + static_cast<std::size_t>(r) * d;
    double mu = 0.0;
    for (int c = 0; c < d; ++c) mu += row[c];
    mu /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= d;
    const double iv = 1.0 / std::sqrt(var + eps);
    inv[r] = iv;
    for (int c = 0; c < d; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * d + c;
      xhat[k] = (row[c] - mu) * iv;
      po[k] = xhat[k] * pg[c] + pb[c];
    }
  }
  Tape* t = &tp;
  int xi = x.id(), gi = gain.id(), bi = bias.id(), oi = out.id();
  tp.record("layer_norm", {xi, gi, bi}, oi,
            [t, xi, gi, bi, oi, n, d, xhat = std::move(xhat),
             inv = std::move(inv)]() {
              const auto& go = t->pass_grad(oi);
              auto& gx = t->grad_buf(xi);
              auto& gg = t->grad_buf(gi);
              auto& gb = t->grad_buf(bi);
              const double* pg = t->val(gi);
              for (int r = 0; r < n; ++r) {
                const std::size_t base = static_cast<std::size_t>(r) * d;
                double mean_h = 0.0, mean_hx = 0.0;
                for (int c = 0; c < d; ++c) {
                  const double hc = go[base + c] * pg[c];
                  mean_h += hc;
                  mean_hx += hc * xhat[base + c];
                }
                mean_h /= d;
                mean_hx /= d;
                for (int c = 0; c < d; ++c) {
                  const double hc = go[base + c] * pg[c];
                  gx[base + c] +=
                      inv[r] * (hc - mean_h - xhat[base + c] * mean_hx);
                  gg[c] += go[base + c] * xhat[base + c];
                  gb[c] += go[base + c];
                }
              }
            });
  return out;
}

}  // namespace talksplat::ad
