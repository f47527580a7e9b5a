#pragma once

// Reverse-mode autodiff on dense 64-bit float tensors.
//
// A Tape owns nodes (value + gradient buffers) and a record list; operations
// run eagerly (define-by-run) and push a backward closure. backward(loss)
// replays records in reverse using pass-local gradient buffers, then folds the
// pass into the persistent per-node gradients, so repeated backward calls
// accumulate (zero_grad resets). Learnable parameters live outside tapes and
// are inserted as leaves each step.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "talksplat/common.hpp"

namespace talksplat::ad {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense boolean matrix; entry true means "allowed" (e.g. query may attend to
// key) wherever a mask is consumed.
struct BoolMat {
  int rows = 0, cols = 0;
  std::vector<std::uint8_t> v;

  BoolMat() = default;
  BoolMat(int r, int c, bool fill = false)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill ? 1 : 0) {}
  std::uint8_t at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * cols + c];
  }
  void set(int r, int c, bool x) {
    v[static_cast<std::size_t>(r) * cols + c] = x ? 1 : 0;
  }
  bool operator==(const BoolMat& o) const {
    return rows == o.rows && cols == o.cols && v == o.v;
  }
};

class Tape;

// Lightweight handle to a tape node. Valid only while its Tape is alive.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool defined() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

  const Shape& shape() const;
  int ndim() const { return static_cast<int>(shape().size()); }
  int dim(int i) const { return shape()[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return numel(shape()); }

  double* data();
  const double* data() const;
  std::vector<double> values() const;

  // Persistent gradient (after backward); zeros if this node was never
  // reached.
  std::vector<double> grad() const;

  double value() const;  // scalar convenience

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Tensor input(Shape shape);  // zero-filled
  Tensor input(Shape shape, const double* src);
  Tensor input(Shape shape, std::vector<double> v);
  Tensor constant(Shape shape, std::vector<double> v) {
    return input(std::move(shape), std::move(v));
  }
  Tensor scalar(double v) { return input({1}, std::vector<double>{v}); }

  // Op plumbing: allocate an output node, then register the backward closure.
  // Closures must re-fetch buffers through the tape (node storage may move as
  // the tape grows) and are skipped when the output received no gradient.
  Tensor alloc(Shape shape);
  void record(const char* kind, std::vector<int> inputs, int output,
              std::function<void()> backward);

  const Shape& shape_of(int id) const { return nodes_[id].shape; }
  double* val(int id) { return nodes_[id].val.data(); }
  const double* val(int id) const { return nodes_[id].val.data(); }
  std::int64_t size_of(int id) const {
    return static_cast<std::int64_t>(nodes_[id].val.size());
  }

  // Pass-local gradient access; only valid inside backward closures.
  std::vector<double>& grad_buf(int id);        // get-or-create (zeroed)
  const std::vector<double>& pass_grad(int id); // must already exist

  void backward(const Tensor& loss);
  void zero_grad();

  std::vector<double> grad_of(int id) const;  // persistent, zeros if untouched

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_records() const { return records_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> val;
    std::vector<double> grad;  // persistent accumulation
  };
  struct Record {
    const char* kind;
    std::vector<int> inputs;
    int output;
    std::function<void()> backward;
  };

  std::vector<Node> nodes_;
  std::vector<Record> records_;
  std::vector<std::vector<double>> pass_;  // per-node pass-local gradients
  bool in_pass_ = false;

  friend class Tensor;
};

namespace detail {
Tape& same_tape(const Tensor& a, const Tensor& b, const char* op);
void need_same_shape(const Tensor& a, const Tensor& b, const char* op);
}  // namespace detail

// ---- elementwise / scalar ---------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
// sqrt with zero gradient exactly at x == 0 (hinge/norm losses sit there).
Tensor sqrt_safe(const Tensor& a);

// ---- shape / gather ---------------------------------------------------------
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);
Tensor broadcast_row(const Tensor& v, int n);   // [D] or [1,D] -> [n,D]
Tensor add_row(const Tensor& a, const Tensor& b);   // [N,D] + [D]
Tensor mul_cols(const Tensor& a, const Tensor& s);  // [N,D] * [N] per row

// ---- linear algebra / reductions -------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k]x[k,n]
Tensor transpose2(const Tensor& a);               // [m,n] -> [n,m]
Tensor sum_all(const Tensor& a);                  // -> [1]
Tensor mean_all(const Tensor& a);                 // -> [1]
Tensor rows_norm(const Tensor& a);                // [N,D] -> [N,1], safe at 0

// Masked softmax over the last axis of [T,T] or [h,T,T]; mask is [T,T], true
// = keep. Masked entries are exactly 0 in the output; a fully masked row is an
// error.
Tensor softmax_masked(const Tensor& logits, const BoolMat& mask);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// ---- rowwise 3D geometry (declared here, defined in tensor_geom.cpp) --------
Tensor cross3(const Tensor& a, const Tensor& b);      // [N,3]x[N,3]
Tensor normalize_rows(const Tensor& a);               // [N,D], unit rows
Tensor bmm3(const Tensor& a, const Tensor& b);        // [N,9]x[N,9] row-major
Tensor bmv3(const Tensor& m, const Tensor& v);        // [N,9]x[N,3]
Tensor transpose3(const Tensor& m);                   // [N,9]
Tensor colscale3(const Tensor& m, const Tensor& s);   // cols of 3x3 * s[N,3]
Tensor mat3_from_cols(const Tensor& c0, const Tensor& c1, const Tensor& c2);
Tensor quat_to_rotmat(const Tensor& q);               // [N,4] unit wxyz

// ---- image ops on [C,H,W] (defined in tensor_image.cpp) ---------------------
enum class Pad { kZero, kReflect };

// Fixed (non-learned) convolution kernel bank, out_c x in_c x kh x kw.
struct ConvKernel {
  int out_c = 0, in_c = 0, kh = 0, kw = 0;
  std::vector<double> w;
};

Tensor conv2d_fixed(const Tensor& x, const ConvKernel& k, Pad pad);
// Same 2D window applied to every channel independently.
Tensor conv2d_depthwise_fixed(const Tensor& x, int kh, int kw,
                              const std::vector<double>& w, Pad pad);
Tensor avg_pool2(const Tensor& x);                     // 2x2, stride 2
Tensor resize_bilinear(const Tensor& x, int oh, int ow);
Tensor chw_from_hwc(const Tensor& x);                  // [H,W,3] -> [3,H,W]
Tensor extract_patch(const Tensor& x, int y0, int x0, int size);

// ---- operator sugar ----------------------------------------------------------
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace talksplat::ad
