#pragma once

// Learned-parameter plumbing on top of the tape: parameter stores (one per
// optimizer group), Adam with bias correction, and the layer helpers used by
// the color MLP, encoders and transformer decoder. Parameters live outside
// tapes; bind() inserts them as leaves for one training step.

#include <iosfwd>
#include <string>
#include <vector>

#include "talksplat/rng.hpp"
#include "talksplat/tensor.hpp"

namespace talksplat::nn {

struct Param {
  std::string name;
  ad::Shape shape;
  std::vector<double> value;
  std::vector<double> m, v;  // Adam first/second moments
};

class ParamStore {
 public:
  explicit ParamStore(std::string group = "") : group_(std::move(group)) {}

  int add(std::string name, ad::Shape shape, std::vector<double> init);
  int add_zeros(std::string name, ad::Shape shape);
  // Uniform in ±sqrt(1/fan_in).
  int add_uniform(std::string name, ad::Shape shape, int fan_in, Rng& rng);

  Param& at(int i) { return params_[static_cast<std::size_t>(i)]; }
  const Param& at(int i) const { return params_[static_cast<std::size_t>(i)]; }
  int count() const { return static_cast<int>(params_.size()); }
  const std::string& group() const { return group_; }

  std::int64_t adam_t = 0;  // shared step count for bias correction

  std::size_t total_values() const;
  // Stable fingerprint of all parameter values (not moments).
  std::uint64_t value_hash() const;

  void serialize(std::ostream& os) const;
  void deserialize(std::istream& is);

 private:
  std::string group_;
  std::vector<Param> params_;
};

// Per-step leaf binding of a store onto a tape.
struct Bound {
  ad::Tape* tape = nullptr;
  std::vector<ad::Tensor> leaves;
  const ad::Tensor& operator[](int i) const {
    return leaves[static_cast<std::size_t>(i)];
  }
};

Bound bind(ad::Tape& tape, const ParamStore& store);

// Gradient collection after backward; index-aligned with the store.
std::vector<std::vector<double>> collect_grads(const Bound& bound);
void accumulate_grads(std::vector<std::vector<double>>& acc,
                      const Bound& bound);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(ParamStore& store,
               const std::vector<std::vector<double>>& grads, double lr,
               const AdamConfig& cfg = {});
void adam_step(ParamStore& store, const Bound& bound, double lr,
               const AdamConfig& cfg = {});

// lr(t) = lr0 * (lr_final/lr0)^(t/T): exponential interpolation from lr0 at
// t=0 to lr_final at t=T.
double exp_decay_lr(double lr0, double lr_final, std::int64_t t,
                    std::int64_t total);

// ---- layers ------------------------------------------------------------------

enum class Act { kTanh, kRelu, kNone };

struct Linear {
  int w = -1, b = -1;
  int in = 0, out = 0;
};

Linear make_linear(ParamStore& store, const std::string& prefix, int in,
                   int out, Rng& rng);
ad::Tensor apply(const Linear& lin, const Bound& bound, const ad::Tensor& x);

struct Mlp {
  std::vector<Linear> layers;
  Act hidden = Act::kTanh;
};

// dims = {in, h1, ..., out}; hidden activation between layers, final linear.
Mlp make_mlp(ParamStore& store, const std::string& prefix,
             const std::vector<int>& dims, Act hidden, Rng& rng);
ad::Tensor mlp_forward(const Mlp& mlp, const Bound& bound, const ad::Tensor& x);

// Pure multi-head scaled-dot-product attention (no learned projections):
// softmax_masked(q_h k_h^T / sqrt(d_h)) v_h per head, heads concatenated.
ad::Tensor multihead_attention(const ad::Tensor& q, const ad::Tensor& k,
                               const ad::Tensor& v, int heads,
                               const ad::BoolMat& mask);

// Pre-LN transformer encoder block: x += Wo·MHA(Wq·LN(x), Wk·LN(x), Wv·LN(x));
// x += FF(LN(x)) with the configured feed-forward activation.
struct AttentionBlock {
  Linear wq, wk, wv, wo, ff1, ff2;
  int ln1_g = -1, ln1_b = -1, ln2_g = -1, ln2_b = -1;
  int heads = 1;
  Act ff_act = Act::kRelu;
};

AttentionBlock make_attention_block(ParamStore& store,
                                    const std::string& prefix, int width,
                                    int heads, int ff_width, Rng& rng);
ad::Tensor apply_self(const AttentionBlock& blk, const Bound& bound,
                      const ad::Tensor& x, const ad::BoolMat& mask);
// Cross-attention form: queries from x, keys/values from memory.
ad::Tensor apply_cross(const AttentionBlock& blk, const Bound& bound,
                       const ad::Tensor& x, const ad::Tensor& memory,
                       const ad::BoolMat& mask);

// Sinusoidal positional encoding table [T, d]:
// pe[t, 2i] = sin(t / 10000^(2i/d)), pe[t, 2i+1] = cos(same argument).
std::vector<double> positional_encoding(int T, int d);

}  // namespace talksplat::nn
