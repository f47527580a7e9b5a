#include "talksplat/nn.hpp"

#include <cmath>

#include "talksplat/bytesio.hpp"

namespace talksplat::nn {

int ParamStore::add(std::string name, ad::Shape shape,
                    std::vector<double> init) {
  check(static_cast<std::int64_t>(init.size()) == ad::numel(shape),
        strcat_("ParamStore::add(", name, "): ", init.size(),
                " values for shape ", ad::shape_str(shape)));
  Param p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.value = std::move(init);
  p.m.assign(p.value.size(), 0.0);
  p.v.assign(p.value.size(), 0.0);
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

int ParamStore::add_zeros(std::string name, ad::Shape shape) {
  std::vector<double> z(static_cast<std::size_t>(ad::numel(shape)), 0.0);
  return add(std::move(name), std::move(shape), std::move(z));
}

int ParamStore::add_uniform(std::string name, ad::Shape shape, int fan_in,
                            Rng& rng) {
  check(fan_in > 0, "ParamStore::add_uniform: fan_in must be positive");
  const double bound = std::sqrt(1.0 / fan_in);
  std::vector<double> v(static_cast<std::size_t>(ad::numel(shape)));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return add(std::move(name), std::move(shape), std::move(v));
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::uint64_t ParamStore::value_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : params_) {
    h = fnv1a(p.name.data(), p.name.size(), h);
    h = fnv1a(p.value.data(), p.value.size() * sizeof(double), h);
  }
  return h;
}

void ParamStore::serialize(std::ostream& os) const {
  namespace io = bytesio;
  io::write_string(os, group_);
  io::write_i64(os, adam_t);
  io::write_u64(os, params_.size());
  for (const auto& p : params_) {
    io::write_string(os, p.name);
    io::write_i32_vec(os, p.shape);
    io::write_f64_vec(os, p.value);
    io::write_f64_vec(os, p.m);
    io::write_f64_vec(os, p.v);
  }
}

void ParamStore::deserialize(std::istream& is) {
  namespace io = bytesio;
  group_ = io::read_string(is);
  adam_t = io::read_i64(is);
  const auto n = io::read_u64(is);
  params_.clear();
  params_.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Param p;
    p.name = io::read_string(is);
    p.shape = io::read_i32_vec(is);
    p.value = io::read_f64_vec(is);
    p.m = io::read_f64_vec(is);
    p.v = io::read_f64_vec(is);
    check(static_cast<std::int64_t>(p.value.size()) == ad::numel(p.shape) &&
              p.m.size() == p.value.size() && p.v.size() == p.value.size(),
          strcat_("ParamStore::deserialize: corrupt entry ", p.name));
    params_.push_back(std::move(p));
  }
}

Bound bind(ad::Tape& tape, const ParamStore& store) {
  Bound b;
  b.tape = &tape;
  b.leaves.reserve(static_cast<std::size_t>(store.count()));
  for (int i = 0; i < store.count(); ++i) {
    const Param& p = store.at(i);
    b.leaves.push_back(tape.input(p.shape, p.value));
  }
  return b;
}

std::vector<std::vector<double>> collect_grads(const Bound& bound) {
  std::vector<std::vector<double>> g;
  g.reserve(bound.leaves.size());
  for (const auto& t : bound.leaves) g.push_back(t.grad());
  return g;
}

void accumulate_grads(std::vector<std::vector<double>>& acc,
                      const Bound& bound) {
  if (acc.empty()) {
    acc = collect_grads(bound);
    return;
  }
  check(acc.size() == bound.leaves.size(),
        "accumulate_grads: store layout changed between steps");
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const auto gi = bound.leaves[i].grad();
    check(gi.size() == acc[i].size(), "accumulate_grads: shape changed");
    for (std::size_t j = 0; j < gi.size(); ++j) acc[i][j] += gi[j];
  }
}

void adam_step(ParamStore& store,
               const std::vector<std::vector<double>>& grads, double lr,
               const AdamConfig& cfg) {
  check(static_cast<int>(grads.size()) == store.count(),
        "adam_step: gradient count does not match parameter count");
  store.adam_t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(store.adam_t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(store.adam_t));
  for (int i = 0; i < store.count(); ++i) {
    Param& p = store.at(i);
    const auto& g = grads[static_cast<std::size_t>(i)];
    check(g.size() == p.value.size(),
          strcat_("adam_step: gradient size mismatch for ", p.name));
    for (std::size_t j = 0; j < g.size(); ++j) {
      p.m[j] = cfg.beta1 * p.m[j] + (1.0 - cfg.beta1) * g[j];
      p.v[j] = cfg.beta2 * p.v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = p.m[j] / bc1;
      const double vhat = p.v[j] / bc2;
      p.value[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void adam_step(ParamStore& store, const Bound& bound, double lr,
               const AdamConfig& cfg) {
  adam_step(store, collect_grads(bound), lr, cfg);
}

double exp_decay_lr(double lr0, double lr_final, std::int64_t t,
                    std::int64_t total) {
  check(lr0 > 0 && lr_final > 0, "exp_decay_lr: rates must be positive");
  if (total <= 0) return lr0;
  const double frac = static_cast<double>(t) / static_cast<double>(total);
  return lr0 * std::pow(lr_final / lr0, frac);
}

// ---- layers ------------------------------------------------------------------

Linear make_linear(ParamStore& store, const std::string& prefix, int in,
                   int out, Rng& rng) {
  Linear l;
  l.in = in;
  l.out = out;
  l.w = store.add_uniform(prefix + ".w", {in, out}, in, rng);
  l.b = store.add_zeros(prefix + ".b", {out});
  return l;
}

ad::Tensor apply(const Linear& lin, const Bound& bound, const ad::Tensor& x) {
  return ad::add_row(ad::matmul(x, bound[lin.w]), bound[lin.b]);
}

Mlp make_mlp(ParamStore& store, const std::string& prefix,
             const std::vector<int>& dims, Act hidden, Rng& rng) {
  check(dims.size() >= 2, "make_mlp: need at least input and output widths");
  Mlp m;
  m.hidden = hidden;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    m.layers.push_back(make_linear(store,
                                   strcat_(prefix, ".l", i),
                                   dims[i], dims[i + 1], rng));
  return m;
}

namespace {

ad::Tensor activate(const ad::Tensor& x, Act act) {
  switch (act) {
    case Act::kTanh:
      return ad::tanh(x);
    case Act::kRelu:
      return ad::relu(x);
    case Act::kNone:
      return x;
  }
  fail("activate: unknown activation");
}

}  // namespace

ad::Tensor mlp_forward(const Mlp& mlp, const Bound& bound,
                       const ad::Tensor& x) {
  ad::Tensor h = x;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    h = apply(mlp.layers[i], bound, h);
    if (i + 1 < mlp.layers.size()) h = activate(h, mlp.hidden);
  }
  return h;
}

ad::Tensor multihead_attention(const ad::Tensor& q, const ad::Tensor& k,
                               const ad::Tensor& v, int heads,
                               const ad::BoolMat& mask) {
  check(q.ndim() == 2 && k.ndim() == 2 && v.ndim() == 2,
        "multihead_attention: q,k,v must be [T,d]");
  const int d = q.dim(1);
  check(k.dim(1) == d && v.dim(1) == d,
        "multihead_attention: q,k,v widths differ");
  check(heads > 0 && d % heads == 0,
        strcat_("multihead_attention: width ", d, " not divisible by ", heads,
                " heads"));
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ad::Tensor> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    auto qh = ad::slice_cols(q, h * dh, (h + 1) * dh);
    auto kh = ad::slice_cols(k, h * dh, (h + 1) * dh);
    auto vh = ad::slice_cols(v, h * dh, (h + 1) * dh);
    auto scores = ad::mul_scalar(ad::matmul(qh, ad::transpose2(kh)), scale);
    auto attn = ad::softmax_masked(scores, mask);
    outs.push_back(ad::matmul(attn, vh));
  }
  return heads == 1 ? outs[0] : ad::concat_cols(outs);
}

AttentionBlock make_attention_block(ParamStore& store,
                                    const std::string& prefix, int width,
                                    int heads, int ff_width, Rng& rng) {
  AttentionBlock b;
  b.heads = heads;
  b.wq = make_linear(store, prefix + ".wq", width, width, rng);
  b.wk = make_linear(store, prefix + ".wk", width, width, rng);
  b.wv = make_linear(store, prefix + ".wv", width, width, rng);
  b.wo = make_linear(store, prefix + ".wo", width, width, rng);
  b.ff1 = make_linear(store, prefix + ".ff1", width, ff_width, rng);
  b.ff2 = make_linear(store, prefix + ".ff2", ff_width, width, rng);
  b.ln1_g = store.add(prefix + ".ln1.g", {width},
                      std::vector<double>(static_cast<std::size_t>(width), 1.0));
  b.ln1_b = store.add_zeros(prefix + ".ln1.b", {width});
  b.ln2_g = store.add(prefix + ".ln2.g", {width},
                      std::vector<double>(static_cast<std::size_t>(width), 1.0));
  b.ln2_b = store.add_zeros(prefix + ".ln2.b", {width});
  return b;
}

namespace {

ad::Tensor block_core(const AttentionBlock& blk, const Bound& bound,
                      const ad::Tensor& x, const ad::Tensor& kv_source,
                      const ad::BoolMat& mask) {
  auto xq = ad::layer_norm(x, bound[blk.ln1_g], bound[blk.ln1_b]);
  auto attn = multihead_attention(apply(blk.wq, bound, xq),
                                  apply(blk.wk, bound, kv_source),
                                  apply(blk.wv, bound, kv_source), blk.heads,
                                  mask);
  auto h = ad::add(x, apply(blk.wo, bound, attn));
  auto hn = ad::layer_norm(h, bound[blk.ln2_g], bound[blk.ln2_b]);
  ad::Tensor ff = apply(blk.ff1, bound, hn);
  ff = blk.ff_act == Act::kRelu ? ad::relu(ff) : ad::tanh(ff);
  return ad::add(h, apply(blk.ff2, bound, ff));
}

}  // namespace

ad::Tensor apply_self(const AttentionBlock& blk, const Bound& bound,
                      const ad::Tensor& x, const ad::BoolMat& mask) {
  auto xn = ad::layer_norm(x, bound[blk.ln1_g], bound[blk.ln1_b]);
  auto attn = multihead_attention(apply(blk.wq, bound, xn),
                                  apply(blk.wk, bound, xn),
                                  apply(blk.wv, bound, xn), blk.heads, mask);
  auto h = ad::add(x, apply(blk.wo, bound, attn));
  auto hn = ad::layer_norm(h, bound[blk.ln2_g], bound[blk.ln2_b]);
  ad::Tensor ff = apply(blk.ff1, bound, hn);
  ff = blk.ff_act == Act::kRelu ? ad::relu(ff) : ad::tanh(ff);
  return ad::add(h, apply(blk.ff2, bound, ff));
}

ad::Tensor apply_cross(const AttentionBlock& blk, const Bound& bound,
                       const ad::Tensor& x, const ad::Tensor& memory,
                       const ad::BoolMat& mask) {
  return block_core(blk, bound, x, memory, mask);
}

std::vector<double> positional_encoding(int T, int d) {
  std::vector<double> pe(static_cast<std::size_t>(T) * d, 0.0);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i * 2 < d; ++i) {
      const double arg =
          t / std::pow(10000.0, (2.0 * i) / static_cast<double>(d));
      pe[static_cast<std::size_t>(t) * d + 2 * i] = std::sin(arg);
      if (2 * i + 1 < d)
        pe[static_cast<std::size_t>(t) * d + 2 * i + 1] = std::cos(arg);
    }
  return pe;
}

}  // namespace talksplat::nn
