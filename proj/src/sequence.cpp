#include "talksplat/sequence.hpp"

#include <cmath>

#include "talksplat/common.hpp"

namespace talksplat::seq {

void FeatureSequence::validate() const {
  check(n >= 1 && d >= 1, "feature sequence must be at least 1x1");
  check(rate > 0, "feature rate must be positive");
  check(data.size() == static_cast<std::size_t>(n) * static_cast<std::size_t>(d),
        "feature data size mismatch");
}

FeatureSequence frequency_interpolate(const FeatureSequence& in,
                                      double target_rate) {
  in.validate();
  check(in.n >= 2, "frequency interpolation needs at least two frames");
  check(target_rate > 0, "target rate must be positive");
  FeatureSequence out;
  out.d = in.d;
  out.rate = target_rate;
  out.n = static_cast<int>(std::lround(in.n * target_rate / in.rate));
  check(out.n >= 1, "resampled sequence would be empty");
  out.data.resize(static_cast<std::size_t>(out.n) * static_cast<std::size_t>(in.d));
  for (int t = 0; t < out.n; ++t) {
    // endpoints anchored: t=0 -> source 0, t=n-1 -> source n-1
    const double s = out.n == 1 ? 0.0
                                : t * static_cast<double>(in.n - 1) / (out.n - 1);
    const int lo = std::min(in.n - 2, static_cast<int>(s));
    const double w = s - lo;
    for (int j = 0; j < in.d; ++j) {
      const auto a = in.data[static_cast<std::size_t>(lo) * in.d + static_cast<std::size_t>(j)];
      const auto b = in.data[(static_cast<std::size_t>(lo) + 1) * in.d + static_cast<std::size_t>(j)];
      out.data[static_cast<std::size_t>(t) * in.d + static_cast<std::size_t>(j)] =
          w == 0.0 ? a : (1.0 - w) * a + w * b;
    }
  }
  return out;
}

MaskPair build_masks(int t) {
  check(t >= 1, "masks need at least one frame");
  MaskPair mp;
  mp.target = ad::BoolMat(t, t, false);
  mp.alignment = ad::BoolMat(t, t, false);
  for (int i = 0; i < t; ++i) {
    mp.alignment.set(i, i, true);
    for (int j = 0; j <= i; ++j) mp.target.set(i, j, true);
  }
  return mp;
}

void SeqConfig::validate() const {
  check(audio_dim > 0 && expr_dim > 0 && vertex_dim > 0,
        "sequence config: audio/expression/vertex dims must be positive");
  check(lip_dim > 0 && wrinkle_dim > 0,
        "sequence config: pretraining head dims must be positive");
  check(width > 0 && dec_width == 2 * width,
        "sequence config: decoder width must be twice the feature width");
  check(heads > 0 && dec_width % heads == 0 && width % heads == 0,
        "sequence config: width not divisible by head count");
  check(ff_width > 0, "sequence config: feed-forward width must be positive");
}

SequenceModel make_sequence_model(const SeqConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SequenceModel m;
  m.cfg = cfg;
  const int w = cfg.width, dw = cfg.dec_width;

  Rng rl(derive_seed(seed, "lip"));
  m.lip_embed = nn::make_linear(m.lip, "embed", cfg.audio_dim, w, rl);
  m.lip_block1 = nn::make_attention_block(m.lip, "block1", w, cfg.heads, cfg.ff_width, rl);
  m.lip_block2 = nn::make_attention_block(m.lip, "block2", w, cfg.heads, cfg.ff_width, rl);
  m.lip_head = nn::make_linear(m.lip, "head", w, cfg.lip_dim, rl);

  Rng rw(derive_seed(seed, "wrinkle"));
  m.wr_embed = nn::make_linear(m.wrinkle, "embed", cfg.audio_dim + w, w, rw);
  m.wr_block1 = nn::make_attention_block(m.wrinkle, "block1", w, cfg.heads, cfg.ff_width, rw);
  m.wr_block2 = nn::make_attention_block(m.wrinkle, "block2", w, cfg.heads, cfg.ff_width, rw);
  m.wr_head = nn::make_linear(m.wrinkle, "head", w, cfg.wrinkle_dim, rw);

  Rng re(derive_seed(seed, "expr"));
  m.expr_mlp = nn::make_mlp(m.expr, "mlp", {2 * w, 128, 128, cfg.expr_dim},
                            nn::Act::kTanh, re);

  Rng rm(derive_seed(seed, "motion"));
  m.expr_to_latent = nn::make_mlp(m.motion, "e2l", {cfg.expr_dim, 128, w},
                                  nn::Act::kTanh, rm);
  m.hist_embed = nn::make_linear(m.motion, "hist", cfg.vertex_dim, dw, rm);
  m.dec_block1 = nn::make_attention_block(m.motion, "dec1", dw, cfg.heads, cfg.ff_width, rm);
  m.dec_block2 = nn::make_attention_block(m.motion, "dec2", dw, cfg.heads, cfg.ff_width, rm);
  m.dec_cross = nn::make_attention_block(m.motion, "cross", dw, cfg.heads, cfg.ff_width, rm);
  m.vertex_mapper = nn::make_mlp(m.motion, "mapper", {dw, 256, cfg.vertex_dim},
                                 nn::Act::kTanh, rm);
  return m;
}

namespace {

ad::Tensor with_pe(const ad::Tensor& x) {
  auto pe = x.tape()->constant(x.shape(),
                               nn::positional_encoding(x.dim(0), x.dim(1)));
  return ad::add(x, pe);
}

ad::Tensor encoder_stack(const nn::Linear& embed, const nn::AttentionBlock& b1,
                         const nn::AttentionBlock& b2, const nn::Bound& bound,
                         const ad::Tensor& x) {
  auto h = with_pe(nn::apply(embed, bound, x));
  const auto masks = build_masks(x.dim(0));
  h = nn::apply_self(b1, bound, h, masks.target);
  return nn::apply_self(b2, bound, h, masks.target);
}

}  // namespace

ad::Tensor lip_forward(const SequenceModel& m, const nn::Bound& lip,
                       const ad::Tensor& audio) {
  check(audio.ndim() == 2 && audio.dim(1) == m.cfg.audio_dim,
        "lip encoder: bad audio shape");
  return encoder_stack(m.lip_embed, m.lip_block1, m.lip_block2, lip, audio);
}

ad::Tensor lip_vertex_head(const SequenceModel& m, const nn::Bound& lip,
                           const ad::Tensor& c) {
  return nn::apply(m.lip_head, lip, c);
}

ad::Tensor wrinkle_forward(const SequenceModel& m, const nn::Bound& wr,
                           const ad::Tensor& audio, const ad::Tensor& c) {
  check(audio.ndim() == 2 && audio.dim(1) == m.cfg.audio_dim,
        "wrinkle encoder: bad audio shape");
  check(c.ndim() == 2 && c.dim(0) == audio.dim(0) && c.dim(1) == m.cfg.width,
        "wrinkle encoder: bad lip feature shape");
  return encoder_stack(m.wr_embed, m.wr_block1, m.wr_block2, wr,
                       ad::concat_cols({audio, c}));
}

ad::Tensor wrinkle_head(const SequenceModel& m, const nn::Bound& wr,
                        const ad::Tensor& w) {
  return nn::apply(m.wr_head, wr, w);
}

ad::Tensor expr_forward(const SequenceModel& m, const nn::Bound& ex,
                        const ad::Tensor& cw) {
  check(cw.ndim() == 2 && cw.dim(1) == 2 * m.cfg.width,
        "expression encoder: bad combined feature shape");
  return nn::mlp_forward(m.expr_mlp, ex, cw);
}

ad::Tensor motion_features(const SequenceModel& m, const nn::Bound& motion,
                           const ad::Tensor& c, const ad::Tensor& e) {
  check(c.ndim() == 2 && c.dim(1) == m.cfg.width, "motion: bad lip features");
  check(e.ndim() == 2 && e.dim(0) == c.dim(0) && e.dim(1) == m.cfg.expr_dim,
        "motion: bad expression shape");
  return ad::concat_cols({c, nn::mlp_forward(m.expr_to_latent, motion, e)});
}

ad::Tensor decode_offsets(const SequenceModel& m, const nn::Bound& motion,
                          const ad::Tensor& hist, const ad::Tensor& mem,
                          const MaskPair& masks) {
  const int t = hist.dim(0);
  check(hist.ndim() == 2 && hist.dim(1) == m.cfg.vertex_dim,
        "decoder: bad history shape");
  check(mem.ndim() == 2 && mem.dim(0) == t && mem.dim(1) == m.cfg.dec_width,
        "decoder: bad motion feature shape");
  check(masks.target.rows == t && masks.alignment.rows == t,
        "decoder: mask size does not match sequence length");
  auto x = with_pe(nn::apply(m.hist_embed, motion, hist));
  x = nn::apply_self(m.dec_block1, motion, x, masks.target);
  x = nn::apply_self(m.dec_block2, motion, x, masks.target);
  x = nn::apply_cross(m.dec_cross, motion, x, with_pe(mem), masks.alignment);
  return nn::mlp_forward(m.vertex_mapper, motion, x);
}

ad::Tensor l2_rows_sum(const ad::Tensor& pred, const ad::Tensor& gt) {
  return ad::sum_all(ad::rows_norm(ad::sub(gt, pred)));
}

std::vector<double> shift_rows_down(const std::vector<double>& x, int t, int d) {
  check(x.size() == static_cast<std::size_t>(t) * static_cast<std::size_t>(d),
        "shift_rows_down: size mismatch");
  std::vector<double> out(x.size(), 0.0);
  if (t > 1)
    std::copy(x.begin(), x.end() - d, out.begin() + d);
  return out;
}

std::vector<double> lip_features_plain(const SequenceModel& m,
                                       const std::vector<double>& audio, int t) {
  ad::Tape tape;
  auto bound = nn::bind(tape, m.lip);
  return lip_forward(m, bound, tape.constant({t, m.cfg.audio_dim}, audio)).values();
}

std::vector<double> wrinkle_features_plain(const SequenceModel& m,
                                           const std::vector<double>& audio,
                                           const std::vector<double>& c, int t) {
  ad::Tape tape;
  auto bound = nn::bind(tape, m.wrinkle);
  return wrinkle_forward(m, bound, tape.constant({t, m.cfg.audio_dim}, audio),
                         tape.constant({t, m.cfg.width}, c))
      .values();
}

std::vector<double> expressions_plain(const SequenceModel& m,
                                      const std::vector<double>& audio, int t) {
  const auto c = lip_features_plain(m, audio, t);
  const auto w = wrinkle_features_plain(m, audio, c, t);
  ad::Tape tape;
  auto bound = nn::bind(tape, m.expr);
  auto cw = ad::concat_cols({tape.constant({t, m.cfg.width}, c),
                             tape.constant({t, m.cfg.width}, w)});
  return expr_forward(m, bound, cw).values();
}

std::vector<double> motion_features_plain(const SequenceModel& m,
                                          const std::vector<double>& audio,
                                          int t) {
  const auto c = lip_features_plain(m, audio, t);
  const auto e = expressions_plain(m, audio, t);
  ad::Tape tape;
  auto bound = nn::bind(tape, m.motion);
  return motion_features(m, bound, tape.constant({t, m.cfg.width}, c),
                         tape.constant({t, m.cfg.expr_dim}, e))
      .values();
}

std::vector<double> decode_plain(const SequenceModel& m,
                                 const std::vector<double>& hist,
                                 const std::vector<double>& mem, int t) {
  ad::Tape tape;
  auto bound = nn::bind(tape, m.motion);
  return decode_offsets(m, bound, tape.constant({t, m.cfg.vertex_dim}, hist),
                        tape.constant({t, m.cfg.dec_width}, mem),
                        build_masks(t))
      .values();
}

std::vector<double> decode_autoregressive(const SequenceModel& m,
                                          const std::vector<double>& mem,
                                          int t) {
  check(mem.size() == static_cast<std::size_t>(t) * static_cast<std::size_t>(m.cfg.dec_width),
        "decode: motion feature size mismatch");
  const auto vd = static_cast<std::size_t>(m.cfg.vertex_dim);
  std::vector<double> hist(vd, 0.0);  // start token
  std::vector<double> out;
  for (int step = 0; step < t; ++step) {
    const std::vector<double> mem_prefix(
        mem.begin(), mem.begin() + static_cast<std::ptrdiff_t>((step + 1) * m.cfg.dec_width));
    const auto pred = decode_plain(m, hist, mem_prefix, step + 1);
    // keep row `step`, feed it back as the next history row
    out.insert(out.end(), pred.end() - static_cast<std::ptrdiff_t>(vd), pred.end());
    hist.insert(hist.end(), out.end() - static_cast<std::ptrdiff_t>(vd), out.end());
  }
  return out;
}

}  // namespace talksplat::seq
