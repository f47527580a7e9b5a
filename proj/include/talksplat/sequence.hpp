#pragma once

// Feature-to-animation pipeline: frequency interpolation, causal lip and
// wrinkle encoders, per-frame expression encoder, and a masked transformer
// decoder that turns motion features into per-frame vertex offsets.

#include <cstdint>
#include <vector>

#include "talksplat/nn.hpp"
#include "talksplat/tensor.hpp"

namespace talksplat::seq {

struct FeatureSequence {
  int n = 0, d = 0;
  double rate = 0.0;          // frames per second
  std::vector<double> data;   // [N,D]
  void validate() const;
};

// Resample by linear interpolation. Output length round(n * target/rate);
// frame t samples continuous source index t*(n-1)/(n_out-1), so both
// endpoints are copied exactly.
FeatureSequence frequency_interpolate(const FeatureSequence& in,
                                      double target_rate);

struct MaskPair {
  ad::BoolMat target;     // query t may attend keys <= t
  ad::BoolMat alignment;  // query t may attend key t only
};
MaskPair build_masks(int t);

struct SeqConfig {
  int audio_dim = 0;
  int expr_dim = 0;
  int lip_dim = 0;      // 3 * lip vertex count, pretraining head
  int wrinkle_dim = 0;  // pooled wrinkle target width, pretraining head
  int vertex_dim = 0;   // 3 * V, decoder output width
  int width = 64;       // lip/wrinkle/expression latent width
  int dec_width = 128;  // decoder width = lip width + expression latent width
  int heads = 4;
  int ff_width = 1024;
  void validate() const;
};

// Parameters sit in four optimizer groups: the three encoders are pretrained
// and then frozen; `motion` (expression-to-latent + decoder + mapper) learns
// in step (a) of alternating training.
struct SequenceModel {
  SeqConfig cfg;
  nn::ParamStore lip{"lip"}, wrinkle{"wrinkle"}, expr{"expr"},
      motion{"motion"};
  nn::Linear lip_embed;
  nn::AttentionBlock lip_block1, lip_block2;
  nn::Linear lip_head;
  nn::Linear wr_embed;
  nn::AttentionBlock wr_block1, wr_block2;
  nn::Linear wr_head;
  nn::Mlp expr_mlp;        // per frame, concat(c,w) -> expressions
  nn::Mlp expr_to_latent;  // motion group
  nn::Linear hist_embed;   // motion group, vertex offsets -> decoder width
  nn::AttentionBlock dec_block1, dec_block2;  // causal self-attention
  nn::AttentionBlock dec_cross;               // aligned cross-attention
  nn::Mlp vertex_mapper;
};

SequenceModel make_sequence_model(const SeqConfig& cfg, std::uint64_t seed);

// audio [T,audio_dim] -> lip content features [T,width], causal
ad::Tensor lip_forward(const SequenceModel& m, const nn::Bound& lip,
                       const ad::Tensor& audio);
// pretraining head: features -> lip vertex positions [T,lip_dim]
ad::Tensor lip_vertex_head(const SequenceModel& m, const nn::Bound& lip,
                           const ad::Tensor& c);
// concat(audio, c) -> wrinkle features [T,width], causal
ad::Tensor wrinkle_forward(const SequenceModel& m, const nn::Bound& wr,
                           const ad::Tensor& audio, const ad::Tensor& c);
ad::Tensor wrinkle_head(const SequenceModel& m, const nn::Bound& wr,
                        const ad::Tensor& w);
// per-frame expressions from cw = concat(c, w) [T,2*width]
ad::Tensor expr_forward(const SequenceModel& m, const nn::Bound& ex,
                        const ad::Tensor& cw);
// m^{1:T} = concat(c, expr_to_latent(e)) [T,dec_width]
ad::Tensor motion_features(const SequenceModel& m, const nn::Bound& motion,
                           const ad::Tensor& c, const ad::Tensor& e);
// offset history [T,vertex_dim] (row t = previous frame's offsets, row 0 =
// start token of zeros) + motion features -> vertex offsets [T,vertex_dim]
ad::Tensor decode_offsets(const SequenceModel& m, const nn::Bound& motion,
                          const ad::Tensor& hist, const ad::Tensor& mem,
                          const MaskPair& masks);

// sum over rows of the l2 norm of (gt - pred); the reconstruction loss shared
// by all four sequence objectives
ad::Tensor l2_rows_sum(const ad::Tensor& pred, const ad::Tensor& gt);

// teacher-forcing helper: rows shifted down one, zeros in row 0
std::vector<double> shift_rows_down(const std::vector<double>& x, int t, int d);

// ---- frozen-weight (tape-free) evaluation --------------------------------

std::vector<double> lip_features_plain(const SequenceModel& m,
                                       const std::vector<double>& audio, int t);
std::vector<double> wrinkle_features_plain(const SequenceModel& m,
                                           const std::vector<double>& audio,
                                           const std::vector<double>& c, int t);
// full frozen chain audio -> c -> w -> expressions [T,expr_dim]
std::vector<double> expressions_plain(const SequenceModel& m,
                                      const std::vector<double>& audio, int t);
std::vector<double> motion_features_plain(const SequenceModel& m,
                                          const std::vector<double>& audio,
                                          int t);
// step-by-step decoding with frozen weights; feeds its own predictions back
// as history. Bit-identical to a teacher-forced parallel pass over the same
// history.
std::vector<double> decode_autoregressive(const SequenceModel& m,
                                          const std::vector<double>& mem,
                                          int t);
// one parallel decoder pass with explicit history, no gradients
std::vector<double> decode_plain(const SequenceModel& m,
                                 const std::vector<double>& hist,
                                 const std::vector<double>& mem, int t);

}  // namespace talksplat::seq
