#pragma once

#include "lac/attention.hpp"
#include "lac/feedforward.hpp"
#include "lac/runtime.hpp"

namespace lac {

// Transformer decoder block: causal self-attention, cross-attention over the
// encoder output, and one full-step feed-forward (low-rank in the LAC
// variants), each residual. Attention here is always dot-product MHA.
struct DecoderBlockParams {
  Tensor ln_self_gain, ln_self_bias;
  AttentionParams self_att;
  Tensor ln_cross_gain, ln_cross_bias;
  AttentionParams cross_att;
  Tensor ln_ffn_gain, ln_ffn_bias;
  FeedForward ffn;
  bool prenorm = true;

  static DecoderBlockParams init(int d, int d_ff, int d_bn, int heads, bool low_rank_ffn,
                                 bool prenorm, Rng& rng);
};

Tensor decoder_block(const Tensor& y, const Tensor& enc, const DecoderBlockParams& p,
                     const Runtime& rt = {});

// Token embedding table and the (untied) output vocabulary projection.
struct TokenEmbedding {
  Tensor table;     // [V x d_m]
  Tensor out_proj;  // [d_m x V]

  static TokenEmbedding init(int vocab, int d_m, Rng& rng);
  int vocab() const { return table.dim(0); }
};

}  // namespace lac
