#pragma once

#include "lac/attention.hpp"
#include "lac/feedforward.hpp"
#include "lac/runtime.hpp"

namespace lac {

// Conformer convolution module weights. Batchnorm running statistics are kept
// here (initialized to mean 0 / var 1); batch statistics are used instead when
// Runtime::batchnorm_batch_stats is set.
struct ConvModuleParams {
  Tensor ln_gain, ln_bias;  // pre-norm applied by the owning block
  Tensor pointwise_in;      // [d x 2d]
  Tensor depthwise;         // [d x k_conv], k_conv odd
  Tensor bn_mean, bn_var, bn_gain, bn_bias;
  Tensor pointwise_out;     // [d x d]

  static ConvModuleParams init(int d, int k_conv, Rng& rng);
  void validate() const;
  int d() const { return pointwise_out.dim(0); }
  int k_conv() const { return depthwise.dim(1); }
};

// pointwise(d->2d) -> GLU -> depthwise SAME -> batchnorm -> swish -> pointwise(d->d)
Tensor conv_module(const Tensor& x, const ConvModuleParams& p, const Runtime& rt = {});

// One encoder block: half-step FFN, attention, convolution module, half-step
// FFN, final layernorm, all residual. linear_attention selects MHLSA vs MHSA;
// prenorm inserts a layernorm before each submodule.
struct BlockParams {
  Tensor ln_ffn_a_gain, ln_ffn_a_bias;
  FeedForward ffn_a;
  Tensor ln_att_gain, ln_att_bias;
  AttentionParams att;
  ConvModuleParams conv;
  Tensor ln_ffn_b_gain, ln_ffn_b_bias;
  FeedForward ffn_b;
  Tensor ln_final_gain, ln_final_bias;
  bool linear_attention = true;
  bool prenorm = true;

  static BlockParams init(int d, int d_ff, int d_bn, int heads, int k_conv,
                          bool linear_attention, bool low_rank_ffn, bool prenorm,
                          Rng& rng);
};

Tensor encoder_block(const Tensor& x, const BlockParams& p, const Runtime& rt = {});

}  // namespace lac
