#pragma once

#include <vector>

#include "lac/ops.hpp"
#include "lac/tensor.hpp"

namespace lac {

// Per-head projection weights plus the shared output projection.
// Heads are stored as H separate [d_m x d_k] matrices.
struct AttentionParams {
  std::vector<Tensor> wq, wk, wv;
  Tensor wo;  // [d_m x d_m]

  static AttentionParams init(int d_model, int heads, Rng& rng);

  int heads() const { return static_cast<int>(wq.size()); }
  int d_model() const { return wo.dim(0); }
  int d_head() const { return wq.front().dim(1); }
  void validate() const;  // d_head * heads == d_model, consistent shapes
};

// Dot-product multi-head self-attention. mask, when given, is a 0/1 [TxT]
// tensor; masked positions are excluded from the row softmax.
Tensor mhsa(const Tensor& x, const AttentionParams& p, const Tensor* mask = nullptr);

// Single-head linear attention: row-softmax(q/dk^(1/4)) * (col-softmax(k/dk^(1/4))^T * v),
// associated right-to-left so no TxT matrix ever exists.
Tensor linear_att(const Tensor& q, const Tensor& k, const Tensor& v);

// Multi-head linear self-attention. 0 < valid_len < T treats trailing rows as
// padding: they are excluded from both softmaxes and their output rows are 0.
Tensor mhlsa(const Tensor& x, const AttentionParams& p, int valid_len = 0);

// Self-attention under a strict causal mask (each position sees <= itself).
Tensor masked_mhsa(const Tensor& x, const AttentionParams& p);

// Queries from one sequence, keys/values from another (encoder-decoder).
Tensor cross_mha(const Tensor& queries_from, const Tensor& keys_values_from,
                 const AttentionParams& p);

}  // namespace lac
