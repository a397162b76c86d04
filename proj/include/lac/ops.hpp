#pragma once

#include <vector>

#include "lac/tape.hpp"
#include "lac/tensor.hpp"

namespace lac {

// Dense primitives. All functions return fresh tensors, never mutate inputs,
// and record themselves on the current Tape when any input is tracked.
// Outputs are checked finite; NaN/Inf raises instead of propagating.

// [MxK] x [KxN] -> [MxN]. Summation over K is fixed left-to-right, so results
// are bit-reproducible run to run.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& x, double s);

// [Txd] + [d], broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor swish(const Tensor& x);

// [Tx2c] -> [Txc]: first half gated by sigmoid of second half.
Tensor glu(const Tensor& x);

// Max-subtracted, numerically stable; rows (cols) sum to 1.
Tensor softmax_rows(const Tensor& x);
Tensor softmax_cols(const Tensor& x);
// mask is a same-shape 0/1 tensor; masked entries get weight exactly 0.
Tensor softmax_rows_masked(const Tensor& x, const Tensor& mask);
Tensor log_softmax_rows(const Tensor& x);

// Per-row normalization of [Txd] with affine [d] params; epsilon 1e-5.
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias);

// Inference-mode batchnorm of [Txc] with supplied per-channel statistics.
Tensor batchnorm_infer(const Tensor& x, const Tensor& mean, const Tensor& var,
                       const Tensor& gain, const Tensor& bias);
// Batch-statistics variant (statistics computed from x itself).
Tensor batchnorm_train(const Tensor& x, const Tensor& gain, const Tensor& bias);

// x: [c_in x H x W], kernels: [c_out x c_in x 3 x 3], valid padding.
Tensor conv2d(const Tensor& x, const Tensor& kernels, int stride);

// x: [Txc], kernel: [cxk] with k odd; zero SAME padding preserves T.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel);

// [Txc_in] x [c_in x c_out]; a named alias of matmul for the conv module.
Tensor pointwise_conv(const Tensor& x, const Tensor& w);

// Same data, new shape (element counts must agree).
Tensor reshape(const Tensor& x, std::vector<int> new_shape);

// [c x T x F] -> [T x (c*F)]: per time step, channels-major flatten.
Tensor flatten_time(const Tensor& x);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, int start, int len);
Tensor slice_rows(const Tensor& x, int start, int len);
// Places x's rows at row_offset inside a zero [total_rows x cols] tensor.
Tensor pad_rows(const Tensor& x, int total_rows, int row_offset);

// Gathers rows of table [Vxd] at the given ids.
Tensor embed_rows(const Tensor& table, const std::vector<int>& ids);

Tensor sum_all(const Tensor& x);  // -> scalar [1]

// -sum_t log_probs[t][targets[t]] -> scalar [1].
Tensor sequence_nll(const Tensor& log_probs, const std::vector<int>& targets);

// Inverted dropout (train mode); eval mode is the caller not calling this.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// Lower-triangular-inclusive [TxT] of ones; constant, never tracked.
Tensor causal_mask(int t);

}  // namespace lac
