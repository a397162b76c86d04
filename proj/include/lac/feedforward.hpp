#pragma once

#include <cstdint>
#include <optional>

#include "lac/ops.hpp"
#include "lac/runtime.hpp"
#include "lac/tensor.hpp"

namespace lac {

// Plain two-layer feed-forward: Dropout(Swish(x W1)) W2. No bias terms, so
// the parameter counting formulas below are exact.
struct FfnParams {
  Tensor w1;  // [d x d_ff]
  Tensor w2;  // [d_ff x d]

  static FfnParams init(int d, int d_ff, Rng& rng);
  void validate() const;
  int d() const { return w1.dim(0); }
  int d_ff() const { return w1.dim(1); }
};

// Low-rank factorized feed-forward: Dropout(Swish(x E1 D1)) E2 D2.
// Shape consistency is enforced here; the compression condition
// d_bn < min(d, d_ff) is a model-config concern (see compresses()).
struct LffnParams {
  Tensor e1;  // [d x d_bn]
  Tensor d1;  // [d_bn x d_ff]
  Tensor e2;  // [d_ff x d_bn]
  Tensor d2;  // [d_bn x d]

  static LffnParams init(int d, int d_ff, int d_bn, Rng& rng);
  void validate() const;
  bool compresses() const;  // d_bn < min(d, d_ff)
  int d() const { return e1.dim(0); }
  int d_ff() const { return d1.dim(1); }
  int d_bn() const { return e1.dim(1); }
};

Tensor ffn(const Tensor& x, const FfnParams& p, const Runtime& rt = {});
Tensor lffn(const Tensor& x, const LffnParams& p, const Runtime& rt = {});

// Closed-form parameter/flop accounting (flops are multiply-accumulates,
// matrix terms only). These match the allocated arrays exactly.
std::int64_t count_params_ffn(int d, int d_ff);
std::int64_t count_params_lffn(int d, int d_ff, int d_bn);
std::int64_t count_flops_ffn(int d, int d_ff, std::int64_t t);
std::int64_t count_flops_lffn(int d, int d_ff, int d_bn, std::int64_t t);

// The per-block feed-forward slot: exactly one of the two forms is engaged,
// chosen by the model variant.
struct FeedForward {
  std::optional<FfnParams> full;
  std::optional<LffnParams> low_rank;

  static FeedForward make_full(int d, int d_ff, Rng& rng);
  static FeedForward make_low_rank(int d, int d_ff, int d_bn, Rng& rng);
  std::int64_t param_count() const;
};

Tensor feed_forward(const Tensor& x, const FeedForward& p, const Runtime& rt = {});

}  // namespace lac
