#pragma once

#include <string>

#include "lac/ops.hpp"
#include "lac/runtime.hpp"
#include "lac/tensor.hpp"

namespace lac {

// Sinusoidal absolute positional encoding [T x d_e]; d_e must be even.
Tensor positional_encoding(int t, int d_e);

// Two 3x3 stride-2 valid convolutions followed by a linear embedding of the
// flattened channel x frequency axes, then the positional add.
struct FrontendParams {
  Tensor conv1;       // [c x 1 x 3 x 3]
  Tensor conv2;       // [c x c x 3 x 3]
  Tensor embed;       // [(c * f_sub) x d_e]
  Tensor embed_bias;  // [d_e]

  static FrontendParams init(int conv_channels, int n_mels, int d_e, Rng& rng);
  void validate() const;
  int channels() const { return conv1.dim(0); }
  int d_e() const { return embed.dim(1); }
};

// Output length after one 3-wide stride-2 valid conv: (n - 3) / 2 + 1.
int conv_output_length(int n, int stride);
// After both frontend convs; throws when t_raw < 7, naming the minimum.
int subsampled_length(int t_raw);
int subsampled_freq(int n_mels);
constexpr int kMinInputFrames = 7;

Tensor frontend(const Tensor& feats, const FrontendParams& p, const Runtime& rt = {});

// Feature matrix files. Binary format: magic "LACF", u32 frame count,
// u32 mel count, then f32 values row-major (little-endian throughout).
Tensor read_features_binary(const std::string& path);
void write_features_binary(const std::string& path, const Tensor& feats);
// One frame per line, comma-separated values.
Tensor read_features_csv(const std::string& path);

}  // namespace lac
