#include "lac/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace lac {

DecoderBlockParams DecoderBlockParams::init(int d, int d_ff, int d_bn, int heads,
                                            bool low_rank_ffn, bool prenorm, Rng& rng) {
  DecoderBlockParams p;
  p.ln_self_gain = Tensor::full({d}, 1.0);
  p.ln_self_bias = Tensor::zeros({d});
  p.self_att = AttentionParams::init(d, heads, rng);
  p.ln_cross_gain = Tensor::full({d}, 1.0);
  p.ln_cross_bias = Tensor::zeros({d});
  p.cross_att = AttentionParams::init(d, heads, rng);
  p.ln_ffn_gain = Tensor::full({d}, 1.0);
  p.ln_ffn_bias = Tensor::zeros({d});
  p.ffn = low_rank_ffn ? FeedForward::make_low_rank(d, d_ff, d_bn, rng)
                       : FeedForward::make_full(d, d_ff, rng);
  p.prenorm = prenorm;
  return p;
}

Tensor decoder_block(const Tensor& y, const Tensor& enc, const DecoderBlockParams& p,
                     const Runtime& rt) {
  if (y.rank() != 2 || enc.rank() != 2 || y.dim(1) != enc.dim(1))
    throw std::invalid_argument("decoder_block: width mismatch between decoder input " +
                                y.shape_str() + " and encoder output " + enc.shape_str());
  auto pre = [&](const Tensor& h, const Tensor& gain, const Tensor& bias) {
    return p.prenorm ? layernorm(h, gain, bias) : h;
  };
  Tensor y1 = add(y, masked_mhsa(pre(y, p.ln_self_gain, p.ln_self_bias), p.self_att));
  Tensor y2 =
      add(y1, cross_mha(pre(y1, p.ln_cross_gain, p.ln_cross_bias), enc, p.cross_att));
  Tensor y3 = add(y2, feed_forward(pre(y2, p.ln_ffn_gain, p.ln_ffn_bias), p.ffn, rt));
  return y3;
}

TokenEmbedding TokenEmbedding::init(int vocab, int d_m, Rng& rng) {
  if (vocab < 2) throw std::invalid_argument("TokenEmbedding: need vocab >= 2");
  const double s = 1.0 / std::sqrt(static_cast<double>(d_m));
  TokenEmbedding e;
  e.table = Tensor::uniform({vocab, d_m}, rng, -s, s);
  e.out_proj = Tensor::uniform({d_m, vocab}, rng, -s, s);
  return e;
}

}  // namespace lac
