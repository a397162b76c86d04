#include "lac/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lac {

ConvModuleParams ConvModuleParams::init(int d, int k_conv, Rng& rng) {
  if (d < 2) throw std::invalid_argument("ConvModuleParams: need d >= 2");
  if (k_conv < 1 || k_conv % 2 == 0)
    throw std::invalid_argument("ConvModuleParams: depthwise kernel width must be odd, have " +
                                std::to_string(k_conv));
  const double s_in = 1.0 / std::sqrt(static_cast<double>(d));
  const double s_dw = 1.0 / std::sqrt(static_cast<double>(k_conv));
  ConvModuleParams p;
  p.ln_gain = Tensor::full({d}, 1.0);
  p.ln_bias = Tensor::zeros({d});
  p.pointwise_in = Tensor::uniform({d, 2 * d}, rng, -s_in, s_in);
  p.depthwise = Tensor::uniform({d, k_conv}, rng, -s_dw, s_dw);
  p.bn_mean = Tensor::zeros({d});
  p.bn_var = Tensor::full({d}, 1.0);
  p.bn_gain = Tensor::full({d}, 1.0);
  p.bn_bias = Tensor::zeros({d});
  p.pointwise_out = Tensor::uniform({d, d}, rng, -s_in, s_in);
  return p;
}

void ConvModuleParams::validate() const {
  const int dm = pointwise_out.dim(0);
  const bool ok = pointwise_in.rank() == 2 && pointwise_in.dim(0) == dm &&
                  pointwise_in.dim(1) == 2 * dm && depthwise.rank() == 2 &&
                  depthwise.dim(0) == dm && depthwise.dim(1) % 2 == 1 &&
                  pointwise_out.rank() == 2 && pointwise_out.dim(1) == dm;
  if (!ok)
    throw std::invalid_argument("ConvModuleParams: inconsistent shapes around d=" +
                                std::to_string(dm));
  for (const Tensor* v : {&ln_gain, &ln_bias, &bn_mean, &bn_var, &bn_gain, &bn_bias})
    if (v->rank() != 1 || v->dim(0) != dm)
      throw std::invalid_argument("ConvModuleParams: per-channel vector " + v->shape_str() +
                                  " does not match d=" + std::to_string(dm));
}

Tensor conv_module(const Tensor& x, const ConvModuleParams& p, const Runtime& rt) {
  p.validate();
  if (x.rank() != 2 || x.dim(1) != p.d())
    throw std::invalid_argument("conv_module: input " + x.shape_str() +
                                " does not match d=" + std::to_string(p.d()));
  Tensor h = glu(pointwise_conv(x, p.pointwise_in));
  h = depthwise_conv1d(h, p.depthwise);
  h = rt.batchnorm_batch_stats
          ? batchnorm_train(h, p.bn_gain, p.bn_bias)
          : batchnorm_infer(h, p.bn_mean, p.bn_var, p.bn_gain, p.bn_bias);
  return pointwise_conv(swish(h), p.pointwise_out);
}

BlockParams BlockParams::init(int d, int d_ff, int d_bn, int heads, int k_conv,
                              bool linear_attention, bool low_rank_ffn, bool prenorm,
                              Rng& rng) {
  auto make_ff = [&] {
    return low_rank_ffn ? FeedForward::make_low_rank(d, d_ff, d_bn, rng)
                        : FeedForward::make_full(d, d_ff, rng);
  };
  BlockParams b;
  b.ln_ffn_a_gain = Tensor::full({d}, 1.0);
  b.ln_ffn_a_bias = Tensor::zeros({d});
  b.ffn_a = make_ff();
  b.ln_att_gain = Tensor::full({d}, 1.0);
  b.ln_att_bias = Tensor::zeros({d});
  b.att = AttentionParams::init(d, heads, rng);
  b.conv = ConvModuleParams::init(d, k_conv, rng);
  b.ln_ffn_b_gain = Tensor::full({d}, 1.0);
  b.ln_ffn_b_bias = Tensor::zeros({d});
  b.ffn_b = make_ff();
  b.ln_final_gain = Tensor::full({d}, 1.0);
  b.ln_final_bias = Tensor::zeros({d});
  b.linear_attention = linear_attention;
  b.prenorm = prenorm;
  return b;
}

Tensor encoder_block(const Tensor& x, const BlockParams& p, const Runtime& rt) {
  auto pre = [&](const Tensor& h, const Tensor& gain, const Tensor& bias) {
    return p.prenorm ? layernorm(h, gain, bias) : h;
  };
  Tensor x1 = add(x, scale(feed_forward(pre(x, p.ln_ffn_a_gain, p.ln_ffn_a_bias), p.ffn_a, rt),
                           0.5));
  Tensor att_in = pre(x1, p.ln_att_gain, p.ln_att_bias);
  Tensor x2 = add(x1, p.linear_attention ? mhlsa(att_in, p.att) : mhsa(att_in, p.att));
  Tensor x3 = add(x2, conv_module(pre(x2, p.conv.ln_gain, p.conv.ln_bias), p.conv, rt));
  Tensor x4 =
      add(x3, scale(feed_forward(pre(x3, p.ln_ffn_b_gain, p.ln_ffn_b_bias), p.ffn_b, rt),
                    0.5));
  return layernorm(x4, p.ln_final_gain, p.ln_final_bias);
}

}  // namespace lac
