#include "lac/feedforward.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lac {

namespace {
double init_bound(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }
}  // namespace

FfnParams FfnParams::init(int d, int d_ff, Rng& rng) {
  if (d < 1 || d_ff < 1) throw std::invalid_argument("FfnParams: non-positive dims");
  FfnParams p;
  p.w1 = Tensor::uniform({d, d_ff}, rng, -init_bound(d), init_bound(d));
  p.w2 = Tensor::uniform({d_ff, d}, rng, -init_bound(d_ff), init_bound(d_ff));
  return p;
}

void FfnParams::validate() const {
  if (w1.rank() != 2 || w2.rank() != 2 || w1.dim(1) != w2.dim(0) || w1.dim(0) != w2.dim(1))
    throw std::invalid_argument("FfnParams: inconsistent shapes " + w1.shape_str() + ", " +
                                w2.shape_str());
}

LffnParams LffnParams::init(int d, int d_ff, int d_bn, Rng& rng) {
  if (d < 1 || d_ff < 1 || d_bn < 1)
    throw std::invalid_argument("LffnParams: non-positive dims");
  LffnParams p;
  p.e1 = Tensor::uniform({d, d_bn}, rng, -init_bound(d), init_bound(d));
  p.d1 = Tensor::uniform({d_bn, d_ff}, rng, -init_bound(d_bn), init_bound(d_bn));
  p.e2 = Tensor::uniform({d_ff, d_bn}, rng, -init_bound(d_ff), init_bound(d_ff));
  p.d2 = Tensor::uniform({d_bn, d}, rng, -init_bound(d_bn), init_bound(d_bn));
  return p;
}

void LffnParams::validate() const {
  const bool ok = e1.rank() == 2 && d1.rank() == 2 && e2.rank() == 2 && d2.rank() == 2 &&
                  e1.dim(1) == d1.dim(0) && d1.dim(1) == e2.dim(0) &&
                  e2.dim(1) == d2.dim(0) && d2.dim(1) == e1.dim(0) &&
                  e1.dim(1) == d2.dim(0);
  if (!ok)
    throw std::invalid_argument("LffnParams: inconsistent shapes " + e1.shape_str() + ", " +
                                d1.shape_str() + ", " + e2.shape_str() + ", " +
                                d2.shape_str());
}

bool LffnParams::compresses() const { return d_bn() < d() && d_bn() < d_ff(); }

Tensor ffn(const Tensor& x, const FfnParams& p, const Runtime& rt) {
  p.validate();
  Tensor h = swish(matmul(x, p.w1));
  if (rt.training) h = dropout(h, rt.dropout_rate, rt.rng_ref());
  return matmul(h, p.w2);
}

Tensor lffn(const Tensor& x, const LffnParams& p, const Runtime& rt) {
  p.validate();
  // Cheap association: (x E1) D1 keeps every intermediate at bottleneck width.
  Tensor h = swish(matmul(matmul(x, p.e1), p.d1));
  if (rt.training) h = dropout(h, rt.dropout_rate, rt.rng_ref());
  return matmul(matmul(h, p.e2), p.d2);
}

std::int64_t count_params_ffn(int d, int d_ff) {
  return 2LL * d * d_ff;
}

std::int64_t count_params_lffn(int d, int d_ff, int d_bn) {
  return 2LL * d_bn * (static_cast<std::int64_t>(d) + d_ff);
}

std::int64_t count_flops_ffn(int d, int d_ff, std::int64_t t) {
  return t * 2LL * d * d_ff;
}

std::int64_t count_flops_lffn(int d, int d_ff, int d_bn, std::int64_t t) {
  return t * 2LL * d_bn * (static_cast<std::int64_t>(d) + d_ff);
}

FeedForward FeedForward::make_full(int d, int d_ff, Rng& rng) {
  FeedForward f;
  f.full = FfnParams::init(d, d_ff, rng);
  return f;
}

FeedForward FeedForward::make_low_rank(int d, int d_ff, int d_bn, Rng& rng) {
  FeedForward f;
  f.low_rank = LffnParams::init(d, d_ff, d_bn, rng);
  return f;
}

std::int64_t FeedForward::param_count() const {
  if (full) return count_params_ffn(full->d(), full->d_ff());
  if (low_rank)
    return count_params_lffn(low_rank->d(), low_rank->d_ff(), low_rank->d_bn());
  return 0;
}

Tensor feed_forward(const Tensor& x, const FeedForward& p, const Runtime& rt) {
  if (p.full) return ffn(x, *p.full, rt);
  if (p.low_rank) return lffn(x, *p.low_rank, rt);
  throw std::logic_error("FeedForward: no form engaged");
}

}  // namespace lac
