#include "lac/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lac {

AttentionParams AttentionParams::init(int d_model, int heads, Rng& rng) {
  if (heads < 1 || d_model < 1 || d_model % heads != 0)
    throw std::invalid_argument("AttentionParams: d_model " + std::to_string(d_model) +
                                " not divisible by heads " + std::to_string(heads));
  const int d_k = d_model / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(d_model));
  AttentionParams p;
  for (int h = 0; h < heads; ++h) {
    p.wq.push_back(Tensor::uniform({d_model, d_k}, rng, -s, s));
    p.wk.push_back(Tensor::uniform({d_model, d_k}, rng, -s, s));
    p.wv.push_back(Tensor::uniform({d_model, d_k}, rng, -s, s));
  }
  p.wo = Tensor::uniform({d_model, d_model}, rng, -s, s);
  return p;
}

void AttentionParams::validate() const {
  if (wq.empty() || wq.size() != wk.size() || wq.size() != wv.size())
    throw std::invalid_argument("AttentionParams: inconsistent head counts");
  const int d_m = wo.dim(0);
  const int d_k = wq.front().dim(1);
  if (wo.rank() != 2 || wo.dim(1) != d_m)
    throw std::invalid_argument("AttentionParams: output projection must be square, have " +
                                wo.shape_str());
  for (const auto* group : {&wq, &wk, &wv})
    for (const Tensor& w : *group)
      if (w.rank() != 2 || w.dim(0) != d_m || w.dim(1) != d_k)
        throw std::invalid_argument("AttentionParams: projection shape " + w.shape_str() +
                                    " inconsistent with d_m=" + std::to_string(d_m) +
                                    ", d_k=" + std::to_string(d_k));
  if (d_k * heads() != d_m)
    throw std::invalid_argument("AttentionParams: d_k * H != d_m (" + std::to_string(d_k) +
                                " * " + std::to_string(heads()) +
                                " != " + std::to_string(d_m) + ")");
}

namespace {

void check_input(const Tensor& x, const AttentionParams& p, const char* op) {
  p.validate();
  if (x.rank() != 2 || x.dim(1) != p.d_model())
    throw std::invalid_argument(std::string(op) + ": input " + x.shape_str() +
                                " does not match d_m=" + std::to_string(p.d_model()));
}

}  // namespace

Tensor mhsa(const Tensor& x, const AttentionParams& p, const Tensor* mask) {
  check_input(x, p, "mhsa");
  const int t = x.dim(0);
  if (mask) {
    if (mask->rank() != 2 || mask->dim(0) != t || mask->dim(1) != t)
      throw std::invalid_argument("mhsa: mask shape " + mask->shape_str() +
                                  " does not match sequence length " + std::to_string(t));
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(p.d_head()));
  std::vector<Tensor> heads;
  heads.reserve(p.heads());
  for (int h = 0; h < p.heads(); ++h) {
    Tensor q = matmul(x, p.wq[h]);
    Tensor k = matmul(x, p.wk[h]);
    Tensor v = matmul(x, p.wv[h]);
    Tensor logits = scale(matmul(q, transpose(k)), inv_sqrt_dk);
    Tensor weights = mask ? softmax_rows_masked(logits, *mask) : softmax_rows(logits);
    heads.push_back(matmul(weights, v));
  }
  return matmul(concat_cols(heads), p.wo);
}

Tensor linear_att(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw std::invalid_argument("linear_att: q, k, v must be matrices");
  if (q.dim(1) != k.dim(1))
    throw std::invalid_argument("linear_att: q " + q.shape_str() + " and k " +
                                k.shape_str() + " widths differ");
  if (k.dim(0) != v.dim(0))
    throw std::invalid_argument("linear_att: k " + k.shape_str() + " and v " +
                                v.shape_str() + " lengths differ");
  const double s = 1.0 / std::pow(static_cast<double>(q.dim(1)), 0.25);
  Tensor a = softmax_rows(scale(q, s));
  Tensor b = softmax_cols(scale(k, s));
  return matmul(a, matmul(transpose(b), v));
}

Tensor mhlsa(const Tensor& x, const AttentionParams& p, int valid_len) {
  check_input(x, p, "mhlsa");
  const int t = x.dim(0);
  if (valid_len > t)
    throw std::invalid_argument("mhlsa: valid_len " + std::to_string(valid_len) +
                                " exceeds sequence length " + std::to_string(t));
  const bool padded = valid_len > 0 && valid_len < t;
  Tensor x_valid = padded ? slice_rows(x, 0, valid_len) : x;
  std::vector<Tensor> heads;
  heads.reserve(p.heads());
  for (int h = 0; h < p.heads(); ++h) {
    Tensor q = matmul(x_valid, p.wq[h]);
    Tensor k = matmul(x_valid, p.wk[h]);
    Tensor v = matmul(x_valid, p.wv[h]);
    Tensor z = linear_att(q, k, v);
    heads.push_back(padded ? pad_rows(z, t, 0) : z);
  }
  return matmul(concat_cols(heads), p.wo);
}

Tensor masked_mhsa(const Tensor& x, const AttentionParams& p) {
  check_input(x, p, "masked_mhsa");
  Tensor mask = causal_mask(x.dim(0));
  return mhsa(x, p, &mask);
}

Tensor cross_mha(const Tensor& queries_from, const Tensor& keys_values_from,
                 const AttentionParams& p) {
  check_input(queries_from, p, "cross_mha");
  if (!keys_values_from.defined() || keys_values_from.rank() != 2 ||
      keys_values_from.dim(0) < 1)
    throw std::invalid_argument("cross_mha: key/value source is empty");
  if (keys_values_from.dim(1) != p.d_model())
    throw std::invalid_argument("cross_mha: key/value source " +
                                keys_values_from.shape_str() + " does not match d_m=" +
                                std::to_string(p.d_model()));
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(p.d_head()));
  std::vector<Tensor> heads;
  heads.reserve(p.heads());
  for (int h = 0; h < p.heads(); ++h) {
    Tensor q = matmul(queries_from, p.wq[h]);
    Tensor k = matmul(keys_values_from, p.wk[h]);
    Tensor v = matmul(keys_values_from, p.wv[h]);
    Tensor weights = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_dk));
    heads.push_back(matmul(weights, v));
  }
  return matmul(concat_cols(heads), p.wo);
}

}  // namespace lac
