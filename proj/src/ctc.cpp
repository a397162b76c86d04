#include "lac/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lac/ops.hpp"

namespace lac {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double lse2(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

std::vector<int> extended_labels(const std::vector<int>& labels, int blank_id) {
  std::vector<int> ext;
  ext.reserve(2 * labels.size() + 1);
  ext.push_back(blank_id);
  for (int y : labels) {
    ext.push_back(y);
    ext.push_back(blank_id);
  }
  return ext;
}

void check_labels(const Tensor& log_probs, const std::vector<int>& labels, int blank_id) {
  const int v = log_probs.dim(1);
  if (blank_id < 0 || blank_id >= v)
    throw std::invalid_argument("ctc_loss: blank id " + std::to_string(blank_id) +
                                " out of range for vocabulary of " + std::to_string(v));
  for (int y : labels) {
    if (y == blank_id)
      throw std::invalid_argument("ctc_loss: labels must not contain the blank id " +
                                  std::to_string(blank_id));
    if (y < 0 || y >= v)
      throw std::invalid_argument("ctc_loss: label id " + std::to_string(y) +
                                  " out of range for vocabulary of " + std::to_string(v));
  }
}

// alpha[t][s]: log prob of prefixes ending in extended state s at frame t,
// frame-t emission included.
std::vector<std::vector<double>> forward_alphas(const Tensor& lp,
                                                const std::vector<int>& ext) {
  const int t_len = lp.dim(0);
  const int s_len = static_cast<int>(ext.size());
  std::vector<std::vector<double>> alpha(t_len, std::vector<double>(s_len, kLogZero));
  alpha[0][0] = lp(0, ext[0]);
  if (s_len > 1) alpha[0][1] = lp(0, ext[1]);
  for (int t = 1; t < t_len; ++t)
    for (int s = 0; s < s_len; ++s) {
      double acc = alpha[t - 1][s];
      if (s >= 1) acc = lse2(acc, alpha[t - 1][s - 1]);
      if (s >= 2 && ext[s] != ext[s - 2]) acc = lse2(acc, alpha[t - 1][s - 2]);
      alpha[t][s] = acc == kLogZero ? kLogZero : acc + lp(t, ext[s]);
    }
  return alpha;
}

// beta[t][s]: log prob of completing from state s after frame t (emissions
// t+1 .. T-1 only).
std::vector<std::vector<double>> backward_betas(const Tensor& lp,
                                                const std::vector<int>& ext) {
  const int t_len = lp.dim(0);
  const int s_len = static_cast<int>(ext.size());
  std::vector<std::vector<double>> beta(t_len, std::vector<double>(s_len, kLogZero));
  beta[t_len - 1][s_len - 1] = 0.0;
  if (s_len > 1) beta[t_len - 1][s_len - 2] = 0.0;
  for (int t = t_len - 2; t >= 0; --t)
    for (int s = 0; s < s_len; ++s) {
      double acc = beta[t + 1][s] + lp(t + 1, ext[s]);
      if (s + 1 < s_len) acc = lse2(acc, beta[t + 1][s + 1] + lp(t + 1, ext[s + 1]));
      if (s + 2 < s_len && ext[s + 2] != ext[s])
        acc = lse2(acc, beta[t + 1][s + 2] + lp(t + 1, ext[s + 2]));
      beta[t][s] = acc;
    }
  return beta;
}

}  // namespace

void CtcConfig::validate() const {
  if (blank_id < 0) throw std::invalid_argument("CtcConfig: negative blank id");
  if (train_weight < 0.0 || train_weight > 1.0 || decode_weight < 0.0 ||
      decode_weight > 1.0)
    throw std::invalid_argument("CtcConfig: weights must lie in [0, 1]");
}

int ctc_min_frames(const std::vector<int>& labels) {
  int repeats = 0;
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++repeats;
  return static_cast<int>(labels.size()) + repeats;
}

Tensor ctc_loss(const Tensor& log_probs, const std::vector<int>& labels, int blank_id) {
  if (log_probs.rank() != 2)
    throw std::invalid_argument("ctc_loss: log_probs must be [T x V], have " +
                                log_probs.shape_str());
  if (!log_probs.all_finite())
    throw std::runtime_error("ctc_loss: non-finite values in log_probs");
  check_labels(log_probs, labels, blank_id);
  const int t_len = log_probs.dim(0);
  const int need = std::max(ctc_min_frames(labels), 1);
  if (t_len < need)
    throw std::invalid_argument("ctc_loss: " + std::to_string(t_len) +
                                " frames cannot align " + std::to_string(labels.size()) +
                                " labels (need at least " + std::to_string(need) + ")");

  const std::vector<int> ext = extended_labels(labels, blank_id);
  const int s_len = static_cast<int>(ext.size());
  const auto alpha = forward_alphas(log_probs, ext);
  double log_p = alpha[t_len - 1][s_len - 1];
  if (s_len > 1) log_p = lse2(log_p, alpha[t_len - 1][s_len - 2]);
  if (!std::isfinite(log_p))
    throw std::runtime_error("ctc_loss: total alignment probability underflowed");

  Tensor lp = log_probs.detached();
  return record_op(Tensor::scalar(-log_p), log_probs.tracked(),
                        [log_probs, lp, labels, blank_id, log_p](const Tensor& g) {
                          const std::vector<int> ext2 = extended_labels(labels, blank_id);
                          const auto a = forward_alphas(lp, ext2);
                          const auto b = backward_betas(lp, ext2);
                          const int tl = lp.dim(0);
                          Tensor gx(lp.shape());
                          for (int t = 0; t < tl; ++t) {
                            std::vector<double> per_label(
                                static_cast<std::size_t>(lp.dim(1)), kLogZero);
                            for (std::size_t s = 0; s < ext2.size(); ++s) {
                              const double occ = a[t][s] + b[t][s];
                              per_label[ext2[s]] = lse2(per_label[ext2[s]], occ);
                            }
                            for (int v = 0; v < lp.dim(1); ++v)
                              if (per_label[v] != kLogZero)
                                gx(t, v) = -std::exp(per_label[v] - log_p) * g(0);
                          }
                          accumulate_grad(log_probs, gx);
                        });
}

std::vector<int> ctc_greedy_decode(const Tensor& log_probs, int blank_id) {
  if (log_probs.rank() != 2)
    throw std::invalid_argument("ctc_greedy_decode: log_probs must be [T x V], have " +
                                log_probs.shape_str());
  const int t_len = log_probs.dim(0), v = log_probs.dim(1);
  std::vector<int> out;
  int prev = -1;
  for (int t = 0; t < t_len; ++t) {
    int best = 0;
    for (int j = 1; j < v; ++j)
      if (log_probs(t, j) > log_probs(t, best)) best = j;
    if (best != prev && best != blank_id) out.push_back(best);
    prev = best;
  }
  return out;
}

double joint_loss(double att_nll, double ctc_nll, const CtcConfig& cfg) {
  cfg.validate();
  return cfg.train_weight * ctc_nll + (1.0 - cfg.train_weight) * att_nll;
}

Tensor joint_loss(const Tensor& att_nll, const Tensor& ctc_nll, const CtcConfig& cfg) {
  cfg.validate();
  return add(scale(ctc_nll, cfg.train_weight), scale(att_nll, 1.0 - cfg.train_weight));
}

double joint_score(double att_lp, double ctc_lp, const CtcConfig& cfg) {
  cfg.validate();
  return cfg.decode_weight * ctc_lp + (1.0 - cfg.decode_weight) * att_lp;
}

}  // namespace lac
