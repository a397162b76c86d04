#pragma once

#include <vector>

#include "lac/tape.hpp"
#include "lac/tensor.hpp"

namespace lac {

struct CtcConfig {
  int blank_id = 3;
  double train_weight = 0.3;   // joint training interpolation
  double decode_weight = 0.6;  // joint decoding interpolation

  void validate() const;
};

// Negative log probability of all blank-augmented monotonic alignments of
// labels given per-frame log posteriors [T x V], via the forward recursion in
// log space. Too-short T for the label sequence is an error, not infinity.
Tensor ctc_loss(const Tensor& log_probs, const std::vector<int>& labels, int blank_id);

// Minimum frame count able to align the labels (repeats need a blank between).
int ctc_min_frames(const std::vector<int>& labels);

// Best path: per-frame argmax, collapse repeats, strip blanks.
std::vector<int> ctc_greedy_decode(const Tensor& log_probs, int blank_id);

// loss = w_train * ctc + (1 - w_train) * att
double joint_loss(double att_nll, double ctc_nll, const CtcConfig& cfg);
Tensor joint_loss(const Tensor& att_nll, const Tensor& ctc_nll, const CtcConfig& cfg);

// score = w_dec * ctc + (1 - w_dec) * att (log-prob combination)
double joint_score(double att_lp, double ctc_lp, const CtcConfig& cfg);

}  // namespace lac
