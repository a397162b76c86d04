#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lac/attention.hpp"
#include "lac/tensor.hpp"

namespace lac::verify {

// Result of one verification check.
struct CheckResult {
  std::string suite;
  std::string name;
  double tolerance = 0.0;  // 0 for exact checks
  double observed = 0.0;   // measured error / value
  bool pass = false;
  std::string detail;
};

// |a - b| scaled by max(1, |a|, |b|): behaves like relative error for large
// values and absolute error near zero.
double rel_err(double a, double b);

struct GradCheckOptions {
  double step = 1e-5;           // central-difference step
  int max_coords_per_param = 0; // 0 = every coordinate
  std::uint64_t seed = 17;      // coordinate sampling
};

// Central-difference check: runs loss_fn once under a tape for analytic
// gradients of params, then re-evaluates loss_fn with perturbed coordinates.
// loss_fn must be a deterministic function of the current parameter values.
double max_rel_grad_error(const std::function<Tensor()>& loss_fn,
                          const std::vector<Tensor*>& params,
                          const GradCheckOptions& opt = {});

// Independent reference implementations (plain scalar loops, no lac ops).
namespace oracle {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& x);
Tensor softmax_cols(const Tensor& x);
Tensor mhsa(const Tensor& x, const AttentionParams& p, bool causal = false);
// Materialized route: (row-softmax(q/s) * col-softmax(k/s)^T) * v.
Tensor linear_att_full_matrix(const Tensor& q, const Tensor& k, const Tensor& v);
// The implicit attention matrix A * B^T itself.
Tensor implicit_attention_matrix(const Tensor& q, const Tensor& k);
// Exhaustive path enumeration; returns the negative log alignment probability.
double ctc_loss_brute_force(const Tensor& log_probs, const std::vector<int>& labels,
                            int blank_id);
}  // namespace oracle

std::vector<std::string> suite_names();

// Runs one named suite, or every suite for "all".
std::vector<CheckResult> run_suite(const std::string& selector);

bool all_passed(const std::vector<CheckResult>& results);
std::string report_text(const std::vector<CheckResult>& results);
std::string report_json(const std::vector<CheckResult>& results);

}  // namespace lac::verify
