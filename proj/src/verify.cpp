#include "lac/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lac/bench.hpp"
#include "lac/ctc.hpp"
#include "lac/decoder.hpp"
#include "lac/encoder.hpp"
#include "lac/frontend.hpp"
#include "lac/model.hpp"
#include "lac/ops.hpp"

namespace lac::verify {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

double max_rel_grad_error(const std::function<Tensor()>& loss_fn,
                          const std::vector<Tensor*>& params,
                          const GradCheckOptions& opt) {
  std::vector<std::vector<double>> analytic(params.size());
  {
    Tape tape;
    for (Tensor* p : params) tape.watch(*p);
    Tensor loss = loss_fn();
    tape.backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& node = node_of(*params[i]);
      analytic[i].resize(params[i]->size(), 0.0);
      if (node && node->grad.defined())
        std::memcpy(analytic[i].data(), node->grad.data(),
                    params[i]->size() * sizeof(double));
    }
  }
  Rng pick(opt.seed);
  double worst = 0.0;
  const double h = opt.step;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    const std::size_t n = p.size();
    std::vector<std::size_t> coords;
    if (opt.max_coords_per_param <= 0 ||
        static_cast<std::size_t>(opt.max_coords_per_param) >= n) {
      coords.resize(n);
      std::iota(coords.begin(), coords.end(), std::size_t{0});
    } else {
      for (int k = 0; k < opt.max_coords_per_param; ++k)
        coords.push_back(static_cast<std::size_t>(pick.bits() % n));
    }
    for (std::size_t i : coords) {
      double* slot = p.data() + i;
      const double orig = *slot;
      *slot = orig + h;
      const double lp = loss_fn().item();
      *slot = orig - h;
      const double lm = loss_fn().item();
      *slot = orig;
      const double fd = (lp - lm) / (2.0 * h);
      worst = std::max(worst, rel_err(analytic[pi][i], fd));
    }
  }
  return worst;
}

// ---- oracles ----------------------------------------------------------------

namespace oracle {

Tensor matmul(const Tensor& a, const Tensor& b) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) acc += a(i, kk) * b(kk, j);
      c(i, j) = acc;
    }
  return c;
}

Tensor softmax_rows(const Tensor& x) {
  const int m = x.dim(0), n = x.dim(1);
  Tensor y({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = x(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, x(i, j));
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += std::exp(x(i, j) - mx);
    for (int j = 0; j < n; ++j) y(i, j) = std::exp(x(i, j) - mx) / sum;
  }
  return y;
}

Tensor softmax_cols(const Tensor& x) {
  const int m = x.dim(0), n = x.dim(1);
  Tensor y({m, n});
  for (int j = 0; j < n; ++j) {
    double mx = x(0, j);
    for (int i = 1; i < m; ++i) mx = std::max(mx, x(i, j));
    double sum = 0.0;
    for (int i = 0; i < m; ++i) sum += std::exp(x(i, j) - mx);
    for (int i = 0; i < m; ++i) y(i, j) = std::exp(x(i, j) - mx) / sum;
  }
  return y;
}

Tensor mhsa(const Tensor& x, const AttentionParams& p, bool causal) {
  const int t = x.dim(0), dm = x.dim(1);
  const int heads = p.heads(), dk = p.d_head();
  Tensor concat({t, dm});
  for (int h = 0; h < heads; ++h) {
    Tensor q({t, dk}), k({t, dk}), v({t, dk});
    for (int i = 0; i < t; ++i)
      for (int j = 0; j < dk; ++j) {
        double aq = 0.0, ak = 0.0, av = 0.0;
        for (int c = 0; c < dm; ++c) {
          aq += x(i, c) * p.wq[h](c, j);
          ak += x(i, c) * p.wk[h](c, j);
          av += x(i, c) * p.wv[h](c, j);
        }
        q(i, j) = aq;
        k(i, j) = ak;
        v(i, j) = av;
      }
    const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
    for (int i = 0; i < t; ++i) {
      const int limit = causal ? i + 1 : t;
      std::vector<double> logits(limit);
      double mx = -std::numeric_limits<double>::infinity();
      for (int u = 0; u < limit; ++u) {
        double acc = 0.0;
        for (int j = 0; j < dk; ++j) acc += q(i, j) * k(u, j);
        logits[u] = acc * inv;
        mx = std::max(mx, logits[u]);
      }
      double sum = 0.0;
      for (int u = 0; u < limit; ++u) sum += std::exp(logits[u] - mx);
      for (int j = 0; j < dk; ++j) {
        double acc = 0.0;
        for (int u = 0; u < limit; ++u)
          acc += std::exp(logits[u] - mx) / sum * v(u, j);
        concat(i, h * dk + j) = acc;
      }
    }
  }
  Tensor out({t, dm});
  for (int i = 0; i < t; ++i)
    for (int o = 0; o < dm; ++o) {
      double acc = 0.0;
      for (int c = 0; c < dm; ++c) acc += concat(i, c) * p.wo(c, o);
      out(i, o) = acc;
    }
  return out;
}

Tensor implicit_attention_matrix(const Tensor& q, const Tensor& k) {
  const int t = q.dim(0), dk = q.dim(1);
  const double s = 1.0 / std::pow(static_cast<double>(dk), 0.25);
  Tensor qs({t, dk}), ks({k.dim(0), dk});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < dk; ++j) qs(i, j) = q(i, j) * s;
  for (int i = 0; i < k.dim(0); ++i)
    for (int j = 0; j < dk; ++j) ks(i, j) = k(i, j) * s;
  Tensor a = oracle::softmax_rows(qs);
  Tensor b = oracle::softmax_cols(ks);
  Tensor m({t, k.dim(0)});
  for (int i = 0; i < t; ++i)
    for (int u = 0; u < k.dim(0); ++u) {
      double acc = 0.0;
      for (int j = 0; j < dk; ++j) acc += a(i, j) * b(u, j);
      m(i, u) = acc;
    }
  return m;
}

Tensor linear_att_full_matrix(const Tensor& q, const Tensor& k, const Tensor& v) {
  Tensor m = implicit_attention_matrix(q, k);
  return oracle::matmul(m, v);
}

double ctc_loss_brute_force(const Tensor& log_probs, const std::vector<int>& labels,
                            int blank_id) {
  const int t_len = log_probs.dim(0), v = log_probs.dim(1);
  double total = 1.0;
  for (int i = 0; i < t_len; ++i) {
    total *= v;
    if (total > 2e7) throw std::invalid_argument("ctc oracle: V^T too large");
  }
  double lse = -std::numeric_limits<double>::infinity();
  std::vector<int> path(t_len, 0);
  while (true) {
    // collapse: drop consecutive repeats, then blanks
    std::vector<int> collapsed;
    int prev = -1;
    for (int id : path) {
      if (id != prev && id != blank_id) collapsed.push_back(id);
      prev = id;
    }
    if (collapsed == labels) {
      double lp = 0.0;
      for (int t = 0; t < t_len; ++t) lp += log_probs(t, path[t]);
      if (lse == -std::numeric_limits<double>::infinity())
        lse = lp;
      else {
        const double m = std::max(lse, lp);
        lse = m + std::log(std::exp(lse - m) + std::exp(lp - m));
      }
    }
    int pos = t_len - 1;
    while (pos >= 0 && path[pos] == v - 1) path[pos--] = 0;
    if (pos < 0) break;
    ++path[pos];
  }
  return -lse;
}

}  // namespace oracle

// ---- suites -----------------------------------------------------------------

namespace {

bool bits_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double max_rel_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, rel_err(a.data()[i], b.data()[i]));
  return m;
}

struct Suite {
  std::string name;
  std::vector<CheckResult>* out;

  void err(const std::string& check, double tol, double observed,
           const std::string& detail = "") {
    out->push_back({name, check, tol, observed, observed <= tol, detail});
  }
  void flag(const std::string& check, bool pass, const std::string& detail = "") {
    out->push_back({name, check, 0.0, pass ? 0.0 : 1.0, pass, detail});
  }
  void expect_throw(const std::string& check, const std::function<void()>& fn) {
    bool threw = false;
    std::string what;
    try {
      fn();
    } catch (const std::exception& e) {
      threw = true;
      what = e.what();
    }
    out->push_back({name, check, 0.0, threw ? 0.0 : 1.0, threw, what});
  }
};

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return Tensor::uniform(std::move(shape), rng, lo, hi);
}

// Scalar loss mixing every output element with fixed weights.
Tensor weighted_loss(const Tensor& out, const Tensor& weights) {
  return sum_all(mul(out, weights));
}

// ---- tensor suite ----

void op_gradients(Suite& s) {
  constexpr int kTrials = 100;
  const GradCheckOptions opt{};
  Rng rng(101);

  auto run_case = [&](const std::string& op_name,
                      const std::function<double(Rng&)>& trial) {
    double worst = 0.0;
    for (int t = 0; t < kTrials; ++t) worst = std::max(worst, trial(rng));
    s.err("grad/" + op_name, 1e-5, worst, std::to_string(kTrials) + " trials");
  };

  run_case("matmul", [&](Rng& r) {
    Tensor a = random_tensor({3, 4}, r), b = random_tensor({4, 2}, r);
    Tensor w = random_tensor({3, 2}, r);
    return max_rel_grad_error([&] { return weighted_loss(matmul(a, b), w); }, {&a, &b},
                              opt);
  });
  run_case("transpose", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), w = random_tensor({4, 3}, r);
    return max_rel_grad_error([&] { return weighted_loss(transpose(x), w); }, {&x}, opt);
  });
  run_case("add", [&](Rng& r) {
    Tensor a = random_tensor({3, 4}, r), b = random_tensor({3, 4}, r);
    Tensor w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(add(a, b), w); }, {&a, &b}, opt);
  });
  run_case("sub", [&](Rng& r) {
    Tensor a = random_tensor({3, 4}, r), b = random_tensor({3, 4}, r);
    Tensor w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(sub(a, b), w); }, {&a, &b}, opt);
  });
  run_case("mul", [&](Rng& r) {
    Tensor a = random_tensor({3, 4}, r), b = random_tensor({3, 4}, r);
    Tensor w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(mul(a, b), w); }, {&a, &b}, opt);
  });
  run_case("scale", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(scale(x, 1.7), w); }, {&x}, opt);
  });
  run_case("add_row_bias", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), b = random_tensor({4}, r);
    Tensor w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(add_row_bias(x, b), w); },
                              {&x, &b}, opt);
  });
  run_case("relu", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r);
    for (std::size_t i = 0; i < x.size(); ++i)  // keep clear of the kink
      if (std::abs(x.data()[i]) < 0.01) x.data()[i] += x.data()[i] < 0 ? -0.1 : 0.1;
    Tensor w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(relu(x), w); }, {&x}, opt);
  });
  run_case("sigmoid", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(sigmoid(x), w); }, {&x}, opt);
  });
  run_case("swish", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(swish(x), w); }, {&x}, opt);
  });
  run_case("glu", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), w = random_tensor({3, 2}, r);
    return max_rel_grad_error([&] { return weighted_loss(glu(x), w); }, {&x}, opt);
  });
  run_case("softmax_rows", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(softmax_rows(x), w); }, {&x},
                              opt);
  });
  run_case("softmax_cols", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(softmax_cols(x), w); }, {&x},
                              opt);
  });
  run_case("softmax_rows_masked", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), w = random_tensor({3, 4}, r);
    Tensor mask({3, 4});
    for (int i = 0; i < 3; ++i) {
      mask(i, 0) = 1.0;
      for (int j = 1; j < 4; ++j) mask(i, j) = r.uniform() < 0.5 ? 1.0 : 0.0;
    }
    return max_rel_grad_error(
        [&] { return weighted_loss(softmax_rows_masked(x, mask), w); }, {&x}, opt);
  });
  run_case("log_softmax_rows", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(log_softmax_rows(x), w); }, {&x},
                              opt);
  });
  run_case("layernorm", [&](Rng& r) {
    Tensor x = random_tensor({3, 5}, r), g = random_tensor({5}, r, 0.5, 1.5);
    Tensor b = random_tensor({5}, r), w = random_tensor({3, 5}, r);
    return max_rel_grad_error([&] { return weighted_loss(layernorm(x, g, b), w); },
                              {&x, &g, &b}, opt);
  });
  run_case("batchnorm_infer", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), m = random_tensor({4}, r);
    Tensor v = random_tensor({4}, r, 0.5, 1.5), g = random_tensor({4}, r, 0.5, 1.5);
    Tensor b = random_tensor({4}, r), w = random_tensor({3, 4}, r);
    return max_rel_grad_error(
        [&] { return weighted_loss(batchnorm_infer(x, m, v, g, b), w); },
        {&x, &m, &v, &g, &b}, opt);
  });
  run_case("batchnorm_train", [&](Rng& r) {
    Tensor x = random_tensor({4, 3}, r), g = random_tensor({3}, r, 0.5, 1.5);
    Tensor b = random_tensor({3}, r), w = random_tensor({4, 3}, r);
    return max_rel_grad_error([&] { return weighted_loss(batchnorm_train(x, g, b), w); },
                              {&x, &g, &b}, opt);
  });
  run_case("conv2d_s1", [&](Rng& r) {
    Tensor x = random_tensor({2, 4, 5}, r), k = random_tensor({2, 2, 3, 3}, r);
    Tensor w = random_tensor({2, 2, 3}, r);
    return max_rel_grad_error([&] { return weighted_loss(conv2d(x, k, 1), w); }, {&x, &k},
                              opt);
  });
  run_case("conv2d_s2", [&](Rng& r) {
    Tensor x = random_tensor({2, 5, 7}, r), k = random_tensor({2, 2, 3, 3}, r);
    Tensor w = random_tensor({2, 2, 3}, r);
    return max_rel_grad_error([&] { return weighted_loss(conv2d(x, k, 2), w); }, {&x, &k},
                              opt);
  });
  run_case("depthwise_conv1d", [&](Rng& r) {
    Tensor x = random_tensor({5, 3}, r), k = random_tensor({3, 3}, r);
    Tensor w = random_tensor({5, 3}, r);
    return max_rel_grad_error([&] { return weighted_loss(depthwise_conv1d(x, k), w); },
                              {&x, &k}, opt);
  });
  run_case("reshape", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), w = random_tensor({2, 6}, r);
    return max_rel_grad_error([&] { return weighted_loss(reshape(x, {2, 6}), w); }, {&x},
                              opt);
  });
  run_case("flatten_time", [&](Rng& r) {
    Tensor x = random_tensor({2, 3, 2}, r), w = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return weighted_loss(flatten_time(x), w); }, {&x},
                              opt);
  });
  run_case("concat_cols", [&](Rng& r) {
    Tensor a = random_tensor({3, 2}, r), b = random_tensor({3, 3}, r);
    Tensor w = random_tensor({3, 5}, r);
    return max_rel_grad_error([&] { return weighted_loss(concat_cols({a, b}), w); },
                              {&a, &b}, opt);
  });
  run_case("slice_cols", [&](Rng& r) {
    Tensor x = random_tensor({3, 5}, r), w = random_tensor({3, 3}, r);
    return max_rel_grad_error([&] { return weighted_loss(slice_cols(x, 1, 3), w); }, {&x},
                              opt);
  });
  run_case("slice_rows", [&](Rng& r) {
    Tensor x = random_tensor({5, 3}, r), w = random_tensor({3, 3}, r);
    return max_rel_grad_error([&] { return weighted_loss(slice_rows(x, 1, 3), w); }, {&x},
                              opt);
  });
  run_case("pad_rows", [&](Rng& r) {
    Tensor x = random_tensor({2, 3}, r), w = random_tensor({5, 3}, r);
    return max_rel_grad_error([&] { return weighted_loss(pad_rows(x, 5, 1), w); }, {&x},
                              opt);
  });
  run_case("embed_rows", [&](Rng& r) {
    Tensor table = random_tensor({5, 3}, r), w = random_tensor({4, 3}, r);
    const std::vector<int> ids = {0, 2, 4, 2};
    return max_rel_grad_error([&] { return weighted_loss(embed_rows(table, ids), w); },
                              {&table}, opt);
  });
  run_case("sum_all", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r);
    return max_rel_grad_error([&] { return scale(sum_all(x), 0.7); }, {&x}, opt);
  });
  run_case("sequence_nll", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r);
    const std::vector<int> targets = {1, 0, 3};
    return max_rel_grad_error([&] { return sequence_nll(log_softmax_rows(x), targets); },
                              {&x}, opt);
  });
  run_case("dropout", [&](Rng& r) {
    Tensor x = random_tensor({3, 4}, r), w = random_tensor({3, 4}, r);
    const std::uint64_t seed = r.bits();
    return max_rel_grad_error(
        [&] {
          Rng dr(seed);  // identical mask on every re-evaluation
          return weighted_loss(dropout(x, 0.3, dr), w);
        },
        {&x}, opt);
  });
}

void tensor_suite(std::vector<CheckResult>& out) {
  Suite s{"tensor", &out};
  Rng rng(7);

  {  // associativity over random dims <= 64
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int m = 1 + static_cast<int>(rng.bits() % 64);
      const int k = 1 + static_cast<int>(rng.bits() % 64);
      const int n = 1 + static_cast<int>(rng.bits() % 64);
      const int q = 1 + static_cast<int>(rng.bits() % 64);
      Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
      Tensor c = random_tensor({n, q}, rng);
      Tensor left = matmul(matmul(a, b), c);
      Tensor right = matmul(a, matmul(b, c));
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < left.size(); ++i) {
        num = std::max(num, std::abs(left.data()[i] - right.data()[i]));
        den = std::max(den, std::abs(right.data()[i]));
      }
      worst = std::max(worst, num / std::max(den, 1e-300));
    }
    s.err("matmul_associativity", 1e-10, worst, "20 random trials, dims <= 64");
  }

  {  // row/col softmax normalization
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      Tensor x = random_tensor({1 + static_cast<int>(rng.bits() % 8),
                                2 + static_cast<int>(rng.bits() % 8)},
                               rng, -30.0, 30.0);
      Tensor yr = softmax_rows(x);
      for (int i = 0; i < yr.dim(0); ++i) {
        double sum = 0.0;
        for (int j = 0; j < yr.dim(1); ++j) sum += yr(i, j);
        worst = std::max(worst, std::abs(sum - 1.0));
      }
      Tensor yc = softmax_cols(x);
      for (int j = 0; j < yc.dim(1); ++j) {
        double sum = 0.0;
        for (int i = 0; i < yc.dim(0); ++i) sum += yc(i, j);
        worst = std::max(worst, std::abs(sum - 1.0));
      }
    }
    s.err("softmax_normalization", 1e-12, worst, "50 random matrices");
  }

  {  // determinism: identical inputs, bit-identical outputs
    Tensor a = random_tensor({17, 23}, rng), b = random_tensor({23, 9}, rng);
    Tensor g = random_tensor({9}, rng, 0.5, 1.5), bias = random_tensor({9}, rng);
    Tensor r1 = layernorm(softmax_rows(matmul(a, b)), g, bias);
    Tensor r2 = layernorm(softmax_rows(matmul(a, b)), g, bias);
    s.flag("determinism_bit_identical", bits_equal(r1, r2));
  }

  {  // softmax against the independent oracle
    Tensor x = random_tensor({5, 7}, rng, -5.0, 5.0);
    s.err("softmax_rows_vs_oracle", 1e-14, max_abs_diff(softmax_rows(x),
                                                         oracle::softmax_rows(x)));
    s.err("softmax_cols_vs_oracle", 1e-14, max_abs_diff(softmax_cols(x),
                                                         oracle::softmax_cols(x)));
    s.err("matmul_vs_oracle", 1e-13,
          max_abs_diff(matmul(x, transpose(x)), oracle::matmul(x, transpose(x))));
  }

  {  // tape invariants
    Tape tape;
    Tensor x = random_tensor({2, 2}, rng);
    tape.watch(x);
    Tensor loss = sum_all(matmul(x, x));
    tape.backward(loss);
    bool rejected = false;
    try {
      tape.backward(loss);
    } catch (const std::exception&) {
      rejected = true;
    }
    s.flag("tape_rejects_double_backward", rejected);

    bool non_scalar_rejected = false;
    try {
      Tape t2;
      Tensor y = random_tensor({2, 2}, rng);
      t2.watch(y);
      Tensor out = matmul(y, y);
      t2.backward(out);
    } catch (const std::exception&) {
      non_scalar_rejected = true;
    }
    s.flag("tape_rejects_non_scalar_loss", non_scalar_rejected);
  }

  s.expect_throw("matmul_shape_error", [] {
    Tensor a({2, 3}), b({2, 3});
    (void)matmul(a, b);
  });
  s.expect_throw("depthwise_even_kernel_error", [] {
    Tensor x({4, 2}), k({2, 4});
    (void)depthwise_conv1d(x, k);
  });
  s.expect_throw("conv2d_small_input_error", [] {
    Tensor x({1, 2, 2}), k({1, 1, 3, 3});
    (void)conv2d(x, k, 1);
  });
  s.expect_throw("batchnorm_negative_variance_error", [&] {
    Tensor x({2, 2});
    Tensor m({2}), g({2}), b({2});
    Tensor v = Tensor::from({2}, {-0.5, 1.0});
    (void)batchnorm_infer(x, m, v, g, b);
  });
  s.expect_throw("softmax_nonfinite_input_error", [] {
    Tensor x = Tensor::from({1, 2}, {std::numeric_limits<double>::infinity(), 0.0});
    (void)softmax_rows(x);
  });

  op_gradients(s);
}

// ---- attention suite ----

void attention_suite(std::vector<CheckResult>& out) {
  Suite s{"attention", &out};
  Rng rng(11);

  {  // mhsa against the scalar-loop oracle
    AttentionParams p = AttentionParams::init(8, 2, rng);
    Tensor x = random_tensor({8, 8}, rng);
    s.err("mhsa_vs_oracle", 1e-12, max_rel_diff(mhsa(x, p), oracle::mhsa(x, p)),
          "T=8, d_m=8, H=2");
    s.err("masked_mhsa_vs_oracle", 1e-12,
          max_rel_diff(masked_mhsa(x, p), oracle::mhsa(x, p, true)));
  }

  {  // reorder equivalence and row-stochastic implicit attention
    Tensor q = random_tensor({64, 16}, rng), k = random_tensor({64, 16}, rng);
    Tensor v = random_tensor({64, 16}, rng);
    s.err("reorder_equivalence", 1e-10,
          max_rel_diff(linear_att(q, k, v), oracle::linear_att_full_matrix(q, k, v)),
          "A(B^T v) vs (A B^T) v, T=64, d_k=16");
    Tensor m = oracle::implicit_attention_matrix(q, k);
    double worst = 0.0;
    for (int i = 0; i < m.dim(0); ++i) {
      double sum = 0.0;
      for (int j = 0; j < m.dim(1); ++j) sum += m(i, j);
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    s.err("implicit_attention_row_stochastic", 1e-10, worst);
  }

  {  // T=1: mhsa and mhlsa coincide
    AttentionParams p = AttentionParams::init(6, 2, rng);
    Tensor x = random_tensor({1, 6}, rng);
    s.err("t1_mhsa_equals_mhlsa", 1e-12, max_rel_diff(mhsa(x, p), mhlsa(x, p)));
  }

  {  // constant v rows pass through linear attention unchanged
    Tensor q = random_tensor({5, 4}, rng), k = random_tensor({5, 4}, rng);
    Tensor v({5, 4});
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 4; ++j) v(i, j) = 0.3 * j - 0.2;
    Tensor z = linear_att(q, k, v);
    double worst = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 4; ++j) worst = std::max(worst, std::abs(z(i, j) - v(0, j)));
    s.err("linear_att_constant_v", 1e-12, worst);
  }

  {  // uniform attention when Q projections are zero
    AttentionParams p = AttentionParams::init(4, 1, rng);
    for (auto& w : p.wq) w = Tensor::zeros({4, 4});
    Tensor x = random_tensor({6, 4}, rng);
    Tensor got = mhsa(x, p);
    Tensor v = matmul(x, p.wv[0]);
    Tensor mean_v({6, 4});
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int i = 0; i < 6; ++i) acc += v(i, j);
      for (int i = 0; i < 6; ++i) mean_v(i, j) = acc / 6.0;
    }
    s.err("mhsa_zero_query_uniform", 1e-12, max_rel_diff(got, matmul(mean_v, p.wo)));
  }

  {  // permutation covariance of mhlsa
    AttentionParams p = AttentionParams::init(8, 2, rng);
    Tensor x = random_tensor({7, 8}, rng);
    std::vector<int> perm = {3, 0, 6, 1, 5, 2, 4};
    Tensor xp({7, 8});
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 8; ++j) xp(i, j) = x(perm[i], j);
    Tensor y = mhlsa(x, p);
    Tensor yp = mhlsa(xp, p);
    double worst = 0.0;
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 8; ++j)
        worst = std::max(worst, std::abs(yp(i, j) - y(perm[i], j)));
    s.err("mhlsa_permutation_covariance", 1e-12, worst);
  }

  {  // causality of the masked variant is exact
    AttentionParams p = AttentionParams::init(8, 2, rng);
    Tensor x = random_tensor({6, 8}, rng);
    Tensor y = masked_mhsa(x, p);
    Tensor x2c = Tensor::from(x.shape(), std::vector<double>(x.data(), x.data() + x.size()));
    for (int j = 0; j < 8; ++j) x2c(5, j) += 3.0;  // perturb the last position only
    Tensor y2 = masked_mhsa(x2c, p);
    bool exact = true;
    for (int i = 0; i < 5 && exact; ++i)
      for (int j = 0; j < 8; ++j)
        if (y(i, j) != y2(i, j)) {
          exact = false;
          break;
        }
    s.flag("masked_mhsa_causality_exact", exact, "rows before the perturbed position");
  }

  {  // cross attention with a single key/value position
    AttentionParams p = AttentionParams::init(6, 3, rng);
    Tensor xq = random_tensor({4, 6}, rng), xkv = random_tensor({1, 6}, rng);
    Tensor y = cross_mha(xq, xkv, p);
    double worst = 0.0;
    for (int i = 1; i < 4; ++i)
      for (int j = 0; j < 6; ++j) worst = std::max(worst, std::abs(y(i, j) - y(0, j)));
    s.err("cross_mha_single_kv", 1e-12, worst);
  }

  {  // padded mhlsa: valid rows match the sliced computation, padded rows are 0
    AttentionParams p = AttentionParams::init(8, 2, rng);
    Tensor x = random_tensor({6, 8}, rng);
    Tensor padded = mhlsa(x, p, 4);
    Tensor ref = mhlsa(slice_rows(x, 0, 4), p);
    double worst = max_abs_diff(slice_rows(padded, 0, 4), ref);
    for (int i = 4; i < 6; ++i)
      for (int j = 0; j < 8; ++j) worst = std::max(worst, std::abs(padded(i, j)));
    s.err("mhlsa_padding", 1e-15, worst, "valid_len=4 of T=6");
  }

  {  // gradients
    AttentionParams p = AttentionParams::init(8, 2, rng);
    Tensor x = random_tensor({6, 8}, rng);
    Tensor w = random_tensor({6, 8}, rng);
    std::vector<Tensor*> params = {&x, &p.wo};
    for (int h = 0; h < 2; ++h) {
      params.push_back(&p.wq[h]);
      params.push_back(&p.wk[h]);
      params.push_back(&p.wv[h]);
    }
    GradCheckOptions opt;
    opt.max_coords_per_param = 6;
    s.err("grad/mhsa", 1e-5,
          max_rel_grad_error([&] { return weighted_loss(mhsa(x, p), w); }, params, opt));
    s.err("grad/mhlsa", 1e-5,
          max_rel_grad_error([&] { return weighted_loss(mhlsa(x, p), w); }, params, opt));
    s.err("grad/masked_mhsa", 1e-5,
          max_rel_grad_error([&] { return weighted_loss(masked_mhsa(x, p), w); }, params,
                             opt));
    Tensor xkv = random_tensor({5, 8}, rng);
    s.err("grad/cross_mha", 1e-5,
          max_rel_grad_error([&] { return weighted_loss(cross_mha(x, xkv, p), w); },
                             params, opt));
  }

  s.expect_throw("mhsa_mask_shape_error", [&] {
    Rng r(1);
    AttentionParams p = AttentionParams::init(4, 1, r);
    Tensor x = Tensor::zeros({3, 4});
    Tensor mask = Tensor::zeros({2, 2});
    (void)mhsa(x, p, &mask);
  });
  s.expect_throw("attention_head_width_error", [&] {
    Rng r(1);
    AttentionParams p = AttentionParams::init(4, 2, r);
    p.wq[0] = Tensor::zeros({4, 3});
    Tensor x = Tensor::zeros({3, 4});
    (void)mhsa(x, p);
  });
}

// ---- feedforward suite ----

void feedforward_suite(std::vector<CheckResult>& out) {
  Suite s{"feedforward", &out};
  Rng rng(13);

  {  // count == allocated scalars, 50 random configs
    bool ok = true;
    for (int trial = 0; trial < 50 && ok; ++trial) {
      const int d = 2 + static_cast<int>(rng.bits() % 24);
      const int d_ff = 2 + static_cast<int>(rng.bits() % 48);
      const int d_bn = 1 + static_cast<int>(rng.bits() % std::min(d, d_ff));
      FfnParams f = FfnParams::init(d, d_ff, rng);
      LffnParams l = LffnParams::init(d, d_ff, d_bn, rng);
      const auto ffn_scalars = static_cast<std::int64_t>(f.w1.size() + f.w2.size());
      const auto lffn_scalars = static_cast<std::int64_t>(l.e1.size() + l.d1.size() +
                                                          l.e2.size() + l.d2.size());
      ok = count_params_ffn(d, d_ff) == ffn_scalars &&
           count_params_lffn(d, d_ff, d_bn) == lffn_scalars;
    }
    s.flag("count_matches_allocation", ok, "50 random configs");
  }

  {  // paper-scale counting identities
    s.flag("ffn_params_256_2048", count_params_ffn(256, 2048) == 1048576);
    s.flag("lffn_params_256_2048_100", count_params_lffn(256, 2048, 100) == 460800);
    s.flag("degenerate_counts",
           count_params_ffn(1, 1) == 2 && count_params_lffn(1, 1, 1) == 4);
    double ratio = static_cast<double>(count_params_lffn(256, 2048, 100)) /
                   static_cast<double>(count_params_ffn(256, 2048));
    s.err("lffn_over_ffn_ratio", 0.005, std::abs(ratio - 0.44), "expect about 0.44");
  }

  {  // affinity of the lffn count in d_bn
    const std::int64_t slope = 2LL * (256 + 2048);
    bool affine = true;
    for (int d_bn : {50, 75, 100, 125})
      affine = affine &&
               count_params_lffn(256, 2048, d_bn) == slope * d_bn;
    s.flag("lffn_count_affine_in_dbn", affine, "slope 2(d+d_ff) = 4608");
  }

  {  // zero input maps to zero
    FfnParams f = FfnParams::init(6, 12, rng);
    LffnParams l = LffnParams::init(6, 12, 3, rng);
    Tensor x = Tensor::zeros({4, 6});
    s.err("ffn_zero_input", 0.0, max_abs_diff(ffn(x, f), Tensor::zeros({4, 6})));
    s.err("lffn_zero_input", 0.0, max_abs_diff(lffn(x, l), Tensor::zeros({4, 6})));
  }

  {  // expressivity: with d_bn = d_ff the factorization reproduces ffn exactly
    const int d = 6, d_ff = 10;
    FfnParams f = FfnParams::init(d, d_ff, rng);
    LffnParams l;
    l.e1 = f.w1;
    l.d1 = Tensor::zeros({d_ff, d_ff});
    for (int i = 0; i < d_ff; ++i) l.d1(i, i) = 1.0;
    l.e2 = Tensor::zeros({d_ff, d_ff});
    for (int i = 0; i < d_ff; ++i) l.e2(i, i) = 1.0;
    l.d2 = f.w2;
    Tensor x = random_tensor({5, d}, rng);
    s.err("lffn_expressivity_dbn_eq_dff", 1e-12, max_rel_diff(lffn(x, l), ffn(x, f)));
  }

  {  // ffn against a scalar-loop evaluation
    const int d = 3, d_ff = 4;
    FfnParams f = FfnParams::init(d, d_ff, rng);
    Tensor x = random_tensor({2, d}, rng);
    Tensor expect({2, d});
    for (int i = 0; i < 2; ++i) {
      std::vector<double> hidden(d_ff, 0.0);
      for (int j = 0; j < d_ff; ++j) {
        double acc = 0.0;
        for (int c = 0; c < d; ++c) acc += x(i, c) * f.w1(c, j);
        hidden[j] = acc / (1.0 + std::exp(-acc));
      }
      for (int o = 0; o < d; ++o) {
        double acc = 0.0;
        for (int j = 0; j < d_ff; ++j) acc += hidden[j] * f.w2(j, o);
        expect(i, o) = acc;
      }
    }
    s.err("ffn_vs_scalar_loop", 1e-13, max_rel_diff(ffn(x, f), expect));
  }

  {  // gradients for all four lffn factors (and ffn weights)
    LffnParams l = LffnParams::init(5, 8, 3, rng);
    FfnParams f = FfnParams::init(5, 8, rng);
    Tensor x = random_tensor({4, 5}, rng), w = random_tensor({4, 5}, rng);
    s.err("grad/lffn", 1e-5,
          max_rel_grad_error([&] { return weighted_loss(lffn(x, l), w); },
                             {&x, &l.e1, &l.d1, &l.e2, &l.d2}, {}));
    s.err("grad/ffn", 1e-5,
          max_rel_grad_error([&] { return weighted_loss(ffn(x, f), w); },
                             {&x, &f.w1, &f.w2}, {}));
  }

  {  // flops formulas
    s.flag("flops_linear_in_dbn",
           count_flops_lffn(256, 2048, 100, 1) == 2 * count_flops_lffn(256, 2048, 50, 1));
    s.flag("flops_ffn_formula", count_flops_ffn(256, 2048, 3) == 3LL * 2 * 256 * 2048);
  }

  {  // dropout in train mode is active and seeded-deterministic
    FfnParams f = FfnParams::init(4, 8, rng);
    Tensor x = random_tensor({3, 4}, rng);
    Runtime rt1 = Runtime::train_mode(0.5, 99);
    Runtime rt2 = Runtime::train_mode(0.5, 99);
    Tensor y1 = ffn(x, f, rt1);
    Tensor y2 = ffn(x, f, rt2);
    Tensor ye = ffn(x, f);
    s.flag("dropout_seeded_deterministic", bits_equal(y1, y2));
    s.flag("dropout_changes_train_output", max_abs_diff(y1, ye) > 1e-9);
  }
}

// ---- encoder suite ----

void encoder_suite(std::vector<CheckResult>& out) {
  Suite s{"encoder", &out};
  Rng rng(19);

  {  // conv module zero preservation and shape contract
    ConvModuleParams p = ConvModuleParams::init(4, 3, rng);
    for (int t : {1, 2, 5}) {
      Tensor y = conv_module(Tensor::zeros({t, 4}), p);
      s.err("conv_module_zero_T" + std::to_string(t), 0.0,
            max_abs_diff(y, Tensor::zeros({t, 4})));
    }
  }

  {  // k_conv = 1 degenerates the depthwise stage to per-channel scaling
    ConvModuleParams p = ConvModuleParams::init(2, 1, rng);
    Tensor x = random_tensor({3, 2}, rng);
    // scalar pipeline: pointwise -> glu -> depthwise(k=1) -> bn(0,1) -> swish -> pointwise
    Tensor expect({3, 2});
    for (int i = 0; i < 3; ++i) {
      double mid[2];
      for (int j = 0; j < 2; ++j) {
        double a = 0.0, b = 0.0;
        for (int c = 0; c < 2; ++c) {
          a += x(i, c) * p.pointwise_in(c, j);
          b += x(i, c) * p.pointwise_in(c, j + 2);
        }
        double glu_out = a / (1.0 + std::exp(-b));
        double dw = glu_out * p.depthwise(j, 0);
        double bn = (dw - p.bn_mean(j)) / std::sqrt(p.bn_var(j) + 1e-5) * p.bn_gain(j) +
                    p.bn_bias(j);
        mid[j] = bn / (1.0 + std::exp(-bn));
      }
      for (int o = 0; o < 2; ++o) {
        double acc = 0.0;
        for (int j = 0; j < 2; ++j) acc += mid[j] * p.pointwise_out(j, o);
        expect(i, o) = acc;
      }
    }
    s.err("conv_module_k1_vs_scalar_loop", 1e-13,
          max_rel_diff(conv_module(x, p), expect));
  }

  {  // zero weights collapse the whole block to layernorm(x)
    BlockParams b = BlockParams::init(6, 8, 2, 2, 3, true, true, true, rng);
    auto zero = [](Tensor& t) { t = Tensor::zeros(t.shape()); };
    for (auto& group : {&b.att.wq, &b.att.wk, &b.att.wv})
      for (auto& w : *group) zero(w);
    zero(b.att.wo);
    zero(b.conv.pointwise_in);
    zero(b.conv.depthwise);
    zero(b.conv.pointwise_out);
    for (auto* ff : {&b.ffn_a, &b.ffn_b}) {
      zero(ff->low_rank->e1);
      zero(ff->low_rank->d1);
      zero(ff->low_rank->e2);
      zero(ff->low_rank->d2);
    }
    Tensor x = random_tensor({4, 6}, rng);
    s.err("zero_weight_collapse", 1e-13,
          max_rel_diff(encoder_block(x, b),
                       layernorm(x, b.ln_final_gain, b.ln_final_bias)));
  }

  {  // ablation: zeroing ffn_a changes the output exactly by skipping stage one
    BlockParams b = BlockParams::init(6, 8, 2, 2, 3, true, true, true, rng);
    BlockParams b_zero = b;
    b_zero.ffn_a = FeedForward::make_low_rank(6, 8, 2, rng);
    auto zero = [](Tensor& t) { t = Tensor::zeros(t.shape()); };
    zero(b_zero.ffn_a.low_rank->e1);
    zero(b_zero.ffn_a.low_rank->d1);
    zero(b_zero.ffn_a.low_rank->e2);
    zero(b_zero.ffn_a.low_rank->d2);
    Tensor x = random_tensor({4, 6}, rng);
    // reference: run the remaining stages on x directly (x1 == x)
    Tensor att_in = layernorm(x, b.ln_att_gain, b.ln_att_bias);
    Tensor x2 = add(x, mhlsa(att_in, b.att));
    Tensor x3 = add(x2, conv_module(layernorm(x2, b.conv.ln_gain, b.conv.ln_bias), b.conv));
    Tensor x4 = add(
        x3, scale(feed_forward(layernorm(x3, b.ln_ffn_b_gain, b.ln_ffn_b_bias), b.ffn_b),
                  0.5));
    Tensor expect = layernorm(x4, b.ln_final_gain, b.ln_final_bias);
    s.err("ablation_ffn_a_pathway", 1e-13,
          max_rel_diff(encoder_block(x, b_zero), expect));
  }

  {  // stacking keeps shapes and the half-step coefficient is 0.5
    Rng r2(5);
    std::vector<BlockParams> blocks;
    for (int i = 0; i < 3; ++i)
      blocks.push_back(BlockParams::init(6, 8, 2, 2, 3, true, true, true, r2));
    Tensor h = random_tensor({5, 6}, rng);
    for (const auto& blk : blocks) h = encoder_block(h, blk);
    s.flag("stack_shape_stable", h.shape() == std::vector<int>({5, 6}));

    // Half-step check: with everything but ffn_a zeroed and norms identity,
    // prenorm off: y = layernorm(x + 0.5 * lffn(x)).
    BlockParams b = BlockParams::init(4, 6, 2, 2, 1, true, true, false, rng);
    auto zero = [](Tensor& t) { t = Tensor::zeros(t.shape()); };
    for (auto& group : {&b.att.wq, &b.att.wk, &b.att.wv})
      for (auto& w : *group) zero(w);
    zero(b.att.wo);
    zero(b.conv.pointwise_in);
    zero(b.conv.depthwise);
    zero(b.conv.pointwise_out);
    zero(b.ffn_b.low_rank->e1);
    zero(b.ffn_b.low_rank->d1);
    zero(b.ffn_b.low_rank->e2);
    zero(b.ffn_b.low_rank->d2);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor expect = layernorm(add(x, scale(lffn(x, *b.ffn_a.low_rank), 0.5)),
                              b.ln_final_gain, b.ln_final_bias);
    s.err("half_step_coefficient", 1e-13, max_rel_diff(encoder_block(x, b), expect));
  }

  {  // full block gradient, both attention kinds
    GradCheckOptions opt;
    opt.max_coords_per_param = 3;
    for (bool linear : {true, false}) {
      BlockParams b = BlockParams::init(8, 16, 4, 2, 3, linear, true, true, rng);
      Tensor x = random_tensor({5, 8}, rng), w = random_tensor({5, 8}, rng);
      std::vector<Tensor*> params = {&x,
                                     &b.ffn_a.low_rank->e1,
                                     &b.ffn_a.low_rank->d1,
                                     &b.ffn_a.low_rank->e2,
                                     &b.ffn_a.low_rank->d2,
                                     &b.att.wq[0],
                                     &b.att.wk[1],
                                     &b.att.wv[0],
                                     &b.att.wo,
                                     &b.conv.pointwise_in,
                                     &b.conv.depthwise,
                                     &b.conv.bn_gain,
                                     &b.conv.bn_bias,
                                     &b.conv.pointwise_out,
                                     &b.ffn_b.low_rank->e1,
                                     &b.ln_final_gain,
                                     &b.ln_final_bias,
                                     &b.ln_att_gain};
      s.err(std::string("grad/encoder_block_") + (linear ? "mhlsa" : "mhsa"), 1e-4,
            max_rel_grad_error([&] { return weighted_loss(encoder_block(x, b), w); },
                               params, opt),
            "T=5, d=8, H=2, d_ff=16, d_bn=4");
    }
  }

  {  // batch-statistics mode gradient
    ConvModuleParams p = ConvModuleParams::init(4, 3, rng);
    Tensor x = random_tensor({5, 4}, rng), w = random_tensor({5, 4}, rng);
    Runtime rt;
    rt.batchnorm_batch_stats = true;
    GradCheckOptions opt;
    opt.max_coords_per_param = 4;
    s.err("grad/conv_module_batch_stats", 1e-5,
          max_rel_grad_error([&] { return weighted_loss(conv_module(x, p, rt), w); },
                             {&x, &p.pointwise_in, &p.depthwise, &p.bn_gain,
                              &p.pointwise_out},
                             opt));
  }
}

// ---- frontend suite ----

void frontend_suite(std::vector<CheckResult>& out) {
  Suite s{"frontend", &out};
  Rng rng(23);

  {  // positional encoding closed forms
    Tensor p = positional_encoding(3, 8);
    double worst = 0.0;
    for (int j = 0; j < 8; ++j) worst = std::max(worst, std::abs(p(0, j) - (j % 2)));
    s.err("posenc_row0_alternating", 0.0, worst);
    s.err("posenc_p10_sin1", 0.0, std::abs(p(1, 0) - std::sin(1.0)));

    Tensor big = positional_encoding(300, 16);
    double mx = 0.0;
    for (std::size_t i = 0; i < big.size(); ++i)
      mx = std::max(mx, std::abs(big.data()[i]));
    s.flag("posenc_range", mx <= 1.0);
  }

  {  // pairwise-distinct rows up to T=512
    Tensor p = positional_encoding(512, 16);
    bool distinct = true;
    for (int i = 0; i < 512 && distinct; ++i)
      for (int j = i + 1; j < 512; ++j) {
        double d = 0.0;
        for (int c = 0; c < 16; ++c) d = std::max(d, std::abs(p(i, c) - p(j, c)));
        if (d < 1e-9) {
          distinct = false;
          break;
        }
      }
    s.flag("posenc_rows_distinct", distinct, "T=512, d_e=16");
  }

  s.expect_throw("posenc_odd_dim_error", [] { (void)positional_encoding(4, 7); });

  {  // subsampling arithmetic: formula matches the executed convolutions
    FrontendParams p = FrontendParams::init(2, 80, 8, rng);
    bool ok = true;
    for (int t_raw : {7, 8, 9, 10, 11, 15, 20, 33, 50, 101, 333}) {
      Tensor feats = random_tensor({t_raw, 80}, rng);
      Tensor y = frontend(feats, p);
      if (y.dim(0) != subsampled_length(t_raw) || y.dim(1) != 8) ok = false;
    }
    s.flag("subsample_length_formula", ok, "t in {7..333}");
    bool approx = true;
    for (int t_raw = 7; t_raw <= 2000; ++t_raw)
      if (std::abs(subsampled_length(t_raw) - t_raw / 4.0) > 2.0) approx = false;
    s.flag("subsample_quarter_rate", approx, "|T - T_raw/4| <= 2 over [7, 2000]");
    s.flag("paper_frontend_constants",
           subsampled_freq(80) == 19 && subsampled_length(7) == 1);
  }

  {  // zero conv weights: output equals the positional encoding exactly
    FrontendParams p = FrontendParams::init(2, 80, 8, rng);
    p.conv1 = Tensor::zeros(p.conv1.shape());
    Tensor feats = random_tensor({11, 80}, rng);
    Tensor y = frontend(feats, p);
    s.err("zero_frontend_equals_posenc", 0.0,
          max_abs_diff(y, positional_encoding(y.dim(0), 8)));
  }

  s.expect_throw("short_input_error", [&] {
    Rng r(1);
    FrontendParams p = FrontendParams::init(2, 80, 8, r);
    (void)frontend(Tensor::zeros({6, 80}), p);
  });

  {  // binary feature file round trip + csv reader + error paths
    const std::string path = "/tmp/lac_verify_feats.lacf";
    Tensor feats = random_tensor({9, 5}, rng);
    write_features_binary(path, feats);
    Tensor back = read_features_binary(path);
    s.err("feature_binary_roundtrip_f32", 1e-7, max_abs_diff(feats, back),
          "f32 payload quantization");

    const std::string csv = "/tmp/lac_verify_feats.csv";
    {
      std::ofstream os(csv);
      os << "1.5,2.5\n-3.0,4.25\n";
    }
    Tensor c = read_features_csv(csv);
    s.flag("feature_csv_reader",
           c.shape() == std::vector<int>({2, 2}) && c(0, 0) == 1.5 && c(1, 1) == 4.25);

    std::ofstream trunc(path, std::ios::binary);
    trunc << "LACF";
    trunc.close();
    s.expect_throw("feature_truncated_error", [&] { (void)read_features_binary(path); });
  }

  {  // frontend gradient (small channels)
    FrontendParams p = FrontendParams::init(2, 9, 4, rng);
    Tensor feats = random_tensor({9, 9}, rng);
    Tensor w = random_tensor({subsampled_length(9), 4}, rng);
    GradCheckOptions opt;
    opt.max_coords_per_param = 5;
    s.err("grad/frontend", 1e-5,
          max_rel_grad_error([&] { return weighted_loss(frontend(feats, p), w); },
                             {&p.conv1, &p.conv2, &p.embed, &p.embed_bias}, opt));
  }
}

// ---- decoder suite ----

void decoder_suite(std::vector<CheckResult>& out) {
  Suite s{"decoder", &out};
  Rng rng(29);

  {  // causality through a full decoder block is exact
    DecoderBlockParams p = DecoderBlockParams::init(8, 12, 3, 2, true, true, rng);
    Tensor enc = random_tensor({5, 8}, rng);
    Tensor y = random_tensor({4, 8}, rng);
    Tensor y_pert = Tensor::from(y.shape(),
                                 std::vector<double>(y.data(), y.data() + y.size()));
    for (int j = 0; j < 8; ++j) y_pert(3, j) -= 2.5;
    Tensor o1 = decoder_block(y, enc, p);
    Tensor o2 = decoder_block(y_pert, enc, p);
    bool exact = true;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 8; ++j)
        if (o1(i, j) != o2(i, j)) exact = false;
    s.flag("decoder_block_causality_exact", exact);
  }

  {  // model-level causality with token perturbation
    ModelConfig cfg;
    cfg.n_enc = 1;
    cfg.n_dec = 2;
    cfg.heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 12;
    cfg.d_bn = 3;
    cfg.k_conv = 3;
    cfg.vocab = 9;
    cfg.conv_channels = 2;
    Model m = Model::build(cfg, 3);
    Tensor enc = random_tensor({4, 8}, rng);
    Tensor l1 = m.decode_logits({4, 5, 6, 7}, enc);
    Tensor l2 = m.decode_logits({4, 5, 8, 7}, enc);
    bool exact = true;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 9; ++j)
        if (l1(i, j) != l2(i, j)) exact = false;
    s.flag("decode_logits_causality_exact", exact, "perturbed token at position 2");

    // each row is a log-distribution
    double worst = 0.0;
    for (int i = 0; i < l1.dim(0); ++i) {
      double sum = 0.0;
      for (int j = 0; j < l1.dim(1); ++j) sum += std::exp(l1(i, j));
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    s.err("decode_logits_log_distribution", 1e-10, worst);

    Tensor l3 = m.decode_logits({4, 5, 6, 7}, enc);
    s.flag("decode_logits_deterministic", bits_equal(l1, l3));

    s.expect_throw("decode_logits_id_range_error",
                   [&] { (void)m.decode_logits({4, 99}, enc); });
  }

  {  // V=2-style degenerate single-block check at T_y=1 against scalar loops
    DecoderBlockParams p = DecoderBlockParams::init(4, 6, 2, 1, false, true, rng);
    Tensor enc = random_tensor({1, 4}, rng);
    Tensor y = random_tensor({1, 4}, rng);
    Tensor got = decoder_block(y, enc, p);
    // self attention with one position: output row = v row (softmax over one key is 1)
    auto ln = [](const Tensor& v, const Tensor& g, const Tensor& b) {
      const int d = v.dim(1);
      double mu = 0.0;
      for (int j = 0; j < d; ++j) mu += v(0, j);
      mu /= d;
      double var = 0.0;
      for (int j = 0; j < d; ++j) var += (v(0, j) - mu) * (v(0, j) - mu);
      var /= d;
      Tensor o({1, d});
      for (int j = 0; j < d; ++j)
        o(0, j) = g(j) * (v(0, j) - mu) / std::sqrt(var + 1e-5) + b(j);
      return o;
    };
    auto single_att = [&](const Tensor& q_src, const Tensor& kv_src,
                          const AttentionParams& ap) {
      Tensor v({1, 4});
      for (int j = 0; j < 4; ++j) {
        double acc = 0.0;
        for (int c = 0; c < 4; ++c) acc += kv_src(0, c) * ap.wv[0](c, j);
        v(0, j) = acc;
      }
      (void)q_src;
      Tensor o({1, 4});
      for (int j = 0; j < 4; ++j) {
        double acc = 0.0;
        for (int c = 0; c < 4; ++c) acc += v(0, c) * ap.wo(c, j);
        o(0, j) = acc;
      }
      return o;
    };
    Tensor y1({1, 4});
    Tensor self = single_att(ln(y, p.ln_self_gain, p.ln_self_bias), ln(y, p.ln_self_gain, p.ln_self_bias), p.self_att);
    for (int j = 0; j < 4; ++j) y1(0, j) = y(0, j) + self(0, j);
    Tensor cross = single_att(ln(y1, p.ln_cross_gain, p.ln_cross_bias), enc, p.cross_att);
    Tensor y2({1, 4});
    for (int j = 0; j < 4; ++j) y2(0, j) = y1(0, j) + cross(0, j);
    Tensor ff_in = ln(y2, p.ln_ffn_gain, p.ln_ffn_bias);
    Tensor expect({1, 4});
    {
      const auto& f = *p.ffn.full;
      std::vector<double> hidden(6, 0.0);
      for (int j = 0; j < 6; ++j) {
        double acc = 0.0;
        for (int c = 0; c < 4; ++c) acc += ff_in(0, c) * f.w1(c, j);
        hidden[j] = acc / (1.0 + std::exp(-acc));
      }
      for (int o = 0; o < 4; ++o) {
        double acc = 0.0;
        for (int j = 0; j < 6; ++j) acc += hidden[j] * f.w2(j, o);
        expect(0, o) = y2(0, o) + acc;
      }
    }
    s.err("decoder_block_t1_vs_scalar_loop", 1e-12, max_rel_diff(got, expect),
          "cross attention over a single encoder position");
  }

  {  // gradient
    DecoderBlockParams p = DecoderBlockParams::init(8, 12, 3, 2, true, true, rng);
    Tensor enc = random_tensor({5, 8}, rng);
    Tensor y = random_tensor({4, 8}, rng);
    Tensor w = random_tensor({4, 8}, rng);
    GradCheckOptions opt;
    opt.max_coords_per_param = 4;
    std::vector<Tensor*> params = {&y,
                                   &enc,
                                   &p.self_att.wq[0],
                                   &p.self_att.wv[1],
                                   &p.self_att.wo,
                                   &p.cross_att.wk[0],
                                   &p.cross_att.wo,
                                   &p.ffn.low_rank->e1,
                                   &p.ffn.low_rank->d2,
                                   &p.ln_ffn_gain};
    s.err("grad/decoder_block", 1e-4,
          max_rel_grad_error([&] { return weighted_loss(decoder_block(y, enc, p), w); },
                             params, opt),
          "T_y=4, T=5, d_m=8");
  }
}

// ---- ctc suite ----

void ctc_suite(std::vector<CheckResult>& out) {
  Suite s{"ctc", &out};
  Rng rng(31);

  {  // T=1, L=1, V=2, log-uniform: single alignment 'a'
    Tensor lp = Tensor::from({1, 2}, {std::log(0.5), std::log(0.5)});
    const double loss = ctc_loss(lp, {1}, 0).item();
    s.err("single_frame_uniform", 1e-12, std::abs(loss + std::log(0.5)));
  }

  {  // exhaustive enumeration: every (T <= 6, L <= 3, V <= 4) case
    double worst = 0.0;
    int cases = 0;
    bool error_paths_ok = true;
    for (int v = 2; v <= 4; ++v)
      for (int t = 1; t <= 6; ++t) {
        // all label sequences over {1..v-1} with length 0..3
        std::vector<std::vector<int>> seqs = {{}};
        for (int len = 1; len <= 3; ++len) {
          std::vector<std::vector<int>> next;
          for (const auto& base : seqs)
            if (static_cast<int>(base.size()) == len - 1)
              for (int sym = 1; sym < v; ++sym) {
                auto ext = base;
                ext.push_back(sym);
                next.push_back(ext);
              }
          seqs.insert(seqs.end(), next.begin(), next.end());
        }
        for (const auto& labels : seqs) {
          Tensor lp = log_softmax_rows(random_tensor({t, v}, rng, -2.0, 2.0));
          const int need = std::max(ctc_min_frames(labels), 1);
          if (t < need) {
            try {
              (void)ctc_loss(lp, labels, 0);
              error_paths_ok = false;
            } catch (const std::invalid_argument&) {
            }
            continue;
          }
          const double got = ctc_loss(lp, labels, 0).item();
          const double want = oracle::ctc_loss_brute_force(lp, labels, 0);
          worst = std::max(worst, std::abs(got - want));
          ++cases;
        }
      }
    s.err("exhaustive_vs_brute_force", 1e-10, worst,
          std::to_string(cases) + " alignable cases");
    s.flag("unalignable_cases_error", error_paths_ok);
  }

  {  // T=2, L=1: alignments {aa, a-, -a}
    Tensor lp = log_softmax_rows(random_tensor({2, 3}, rng));
    const double loss = ctc_loss(lp, {2}, 0).item();
    const double p_aa = std::exp(lp(0, 2) + lp(1, 2));
    const double p_ab = std::exp(lp(0, 2) + lp(1, 0));
    const double p_ba = std::exp(lp(0, 0) + lp(1, 2));
    s.err("two_frame_enumeration", 1e-12, std::abs(loss + std::log(p_aa + p_ab + p_ba)));
  }

  {  // gradient vs finite differences
    Tensor x = random_tensor({5, 4}, rng);
    s.err("grad/ctc_loss", 1e-5,
          max_rel_grad_error(
              [&] { return ctc_loss(log_softmax_rows(x), {1, 2}, 0); }, {&x}, {}),
          "T=5, V=4, labels {1,2}");
  }

  {  // appending a certain-blank frame leaves the loss unchanged
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      Tensor lp = log_softmax_rows(random_tensor({4, 3}, rng));
      const std::vector<int> labels = {1, 2};
      Tensor ext({5, 3});
      for (int t = 0; t < 4; ++t)
        for (int v = 0; v < 3; ++v) ext(t, v) = lp(t, v);
      ext(4, 0) = 0.0;
      ext(4, 1) = -700.0;
      ext(4, 2) = -700.0;
      worst = std::max(worst, std::abs(ctc_loss(lp, labels, 0).item() -
                                       ctc_loss(ext, labels, 0).item()));
    }
    s.err("blank_extension_invariance", 1e-10, worst);
  }

  {  // greedy decoding collapse semantics
    auto lp_for = [](const std::vector<int>& argmaxes, int v) {
      Tensor lp({static_cast<int>(argmaxes.size()), v});
      for (std::size_t t = 0; t < argmaxes.size(); ++t)
        for (int j = 0; j < v; ++j) lp(static_cast<int>(t), j) = j == argmaxes[t] ? -0.1 : -3.0;
      return lp;
    };
    s.flag("greedy_collapse",
           ctc_greedy_decode(lp_for({0, 1, 1, 0, 2}, 3), 0) == std::vector<int>({1, 2}));
    s.flag("greedy_all_blank",
           ctc_greedy_decode(lp_for({0, 0, 0}, 3), 0).empty());
    s.flag("greedy_blank_separated_repeat",
           ctc_greedy_decode(lp_for({1, 0, 1}, 3), 0) == std::vector<int>({1, 1}));
  }

  {  // joint combination arithmetic
    CtcConfig cfg;
    s.err("joint_loss_formula", 1e-15,
          std::abs(joint_loss(2.0, 4.0, cfg) - 2.6), "0.3*4 + 0.7*2");
    CtcConfig pure_att = cfg;
    pure_att.train_weight = 0.0;
    CtcConfig pure_ctc = cfg;
    pure_ctc.train_weight = 1.0;
    s.flag("joint_loss_extremes", joint_loss(2.0, 4.0, pure_att) == 2.0 &&
                                      joint_loss(2.0, 4.0, pure_ctc) == 4.0);
    s.err("joint_score_formula", 1e-15,
          std::abs(joint_score(-1.0, -2.0, cfg) - (0.6 * -2.0 + 0.4 * -1.0)));
    CtcConfig bad;
    bad.train_weight = 1.5;
    s.expect_throw("joint_weight_range_error", [&] { (void)joint_loss(1.0, 1.0, bad); });
  }

  s.expect_throw("labels_contain_blank_error", [&] {
    Tensor lp = Tensor::from({2, 2}, {-1.0, -1.0, -1.0, -1.0});
    (void)ctc_loss(lp, {0}, 0);
  });
  s.expect_throw("too_short_error", [&] {
    Tensor lp = Tensor::from({1, 3}, {-1.0, -1.0, -1.0});
    (void)ctc_loss(lp, {1, 2}, 0);
  });
}

// ---- model suite ----

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.n_enc = 2;
  cfg.n_dec = 1;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.d_ff = 12;
  cfg.d_bn = 3;
  cfg.k_conv = 3;
  cfg.vocab = 5;
  cfg.conv_channels = 2;
  cfg.dropout = 0.0;
  return cfg;
}

void model_suite(std::vector<CheckResult>& out) {
  Suite s{"model", &out};
  Rng rng(37);

  {  // deterministic build
    ModelConfig cfg = tiny_config();
    Model a = Model::build(cfg, 42);
    Model b = Model::build(cfg, 42);
    bool same = true;
    std::vector<const Tensor*> pa, pb;
    a.for_each_param([&](const std::string&, const Tensor& t) { pa.push_back(&t); });
    b.for_each_param([&](const std::string&, const Tensor& t) { pb.push_back(&t); });
    for (std::size_t i = 0; i < pa.size(); ++i)
      if (!bits_equal(*pa[i], *pb[i])) same = false;
    s.flag("build_deterministic", same);
  }

  {  // count equals walked scalar total; sections sum to total
    Model m = Model::build(tiny_config(), 1);
    const auto counts = m.count_params();
    std::int64_t walked = 0;
    m.for_each_param([&](const std::string&, const Tensor& t) {
      walked += static_cast<std::int64_t>(t.size());
    });
    std::int64_t section_sum = 0;
    for (const auto& [name, n] : counts.by_section) section_sum += n;
    s.flag("count_equals_walk", counts.total == walked);
    s.flag("sections_sum_to_total", section_sum == counts.total);
  }

  {  // LAC == -MHLSA+MHSA exactly; conformer differs only in ffn param names
    ModelConfig lac = tiny_config();
    ModelConfig mhsa_variant = tiny_config();
    mhsa_variant.variant = Variant::LacMhsa;
    ModelConfig conf = tiny_config();
    conf.variant = Variant::Conformer;
    const auto c_lac = Model::build(lac, 1).count_params();
    const auto c_mhsa = Model::build(mhsa_variant, 1).count_params();
    s.flag("lac_equals_mhsa_variant_exactly", c_lac.total == c_mhsa.total,
           std::to_string(c_lac.total));

    std::vector<std::string> lac_names, conf_names;
    Model::build(lac, 1).for_each_param(
        [&](const std::string& n, const Tensor&) { lac_names.push_back(n); });
    Model::build(conf, 1).for_each_param(
        [&](const std::string& n, const Tensor&) { conf_names.push_back(n); });
    bool only_ffn_differs = true;
    std::vector<std::string> sym_diff;
    for (const auto& n : lac_names)
      if (std::find(conf_names.begin(), conf_names.end(), n) == conf_names.end())
        sym_diff.push_back(n);
    for (const auto& n : conf_names)
      if (std::find(lac_names.begin(), lac_names.end(), n) == lac_names.end())
        sym_diff.push_back(n);
    for (const auto& n : sym_diff)
      if (n.find("ffn") == std::string::npos) only_ffn_differs = false;
    s.flag("conformer_structural_diff_is_ffn_only", only_ffn_differs,
           std::to_string(sym_diff.size()) + " differing names");
  }

  {  // affinity of total in d_bn at paper scale; slope reported
    ModelConfig cfg;  // paper defaults
    std::vector<std::int64_t> totals;
    for (int d_bn : {50, 75, 100, 125}) {
      cfg.d_bn = d_bn;
      totals.push_back(Model::build(cfg, 1).count_params().total);
    }
    const std::int64_t slope = (totals[1] - totals[0]) / 25;
    const bool affine = totals[1] - totals[0] == totals[2] - totals[1] &&
                        totals[2] - totals[1] == totals[3] - totals[2];
    s.flag("paper_scale_affine_in_dbn", affine,
           "slope " + std::to_string(slope) + " per unit d_bn (table-implied 115200)");
  }

  {  // checkpoint round trip and error paths
    Model m = Model::build(tiny_config(), 5);
    const std::string path = "/tmp/lac_verify_ckpt.lacc";
    m.save(path);
    Model r = Model::load(path);
    bool same = true;
    std::vector<const Tensor*> pa, pb;
    m.for_each_param([&](const std::string&, const Tensor& t) { pa.push_back(&t); });
    r.for_each_param([&](const std::string&, const Tensor& t) { pb.push_back(&t); });
    for (std::size_t i = 0; i < pa.size(); ++i)
      if (!bits_equal(*pa[i], *pb[i])) same = false;
    s.flag("checkpoint_roundtrip_bit_exact", same);
    s.flag("checkpoint_config_match", r.cfg.canonical_text() == m.cfg.canonical_text());

    {
      std::ifstream is(path, std::ios::binary);
      std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                              std::istreambuf_iterator<char>());
      bytes.resize(bytes.size() / 2);
      std::ofstream os(path + ".trunc", std::ios::binary);
      os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    s.expect_throw("checkpoint_truncated_error",
                   [&] { (void)Model::load(path + ".trunc"); });
    {
      std::ofstream os(path + ".ver", std::ios::binary);
      os << "LACC";
      const std::uint32_t bad_version = 9;
      os.write(reinterpret_cast<const char*>(&bad_version), 4);
      const std::uint32_t zero = 0;
      os.write(reinterpret_cast<const char*>(&zero), 4);
      os.write(reinterpret_cast<const char*>(&zero), 4);
    }
    s.expect_throw("checkpoint_version_error", [&] { (void)Model::load(path + ".ver"); });
  }

  {  // forward determinism and the convex-combination bound
    Model m = Model::build(tiny_config(), 7);
    Tensor feats = random_tensor({19, 80}, rng);
    const std::vector<int> tokens = {4, 4};
    auto r1 = m.forward(feats, tokens);
    auto r2 = m.forward(feats, tokens);
    s.flag("forward_deterministic", bits_equal(r1.joint, r2.joint) &&
                                        bits_equal(r1.att_nll, r2.att_nll) &&
                                        bits_equal(r1.ctc_nll, r2.ctc_nll));
    const double att = r1.att_nll.item(), ctc = r1.ctc_nll.item(),
                 joint = r1.joint.item();
    s.flag("joint_between_components",
           joint >= std::min(att, ctc) - 1e-12 && joint <= std::max(att, ctc) + 1e-12);
    s.expect_throw("forward_bad_token_error",
                   [&] { (void)m.forward(feats, std::vector<int>{99}); });
  }

  {  // config validation and text round trip
    ModelConfig cfg = tiny_config();
    ModelConfig parsed = ModelConfig::parse_text(cfg.canonical_text());
    s.flag("config_text_roundtrip", parsed.canonical_text() == cfg.canonical_text());
    ModelConfig bad = cfg;
    bad.d_bn = 99;  // >= d_model
    bad.heads = 3;  // does not divide d_model
    bool threw = false;
    std::string msg;
    try {
      bad.validate();
    } catch (const std::exception& e) {
      threw = true;
      msg = e.what();
    }
    s.flag("config_error_lists_all", threw && msg.find("d_bn") != std::string::npos &&
                                         msg.find("divisible") != std::string::npos);
  }

  {  // end-to-end gradient on the tiny model
    ModelConfig cfg = tiny_config();
    Model m = Model::build(cfg, 11);
    Tensor feats = random_tensor({11, 80}, rng, -0.5, 0.5);
    const std::vector<int> tokens = {4};
    std::vector<Tensor*> params;
    m.for_each_param([&](const std::string& name, Tensor& t) {
      // skip bn running stats: constants in eval mode but var also must stay positive
      if (name.find("bn.var") != std::string::npos) return;
      params.push_back(&t);
    });
    // thin out: every 3rd tensor to keep runtime sane, always keeping a few
    std::vector<Tensor*> chosen;
    for (std::size_t i = 0; i < params.size(); i += 3) chosen.push_back(params[i]);
    GradCheckOptions opt;
    opt.max_coords_per_param = 2;
    opt.step = 1e-5;
    const double err = max_rel_grad_error(
        [&] {
          auto r = m.forward(feats, tokens);
          return r.joint;
        },
        chosen, opt);
    s.err("grad/end_to_end_tiny", 1e-3, err,
          std::to_string(chosen.size()) + " parameter tensors sampled");
  }
}

void bench_suite(std::vector<CheckResult>& out) {
  Suite s{"bench", &out};

  {  // flop counter identities
    const int dm = 256, h = 4;
    bool linear_ok = true;
    for (std::int64_t t : {256LL, 512LL, 1024LL, 4096LL})
      if (mhlsa_flops(2 * t, dm, h) != 2 * mhlsa_flops(t, dm, h)) linear_ok = false;
    s.flag("mhlsa_flops_exactly_linear", linear_ok);

    bool quad_ok = true;
    for (std::int64_t t : {256LL, 512LL, 1024LL}) {
      const std::int64_t d1 = mhsa_flops(2 * t, dm, h) - 2 * mhsa_flops(t, dm, h);
      const std::int64_t d2 = mhsa_flops(4 * t, dm, h) - 2 * mhsa_flops(2 * t, dm, h);
      if (d2 != 4 * d1) quad_ok = false;
    }
    s.flag("mhsa_flops_exactly_quadratic_dominant", quad_ok);

    // hand formulas at three grid points
    bool hand_ok = true;
    for (std::int64_t t : {256LL, 1024LL, 8192LL}) {
      const std::int64_t dk = dm / h;
      const std::int64_t want_mhsa =
          h * (3 * t * dm * dk + t * t * dk + 4 * t * t + t * t * dk) + t * dm * dm;
      const std::int64_t want_mhlsa =
          h * (3 * t * dm * dk + 2 * t * dk + 6 * t * dk + 2 * t * dk * dk) + t * dm * dm;
      if (mhsa_flops(t, dm, h) != want_mhsa || mhlsa_flops(t, dm, h) != want_mhlsa)
        hand_ok = false;
    }
    s.flag("flops_match_hand_formulas", hand_ok);
  }

  {  // workspace instrumentation behaves: linear growth for mhlsa, TxT for mhsa
    Rng rng(3);
    AttentionParams p = AttentionParams::init(64, 4, rng);
    auto peak_of = [&](int t, bool linear) {
      Tensor x = Tensor::uniform({t, 64}, rng, -1.0, 1.0);
      workspace::reset_peak();
      const std::int64_t base = workspace::live_scalars();
      Tensor y = linear ? mhlsa(x, p) : mhsa(x, p);
      return workspace::peak_scalars() - base;
    };
    const auto lin_small = peak_of(128, true), lin_big = peak_of(256, true);
    s.err("mhlsa_workspace_ratio", 2.5,
          static_cast<double>(lin_big) / static_cast<double>(lin_small),
          "workspace(256)/workspace(128)");
    const auto quad_big = peak_of(256, false);
    s.flag("mhsa_materializes_txt", quad_big >= 2LL * 256 * 256,
           "peak " + std::to_string(quad_big) + " scalars at T=256");
  }

  {  // csv schema
    BenchResult r;
    r.records.push_back({"mhsa", 8, 100, 200, 300});
    const std::string csv = bench_csv(r);
    s.flag("csv_header",
           csv.rfind("variant,T,wall_ns,peak_workspace,flops\n", 0) == 0,
           "header row mandatory");
  }

  s.expect_throw("bench_grid_too_small_error", [] {
    BenchOptions opt;
    opt.lengths = {1, 2, 3};
    opt.validate();
  });
  s.expect_throw("bench_grid_not_ascending_error", [] {
    BenchOptions opt;
    opt.lengths = {8, 4, 16, 32, 64, 128};
    opt.validate();
  });
}

}  // namespace

std::vector<std::string> suite_names() {
  return {"tensor", "attention", "feedforward", "encoder",
          "frontend", "decoder", "ctc", "model", "bench"};
}

std::vector<CheckResult> run_suite(const std::string& selector) {
  std::vector<CheckResult> out;
  auto maybe = [&](const std::string& name, void (*fn)(std::vector<CheckResult>&)) {
    if (selector != "all" && selector != name) return;
    try {
      fn(out);
    } catch (const std::exception& e) {
      out.push_back({name, "suite_completed", 0.0, 1.0, false,
                     std::string("unexpected error: ") + e.what()});
    }
  };
  bool known = selector == "all";
  for (const auto& n : suite_names()) known = known || selector == n;
  if (!known) throw std::invalid_argument("verify: unknown suite '" + selector + "'");
  maybe("tensor", tensor_suite);
  maybe("attention", attention_suite);
  maybe("feedforward", feedforward_suite);
  maybe("encoder", encoder_suite);
  maybe("frontend", frontend_suite);
  maybe("decoder", decoder_suite);
  maybe("ctc", ctc_suite);
  maybe("model", model_suite);
  maybe("bench", bench_suite);
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (!r.pass) return false;
  return !results.empty();
}

std::string report_text(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  for (const auto& r : results) {
    os << (r.pass ? "[PASS] " : "[FAIL] ") << r.suite << '/' << r.name;
    os << "  observed=" << r.observed;
    if (r.tolerance > 0.0) os << " tolerance=" << r.tolerance;
    if (!r.detail.empty()) os << "  (" << r.detail << ')';
    os << '\n';
  }
  int failed = 0;
  for (const auto& r : results) failed += r.pass ? 0 : 1;
  os << results.size() << " checks, " << failed << " failed\n";
  return os.str();
}

std::string report_json(const std::vector<CheckResult>& results) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results)
    j.push_back({{"suite", r.suite},
                 {"check", r.name},
                 {"tolerance", r.tolerance},
                 {"observed", r.observed},
                 {"pass", r.pass},
                 {"detail", r.detail}});
  return j.dump(2);
}

}  // namespace lac::verify
