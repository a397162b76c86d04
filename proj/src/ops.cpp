#include "lac/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace lac {

namespace {

constexpr double kNormEps = 1e-5;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_rank2(const Tensor& t, const char* op) {
  require(t.rank() == 2, std::string(op) + ": expected a matrix, have " + t.shape_str());
}

void check_output_finite(const Tensor& t, const char* op) {
  if (!t.all_finite())
    throw std::runtime_error(std::string(op) + ": non-finite values in output");
}

void check_input_finite(const Tensor& t, const char* op) {
  if (!t.all_finite())
    throw std::runtime_error(std::string(op) + ": non-finite values in input");
}

template <typename F>
Tensor finish(Tensor out, const char* op, bool any_tracked, F&& backprop) {
  check_output_finite(out, op);
  Tape* tape = Tape::current();
  if (!tape || !any_tracked) return out;
  auto node = std::make_shared<detail::Node>();
  node->backprop = std::forward<F>(backprop);
  tape->record(node);
  return make_tracked(std::move(out), std::move(node));
}

// ---- raw kernels (never record; used by forwards and backprop closures) ----

// C = A * B, summation over K left-to-right for every output element.
Tensor mm_nn(const Tensor& a, const Tensor& b) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (int i = 0; i < m; ++i) {
    double* ci = pc + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = pa[static_cast<std::size_t>(i) * k + kk];
      const double* bk = pb + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// C = A * B^T; A: [MxK], B: [NxK].
Tensor mm_nt(const Tensor& a, const Tensor& b) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (int i = 0; i < m; ++i) {
    const double* ai = pa + static_cast<std::size_t>(i) * k;
    double* ci = pc + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = pb + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
      ci[j] = acc;
    }
  }
  return c;
}

// C = A^T * B; A: [KxM], B: [KxN].
Tensor mm_tn(const Tensor& a, const Tensor& b) {
  const int k = a.dim(0), m = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (int kk = 0; kk < k; ++kk) {
    const double* ak = pa + static_cast<std::size_t>(kk) * m;
    const double* bk = pb + static_cast<std::size_t>(kk) * n;
    for (int i = 0; i < m; ++i) {
      const double aki = ak[i];
      double* ci = pc + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

Tensor transpose_kernel(const Tensor& x) {
  const int m = x.dim(0), n = x.dim(1);
  Tensor y({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) y(j, i) = x(i, j);
  return y;
}

Tensor ew_scale(const Tensor& x, double s) {
  Tensor y(x.shape());
  const double* px = x.data();
  double* py = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) py[i] = s * px[i];
  return y;
}

Tensor ew_mul(const Tensor& a, const Tensor& b) {
  Tensor y(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* py = y.data();
  for (std::size_t i = 0; i < a.size(); ++i) py[i] = pa[i] * pb[i];
  return y;
}

double sigmoid1(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  require(a.dim(1) == b.dim(0),
          "matmul: inner dimensions disagree: " + a.shape_str() + " x " + b.shape_str());
  Tensor out = mm_nn(a, b);
  return finish(std::move(out), "matmul", a.tracked() || b.tracked(),
                [a, b](const Tensor& g) {
                  if (a.tracked()) accumulate_grad(a, mm_nt(g, b));
                  if (b.tracked()) accumulate_grad(b, mm_tn(a, g));
                });
}

Tensor pointwise_conv(const Tensor& x, const Tensor& w) { return matmul(x, w); }

Tensor transpose(const Tensor& x) {
  check_rank2(x, "transpose");
  return finish(transpose_kernel(x), "transpose", x.tracked(), [x](const Tensor& g) {
    accumulate_grad(x, transpose_kernel(g));
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
  return finish(std::move(out), "add", a.tracked() || b.tracked(), [a, b](const Tensor& g) {
    if (a.tracked()) accumulate_grad(a, g);
    if (b.tracked()) accumulate_grad(b, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "sub: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] - pb[i];
  return finish(std::move(out), "sub", a.tracked() || b.tracked(), [a, b](const Tensor& g) {
    if (a.tracked()) accumulate_grad(a, g);
    if (b.tracked()) accumulate_grad(b, ew_scale(g, -1.0));
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "mul: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor out = ew_mul(a, b);
  return finish(std::move(out), "mul", a.tracked() || b.tracked(), [a, b](const Tensor& g) {
    if (a.tracked()) accumulate_grad(a, ew_mul(g, b));
    if (b.tracked()) accumulate_grad(b, ew_mul(g, a));
  });
}

Tensor scale(const Tensor& x, double s) {
  return finish(ew_scale(x, s), "scale", x.tracked(), [x, s](const Tensor& g) {
    accumulate_grad(x, ew_scale(g, s));
  });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  check_rank2(x, "add_row_bias");
  require(bias.rank() == 1 && bias.dim(0) == x.dim(1),
          "add_row_bias: bias " + bias.shape_str() + " does not match " + x.shape_str());
  const int t = x.dim(0), d = x.dim(1);
  Tensor out({t, d});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j) out(i, j) = x(i, j) + bias(j);
  return finish(std::move(out), "add_row_bias", x.tracked() || bias.tracked(),
                [x, bias, t, d](const Tensor& g) {
                  if (x.tracked()) accumulate_grad(x, g);
                  if (bias.tracked()) {
                    Tensor gb({d});
                    for (int i = 0; i < t; ++i)
                      for (int j = 0; j < d; ++j) gb(j) += g(i, j);
                    accumulate_grad(bias, gb);
                  }
                });
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
  return finish(std::move(out), "relu", x.tracked(), [x](const Tensor& g) {
    Tensor gx(x.shape());
    const double* px = x.data();
    const double* pg = g.data();
    double* pgx = gx.data();
    for (std::size_t i = 0; i < x.size(); ++i) pgx[i] = px[i] > 0.0 ? pg[i] : 0.0;
    accumulate_grad(x, gx);
  });
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) po[i] = sigmoid1(px[i]);
  Tensor y = out.detached();
  return finish(std::move(out), "sigmoid", x.tracked(), [x, y](const Tensor& g) {
    Tensor gx(x.shape());
    const double* py = y.data();
    const double* pg = g.data();
    double* pgx = gx.data();
    for (std::size_t i = 0; i < y.size(); ++i) pgx[i] = pg[i] * py[i] * (1.0 - py[i]);
    accumulate_grad(x, gx);
  });
}

Tensor swish(const Tensor& x) {
  Tensor out(x.shape());
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) po[i] = px[i] * sigmoid1(px[i]);
  return finish(std::move(out), "swish", x.tracked(), [x](const Tensor& g) {
    Tensor gx(x.shape());
    const double* px = x.data();
    const double* pg = g.data();
    double* pgx = gx.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = sigmoid1(px[i]);
      pgx[i] = pg[i] * (s + px[i] * s * (1.0 - s));
    }
    accumulate_grad(x, gx);
  });
}

Tensor glu(const Tensor& x) {
  check_rank2(x, "glu");
  require(x.dim(1) % 2 == 0, "glu: channel dimension must be even, have " + x.shape_str());
  const int t = x.dim(0), c = x.dim(1) / 2;
  Tensor out({t, c});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < c; ++j) out(i, j) = x(i, j) * sigmoid1(x(i, j + c));
  return finish(std::move(out), "glu", x.tracked(), [x, t, c](const Tensor& g) {
    Tensor gx(x.shape());
    for (int i = 0; i < t; ++i)
      for (int j = 0; j < c; ++j) {
        const double a = x(i, j);
        const double s = sigmoid1(x(i, j + c));
        gx(i, j) = g(i, j) * s;
        gx(i, j + c) = g(i, j) * a * s * (1.0 - s);
      }
    accumulate_grad(x, gx);
  });
}

namespace {

// Shared row-softmax; when mask != nullptr entries with mask==0 are excluded
// from max/sum and get weight exactly 0.
Tensor softmax_rows_impl(const Tensor& x, const Tensor* mask) {
  const int m = x.dim(0), n = x.dim(1);
  Tensor y({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = -1e300;
    bool any = false;
    for (int j = 0; j < n; ++j) {
      if (mask && (*mask)(i, j) == 0.0) continue;
      any = true;
      if (x(i, j) > mx) mx = x(i, j);
    }
    if (!any) throw std::invalid_argument("softmax: row " + std::to_string(i) +
                                          " is fully masked");
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (mask && (*mask)(i, j) == 0.0) continue;
      y(i, j) = std::exp(x(i, j) - mx);
      sum += y(i, j);
    }
    for (int j = 0; j < n; ++j) {
      if (mask && (*mask)(i, j) == 0.0)
        y(i, j) = 0.0;
      else
        y(i, j) /= sum;
    }
  }
  return y;
}

Tensor softmax_rows_backward(const Tensor& y, const Tensor& g) {
  const int m = y.dim(0), n = y.dim(1);
  Tensor gx({m, n});
  for (int i = 0; i < m; ++i) {
    double dot = 0.0;
    for (int j = 0; j < n; ++j) dot += g(i, j) * y(i, j);
    for (int j = 0; j < n; ++j) gx(i, j) = y(i, j) * (g(i, j) - dot);
  }
  return gx;
}

}  // namespace

Tensor softmax_rows(const Tensor& x) {
  check_rank2(x, "softmax_rows");
  check_input_finite(x, "softmax_rows");
  Tensor out = softmax_rows_impl(x, nullptr);
  Tensor y = out.detached();
  return finish(std::move(out), "softmax_rows", x.tracked(), [x, y](const Tensor& g) {
    accumulate_grad(x, softmax_rows_backward(y, g));
  });
}

Tensor softmax_rows_masked(const Tensor& x, const Tensor& mask) {
  check_rank2(x, "softmax_rows_masked");
  check_input_finite(x, "softmax_rows_masked");
  require(mask.shape() == x.shape(), "softmax_rows_masked: mask shape " + mask.shape_str() +
                                         " does not match input " + x.shape_str());
  Tensor out = softmax_rows_impl(x, &mask);
  Tensor y = out.detached();
  return finish(std::move(out), "softmax_rows_masked", x.tracked(),
                [x, y](const Tensor& g) {
                  accumulate_grad(x, softmax_rows_backward(y, g));
                });
}

Tensor softmax_cols(const Tensor& x) {
  check_rank2(x, "softmax_cols");
  check_input_finite(x, "softmax_cols");
  const int m = x.dim(0), n = x.dim(1);
  Tensor out({m, n});
  for (int j = 0; j < n; ++j) {
    double mx = x(0, j);
    for (int i = 1; i < m; ++i)
      if (x(i, j) > mx) mx = x(i, j);
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
      out(i, j) = std::exp(x(i, j) - mx);
      sum += out(i, j);
    }
    for (int i = 0; i < m; ++i) out(i, j) /= sum;
  }
  Tensor y = out.detached();
  return finish(std::move(out), "softmax_cols", x.tracked(), [x, y, m, n](const Tensor& g) {
    Tensor gx({m, n});
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int i = 0; i < m; ++i) dot += g(i, j) * y(i, j);
      for (int i = 0; i < m; ++i) gx(i, j) = y(i, j) * (g(i, j) - dot);
    }
    accumulate_grad(x, gx);
  });
}

Tensor log_softmax_rows(const Tensor& x) {
  check_rank2(x, "log_softmax_rows");
  check_input_finite(x, "log_softmax_rows");
  const int m = x.dim(0), n = x.dim(1);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = x(i, 0);
    for (int j = 1; j < n; ++j)
      if (x(i, j) > mx) mx = x(i, j);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += std::exp(x(i, j) - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < n; ++j) out(i, j) = x(i, j) - lse;
  }
  Tensor y = out.detached();
  return finish(std::move(out), "log_softmax_rows", x.tracked(),
                [x, y, m, n](const Tensor& g) {
                  Tensor gx({m, n});
                  for (int i = 0; i < m; ++i) {
                    double gsum = 0.0;
                    for (int j = 0; j < n; ++j) gsum += g(i, j);
                    for (int j = 0; j < n; ++j)
                      gx(i, j) = g(i, j) - std::exp(y(i, j)) * gsum;
                  }
                  accumulate_grad(x, gx);
                });
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  check_rank2(x, "layernorm");
  const int t = x.dim(0), d = x.dim(1);
  require(d >= 2, "layernorm: feature width must be >= 2, have " + x.shape_str());
  require(gain.rank() == 1 && gain.dim(0) == d && bias.rank() == 1 && bias.dim(0) == d,
          "layernorm: affine params " + gain.shape_str() + "/" + bias.shape_str() +
              " do not match " + x.shape_str());
  Tensor out({t, d});
  for (int i = 0; i < t; ++i) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += x(i, j);
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = x(i, j) - mu;
      var += c * c;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    for (int j = 0; j < d; ++j) out(i, j) = gain(j) * ((x(i, j) - mu) * inv) + bias(j);
  }
  return finish(std::move(out), "layernorm",
                x.tracked() || gain.tracked() || bias.tracked(),
                [x, gain, bias, t, d](const Tensor& g) {
                  Tensor gx({t, d}), ggain({d}), gbias({d});
                  for (int i = 0; i < t; ++i) {
                    double mu = 0.0;
                    for (int j = 0; j < d; ++j) mu += x(i, j);
                    mu /= d;
                    double var = 0.0;
                    for (int j = 0; j < d; ++j) {
                      const double c = x(i, j) - mu;
                      var += c * c;
                    }
                    var /= d;
                    const double inv = 1.0 / std::sqrt(var + kNormEps);
                    double m1 = 0.0, m2 = 0.0;
                    for (int j = 0; j < d; ++j) {
                      const double xh = (x(i, j) - mu) * inv;
                      const double dxh = g(i, j) * gain(j);
                      m1 += dxh;
                      m2 += dxh * xh;
                      ggain(j) += g(i, j) * xh;
                      gbias(j) += g(i, j);
                    }
                    m1 /= d;
                    m2 /= d;
                    for (int j = 0; j < d; ++j) {
                      const double xh = (x(i, j) - mu) * inv;
                      const double dxh = g(i, j) * gain(j);
                      gx(i, j) = inv * (dxh - m1 - xh * m2);
                    }
                  }
                  if (x.tracked()) accumulate_grad(x, gx);
                  if (gain.tracked()) accumulate_grad(gain, ggain);
                  if (bias.tracked()) accumulate_grad(bias, gbias);
                });
}

Tensor batchnorm_infer(const Tensor& x, const Tensor& mean, const Tensor& var,
                       const Tensor& gain, const Tensor& bias) {
  check_rank2(x, "batchnorm_infer");
  const int t = x.dim(0), c = x.dim(1);
  for (const Tensor* p : {&mean, &var, &gain, &bias})
    require(p->rank() == 1 && p->dim(0) == c,
            "batchnorm_infer: per-channel param " + p->shape_str() + " does not match " +
                x.shape_str());
  for (int j = 0; j < c; ++j)
    require(var(j) >= 0.0, "batchnorm_infer: negative variance at channel " +
                               std::to_string(j));
  Tensor out({t, c});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < c; ++j)
      out(i, j) = gain(j) * (x(i, j) - mean(j)) / std::sqrt(var(j) + kNormEps) + bias(j);
  const bool tracked = x.tracked() || mean.tracked() || var.tracked() || gain.tracked() ||
                       bias.tracked();
  return finish(std::move(out), "batchnorm_infer", tracked,
                [x, mean, var, gain, bias, t, c](const Tensor& g) {
                  Tensor gx({t, c}), gm({c}), gv({c}), gg({c}), gb({c});
                  for (int j = 0; j < c; ++j) {
                    const double inv = 1.0 / std::sqrt(var(j) + kNormEps);
                    for (int i = 0; i < t; ++i) {
                      const double xc = x(i, j) - mean(j);
                      gx(i, j) = g(i, j) * gain(j) * inv;
                      gm(j) -= g(i, j) * gain(j) * inv;
                      gv(j) += g(i, j) * gain(j) * xc * (-0.5) * inv * inv * inv;
                      gg(j) += g(i, j) * xc * inv;
                      gb(j) += g(i, j);
                    }
                  }
                  if (x.tracked()) accumulate_grad(x, gx);
                  if (mean.tracked()) accumulate_grad(mean, gm);
                  if (var.tracked()) accumulate_grad(var, gv);
                  if (gain.tracked()) accumulate_grad(gain, gg);
                  if (bias.tracked()) accumulate_grad(bias, gb);
                });
}

Tensor batchnorm_train(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  check_rank2(x, "batchnorm_train");
  const int t = x.dim(0), c = x.dim(1);
  require(t >= 2, "batchnorm_train: need at least 2 rows, have " + x.shape_str());
  require(gain.rank() == 1 && gain.dim(0) == c && bias.rank() == 1 && bias.dim(0) == c,
          "batchnorm_train: affine params do not match " + x.shape_str());
  Tensor out({t, c});
  for (int j = 0; j < c; ++j) {
    double mu = 0.0;
    for (int i = 0; i < t; ++i) mu += x(i, j);
    mu /= t;
    double var = 0.0;
    for (int i = 0; i < t; ++i) {
      const double d = x(i, j) - mu;
      var += d * d;
    }
    var /= t;
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    for (int i = 0; i < t; ++i) out(i, j) = gain(j) * ((x(i, j) - mu) * inv) + bias(j);
  }
  return finish(std::move(out), "batchnorm_train",
                x.tracked() || gain.tracked() || bias.tracked(),
                [x, gain, bias, t, c](const Tensor& g) {
                  Tensor gx({t, c}), gg({c}), gb({c});
                  for (int j = 0; j < c; ++j) {
                    double mu = 0.0;
                    for (int i = 0; i < t; ++i) mu += x(i, j);
                    mu /= t;
                    double var = 0.0;
                    for (int i = 0; i < t; ++i) {
                      const double d = x(i, j) - mu;
                      var += d * d;
                    }
                    var /= t;
                    const double inv = 1.0 / std::sqrt(var + kNormEps);
                    double m1 = 0.0, m2 = 0.0;
                    for (int i = 0; i < t; ++i) {
                      const double xh = (x(i, j) - mu) * inv;
                      const double dxh = g(i, j) * gain(j);
                      m1 += dxh;
                      m2 += dxh * xh;
                      gg(j) += g(i, j) * xh;
                      gb(j) += g(i, j);
                    }
                    m1 /= t;
                    m2 /= t;
                    for (int i = 0; i < t; ++i) {
                      const double xh = (x(i, j) - mu) * inv;
                      const double dxh = g(i, j) * gain(j);
                      gx(i, j) = inv * (dxh - m1 - xh * m2);
                    }
                  }
                  if (x.tracked()) accumulate_grad(x, gx);
                  if (gain.tracked()) accumulate_grad(gain, gg);
                  if (bias.tracked()) accumulate_grad(bias, gb);
                });
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, int stride) {
  require(x.rank() == 3, "conv2d: input must be [c_in x H x W], have " + x.shape_str());
  require(kernels.rank() == 4 && kernels.dim(2) == 3 && kernels.dim(3) == 3,
          "conv2d: kernels must be [c_out x c_in x 3 x 3], have " + kernels.shape_str());
  require(stride == 1 || stride == 2,
          "conv2d: stride must be 1 or 2, have " + std::to_string(stride));
  const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int co = kernels.dim(0);
  require(kernels.dim(1) == ci, "conv2d: kernel channels " + kernels.shape_str() +
                                    " do not match input " + x.shape_str());
  require(h >= 3 && w >= 3, "conv2d: input " + x.shape_str() +
                                " smaller than the 3x3 kernel (need H,W >= 3)");
  const int ho = (h - 3) / stride + 1;
  const int wo = (w - 3) / stride + 1;
  Tensor out({co, ho, wo});
  for (int o = 0; o < co; ++o)
    for (int p = 0; p < ho; ++p)
      for (int q = 0; q < wo; ++q) {
        double acc = 0.0;
        for (int c = 0; c < ci; ++c)
          for (int u = 0; u < 3; ++u)
            for (int v = 0; v < 3; ++v)
              acc += x(c, p * stride + u, q * stride + v) * kernels(o, c, u, v);
        out(o, p, q) = acc;
      }
  return finish(std::move(out), "conv2d", x.tracked() || kernels.tracked(),
                [x, kernels, stride, ci, co, ho, wo](const Tensor& g) {
                  Tensor gx(x.shape());
                  Tensor gk(kernels.shape());
                  for (int o = 0; o < co; ++o)
                    for (int p = 0; p < ho; ++p)
                      for (int q = 0; q < wo; ++q) {
                        const double go = g(o, p, q);
                        for (int c = 0; c < ci; ++c)
                          for (int u = 0; u < 3; ++u)
                            for (int v = 0; v < 3; ++v) {
                              gx(c, p * stride + u, q * stride + v) +=
                                  go * kernels(o, c, u, v);
                              gk(o, c, u, v) += go * x(c, p * stride + u, q * stride + v);
                            }
                      }
                  if (x.tracked()) accumulate_grad(x, gx);
                  if (kernels.tracked()) accumulate_grad(kernels, gk);
                });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel) {
  check_rank2(x, "depthwise_conv1d");
  require(kernel.rank() == 2 && kernel.dim(0) == x.dim(1),
          "depthwise_conv1d: kernel " + kernel.shape_str() + " does not match input " +
              x.shape_str());
  const int k = kernel.dim(1);
  require(k % 2 == 1, "depthwise_conv1d: kernel width must be odd, have " +
                          std::to_string(k));
  const int t = x.dim(0), c = x.dim(1), r = k / 2;
  Tensor out({t, c});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < c; ++j) {
      double acc = 0.0;
      for (int u = 0; u < k; ++u) {
        const int src = i + u - r;
        if (src >= 0 && src < t) acc += x(src, j) * kernel(j, u);
      }
      out(i, j) = acc;
    }
  return finish(std::move(out), "depthwise_conv1d", x.tracked() || kernel.tracked(),
                [x, kernel, t, c, k, r](const Tensor& g) {
                  Tensor gx({t, c});
                  Tensor gk(kernel.shape());
                  for (int i = 0; i < t; ++i)
                    for (int j = 0; j < c; ++j) {
                      const double go = g(i, j);
                      for (int u = 0; u < k; ++u) {
                        const int src = i + u - r;
                        if (src >= 0 && src < t) {
                          gx(src, j) += go * kernel(j, u);
                          gk(j, u) += go * x(src, j);
                        }
                      }
                    }
                  if (x.tracked()) accumulate_grad(x, gx);
                  if (kernel.tracked()) accumulate_grad(kernel, gk);
                });
}

Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
  Tensor out(new_shape);
  require(out.size() == x.size(), "reshape: cannot view " + x.shape_str() + " as " +
                                      shape_str(new_shape));
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) po[i] = px[i];
  return finish(std::move(out), "reshape", x.tracked(), [x](const Tensor& g) {
    Tensor gx(x.shape());
    const double* pg = g.data();
    double* pgx = gx.data();
    for (std::size_t i = 0; i < gx.size(); ++i) pgx[i] = pg[i];
    accumulate_grad(x, gx);
  });
}

Tensor flatten_time(const Tensor& x) {
  require(x.rank() == 3, "flatten_time: expected [c x T x F], have " + x.shape_str());
  const int c = x.dim(0), t = x.dim(1), f = x.dim(2);
  Tensor out({t, c * f});
  for (int i = 0; i < t; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int j = 0; j < f; ++j) out(i, ch * f + j) = x(ch, i, j);
  return finish(std::move(out), "flatten_time", x.tracked(),
                [x, c, t, f](const Tensor& g) {
                  Tensor gx(x.shape());
                  for (int i = 0; i < t; ++i)
                    for (int ch = 0; ch < c; ++ch)
                      for (int j = 0; j < f; ++j) gx(ch, i, j) = g(i, ch * f + j);
                  accumulate_grad(x, gx);
                });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  const int t = parts.front().dim(0);
  int total = 0;
  bool tracked = false;
  for (const Tensor& p : parts) {
    require(p.rank() == 2 && p.dim(0) == t,
            "concat_cols: row mismatch, expected " + std::to_string(t) + " rows, have " +
                p.shape_str());
    total += p.dim(1);
    tracked = tracked || p.tracked();
  }
  Tensor out({t, total});
  int off = 0;
  for (const Tensor& p : parts) {
    const int w = p.dim(1);
    for (int i = 0; i < t; ++i)
      for (int j = 0; j < w; ++j) out(i, off + j) = p(i, j);
    off += w;
  }
  return finish(std::move(out), "concat_cols", tracked, [parts, t](const Tensor& g) {
    int off = 0;
    for (const Tensor& p : parts) {
      const int w = p.dim(1);
      if (p.tracked()) {
        Tensor gp({t, w});
        for (int i = 0; i < t; ++i)
          for (int j = 0; j < w; ++j) gp(i, j) = g(i, off + j);
        accumulate_grad(p, gp);
      }
      off += w;
    }
  });
}

Tensor slice_cols(const Tensor& x, int start, int len) {
  check_rank2(x, "slice_cols");
  require(start >= 0 && len > 0 && start + len <= x.dim(1),
          "slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + len) +
              ") out of range for " + x.shape_str());
  const int t = x.dim(0);
  Tensor out({t, len});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < len; ++j) out(i, j) = x(i, start + j);
  return finish(std::move(out), "slice_cols", x.tracked(),
                [x, start, len, t](const Tensor& g) {
                  Tensor gx(x.shape());
                  for (int i = 0; i < t; ++i)
                    for (int j = 0; j < len; ++j) gx(i, start + j) = g(i, j);
                  accumulate_grad(x, gx);
                });
}

Tensor slice_rows(const Tensor& x, int start, int len) {
  check_rank2(x, "slice_rows");
  require(start >= 0 && len > 0 && start + len <= x.dim(0),
          "slice_rows: [" + std::to_string(start) + ", " + std::to_string(start + len) +
              ") out of range for " + x.shape_str());
  const int d = x.dim(1);
  Tensor out({len, d});
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < d; ++j) out(i, j) = x(start + i, j);
  return finish(std::move(out), "slice_rows", x.tracked(),
                [x, start, len, d](const Tensor& g) {
                  Tensor gx(x.shape());
                  for (int i = 0; i < len; ++i)
                    for (int j = 0; j < d; ++j) gx(start + i, j) = g(i, j);
                  accumulate_grad(x, gx);
                });
}

Tensor pad_rows(const Tensor& x, int total_rows, int row_offset) {
  check_rank2(x, "pad_rows");
  require(row_offset >= 0 && row_offset + x.dim(0) <= total_rows,
          "pad_rows: " + x.shape_str() + " at offset " + std::to_string(row_offset) +
              " does not fit in " + std::to_string(total_rows) + " rows");
  const int t = x.dim(0), d = x.dim(1);
  Tensor out({total_rows, d});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j) out(row_offset + i, j) = x(i, j);
  return finish(std::move(out), "pad_rows", x.tracked(),
                [x, row_offset, t, d](const Tensor& g) {
                  Tensor gx({t, d});
                  for (int i = 0; i < t; ++i)
                    for (int j = 0; j < d; ++j) gx(i, j) = g(row_offset + i, j);
                  accumulate_grad(x, gx);
                });
}

Tensor embed_rows(const Tensor& table, const std::vector<int>& ids) {
  check_rank2(table, "embed_rows");
  const int v = table.dim(0), d = table.dim(1);
  require(!ids.empty(), "embed_rows: empty id sequence");
  for (int id : ids)
    require(id >= 0 && id < v, "embed_rows: token id " + std::to_string(id) +
                                   " out of range for vocabulary of " + std::to_string(v));
  const int t = static_cast<int>(ids.size());
  Tensor out({t, d});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j) out(i, j) = table(ids[i], j);
  return finish(std::move(out), "embed_rows", table.tracked(),
                [table, ids, t, d](const Tensor& g) {
                  Tensor gt(table.shape());
                  for (int i = 0; i < t; ++i)
                    for (int j = 0; j < d; ++j) gt(ids[i], j) += g(i, j);
                  accumulate_grad(table, gt);
                });
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  const double* px = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) acc += px[i];
  return finish(Tensor::scalar(acc), "sum_all", x.tracked(), [x](const Tensor& g) {
    accumulate_grad(x, Tensor::full(x.shape(), g(0)));
  });
}

Tensor sequence_nll(const Tensor& log_probs, const std::vector<int>& targets) {
  check_rank2(log_probs, "sequence_nll");
  require(static_cast<int>(targets.size()) == log_probs.dim(0),
          "sequence_nll: " + std::to_string(targets.size()) + " targets for " +
              log_probs.shape_str());
  const int t = log_probs.dim(0), v = log_probs.dim(1);
  for (int id : targets)
    require(id >= 0 && id < v, "sequence_nll: target id " + std::to_string(id) +
                                   " out of range for vocabulary of " + std::to_string(v));
  double acc = 0.0;
  for (int i = 0; i < t; ++i) acc -= log_probs(i, targets[i]);
  return finish(Tensor::scalar(acc), "sequence_nll", log_probs.tracked(),
                [log_probs, targets, t](const Tensor& g) {
                  Tensor gx(log_probs.shape());
                  for (int i = 0; i < t; ++i) gx(i, targets[i]) = -g(0);
                  accumulate_grad(log_probs, gx);
                });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0,
          "dropout: rate must be in [0, 1), have " + std::to_string(rate));
  Tensor mask(x.shape());
  const double keep = 1.0 - rate;
  double* pm = mask.data();
  for (std::size_t i = 0; i < mask.size(); ++i)
    pm[i] = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  Tensor out = ew_mul(x, mask);
  return finish(std::move(out), "dropout", x.tracked(), [x, mask](const Tensor& g) {
    accumulate_grad(x, ew_mul(g, mask));
  });
}

Tensor causal_mask(int t) {
  require(t >= 1, "causal_mask: need T >= 1");
  Tensor m({t, t});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = 1.0;
  return m;
}

}  // namespace lac
