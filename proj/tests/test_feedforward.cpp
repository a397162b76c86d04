#include <doctest.h>

#include <cmath>

#include "lac/feedforward.hpp"
#include "lac/verify.hpp"

using namespace lac;

TEST_SUITE_BEGIN("feedforward");

TEST_CASE("zero input maps to zero through both forms") {
  Rng rng(1);
  FfnParams f = FfnParams::init(5, 9, rng);
  LffnParams l = LffnParams::init(5, 9, 2, rng);
  Tensor x = Tensor::zeros({3, 5});
  Tensor yf = ffn(x, f), yl = lffn(x, l);
  for (std::size_t i = 0; i < yf.size(); ++i) {
    CHECK(yf.data()[i] == 0.0);
    CHECK(yl.data()[i] == 0.0);
  }
}

TEST_CASE("identity-padded weights reduce ffn to elementwise swish") {
  // W1 = [I | 0] (d x d_ff), W2 = W1^T: ffn(x) == swish(x)
  const int d = 3, d_ff = 5;
  FfnParams f;
  f.w1 = Tensor::zeros({d, d_ff});
  f.w2 = Tensor::zeros({d_ff, d});
  for (int i = 0; i < d; ++i) {
    f.w1(i, i) = 1.0;
    f.w2(i, i) = 1.0;
  }
  Rng rng(2);
  Tensor x = Tensor::uniform({4, d}, rng, -2, 2);
  Tensor got = ffn(x, f);
  Tensor expect = swish(x);
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(got.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-14));
}

TEST_CASE("parameter counting formulas") {
  CHECK(count_params_ffn(256, 2048) == 1048576);
  CHECK(count_params_lffn(256, 2048, 100) == 460800);
  CHECK(count_params_ffn(1, 1) == 2);
  CHECK(count_params_lffn(1, 1, 1) == 4);
  const double ratio = 460800.0 / 1048576.0;
  CHECK(ratio == doctest::Approx(0.44).epsilon(0.01));
}

TEST_CASE("counts equal allocated scalars") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + static_cast<int>(rng.bits() % 12);
    const int d_ff = 2 + static_cast<int>(rng.bits() % 20);
    const int d_bn = 1 + static_cast<int>(rng.bits() % std::min(d, d_ff));
    FfnParams f = FfnParams::init(d, d_ff, rng);
    LffnParams l = LffnParams::init(d, d_ff, d_bn, rng);
    CHECK(count_params_ffn(d, d_ff) ==
          static_cast<std::int64_t>(f.w1.size() + f.w2.size()));
    CHECK(count_params_lffn(d, d_ff, d_bn) ==
          static_cast<std::int64_t>(l.e1.size() + l.d1.size() + l.e2.size() + l.d2.size()));
    CHECK(l.compresses());
  }
}

TEST_CASE("lffn count is affine in d_bn with slope 2(d+d_ff)") {
  const std::int64_t slope = 2 * (256 + 2048);
  std::int64_t prev = count_params_lffn(256, 2048, 50);
  for (int d_bn : {75, 100, 125}) {
    const std::int64_t cur = count_params_lffn(256, 2048, d_bn);
    CHECK(cur - prev == slope * 25);
    prev = cur;
  }
}

TEST_CASE("flops scale linearly in d_bn and T") {
  CHECK(count_flops_lffn(256, 2048, 100, 7) == 7 * count_flops_lffn(256, 2048, 100, 1));
  CHECK(count_flops_lffn(256, 2048, 100, 1) == 2 * count_flops_lffn(256, 2048, 50, 1));
  CHECK(count_flops_ffn(256, 2048, 1) == 2 * 256 * 2048);
}

TEST_CASE("with d_bn = d_ff a constructed factorization reproduces ffn") {
  Rng rng(4);
  const int d = 6, d_ff = 11;
  FfnParams f = FfnParams::init(d, d_ff, rng);
  LffnParams l;
  l.e1 = f.w1;
  l.d1 = Tensor::zeros({d_ff, d_ff});
  l.e2 = Tensor::zeros({d_ff, d_ff});
  for (int i = 0; i < d_ff; ++i) {
    l.d1(i, i) = 1.0;
    l.e2(i, i) = 1.0;
  }
  l.d2 = f.w2;
  CHECK_FALSE(l.compresses());
  Tensor x = Tensor::uniform({5, d}, rng, -1, 1);
  Tensor a = lffn(x, l), b = ffn(x, f);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(verify::rel_err(a.data()[i], b.data()[i]) < 1e-12);
}

TEST_CASE("lffn gradient for all four factors") {
  Rng rng(5);
  LffnParams l = LffnParams::init(4, 7, 2, rng);
  Tensor x = Tensor::uniform({3, 4}, rng, -1, 1);
  Tensor w = Tensor::uniform({3, 4}, rng, -1, 1);
  const double err = verify::max_rel_grad_error(
      [&] { return sum_all(mul(lffn(x, l), w)); }, {&l.e1, &l.d1, &l.e2, &l.d2}, {});
  CHECK(err < 1e-5);
}

TEST_CASE("shape validation") {
  Rng rng(6);
  LffnParams l = LffnParams::init(4, 7, 2, rng);
  l.d1 = Tensor::zeros({3, 7});
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  FfnParams f = FfnParams::init(4, 7, rng);
  f.w2 = Tensor::zeros({7, 5});
  CHECK_THROWS_AS(f.validate(), std::invalid_argument);
}

TEST_SUITE_END();
