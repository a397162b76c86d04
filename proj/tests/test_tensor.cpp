#include <doctest.h>

#include <cmath>
#include <cstring>

#include "lac/ops.hpp"
#include "lac/tape.hpp"
#include "lac/tensor.hpp"
#include "lac/verify.hpp"

using namespace lac;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul identity and scalar cases") {
  Rng rng(1);
  Tensor a = Tensor::uniform({2, 2}, rng, -2.0, 2.0);
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor p = matmul(eye, a);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(p(i, j) == a(i, j));

  Tensor one = matmul(Tensor::from({1, 1}, {2.0}), Tensor::from({1, 1}, {3.0}));
  CHECK(one.item() == 6.0);
}

TEST_CASE("matmul associativity at 8x8") {
  Rng rng(2);
  Tensor a = Tensor::uniform({8, 8}, rng, -1, 1);
  Tensor b = Tensor::uniform({8, 8}, rng, -1, 1);
  Tensor c = Tensor::uniform({8, 8}, rng, -1, 1);
  Tensor l = matmul(matmul(a, b), c);
  Tensor r = matmul(a, matmul(b, c));
  for (std::size_t i = 0; i < l.size(); ++i)
    CHECK(std::abs(l.data()[i] - r.data()[i]) <=
          1e-12 * std::max(1.0, std::abs(r.data()[i])));
}

TEST_CASE("matmul shape error names both shapes") {
  Tensor a({2, 3}), b({2, 3});
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       "matmul: inner dimensions disagree: [2x3] x [2x3]",
                       std::invalid_argument);
}

TEST_CASE("softmax_rows hand values") {
  Tensor zero = softmax_rows(Tensor::zeros({1, 4}));
  for (int j = 0; j < 4; ++j) CHECK(zero(0, j) == doctest::Approx(0.25).epsilon(1e-12));

  Tensor big = softmax_rows(Tensor::from({1, 2}, {1000.0, 1000.0}));
  CHECK(big(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(big.all_finite());

  Tensor ln3 = softmax_rows(Tensor::from({1, 2}, {0.0, std::log(3.0)}));
  CHECK(ln3(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(ln3(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax_cols hand values and transpose identity") {
  Tensor single = softmax_cols(Tensor::from({1, 3}, {4.0, -2.0, 0.5}));
  for (int j = 0; j < 3; ++j) CHECK(single(0, j) == 1.0);

  Rng rng(3);
  Tensor x = Tensor::uniform({4, 5}, rng, -3, 3);
  Tensor via_rows = transpose(softmax_rows(transpose(x)));
  Tensor direct = softmax_cols(x);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(std::abs(direct.data()[i] - via_rows.data()[i]) <= 1e-15);

  Tensor col = softmax_cols(Tensor::from({3, 1}, {0.0, 0.0, std::log(2.0)}));
  CHECK(col(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(col(1, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(col(2, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("layernorm hand values") {
  Tensor gain = Tensor::full({2}, 1.0), bias = Tensor::zeros({2});
  Tensor constant = layernorm(Tensor::full({3, 2}, 4.2), gain, bias);
  for (std::size_t i = 0; i < constant.size(); ++i) CHECK(constant.data()[i] == 0.0);

  Tensor pm = layernorm(Tensor::from({1, 2}, {1.0, -1.0}), gain, bias);
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(pm(0, 0) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(pm(0, 1) == doctest::Approx(-expect).epsilon(1e-14));

  // affine application: layernorm(x, g, b) == g * layernorm(x, 1, 0) + b
  Rng rng(4);
  Tensor x = Tensor::uniform({3, 4}, rng, -2, 2);
  Tensor g = Tensor::uniform({4}, rng, 0.5, 1.5), b = Tensor::uniform({4}, rng, -1, 1);
  Tensor plain = layernorm(x, Tensor::full({4}, 1.0), Tensor::zeros({4}));
  Tensor affine = layernorm(x, g, b);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(affine(i, j) == doctest::Approx(g(j) * plain(i, j) + b(j)).epsilon(1e-13));
}

TEST_CASE("batchnorm_infer hand values") {
  Tensor mean = Tensor::zeros({2}), var = Tensor::full({2}, 1.0);
  Tensor gain = Tensor::full({2}, 1.0), bias = Tensor::zeros({2});
  Rng rng(5);
  Tensor x = Tensor::uniform({3, 2}, rng, -2, 2);
  Tensor y = batchnorm_infer(x, mean, var, gain, bias);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-5));

  Tensor at_mean = batchnorm_infer(Tensor::full({2, 2}, 3.0), Tensor::full({2}, 3.0), var,
                                   gain, Tensor::from({2}, {0.7, -0.4}));
  CHECK(at_mean(0, 0) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(at_mean(1, 1) == doctest::Approx(-0.4).epsilon(1e-14));

  Tensor scalar = batchnorm_infer(Tensor::from({1, 1}, {3.0}), Tensor::from({1}, {1.0}),
                                  Tensor::from({1}, {4.0}), Tensor::from({1}, {2.0}),
                                  Tensor::zeros({1}));
  CHECK(scalar(0, 0) == doctest::Approx(2.0 * 2.0 / std::sqrt(4.0 + 1e-5)).epsilon(1e-14));

  CHECK_THROWS_AS(batchnorm_infer(x, mean, Tensor::from({2}, {-1.0, 1.0}), gain, bias),
                  std::invalid_argument);
}

TEST_CASE("conv2d hand cases") {
  Tensor ones_in = Tensor::full({1, 3, 3}, 1.0);
  Tensor ones_k = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor y = conv2d(ones_in, ones_k, 1);
  CHECK(y.shape() == std::vector<int>({1, 1, 1}));
  CHECK(y(0, 0, 0) == 9.0);

  Tensor big = Tensor::full({1, 7, 7}, 1.0);
  CHECK(conv2d(big, ones_k, 2).shape() == std::vector<int>({1, 3, 3}));

  Rng rng(6);
  Tensor x = Tensor::uniform({1, 5, 6}, rng, -1, 1);
  Tensor delta = Tensor::zeros({1, 1, 3, 3});
  delta(0, 0, 1, 1) = 1.0;
  Tensor crop = conv2d(x, delta, 1);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) CHECK(crop(0, i, j) == x(0, i + 1, j + 1));

  CHECK_THROWS_AS(conv2d(Tensor::zeros({1, 2, 5}), ones_k, 1), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(x, ones_k, 3), std::invalid_argument);
}

TEST_CASE("depthwise, glu, swish hand cases") {
  CHECK(swish(Tensor::zeros({1, 1})).item() == 0.0);

  Rng rng(7);
  Tensor left = Tensor::uniform({2, 2}, rng, -1, 1);
  Tensor x({2, 4});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) x(i, j) = left(i, j);
  Tensor gated = glu(x);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(gated(i, j) == doctest::Approx(0.5 * left(i, j)).epsilon(1e-14));

  Tensor sig = depthwise_conv1d(Tensor::from({3, 1}, {0.0, 1.0, 0.0}),
                                Tensor::full({1, 3}, 1.0));
  CHECK(sig(0, 0) == 1.0);
  CHECK(sig(1, 0) == 1.0);
  CHECK(sig(2, 0) == 1.0);

  CHECK_THROWS_AS(depthwise_conv1d(Tensor::zeros({3, 2}), Tensor::zeros({2, 4})),
                  std::invalid_argument);
}

TEST_CASE("tape: sum gradient is ones and double backward is rejected") {
  Rng rng(8);
  Tensor x = Tensor::uniform({3, 4}, rng, -1, 1);
  Tape tape;
  tape.watch(x);
  Tensor loss = sum_all(x);
  tape.backward(loss);
  Tensor g = x.grad();
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.data()[i] == 1.0);
  CHECK_THROWS_AS(tape.backward(loss), std::runtime_error);
}

TEST_CASE("tape: non-scalar loss rejected, untracked loss rejected") {
  Rng rng(9);
  Tensor x = Tensor::uniform({2, 2}, rng, -1, 1);
  {
    Tape tape;
    tape.watch(x);
    Tensor y = matmul(x, x);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
  }
  {
    Tape tape;
    Tensor c = Tensor::scalar(1.0);
    CHECK_THROWS_AS(tape.backward(c), std::invalid_argument);
  }
}

TEST_CASE("matmul gradient vs finite differences at 4x4") {
  Rng rng(10);
  Tensor a = Tensor::uniform({4, 4}, rng, -1, 1);
  Tensor b = Tensor::uniform({4, 4}, rng, -1, 1);
  Tensor w = Tensor::uniform({4, 4}, rng, -1, 1);
  const double err = verify::max_rel_grad_error(
      [&] { return sum_all(mul(matmul(a, b), w)); }, {&a, &b}, {});
  CHECK(err < 1e-6);
}

TEST_CASE("softmax_rows gradient vanishes under constant upstream") {
  Rng rng(11);
  Tensor x = Tensor::uniform({3, 5}, rng, -2, 2);
  Tape tape;
  tape.watch(x);
  Tensor loss = sum_all(softmax_rows(x));  // upstream gradient 1 everywhere
  tape.backward(loss);
  Tensor g = x.grad();
  for (int i = 0; i < 3; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < 5; ++j) {
      row_sum += g(i, j);
      CHECK(std::abs(g(i, j)) < 1e-14);
    }
    CHECK(std::abs(row_sum) < 1e-14);
  }
}

TEST_CASE("workspace counters track buffer lifetime") {
  const auto before = workspace::live_scalars();
  {
    Tensor t({10, 10});
    CHECK(workspace::live_scalars() == before + 100);
    workspace::reset_peak();
    Tensor u({5, 5});
    CHECK(workspace::peak_scalars() >= workspace::live_scalars());
    (void)t;
    (void)u;
  }
  CHECK(workspace::live_scalars() == before);
}

TEST_CASE("rng is deterministic and uniform stays in range") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.bits() == b.bits());
  Rng c(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
  }
}

TEST_CASE("tensor invariants: shape/data agreement and finiteness surface") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({0, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({1, 1, 1, 1, 1}), std::invalid_argument);
  Tensor inf = Tensor::from({1, 2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(softmax_rows(inf), std::runtime_error);
}

TEST_SUITE_END();
