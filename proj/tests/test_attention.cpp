#include <doctest.h>

#include <cmath>

#include "lac/attention.hpp"
#include "lac/verify.hpp"

using namespace lac;

namespace {
double max_rel(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, verify::rel_err(a.data()[i], b.data()[i]));
  return m;
}
}  // namespace

TEST_SUITE_BEGIN("attention");

TEST_CASE("mhsa with a single position projects values only") {
  Rng rng(1);
  AttentionParams p = AttentionParams::init(6, 2, rng);
  Tensor x = Tensor::uniform({1, 6}, rng, -1, 1);
  Tensor got = mhsa(x, p);
  Tensor expect = matmul(concat_cols({matmul(x, p.wv[0]), matmul(x, p.wv[1])}), p.wo);
  CHECK(max_rel(got, expect) < 1e-14);
}

TEST_CASE("zero queries give uniform attention over value rows") {
  Rng rng(2);
  AttentionParams p = AttentionParams::init(4, 1, rng);
  p.wq[0] = Tensor::zeros({4, 4});
  Tensor x = Tensor::uniform({5, 4}, rng, -1, 1);
  Tensor v = matmul(x, p.wv[0]);
  Tensor mean({5, 4});
  for (int j = 0; j < 4; ++j) {
    double acc = 0.0;
    for (int i = 0; i < 5; ++i) acc += v(i, j);
    for (int i = 0; i < 5; ++i) mean(i, j) = acc / 5.0;
  }
  CHECK(max_rel(mhsa(x, p), matmul(mean, p.wo)) < 1e-12);
}

TEST_CASE("mhsa matches the scalar-loop reference") {
  Rng rng(3);
  AttentionParams p = AttentionParams::init(8, 2, rng);
  Tensor x = Tensor::uniform({8, 8}, rng, -1, 1);
  CHECK(max_rel(mhsa(x, p), verify::oracle::mhsa(x, p)) < 1e-12);
}

TEST_CASE("linear attention with one position returns the value row") {
  Rng rng(4);
  Tensor q = Tensor::uniform({1, 5}, rng, -1, 1);
  Tensor k = Tensor::uniform({1, 5}, rng, -1, 1);
  Tensor v = Tensor::uniform({1, 5}, rng, -1, 1);
  Tensor z = linear_att(q, k, v);
  for (int j = 0; j < 5; ++j) CHECK(z(0, j) == doctest::Approx(v(0, j)).epsilon(1e-14));
}

TEST_CASE("reordering equivalence against the materialized route") {
  Rng rng(5);
  Tensor q = Tensor::uniform({64, 16}, rng, -1, 1);
  Tensor k = Tensor::uniform({64, 16}, rng, -1, 1);
  Tensor v = Tensor::uniform({64, 16}, rng, -1, 1);
  CHECK(max_rel(linear_att(q, k, v), verify::oracle::linear_att_full_matrix(q, k, v)) <
        1e-10);
}

TEST_CASE("constant value rows pass through linear attention") {
  Rng rng(6);
  Tensor q = Tensor::uniform({7, 3}, rng, -1, 1);
  Tensor k = Tensor::uniform({7, 3}, rng, -1, 1);
  Tensor v({7, 3});
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 3; ++j) v(i, j) = 1.5 * j - 0.7;
  Tensor z = linear_att(q, k, v);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 3; ++j) CHECK(z(i, j) == doctest::Approx(v(0, j)).epsilon(1e-12));
}

TEST_CASE("mhlsa at T=1 reduces to the mhsa result") {
  Rng rng(7);
  AttentionParams p = AttentionParams::init(8, 4, rng);
  Tensor x = Tensor::uniform({1, 8}, rng, -1, 1);
  CHECK(max_rel(mhlsa(x, p), mhsa(x, p)) < 1e-12);
}

TEST_CASE("mhlsa workspace stays far below TxT") {
  Rng rng(8);
  AttentionParams p = AttentionParams::init(64, 2, rng);
  auto peak_at = [&](int t) {
    Tensor x = Tensor::uniform({t, 64}, rng, -1, 1);
    workspace::reset_peak();
    const auto base = workspace::live_scalars();
    Tensor y = mhlsa(x, p);
    return workspace::peak_scalars() - base;
  };
  const auto p1 = peak_at(512);
  const auto p2 = peak_at(1024);
  CHECK(p1 < 512LL * 512LL);                // never a TxT buffer
  CHECK(static_cast<double>(p2) / static_cast<double>(p1) < 2.5);  // linear growth
}

TEST_CASE("masked attention: position 0 equals the single-position case") {
  Rng rng(9);
  AttentionParams p = AttentionParams::init(6, 3, rng);
  Tensor x = Tensor::uniform({5, 6}, rng, -1, 1);
  Tensor masked = masked_mhsa(x, p);
  Tensor first = mhsa(slice_rows(x, 0, 1), p);
  for (int j = 0; j < 6; ++j)
    CHECK(masked(0, j) == doctest::Approx(first(0, j)).epsilon(1e-14));
}

TEST_CASE("masked attention is exactly invariant to future perturbations") {
  Rng rng(10);
  AttentionParams p = AttentionParams::init(8, 2, rng);
  Tensor x = Tensor::uniform({6, 8}, rng, -1, 1);
  Tensor y1 = masked_mhsa(x, p);
  Tensor x2 = Tensor::from(x.shape(), std::vector<double>(x.data(), x.data() + x.size()));
  for (int j = 0; j < 8; ++j) x2(4, j) += 10.0;
  Tensor y2 = masked_mhsa(x2, p);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 8; ++j) CHECK(y1(i, j) == y2(i, j));
}

TEST_CASE("cross attention with one key/value row broadcasts it") {
  Rng rng(11);
  AttentionParams p = AttentionParams::init(6, 2, rng);
  Tensor xq = Tensor::uniform({4, 6}, rng, -1, 1);
  Tensor xkv = Tensor::uniform({1, 6}, rng, -1, 1);
  Tensor y = cross_mha(xq, xkv, p);
  for (int i = 1; i < 4; ++i)
    for (int j = 0; j < 6; ++j) CHECK(y(i, j) == doctest::Approx(y(0, j)).epsilon(1e-13));
}

TEST_CASE("error surfaces: masks, head shapes, empty kv") {
  Rng rng(12);
  AttentionParams p = AttentionParams::init(4, 2, rng);
  Tensor x = Tensor::uniform({3, 4}, rng, -1, 1);
  Tensor bad_mask = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(mhsa(x, p, &bad_mask), std::invalid_argument);
  CHECK_THROWS_AS(cross_mha(x, Tensor(), p), std::invalid_argument);
  CHECK_THROWS_AS(mhlsa(x, p, 9), std::invalid_argument);
  AttentionParams broken = p;
  broken.wo = Tensor::zeros({4, 3});
  CHECK_THROWS_AS(mhsa(x, broken), std::invalid_argument);
}

TEST_CASE("head count invariant d_k * H == d_m is enforced") {
  Rng rng(13);
  CHECK_THROWS_AS(AttentionParams::init(10, 4, rng), std::invalid_argument);
  AttentionParams p = AttentionParams::init(8, 2, rng);
  p.wq.pop_back();
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_SUITE_END();
