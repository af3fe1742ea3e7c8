#include <gtest/gtest.h>

#include <cmath>

#include "cgre/nn.hpp"

using namespace cgre;

TEST(Nn, XavierBoundsAndDeterminism) {
  const double bound = std::sqrt(6.0 / (50.0 + 50.0));
  Rng rng(123);
  Tensor t = xavier_init({50, 50}, rng);
  double mean = 0.0;
  for (std::size_t i = 0; i < t.numel(); ++i) {
    ASSERT_LE(std::abs(t.at(i)), bound);
    mean += t.at(i);
  }
  mean /= static_cast<double>(t.numel());
  EXPECT_LT(std::abs(mean), 0.01);

  // Same seed, bitwise-identical draw.
  Rng rng2(123);
  Tensor t2 = xavier_init({50, 50}, rng2);
  for (std::size_t i = 0; i < t.numel(); ++i)
    ASSERT_EQ(t.at(i), t2.at(i));

  // Different fan pair changes the bound.
  Rng rng3(1);
  Tensor wide = xavier_init({2, 998}, rng3);
  const double narrow_bound = std::sqrt(6.0 / 1000.0);
  for (std::size_t i = 0; i < wide.numel(); ++i)
    ASSERT_LE(std::abs(wide.at(i)), narrow_bound);

  Rng rng4(0);
  EXPECT_THROW(xavier_init({4}, rng4), ShapeError);
}

TEST(Nn, DropoutMaskSemantics) {
  Rng rng(7);
  // p = 0 gives all ones and must not consume randomness.
  const auto before = Rng(7).next_u64();
  Tensor ones = dropout_mask({4, 4}, 0.0, rng, true);
  for (std::size_t i = 0; i < ones.numel(); ++i) ASSERT_DOUBLE_EQ(ones.at(i), 1.0);
  EXPECT_EQ(rng.next_u64(), before);

  // Eval mode gives all ones regardless of p.
  Rng rng2(7);
  Tensor eval_mask = dropout_mask({8}, 0.5, rng2, false);
  for (std::size_t i = 0; i < eval_mask.numel(); ++i)
    ASSERT_DOUBLE_EQ(eval_mask.at(i), 1.0);

  // Entries are 0 or 1/(1-p); empirical mean close to 1.
  Rng rng3(99);
  Tensor m = dropout_mask({100000}, 0.5, rng3, true);
  double mean = 0.0;
  for (std::size_t i = 0; i < m.numel(); ++i) {
    ASSERT_TRUE(m.at(i) == 0.0 || m.at(i) == 2.0);
    mean += m.at(i);
  }
  mean /= static_cast<double>(m.numel());
  EXPECT_NEAR(mean, 1.0, 0.02);

  // Determinism under a fixed seed.
  Rng a(5), b(5);
  Tensor ma = dropout_mask({64}, 0.3, a, true);
  Tensor mb = dropout_mask({64}, 0.3, b, true);
  for (std::size_t i = 0; i < ma.numel(); ++i) ASSERT_EQ(ma.at(i), mb.at(i));

  Rng rng4(0);
  EXPECT_THROW(dropout_mask({2}, 1.0, rng4, true), DomainError);
  EXPECT_THROW(dropout_mask({2}, -0.1, rng4, true), DomainError);
}

TEST(Nn, SgdStepPinnedValues) {
  Tensor p = Tensor::vec({1.0, 2.0});
  Tensor g = Tensor::vec({0.5, -1.0});
  Tensor next = sgd_step(p, g, 0.1);
  EXPECT_DOUBLE_EQ(next.at(std::size_t{0}), 0.95);
  EXPECT_DOUBLE_EQ(next.at(std::size_t{1}), 2.1);

  // lr = 0 leaves parameters bitwise unchanged.
  Tensor frozen = sgd_step(p, g, 0.0);
  for (std::size_t i = 0; i < p.numel(); ++i) ASSERT_EQ(frozen.at(i), p.at(i));

  // The update is never taped and keeps the grad marking.
  p.set_requires_grad(true);
  Tensor stepped = sgd_step(p, g, 0.1);
  EXPECT_TRUE(stepped.requires_grad);
  EXPECT_FALSE(static_cast<bool>(stepped.node));

  EXPECT_THROW(sgd_step(p, Tensor::vec({1.0}), 0.1), ShapeError);

  Tensor inf_grad = Tensor::vec({std::numeric_limits<double>::infinity(), 0.0});
  EXPECT_THROW(sgd_step(p, inf_grad, 0.1), NumericError);
}

TEST(Nn, RngUniformRangeAndShuffle) {
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    double v = rng.uniform(-3.0, 5.0);
    ASSERT_GE(v, -3.0);
    ASSERT_LT(v, 5.0);
  }
  EXPECT_THROW(rng.below(0), DomainError);
  EXPECT_THROW(rng.uniform(2.0, 1.0), DomainError);

  // Shuffle is a permutation and is seed-stable.
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7};
  std::vector<int> v2 = v1;
  Rng a(3), b(3);
  a.shuffle(v1);
  b.shuffle(v2);
  EXPECT_EQ(v1, v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{1, 2, 3, 4, 5, 6, 7}));
}
