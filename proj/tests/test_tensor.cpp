#include <gtest/gtest.h>

#include "cgre/tensor.hpp"

using namespace cgre;

TEST(Tensor, ConstructionAndLayout) {
  Tensor t = Tensor::zeros({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.ndim(), 2);
  t.at(1, 2) = 5.0;
  EXPECT_DOUBLE_EQ(t.at(std::size_t{5}), 5.0);  // row-major

  Tensor v = Tensor::vec({1, 2, 3});
  EXPECT_EQ(v.shape, (std::vector<int>{3}));

  Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_DOUBLE_EQ(m.at(1, 0), 3.0);

  EXPECT_THROW(Tensor::zeros({0, 3}), ShapeError);
  EXPECT_THROW(Tensor::zeros({}), ShapeError);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), ShapeError);
}

TEST(Tensor, CopiesShareStorage) {
  Tensor a = Tensor::vec({1, 2});
  Tensor b = a;
  b.at(std::size_t{0}) = 7.0;
  EXPECT_DOUBLE_EQ(a.at(std::size_t{0}), 7.0);
}

TEST(Tensor, GradBufferLifecycle) {
  Tensor t = Tensor::vec({1, 2});
  EXPECT_FALSE(t.requires_grad);
  EXPECT_THROW(t.grad_view(), DomainError);
  t.set_requires_grad(true);
  ASSERT_TRUE(t.grad);
  EXPECT_EQ(t.grad->size(), 2u);
  (*t.grad)[0] = 3.0;
  t.zero_grad();
  EXPECT_DOUBLE_EQ((*t.grad)[0], 0.0);
}

TEST(Tensor, CloneDetachesStorage) {
  Tensor a = Tensor::vec({1, 2});
  a.set_requires_grad(true);
  (*a.grad)[0] = 9.0;
  Tensor c = a.clone();
  c.at(std::size_t{0}) = 5.0;
  EXPECT_DOUBLE_EQ(a.at(std::size_t{0}), 1.0);
  EXPECT_TRUE(c.requires_grad);
  EXPECT_DOUBLE_EQ((*c.grad)[0], 0.0);  // grads not copied
}

TEST(Tensor, ValueRequiresScalar) {
  EXPECT_DOUBLE_EQ(Tensor::scalar(4.5).value(), 4.5);
  EXPECT_THROW(Tensor::vec({1, 2}).value(), ShapeError);
}

TEST(Tensor, BackwardRequiresScalarTrackedLoss) {
  Tensor v = Tensor::vec({1, 2});
  v.set_requires_grad(true);
  EXPECT_THROW(backward(v), ShapeError);
  Tensor s = Tensor::scalar(1.0);
  EXPECT_THROW(backward(s), DomainError);
}
