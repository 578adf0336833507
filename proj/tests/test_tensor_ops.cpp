#include <array>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

#include "aligngan/error.hpp"
#include "aligngan/ops.hpp"

using namespace aligngan;

TEST_CASE("tensor rejects zero extents and mismatched values") {
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(shape_str(t.shape()) == "(2,3)");
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
}

TEST_CASE("matmul with the identity returns the other operand") {
  Rng rng(1);
  Graph g;
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  const Tensor a = testing::random_tensor({3, 3}, rng);
  CHECK(ops::matmul(g.constant(eye), g.constant(a)).value() == a);
}

TEST_CASE("conv2d of ones sums the window") {
  Graph g;
  const Var y = ops::conv2d(g.constant(Tensor({1, 1, 3, 3}, 1.0)),
                            g.constant(Tensor({1, 1, 2, 2}, 1.0)), 1, 0);
  CHECK(y.value() == Tensor({1, 1, 2, 2}, 4.0));
}

TEST_CASE("transposed conv2d of ones tiles the kernel") {
  Graph g;
  const Var y = ops::transposed_conv2d(g.constant(Tensor({1, 1, 2, 2}, 1.0)),
                                       g.constant(Tensor({1, 1, 2, 2}, 1.0)), 2, 0);
  CHECK(y.value() == Tensor({1, 1, 4, 4}, 1.0));
}

TEST_CASE("tanh and sigmoid at zero") {
  Graph g;
  const Var z = g.constant(Tensor({2, 3}));
  CHECK(ops::tanh(z).value() == Tensor({2, 3}, 0.0));
  CHECK(ops::sigmoid(z).value() == Tensor({2, 3}, 0.5));
}

TEST_CASE("shape errors name the op and both shapes") {
  Graph g;
  const Var a = g.constant(Tensor({2, 3}));
  const Var b = g.constant(Tensor({2, 3}));
  try {
    ops::matmul(a, b);
    FAIL("matmul accepted (2,3) x (2,3)");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("(2,3)") != std::string::npos);
  }
  CHECK_THROWS_AS(ops::add(a, g.constant(Tensor({3, 2}))), ShapeError);
}

TEST_CASE("broadcasting only over the leading batch axis") {
  Graph g;
  const Var x = g.constant(Tensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}));
  const Var row = g.constant(Tensor({3}, std::vector<double>{10, 20, 30}));
  CHECK(ops::add(x, row).value() == Tensor({2, 3}, std::vector<double>{11, 22, 33, 14, 25, 36}));
  // Only a missing leading axis broadcasts.
  CHECK_THROWS_AS(ops::add(x, g.constant(Tensor({1, 3}, 1.0))), ShapeError);
  CHECK_THROWS_AS(ops::add(x, g.constant(Tensor({2, 1}, 1.0))), ShapeError);
}

TEST_CASE("slicing a concatenation recovers the parts") {
  Rng rng(3);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    Graph g;
    Shape sa{2, 3, 4}, sb{2, 3, 4};
    sb[axis] = 5;
    const Tensor a = testing::random_tensor(sa, rng), b = testing::random_tensor(sb, rng);
    const std::array<Var, 2> parts{g.constant(a), g.constant(b)};
    const Var c = ops::concat(parts, axis);
    CHECK(ops::slice(c, axis, 0, sa[axis]).value() == a);
    CHECK(ops::slice(c, axis, sa[axis], sa[axis] + sb[axis]).value() == b);
  }
}

TEST_CASE("elementwise ops match their definitions") {
  Graph g;
  const Var x = g.constant(Tensor::from({-2.0, -0.5, 0.5, 2.0}));
  CHECK(ops::leaky_relu(x, 0.2).value() == Tensor::from({-0.4, -0.1, 0.5, 2.0}));
  CHECK(ops::square(x).value() == Tensor::from({4.0, 0.25, 0.25, 4.0}));
  CHECK(ops::scale(x, 2.0).value() == Tensor::from({-4.0, -1.0, 1.0, 4.0}));
  CHECK(ops::clamp_min(x, 0.0).value() == Tensor::from({0.0, 0.0, 0.5, 2.0}));
  CHECK(ops::mean(x).value()[0] == 0.0);
  CHECK(ops::sum(ops::square(x)).value()[0] == 8.5);
  CHECK(ops::log(g.constant(Tensor::from({1.0}))).value()[0] == 0.0);
}
