#include <doctest.h>

#include <cmath>

#include "trimetric/error.hpp"
#include "trimetric/tensor.hpp"

using namespace trimetric;

TEST_CASE("zero-filled construction") {
  Tensor t({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.rank() == 3);
  CHECK(t.dim(1) == 3);
  for (std::int64_t i = 0; i < t.numel(); ++i) CHECK(t[i] == 0.0);
}

TEST_CASE("row-major chw indexing") {
  Tensor t({2, 3, 4});
  t.at(1, 2, 3) = 5.0;
  CHECK(t[1 * 12 + 2 * 4 + 3] == 5.0);
  t.at(0, 0, 1) = 7.0;
  CHECK(t[1] == 7.0);
}

TEST_CASE("rank-4 indexing") {
  Tensor t({2, 3, 2, 2});
  t.at4(1, 2, 1, 0) = 9.0;
  CHECK(t[1 * 12 + 2 * 4 + 1 * 2 + 0] == 9.0);
}

TEST_CASE("data length must match shape") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  CHECK_NOTHROW(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
}

TEST_CASE("extents must be positive") {
  CHECK_THROWS_AS(Tensor({0, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, -1}), ShapeError);
  CHECK_THROWS_AS(Tensor(std::vector<int>{}), ShapeError);
}

TEST_CASE("all_finite") {
  Tensor t({3});
  CHECK(t.all_finite());
  t[1] = std::nan("");
  CHECK_FALSE(t.all_finite());
  t[1] = 0.0;
  t[2] = INFINITY;
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("shape string and helpers") {
  Tensor t({3, 250, 100});
  CHECK(t.shape_str() == "3x250x100");
  CHECK(shape_numel({3, 250, 100}) == 75000);
  t.fill(2.5);
  CHECK(t[100] == 2.5);
  Tensor u({3, 250, 100});
  CHECK(t.same_shape(u));
  CHECK_FALSE(t.same_shape(Tensor({3, 100, 250})));
}
