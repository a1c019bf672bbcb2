#include <catch2/catch_amalgamated.hpp>

#include "qdae/rng.hpp"
#include "qdae/tensor.hpp"

using namespace qdae;

TEST_CASE("matmul identity and zero") {
  Tensor eye = Tensor::from_rows({{1, 0}, {0, 1}});
  Tensor b = Tensor::from_rows({{1, 2}, {3, 4}});
  Tensor r = matmul(eye, b);
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(r[i] == b[i]);

  Tensor z = Tensor::mat(2, 2);
  Tensor rz = matmul(z, b);
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(rz[i] == 0.0f);
}

TEST_CASE("matmul 2x2 hand expansion") {
  Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  Tensor b = Tensor::from_rows({{5, 6}, {7, 8}});
  Tensor r = matmul(a, b);
  REQUIRE(r.at(0, 0) == 19.0f);
  REQUIRE(r.at(0, 1) == 22.0f);
  REQUIRE(r.at(1, 0) == 43.0f);
  REQUIRE(r.at(1, 1) == 50.0f);
}

TEST_CASE("matmul right identity leaves A unchanged") {
  SeededRng rng(7, 0);
  Tensor a = random_mat(5, 5, rng, -2.0f, 2.0f);
  Tensor eye = Tensor::mat(5, 5);
  for (std::size_t i = 0; i < 5; ++i) eye.at(i, i) = 1.0f;
  Tensor r = matmul(a, eye);
  Tensor l = matmul(eye, a);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(r[i] == a[i]);
    REQUIRE(l[i] == a[i]);
  }
}

TEST_CASE("matmul shape error") {
  Tensor a = Tensor::mat(2, 3);
  Tensor b = Tensor::mat(2, 2);
  REQUIRE_THROWS_AS(matmul(a, b), ShapeError);
  REQUIRE_THROWS_AS(matvec(a, Tensor::vec(2)), ShapeError);
}

TEST_CASE("matvec against matmul") {
  SeededRng rng(11, 0);
  Tensor a = random_mat(4, 6, rng, -1.0f, 1.0f);
  Tensor x = random_vec(6, rng, -1.0f, 1.0f);
  Tensor mv = matvec(a, x);
  Tensor xm = Tensor::mat(6, 1);
  for (std::size_t i = 0; i < 6; ++i) xm[i] = x[i];
  Tensor mm = matmul(a, xm);
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(mv[i] == mm[i]);
}

TEST_CASE("elementwise examples") {
  REQUIRE(sigmoid_scalar(0.0f) == 0.5f);
  REQUIRE(tanh_scalar(0.0f) == 0.0f);
  Tensor r = mul(Tensor::from({2, 3}), Tensor::from({4, 5}));
  REQUIRE(r[0] == 8.0f);
  REQUIRE(r[1] == 15.0f);
  Tensor s = add(Tensor::from({1, 2}), Tensor::from({3, 4}));
  REQUIRE(s[0] == 4.0f);
  REQUIRE(s[1] == 6.0f);
  REQUIRE_THROWS_AS(mul(Tensor::vec(2), Tensor::vec(3)), ShapeError);
}

TEST_CASE("sigmoid and tanh stay inside open intervals") {
  for (float x : {-1000.0f, -88.0f, -20.0f, 0.0f, 20.0f, 88.0f, 1000.0f}) {
    const float s = sigmoid_scalar(x);
    REQUIRE(s > 0.0f);
    REQUIRE(s < 1.0f);
    const float t = tanh_scalar(x);
    REQUIRE(t > -1.0f);
    REQUIRE(t < 1.0f);
  }
}

TEST_CASE("operations are deterministic") {
  SeededRng rng(3, 9);
  Tensor a = random_mat(8, 8, rng, -3.0f, 3.0f);
  Tensor b = random_mat(8, 8, rng, -3.0f, 3.0f);
  Tensor r1 = matmul(a, b);
  Tensor r2 = matmul(a, b);
  for (std::size_t i = 0; i < r1.size(); ++i) REQUIRE(r1[i] == r2[i]);
  Tensor s1 = sigmoid(a);
  Tensor s2 = sigmoid(a);
  for (std::size_t i = 0; i < s1.size(); ++i) REQUIRE(s1[i] == s2[i]);
}

TEST_CASE("seeded rng reproducibility and stream separation") {
  SeededRng a(42, 1), b(42, 1), c(42, 2);
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    std::uint64_t va = a.next_u64();
    REQUIRE(va == b.next_u64());
    if (va != c.next_u64()) any_diff = true;
  }
  REQUIRE(any_diff);

  SeededRng u(0, 0);
  for (int i = 0; i < 1000; ++i) {
    double v = u.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("rng shuffle is deterministic") {
  std::vector<int> v1(20), v2(20);
  for (int i = 0; i < 20; ++i) v1[i] = v2[i] = i;
  SeededRng r1(5, 100), r2(5, 100);
  r1.shuffle(v1);
  r2.shuffle(v2);
  REQUIRE(v1 == v2);
  bool moved = false;
  for (int i = 0; i < 20; ++i) moved |= v1[i] != i;
  REQUIRE(moved);
}

TEST_CASE("concat and reductions") {
  Tensor c = concat(Tensor::from({1, 2}), Tensor::from({3}));
  REQUIRE(c.size() == 3);
  REQUIRE(c[2] == 3.0f);
  REQUIRE(min_value(c) == 1.0f);
  REQUIRE(max_value(c) == 3.0f);
  REQUIRE_THROWS_AS(min_value(Tensor::vec(0)), ArgumentError);
}
