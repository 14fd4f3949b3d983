#include <cmath>
#include <limits>

#include "support.hpp"
#include "tt/counters.hpp"
#include "tt/kernels.hpp"

using namespace tt;
using tt::testing::random_shape;
using tt::testing::random_tensor;

TEST_CASE("dtype sizes") {
  CHECK(element_size(DType::Float32) == 4);
  CHECK(element_size(DType::Int8) == 1);
  CHECK(element_size(DType::Int64) == 8);
}

TEST_CASE("tensor_new") {
  Tensor t = tensor_new({1, 2, 3, 4}, {2, 2}, DType::Float32);
  CHECK(t.shape() == Shape{2, 2});
  CHECK(memory_footprint(t) == 16);
  CHECK_FALSE(t.requires_grad());
  CHECK_FALSE(t.has_grad());
  CHECK(t.at({1, 0}) == 3.0f);

  Tensor i8 = tensor_new({0}, {1}, DType::Int8);
  CHECK(memory_footprint(i8) == 1);

  CHECK_THROWS_AS(tensor_new({1, 2, 3}, {2, 2}, DType::Float32), Error);
  try {
    tensor_new({1, 2, 3}, {2, 2}, DType::Float32);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  try {
    tensor_new({128}, {1}, DType::Int8);
    FAIL("expected DTypeOverflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DTypeOverflow);
  }
  CHECK_NOTHROW(tensor_new({-128, 127}, {2}, DType::Int8));
}

TEST_CASE("memory_footprint") {
  CHECK(memory_footprint(Shape{32, 3, 224, 224}, DType::Float32) == 19267584);
  CHECK(memory_footprint(Tensor::scalar(1.0f)) == 4);
  CHECK(memory_footprint(Shape{10}, DType::Int8) == 10);

  SplitMix64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Shape s = random_shape(rng, 5, 6);
    std::size_t prod = 1;
    for (auto d : s) prod *= d;
    for (DType dt : {DType::Float32, DType::Int8, DType::Int64}) {
      CHECK(memory_footprint(s, dt) == prod * element_size(dt));
      CHECK(memory_footprint(Tensor::empty(s, dt)) == prod * element_size(dt));
    }
  }
}

TEST_CASE("broadcast_shapes") {
  CHECK(broadcast_shapes({3, 1}, {1, 4}) == Shape{3, 4});
  CHECK(broadcast_shapes({5}, {2, 5}) == Shape{2, 5});
  try {
    broadcast_shapes({3, 2}, {3, 4});
    FAIL("expected BroadcastError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BroadcastError);
    CHECK(std::string(e.what()).find("at dimension 1") != std::string::npos);
  }
}

TEST_CASE("elementwise values and IEEE semantics") {
  Tensor x = Tensor::from({3.0f}, {1});
  CHECK((x * x).item() == 9.0f);

  SplitMix64 rng(2);
  Tensor a = random_tensor({2, 2}, rng);
  Tensor z = Tensor::zeros({2, 2});
  CHECK(testing::max_abs_diff((z + a).data(), a.data()) == 0.0);

  Tensor q = Tensor::from({1.0f}, {1}) / Tensor::from({0.0f}, {1});
  CHECK(std::isinf(q.item()));
  CHECK(q.item() > 0);

  Tensor ids = Tensor::from_ids({1, 2}, {2});
  CHECK_THROWS_AS(ids + ids, Error);
}

TEST_CASE("elementwise broadcast property") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Shape a = random_shape(rng, 4, 4);
    Shape b = a;
    // Knock random extents down to 1 and drop random leading axes.
    for (auto& d : b) {
      if (rng.below(3) == 0) d = 1;
    }
    for (auto& d : a) {
      if (rng.below(3) == 0) d = 1;
    }
    b.erase(b.begin(), b.begin() + static_cast<long>(rng.below(b.size())));
    const Shape expect = broadcast_shapes(a, b);
    Tensor ta = random_tensor(a, rng), tb = random_tensor(b, rng);
    for (BinaryOp op : {BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div}) {
      CHECK(elementwise(op, ta, tb).shape() == expect);
    }
    // Oracle: explicit materialization through expand.
    Tensor ea = expand(ta, expect), eb = expand(tb, expect);
    Tensor direct = ta * tb;
    auto pa = ea.data(), pb = eb.data(), pd = direct.data();
    for (std::size_t i = 0; i < pd.size(); ++i) REQUIRE(pd[i] == pa[i] * pb[i]);
  }
}

TEST_CASE("add and mul commute bit-identically") {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Shape s = random_shape(rng, 3, 5);
    Tensor a = random_tensor(s, rng, -1e3, 1e3), b = random_tensor(s, rng, -1e3, 1e3);
    CHECK(testing::max_abs_diff((a + b).data(), (b + a).data()) == 0.0);
    CHECK(testing::max_abs_diff((a * b).data(), (b * a).data()) == 0.0);
  }
}

TEST_CASE("matmul") {
  SplitMix64 rng(5);
  CHECK(matmul(Tensor::ones({2, 3}), Tensor::ones({3, 4})).shape() == Shape{2, 4});

  Tensor eye = Tensor::zeros({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.data_mut()[i * 4] = 1.0f;
  Tensor x = random_tensor({3, 7}, rng);
  CHECK(testing::max_abs_diff(matmul(eye, x).data(), x.data()) == 0.0);

  try {
    matmul(Tensor::ones({2, 3}), Tensor::ones({4, 2}));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
    CHECK(std::string(e.what()).find("Shape mismatch: (2, 3) @ (4, 2)") != std::string::npos);
  }

  // Batched (B, m, k) @ (k, n) and (B, m, k) @ (B, k, n).
  Tensor a = random_tensor({2, 3, 4}, rng), w = random_tensor({4, 5}, rng);
  Tensor c = matmul(a, w);
  CHECK(c.shape() == Shape{2, 3, 5});
  auto oracle = testing::matmul_oracle(a.to_vector(), w.to_vector(), 6, 4, 5);
  for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(c.data()[i] == doctest::Approx(oracle[i]).epsilon(1e-5));

  Tensor b3 = random_tensor({2, 4, 5}, rng);
  Tensor c3 = matmul(a, b3);
  for (std::size_t bi = 0; bi < 2; ++bi) {
    std::vector<float> ab(a.data().begin() + bi * 12, a.data().begin() + (bi + 1) * 12);
    std::vector<float> bb(b3.data().begin() + bi * 20, b3.data().begin() + (bi + 1) * 20);
    auto o = testing::matmul_oracle(ab, bb, 3, 4, 5);
    for (std::size_t i = 0; i < 15; ++i) CHECK(c3.data()[bi * 15 + i] == doctest::Approx(o[i]).epsilon(1e-5));
  }
}

TEST_CASE("matmul against double oracle on random shapes") {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 1 + rng.below(70), k = 1 + rng.below(300), n = 1 + rng.below(70);
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    Tensor c = matmul(a, b);
    auto o = testing::matmul_oracle(a.to_vector(), b.to_vector(), m, k, n);
    double worst = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) {
      worst = std::max(worst, std::fabs(c.data()[i] - o[i]) / std::max(1.0, std::fabs(o[i])));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("parallel gemm matches the serial reference") {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + rng.below(40), k = 1 + rng.below(600), n = 1 + rng.below(100);
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    std::vector<float> fast(m * n, 1.0f), ref(m * n, 1.0f);
    const bool acc = trial % 2 == 1;
    kernels::gemm(m, n, k, a.data().data(), b.data().data(), fast.data(), acc);
    kernels::reference::gemm(m, n, k, a.data().data(), b.data().data(), ref.data(), acc);
    double worst = 0.0;
    for (std::size_t i = 0; i < fast.size(); ++i) worst = std::max(worst, double(std::fabs(fast[i] - ref[i])));
    CHECK(worst < 1e-4 * std::sqrt(double(k)));
  }
}

TEST_CASE("matmul associativity") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(6), k = 1 + rng.below(6), l = 1 + rng.below(6), n = 1 + rng.below(6);
    Tensor A = random_tensor({m, k}, rng), B = random_tensor({k, l}, rng), C = random_tensor({l, n}, rng);
    Tensor left = matmul(matmul(A, B), C), right = matmul(A, matmul(B, C));
    for (std::size_t i = 0; i < left.numel(); ++i) {
      CHECK(left.data()[i] == doctest::Approx(right.data()[i]).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("matmul MAC count") {
  reset_op_counters();
  matmul(Tensor::ones({3, 4}), Tensor::ones({4, 5}));
  CHECK(op_counters().macs == 60);
  reset_op_counters();
  matmul(Tensor::ones({2, 3, 4}), Tensor::ones({4, 5}));
  CHECK(op_counters().macs == 120);
}

TEST_CASE("reductions") {
  Tensor v = Tensor::from({1, 2, 3}, {3});
  CHECK(sum(v).item() == 6.0f);
  CHECK(sum(v).rank() == 0);
  Tensor m = Tensor::from({1, 3, 3, 5}, {2, 2});
  Tensor mean0 = mean(m, 0);
  CHECK(mean0.shape() == Shape{2});
  CHECK(mean0.data()[0] == 2.0f);
  CHECK(mean0.data()[1] == 4.0f);
  CHECK(max(Tensor::full({3, 2}, 7.5f)).item() == 7.5f);
  CHECK(max(m, 1).to_vector() == std::vector<float>{3, 5});
  try {
    sum(m, 2);
    FAIL("expected AxisOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AxisOutOfRange);
  }
}

TEST_CASE("reshape and permute") {
  Tensor t = Tensor::from({1, 2, 3, 4, 5, 6}, {2, 3});
  Tensor r = reshape(t, {3, 2});
  CHECK(r.to_vector() == t.to_vector());
  CHECK(r.shape() == Shape{3, 2});
  CHECK_THROWS_AS(reshape(t, {4, 2}), Error);

  Tensor tt = transpose(t);
  CHECK(tt.shape() == Shape{3, 2});
  CHECK(tt.to_vector() == std::vector<float>{1, 4, 2, 5, 3, 6});
  CHECK(transpose(tt).to_vector() == t.to_vector());

  try {
    permute(t, {0, 0});
    FAIL("expected InvalidPermutation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidPermutation);
  }

  SplitMix64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape s = random_shape(rng, 5, 4);
    std::vector<std::size_t> perm(s.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    Tensor x = random_tensor(s, rng);
    Tensor back = permute(permute(x, perm), inverse_permutation(perm));
    CHECK(back.shape() == s);
    CHECK(testing::max_abs_diff(back.data(), x.data()) == 0.0);
  }
}

TEST_CASE("memory stats track live buffers") {
  const auto before = memory_stats().live_bytes;
  {
    Tensor big = Tensor::zeros({1000});
    CHECK(memory_stats().live_bytes - before == 4000);
  }
  CHECK(memory_stats().live_bytes == before);
}
