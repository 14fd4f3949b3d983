#include <cmath>

#include "support.hpp"
#include "tt/nn.hpp"

using namespace tt;
using tt::testing::GradScope;
using tt::testing::random_param;
using tt::testing::random_shape;
using tt::testing::random_tensor;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("grad mode gates requires_grad") {
  CHECK_FALSE(grad_enabled());
  CHECK(code_of([] { tensor_new({1.0}, {1}, DType::Float32, true); }) == ErrorCode::GradModeOff);
  enable_autograd();
  enable_autograd();
  CHECK(grad_enabled());
  Tensor t = tensor_new({1.0}, {1}, DType::Float32, true);
  CHECK(t.requires_grad());
  disable_autograd();
  CHECK_FALSE(grad_enabled());
  // Earlier tensors stay usable after the switch is flipped off.
  CHECK((t * t).item() == 1.0f);
}

TEST_CASE("dy/dx of x*x at 3 is 6") {
  GradScope g;
  Tensor x = tensor_new({3.0}, {1}, DType::Float32, true);
  Tensor y = x * x;
  backward(y);
  REQUIRE(x.has_grad());
  CHECK(x.grad()->item() == 6.0f);
}

TEST_CASE("sum has an all-ones gradient") {
  GradScope g;
  SplitMix64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_param(random_shape(rng, 4, 5), rng);
    backward(sum(x));
    for (float v : x.grad()->data()) REQUIRE(v == 1.0f);
  }
}

TEST_CASE("backward errors") {
  {
    Tensor x = Tensor::from({1, 2}, {2});
    Tensor y = sum(x * x);
    GradScope g;
    CHECK(code_of([&] { backward(y); }) == ErrorCode::DisconnectedGraph);
  }
  CHECK(code_of([] { backward(Tensor::scalar(1.0f)); }) == ErrorCode::GradModeOff);
  GradScope g;
  Tensor x = tensor_new({1, 2}, {2}, DType::Float32, true);
  CHECK(code_of([&] { backward(x * x); }) == ErrorCode::BackwardFromNonScalar);
  Tensor y = sum(x * x);
  backward(y);
  CHECK(code_of([&] { backward(y); }) == ErrorCode::DisconnectedGraph);
}

TEST_CASE("zero_grad unsets and accumulation sums") {
  GradScope g;
  Tensor x = tensor_new({1, 2, 3}, {3}, DType::Float32, true);
  zero_grad({x});
  CHECK_FALSE(x.has_grad());
  backward(sum(x));
  backward(sum(x));
  for (float v : x.grad()->data()) CHECK(v == 2.0f);
  const auto live = memory_stats().live_bytes;
  zero_grad({x});
  CHECK_FALSE(x.has_grad());
  CHECK(memory_stats().live_bytes == live - 12);
}

TEST_CASE("backward twice with a retained graph doubles gradients exactly") {
  GradScope g;
  SplitMix64 rng(2);
  Tensor a = random_param({4, 3}, rng), b = random_param({3, 2}, rng);
  // Each leaf has one incoming edge, so the second pass adds the same value.
  Tensor y = sum(tanh(matmul(a, b)) * 3.0f);
  backward(y, true);
  const auto ga = a.grad()->to_vector();
  const auto gb = b.grad()->to_vector();
  backward(y);
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK(a.grad()->data()[i] == 2.0f * ga[i]);
  for (std::size_t i = 0; i < gb.size(); ++i) CHECK(b.grad()->data()[i] == 2.0f * gb[i]);
}

TEST_CASE("broadcast-backward law") {
  GradScope g;
  Tensor a = Tensor::from({1, 2, 3}, {3, 1}, true);
  Tensor b = Tensor::from({1, 2, 3, 4}, {1, 4}, true);
  backward(sum(a + b));
  CHECK(a.grad()->shape() == Shape{3, 1});
  CHECK(b.grad()->shape() == Shape{1, 4});
  for (float v : a.grad()->data()) CHECK(v == 4.0f);
  for (float v : b.grad()->data()) CHECK(v == 3.0f);
}

TEST_CASE("mixed inputs: result requires grad iff any input does") {
  GradScope g;
  Tensor a = Tensor::from({1}, {1}, true);
  Tensor c = Tensor::from({2}, {1});
  CHECK((a * c).requires_grad());
  CHECK_FALSE((c * c).requires_grad());
  backward(sum(a * c));
  CHECK(a.grad()->item() == 2.0f);
  CHECK_FALSE(c.has_grad());
}

TEST_CASE("no nodes are created with grad mode off") {
  SplitMix64 rng(3);
  Tensor a = random_tensor({5, 4}, rng), b = random_tensor({4, 3}, rng);
  const auto before = tape_stats().nodes_created;
  Tensor y = sum(softmax(relu(matmul(a, b)), 1) * sigmoid(matmul(a, b)));
  CHECK(tape_stats().nodes_created == before);
  CHECK_FALSE(y.grad_fn());
}

TEST_CASE("graph is released after backward") {
  GradScope g;
  const auto live = tape_stats().live_nodes;
  Tensor x = tensor_new({1, 2}, {2}, DType::Float32, true);
  {
    Tensor y = sum(exp(x * x));
    CHECK(tape_stats().live_nodes == live + 3);
    backward(y);
  }
  CHECK(tape_stats().live_nodes == live);
}

TEST_CASE("grad_check") {
  GradScope g;
  SplitMix64 rng(4);
  Tensor x = random_param({10}, rng);
  auto squares = grad_check([](const Tensor& t) { return sum(t * t); }, x, 1e-3f, 1e-4);
  CHECK(squares.pass);
  auto lin = grad_check([](const Tensor& t) { return sum(t); }, x, 1e-3f, 1e-4);
  CHECK(lin.pass);
  // Max at a tie: the subgradient goes to one element while the numeric
  // slope splits it.
  Tensor tie = Tensor::from({2, 2}, {2}, true);
  auto rep = grad_check([](const Tensor& t) { return max(t); }, tie, 1e-3f, 1e-4);
  CHECK_FALSE(rep.pass);
  // A wrong backward rule must be caught.
  auto wrong = [](const Tensor& t) {
    Tensor out = Tensor::scalar(sum(t * t).item());
    return record(out, "bad", {t}, {t}, [](const Node& n, const Tensor& go) {
      Tensor gr = mul_scalar(n.saved[0], 3.0f * go.item());
      return std::vector<Tensor>{gr};
    });
  };
  CHECK_FALSE(grad_check(wrong, x, 1e-3f, 1e-4).pass);
}

TEST_CASE("grad_check on tensor-core ops") {
  GradScope g;
  SplitMix64 rng(5);
  using F = std::function<Tensor(const Tensor&)>;
  Tensor other = random_tensor({3, 4}, rng, 0.5, 1.5);
  Tensor rhs = random_tensor({4, 2}, rng);
  std::vector<std::pair<const char*, F>> cases = {
      {"add", [&](const Tensor& t) { return testing::weighted_sum(t + other); }},
      {"sub", [&](const Tensor& t) { return testing::weighted_sum(other - t); }},
      {"mul", [&](const Tensor& t) { return testing::weighted_sum(t * other); }},
      {"div", [&](const Tensor& t) { return testing::weighted_sum(t / other); }},
      {"div_rhs", [&](const Tensor& t) { return testing::weighted_sum(other / add_scalar(t, 3.0f)); }},
      {"neg", [&](const Tensor& t) { return testing::weighted_sum(-t); }},
      {"matmul", [&](const Tensor& t) { return testing::weighted_sum(matmul(t, rhs)); }},
      {"sum0", [&](const Tensor& t) { return testing::weighted_sum(sum(t, 0)); }},
      {"mean1", [&](const Tensor& t) { return testing::weighted_sum(mean(t, 1)); }},
      {"mean", [&](const Tensor& t) { return mean(t); }},
      {"max1", [&](const Tensor& t) { return testing::weighted_sum(max(t, 1)); }},
      {"reshape", [&](const Tensor& t) { return testing::weighted_sum(reshape(t, {2, 6})); }},
      {"transpose", [&](const Tensor& t) { return testing::weighted_sum(transpose(t)); }},
      {"exp", [&](const Tensor& t) { return testing::weighted_sum(exp(t)); }},
      {"log", [&](const Tensor& t) { return testing::weighted_sum(log(add_scalar(t, 2.0f))); }},
      {"broadcast", [&](const Tensor& t) { return testing::weighted_sum(t * reshape(sum(t, 0), {1, 4})); }},
  };
  for (auto& [name, f] : cases) {
    Tensor x = random_param({3, 4}, rng);
    auto rep = grad_check(f, x, 1e-2f, 1e-4);
    CAPTURE(name);
    CHECK(rep.pass);
  }
  Tensor b3 = random_param({2, 3, 4}, rng);
  CHECK(grad_check([](const Tensor& t) { return testing::weighted_sum(permute(t, {2, 0, 1})); }, b3, 1e-2f, 1e-4).pass);
  CHECK(grad_check([&](const Tensor& t) { return testing::weighted_sum(matmul(t, rhs)); }, b3, 1e-2f, 1e-4).pass);
}

TEST_CASE("count_graph") {
  GradScope g;
  Tensor x = tensor_new({1, 2}, {2}, DType::Float32, true);
  CHECK(count_graph(x * x).node_count == 1);
  for (std::size_t k = 1; k <= 8; ++k) {
    Tensor y = x;
    for (std::size_t i = 0; i < k; ++i) y = (i % 2 == 0) ? exp(y) : y * x;
    CHECK(count_graph(y).node_count == k);
  }
  SplitMix64 rng(6);
  LinearLayer layer(784, 10, rng);
  Tensor in = random_tensor({32, 784}, rng);
  auto c = count_graph(layer.forward(in));
  CHECK(c.node_count == 1);
  CHECK(c.saved_bytes >= 100352);
  CHECK(c.saved_bytes == 100352 + 784 * 10 * 4);
  CHECK_THROWS_AS(count_graph(Tensor::ones({2})), Error);
}

TEST_CASE("export_dot") {
  GradScope g;
  Tensor x = tensor_new({1, 2}, {2}, DType::Float32, true);
  Tensor y = sum(x * x);
  const std::string dot = export_dot(y);
  CHECK(dot.rfind("digraph", 0) == 0);
  CHECK(dot.find("mul#") != std::string::npos);
  CHECK(dot.find("sum#") != std::string::npos);
  CHECK(dot.find("->") != std::string::npos);
}
