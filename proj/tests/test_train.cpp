#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "support.hpp"
#include "tt/nn.hpp"
#include "tt/train.hpp"

using namespace tt;
using tt::testing::GradScope;
using tt::testing::random_param;

namespace {

struct LinearModel : Model {
  explicit LinearModel(std::size_t in, std::size_t out, std::uint64_t seed) {
    GradModeGuard on(true);
    SplitMix64 rng(seed);
    layer = std::make_unique<LinearLayer>(in, out, rng);
  }
  Tensor forward(const Tensor& x) const override { return layer->forward(x); }
  std::vector<Tensor> parameters() const override { return layer->parameters(); }
  std::unique_ptr<LinearLayer> layer;
};

// Two Gaussian blobs separated along both axes.
TensorDataset separable(std::uint64_t seed, std::size_t n) {
  SplitMix64 rng(seed);
  std::vector<float> x(n * 2);
  std::vector<std::int64_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double c = label ? 2.0 : -2.0;
    x[2 * i] = static_cast<float>(c + 0.5 * rng.normal());
    x[2 * i + 1] = static_cast<float>(c + 0.5 * rng.normal());
    y[i] = label;
  }
  return TensorDataset(Tensor::from(x, {n, 2}), Tensor::from_ids(y, {n}));
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0, 100, 0.1, 0.001) == doctest::Approx(0.1));
  CHECK(cosine_lr(100, 100, 0.1, 0.001) == doctest::Approx(0.001));
  CHECK(cosine_lr(50, 100, 0.1, 0.001) == doctest::Approx(0.0505));
  CHECK_THROWS_AS(cosine_lr(101, 100, 0.1, 0.0), Error);
  CHECK_THROWS_AS(cosine_lr(0, 0, 0.1, 0.0), Error);
  double prev = 1e9;
  for (std::size_t s = 0; s <= 1000; ++s) {
    const double lr = cosine_lr(s, 1000, 3e-3, 3e-4);
    const double oracle = 3e-4 + 0.5 * (3e-3 - 3e-4) * (1 + std::cos(std::numbers::pi * s / 1000.0));
    CHECK(lr == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("clip_grad_norm") {
  GradScope g;
  Tensor a = Tensor::from({0, 0}, {2}, true), b = Tensor::from({0}, {1}, true);
  a.accumulate_grad(Tensor::from({6, 0}, {2}));
  b.accumulate_grad(Tensor::from({8}, {1}));
  CHECK(clip_grad_norm({a, b}, 1.0) == doctest::Approx(0.1));
  CHECK(grad_norm({a, b}) == doctest::Approx(1.0).epsilon(1e-6));

  Tensor c = Tensor::from({0}, {1}, true);
  c.accumulate_grad(Tensor::from({0.5f}, {1}));
  CHECK(clip_grad_norm({c}, 1.0) == 1.0);
  CHECK(c.grad()->item() == 0.5f);

  Tensor z = Tensor::from({0, 0}, {2}, true);
  z.accumulate_grad(Tensor::zeros({2}));
  CHECK(clip_grad_norm({z}, 1.0) == 1.0);
  CHECK(z.grad()->to_vector() == std::vector<float>{0, 0});

  Tensor none = Tensor::from({0}, {1}, true);
  CHECK_THROWS_AS(clip_grad_norm({none}, 1.0), Error);

  SplitMix64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tensor> ps;
    for (int i = 0; i < 3; ++i) {
      ps.push_back(random_param(testing::random_shape(rng, 2, 5), rng));
      ps.back().accumulate_grad(testing::random_tensor(ps.back().shape(), rng, -10, 10));
    }
    const double max_norm = rng.uniform(0.01, 5);
    clip_grad_norm(ps, max_norm);
    CHECK(grad_norm(ps) <= max_norm + 1e-6);
  }
}

TEST_CASE("loss decreases on a linearly separable set") {
  LinearModel model(2, 2, 3);
  auto ds = separable(4, 200);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 20;
  cfg.optimizer = OptimizerKind::SGD;
  cfg.hyper = default_hyper(OptimizerKind::SGD);
  cfg.lr_max = 0.05;
  cfg.lr_min = 0.01;
  cfg.seed = 5;
  auto report = train(model, ds, cfg);
  REQUIRE(report.epochs.size() == 5);
  for (std::size_t e = 1; e < 5; ++e) CHECK(report.epochs[e].loss < report.epochs[e - 1].loss);
  CHECK(report.epochs.back().accuracy > 0.95);
  CHECK(report.steps == 50);
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  LinearModel model(2, 2, 6);
  const auto w = model.layer->weight.to_vector(), b = model.layer->bias.to_vector();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.optimizer = OptimizerKind::SGD;
  cfg.lr_max = 0.0;
  cfg.lr_min = 0.0;
  train(model, separable(7, 64), cfg);
  CHECK(model.layer->weight.to_vector() == w);
  CHECK(model.layer->bias.to_vector() == b);
}

TEST_CASE("injected NaN gradient stops training at that step") {
  LinearModel model(2, 2, 8);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.after_backward = [](std::size_t s, const std::vector<Tensor>& params) {
    if (s == 7) {
      Tensor p = params[0];
      auto g = p.grad();
      g->data_mut()[0] = std::numeric_limits<float>::quiet_NaN();
    }
  };
  try {
    train(model, separable(9, 64), cfg);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
    CHECK(std::string(e.what()).find("step 7") != std::string::npos);
  }
}

TEST_CASE("training is deterministic") {
  auto ds = separable(10, 100);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 10;
  cfg.seed = 11;
  cfg.clip_norm = 1.0;
  LinearModel a(2, 2, 12), b(2, 2, 12);
  auto ra = train(a, ds, cfg);
  auto rb = train(b, ds, cfg);
  CHECK(a.layer->weight.to_vector() == b.layer->weight.to_vector());
  CHECK(a.layer->bias.to_vector() == b.layer->bias.to_vector());
  CHECK(ra.step_losses == rb.step_losses);
}

TEST_CASE("peak memory lower bound with adam") {
  LinearModel model(64, 10, 13);
  SplitMix64 rng(14);
  const std::size_t n = 96, batch = 32;
  std::vector<std::int64_t> y(n);
  for (auto& v : y) v = static_cast<std::int64_t>(rng.below(10));
  TensorDataset ds(testing::random_tensor({n, 64}, rng), Tensor::from_ids(y, {n}));
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = batch;
  auto report = train(model, ds, cfg);
  const std::int64_t param_bytes = (64 * 10 + 10) * 4;
  const std::int64_t activation = batch * 64 * 4 + batch * 10 * 4;
  CHECK(report.peak_bytes >= 3 * param_bytes + activation);
  CHECK(report.peak_bytes >= param_bytes);
}

TEST_CASE("checkpoint round trip") {
  SplitMix64 rng(15);
  NamedTensors tensors = {{"w", testing::random_tensor({784, 10}, rng)},
                          {"b", testing::random_tensor({10}, rng)},
                          {"q", Tensor::from_int8({-128, 0, 127}, {3})},
                          {"ids", Tensor::from_ids({1, 1ll << 40}, {2})}};
  const std::string path = temp_path("tt_ckpt_roundtrip.bin");
  checkpoint_save(tensors, path);
  auto loaded = checkpoint_load(path);
  REQUIRE(loaded.size() == tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    CHECK(loaded[i].first == tensors[i].first);
    CHECK(loaded[i].second.shape() == tensors[i].second.shape());
    CHECK(loaded[i].second.dtype() == tensors[i].second.dtype());
  }
  CHECK(loaded[0].second.to_vector() == tensors[0].second.to_vector());
  CHECK(std::equal(loaded[2].second.int8_data().begin(), loaded[2].second.int8_data().end(),
                   tensors[2].second.int8_data().begin()));
  CHECK(loaded[3].second.ids()[1] == (1ll << 40));

  std::ifstream in(path, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "TTCK");

  Tensor target = Tensor::zeros({10});
  checkpoint_load_into(path, {{"b", target}});
  CHECK(target.to_vector() == tensors[1].second.to_vector());
  Tensor other = Tensor::zeros({10});
  CHECK_THROWS_AS(checkpoint_load_into(path, {{"missing", other}}), Error);
  std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  SplitMix64 rng(16);
  const std::string path = temp_path("tt_ckpt_corrupt.bin");
  checkpoint_save({{"w", testing::random_tensor({100}, rng)}}, path);
  const auto size = std::filesystem::file_size(path);
  auto expect_corrupt = [&](const std::string& p) {
    try {
      checkpoint_load(p);
      FAIL("expected CorruptCheckpoint");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::CorruptCheckpoint);
    }
  };
  for (auto cut : {size - 1, size / 2, std::uintmax_t{5}, std::uintmax_t{0}}) {
    std::filesystem::copy_file(path, path + ".t", std::filesystem::copy_options::overwrite_existing);
    std::filesystem::resize_file(path + ".t", cut);
    expect_corrupt(path + ".t");
  }
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  expect_corrupt(path);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".t");
}

TEST_CASE("checkpoint overhead is small") {
  SplitMix64 rng(17);
  LinearLayer layer(784, 10, rng);
  const std::string path = temp_path("tt_ckpt_overhead.bin");
  checkpoint_save({{"weight", layer.weight}, {"bias", layer.bias}}, path);
  const double bytes = static_cast<double>(std::filesystem::file_size(path));
  const double payload = (7840 + 10) * 4.0;
  CHECK(bytes >= payload);
  // 31 KB model: the manifest is a fixed couple hundred bytes.
  CHECK(bytes - payload < 300);

  const std::string big = temp_path("tt_ckpt_big.bin");
  checkpoint_save({{"w", testing::random_tensor({512, 512}, rng)}, {"b", testing::random_tensor({512}, rng)}}, big);
  const double big_payload = (512.0 * 512 + 512) * 4;
  CHECK((std::filesystem::file_size(big) - big_payload) / big_payload < 0.01);
  std::filesystem::remove(path);
  std::filesystem::remove(big);
}
