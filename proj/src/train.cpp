#include "tt/train.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <ostream>

#include "json.hpp"

#include "tt/autograd.hpp"
#include "tt/nn.hpp"
#include "tt/ops.hpp"

namespace tt {

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_max, double lr_min) {
  if (total_steps == 0 || step > total_steps) {
    fail(ErrorCode::StepOutOfRange,
         "step " + std::to_string(step) + " of " + std::to_string(total_steps));
  }
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

double grad_norm(const std::vector<Tensor>& params) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = params[i].grad();
    if (!g) fail(ErrorCode::MissingGrad, "parameter " + std::to_string(i) + " has no grad");
    for (float v : g->data()) sq += static_cast<double>(v) * v;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (!(norm > max_norm) || norm == 0.0) return 1.0;
  const double factor = max_norm / norm;
  for (const auto& p : params) {
    Tensor g = *p.grad();
    for (float& v : g.data_mut()) v = static_cast<float>(v * factor);
  }
  return factor;
}

double accuracy(const Tensor& logits, const Tensor& targets) {
  const Tensor pred = argmax(logits, logits.rank() - 1);
  auto p = pred.ids();
  auto t = targets.ids();
  if (p.size() != t.size()) fail(ErrorCode::ShapeMismatch, "accuracy: logits and targets disagree");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hits += p[i] == t[i];
  return p.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(p.size());
}

double evaluate_accuracy(const Model& model, const TensorDataset& dataset, std::size_t batch_size) {
  NoGradGuard no_grad;
  DataLoader loader(dataset, batch_size, false, 0);
  std::size_t hits = 0, total = 0;
  for (const auto& batch : loader.epoch(0)) {
    const Tensor logits = model.forward(batch.inputs);
    const double acc = accuracy(logits, batch.targets);
    hits += static_cast<std::size_t>(std::lround(acc * static_cast<double>(batch.targets.numel())));
    total += batch.targets.numel();
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

TrainReport train(const Model& model, const Dataset& dataset, const TrainConfig& config) {
  GradModeGuard grad_on(true);
  const auto params = model.parameters();
  OptimizerState opt = optimizer_new(config.optimizer, params, config.hyper);
  DataLoader loader(dataset, config.batch_size, config.shuffle, config.seed);
  std::size_t total_steps = config.epochs * loader.num_batches();
  if (config.max_steps) total_steps = std::min(total_steps, *config.max_steps);
  total_steps = std::max<std::size_t>(total_steps, 1);
  const auto& loss_fn = config.loss ? config.loss : cross_entropy_loss;

  TrainReport report;
  reset_peak_memory();
  std::size_t step_index = 0;
  for (std::size_t epoch = 0; epoch < config.epochs && step_index < total_steps; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochStats stats;
    double loss_sum = 0.0, acc_sum = 0.0;
    std::size_t batches = 0;
    for (const auto& batch : loader.epoch(epoch)) {
      if (step_index >= total_steps) break;
      const double lr = cosine_lr(step_index, total_steps, config.lr_max, config.lr_min);
      opt.hyper.lr = static_cast<float>(lr);
      stats.lr = lr;

      const Tensor logits = model.forward(batch.inputs);
      const Tensor loss = loss_fn(logits, batch.targets);
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        fail(ErrorCode::NonFiniteLoss, "loss is not finite at step " + std::to_string(step_index));
      }
      backward(loss);
      if (config.after_backward) config.after_backward(step_index, params);
      for (Tensor p : params) {
        if (!p.has_grad()) p.accumulate_grad(Tensor::zeros(p.shape()));
      }
      const double norm = grad_norm(params);
      if (!std::isfinite(norm)) {
        fail(ErrorCode::NonFiniteLoss,
             "gradient norm is not finite at step " + std::to_string(step_index));
      }
      if (config.clip_norm) clip_grad_norm(params, *config.clip_norm);
      step(opt, params);
      zero_grad(params);

      loss_sum += loss_value;
      if (logits.rank() >= 1 && batch.targets.dtype() == DType::Int64) {
        acc_sum += accuracy(logits, batch.targets);
      }
      report.step_losses.push_back(loss_value);
      ++batches;
      ++step_index;
    }
    stats.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    stats.accuracy = batches ? acc_sum / static_cast<double>(batches) : 0.0;
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(stats);
    if (config.progress) {
      nlohmann::json line{{"epoch", epoch},
                          {"loss", stats.loss},
                          {"acc", stats.accuracy},
                          {"lr", stats.lr},
                          {"peak_bytes", memory_stats().peak_bytes}};
      *config.progress << line.dump() << '\n';
    }
  }
  report.steps = step_index;
  report.peak_bytes = memory_stats().peak_bytes;
  return report;
}

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

// Appends the little-endian bytes of a buffer.
void put_buffer(std::string& out, const Tensor& t) {
  const Storage& s = t.storage();
  switch (t.dtype()) {
    case DType::Float32:
      for (float v : s.f32) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(out, bits);
      }
      break;
    case DType::Int8:
      for (auto v : s.i8) out.push_back(static_cast<char>(v));
      break;
    case DType::Int64:
      for (auto v : s.i64) {
        const auto bits = static_cast<std::uint64_t>(v);
        put_u32(out, static_cast<std::uint32_t>(bits));
        put_u32(out, static_cast<std::uint32_t>(bits >> 32));
      }
      break;
  }
}

DType dtype_from_name(const std::string& name) {
  if (name == "float32") return DType::Float32;
  if (name == "int8") return DType::Int8;
  if (name == "int64") return DType::Int64;
  fail(ErrorCode::CorruptCheckpoint, "unknown dtype " + name);
}

[[noreturn]] void corrupt(const std::string& why) { fail(ErrorCode::CorruptCheckpoint, why); }

}  // namespace

void checkpoint_save(const NamedTensors& tensors, const std::string& path) {
  nlohmann::json manifest = nlohmann::json::array();
  std::string payload;
  for (const auto& [name, t] : tensors) {
    for (const auto& entry : manifest) {
      if (entry["name"] == name) fail(ErrorCode::InvalidArgument, "duplicate tensor name " + name);
    }
    const std::size_t offset = payload.size();
    put_buffer(payload, t);
    manifest.push_back({{"name", name},
                        {"shape", t.shape()},
                        {"dtype", std::string(dtype_name(t.dtype()))},
                        {"offset", offset},
                        {"byte_len", payload.size() - offset}});
  }
  const std::string text = manifest.dump();
  std::string header = "TTCK";
  put_u16(header, kCheckpointVersion);
  put_u32(header, static_cast<std::uint32_t>(text.size()));
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::FileNotFound, "cannot write " + path);
  out << header << text << payload;
}

NamedTensors checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::FileNotFound, "cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 10 || bytes.compare(0, 4, "TTCK") != 0) corrupt("bad magic");
  const std::uint16_t version = static_cast<std::uint16_t>(p[4] | (p[5] << 8));
  if (version != kCheckpointVersion) corrupt("unsupported version " + std::to_string(version));
  const std::uint32_t manifest_len = get_u32(p + 6);
  if (bytes.size() < 10 + static_cast<std::size_t>(manifest_len)) corrupt("truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(10, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("manifest is not JSON: ") + e.what());
  }
  if (!manifest.is_array()) corrupt("manifest is not an array");
  const std::size_t data_start = 10 + manifest_len;
  const std::size_t data_len = bytes.size() - data_start;
  std::size_t expected = 0;
  NamedTensors out;
  for (const auto& entry : manifest) {
    try {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const DType dtype = dtype_from_name(entry.at("dtype").get<std::string>());
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto byte_len = entry.at("byte_len").get<std::size_t>();
      if (byte_len != memory_footprint(shape, dtype)) corrupt("length disagrees with shape for " + name);
      if (offset != expected || offset + byte_len > data_len) corrupt("truncated data for " + name);
      expected = offset + byte_len;
      Tensor t = Tensor::empty(shape, dtype);
      const unsigned char* src = p + data_start + offset;
      Storage& s = t.storage_mut();
      const std::size_t n = shape_numel(shape);
      for (std::size_t i = 0; i < n; ++i) {
        switch (dtype) {
          case DType::Float32: {
            const std::uint32_t bits = get_u32(src + 4 * i);
            std::memcpy(&s.f32[i], &bits, 4);
            break;
          }
          case DType::Int8: s.i8[i] = static_cast<std::int8_t>(src[i]); break;
          case DType::Int64: {
            const std::uint64_t bits = get_u32(src + 8 * i) |
                                       (static_cast<std::uint64_t>(get_u32(src + 8 * i + 4)) << 32);
            s.i64[i] = static_cast<std::int64_t>(bits);
            break;
          }
        }
      }
      out.emplace_back(name, t);
    } catch (const nlohmann::json::exception& e) {
      corrupt(std::string("malformed manifest entry: ") + e.what());
    }
  }
  if (expected != data_len) corrupt("trailing bytes after last tensor");
  return out;
}

void checkpoint_load_into(const std::string& path, const NamedTensors& targets) {
  const NamedTensors stored = checkpoint_load(path);
  for (const auto& [name, dst] : targets) {
    auto it = std::find_if(stored.begin(), stored.end(),
                           [&](const auto& entry) { return entry.first == name; });
    if (it == stored.end()) fail(ErrorCode::MissingTensor, "checkpoint has no tensor " + name);
    if (it->second.shape() != dst.shape() || it->second.dtype() != dst.dtype()) {
      fail(ErrorCode::ShapeMismatch, "checkpoint tensor " + name + " has shape " +
                                          shape_str(it->second.shape()));
    }
    Tensor target = dst;
    target.storage_mut().f32 = it->second.storage().f32;
    target.storage_mut().i8 = it->second.storage().i8;
    target.storage_mut().i64 = it->second.storage().i64;
  }
}

}  // namespace tt
