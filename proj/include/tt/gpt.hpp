#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tt/nn.hpp"
#include "tt/rng.hpp"
#include "tt/tensor.hpp"
#include "tt/train.hpp"

namespace tt {

/// Row gather from a (V, d) table. The backward pass writes only the
/// gathered rows; every other row of the table gradient is exactly zero.
Tensor embed(const Tensor& table, const Tensor& ids);

enum class PositionalKind { Sinusoidal, Learned };

/// Sinusoidal: PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(...).
/// Learned: Xavier-uniform table, trainable when grad mode is on.
Tensor positional_encoding(PositionalKind kind, std::size_t max_seq, std::size_t d_model,
                           SplitMix64* rng = nullptr);

/// Normalizes the last axis: (x - mean) / sqrt(var + eps) * gain + shift,
/// with the biased variance. One fused tape node.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, float eps = 1e-5f);

/// Keys and values appended per layer, preallocated at max_seq for batch 1.
class KVCache {
 public:
  KVCache(std::size_t layers, std::size_t heads, std::size_t max_seq, std::size_t head_dim);

  std::size_t layers() const { return layers_; }
  std::size_t heads() const { return heads_; }
  std::size_t max_seq() const { return max_seq_; }
  std::size_t head_dim() const { return head_dim_; }
  std::size_t filled(std::size_t layer) const { return filled_.at(layer); }
  // layers * heads * max_seq * head_dim * 2 * 4
  std::size_t bytes() const { return (keys_.size() + values_.size()) * sizeof(float); }

  /// Appends (1, heads, n, head_dim) keys and values to one layer; throws
  /// CacheOverflow if filled + n would exceed max_seq.
  void append(std::size_t layer, const Tensor& k, const Tensor& v);
  // (1, heads, filled, head_dim) copies of the stored entries.
  Tensor keys(std::size_t layer) const;
  Tensor values(std::size_t layer) const;

 private:
  std::size_t layers_, heads_, max_seq_, head_dim_;
  std::vector<float> keys_, values_;
  std::vector<std::size_t> filled_;
};

/// softmax(q k^T / sqrt(d_h) + mask) v over (B, h, N, d_h) inputs. With a
/// cache, k and v are appended to `layer` first and the N queries attend
/// over every stored key, query i sitting at absolute position
/// filled_before + i. Adds the score-matrix bytes (B*h*N*keys*4) to the
/// op counters.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal,
                 KVCache* cache = nullptr, std::size_t layer = 0);

struct GPTConfig {
  std::size_t vocab_size = 1000;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t max_seq = 128;
  std::size_t mlp_ratio = 4;
  PositionalKind positional = PositionalKind::Learned;

  std::size_t head_dim() const { return d_model / n_heads; }
};

struct GPTBlock {
  Tensor ln1_gain, ln1_shift;
  LinearLayer wq, wk, wv, wo;
  Tensor ln2_gain, ln2_shift;
  LinearLayer fc1, fc2;
};

struct GPTParams {
  Tensor token_embedding;     // (vocab, d)
  Tensor position_embedding;  // (max_seq, d), fixed when sinusoidal
  std::vector<GPTBlock> blocks;
  Tensor lnf_gain, lnf_shift;
  LinearLayer head;           // (vocab, d), untied from the embedding
  bool learned_position = true;

  std::vector<Tensor> parameters() const;
  NamedTensors named() const;
  std::size_t parameter_count() const;
};

// Throws InvalidArgument when d_model is not divisible by n_heads.
void validate(const GPTConfig& cfg);
GPTParams gpt_init(const GPTConfig& cfg, std::uint64_t seed);

/// ids (B, N) -> logits (B, N, vocab). Pre-norm blocks. With a cache
/// (B = 1) the ids continue the cached sequence. Adds N to
/// op_counters().kv_computations: the positions whose keys and values
/// this call computes.
Tensor gpt_forward(const GPTConfig& cfg, const GPTParams& params, const Tensor& ids,
                   KVCache* cache = nullptr);

struct Sampling {
  // 0 means greedy.
  double temperature = 0.0;
  std::uint64_t seed = 0;
};

struct GenerationTrace {
  std::vector<std::int64_t> tokens;  // generated ids, prompt excluded
  // Per step: key/value positions computed, and the logits of the step's
  // final position.
  std::vector<std::uint64_t> step_kv;
  std::vector<std::vector<float>> step_logits;
  std::uint64_t total_kv() const;
};

GenerationTrace generate(const GPTConfig& cfg, const GPTParams& params,
                         const std::vector<std::int64_t>& prompt, std::size_t max_new,
                         const Sampling& sampling, bool use_cache);

// Model adapter for train(): inputs (B, N) ids, logits (B, N, vocab).
class GPTModel : public Model {
 public:
  GPTModel(GPTConfig cfg, GPTParams params) : cfg_(cfg), params_(std::move(params)) {}
  Tensor forward(const Tensor& ids) const override { return gpt_forward(cfg_, params_, ids); }
  std::vector<Tensor> parameters() const override { return params_.parameters(); }
  const GPTConfig& config() const { return cfg_; }
  const GPTParams& params() const { return params_; }

 private:
  GPTConfig cfg_;
  GPTParams params_;
};

}  // namespace tt
