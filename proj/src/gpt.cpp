#include "tt/gpt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tt/autograd.hpp"
#include "tt/counters.hpp"
#include "tt/ops.hpp"

namespace tt {

namespace {

Tensor trainable(Tensor t) {
  if (grad_enabled()) t.set_requires_grad(true);
  return t;
}

// (B, N, d) -> (B, h, N, d/h)
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t B = x.dim(0), N = x.dim(1), d = x.dim(2);
  return permute(reshape(x, {B, N, heads, d / heads}), {0, 2, 1, 3});
}

Tensor merge_heads(const Tensor& x) {
  const std::size_t B = x.dim(0), h = x.dim(1), N = x.dim(2), dh = x.dim(3);
  return reshape(permute(x, {0, 2, 1, 3}), {B, N, h * dh});
}

}  // namespace

Tensor embed(const Tensor& table, const Tensor& ids) {
  require_float(table, "embed");
  if (ids.dtype() != DType::Int64) {
    fail(ErrorCode::DTypeError, "embed ids must be Int64, got " + std::string(dtype_name(ids.dtype())));
  }
  if (table.rank() != 2) fail(ErrorCode::ShapeMismatch, "embed table must be (V, d)");
  const std::size_t V = table.dim(0), d = table.dim(1);
  auto pid = ids.ids();
  for (std::int64_t id : pid) {
    if (id < 0 || static_cast<std::size_t>(id) >= V) {
      fail(ErrorCode::TokenIdOutOfRange,
           "token id " + std::to_string(id) + " for table of " + std::to_string(V) + " rows");
    }
  }
  Shape out_shape = ids.shape();
  out_shape.push_back(d);
  Tensor out = Tensor::empty(out_shape);
  const float* pt = table.data().data();
  float* po = out.data_mut().data();
  for (std::size_t i = 0; i < pid.size(); ++i) {
    std::copy_n(pt + static_cast<std::size_t>(pid[i]) * d, d, po + i * d);
  }
  if (!should_record({&table})) return out;
  return record(out, "embed", {table}, {ids}, [V, d](const Node& n, const Tensor& g) {
    Tensor gt = Tensor::zeros({V, d});
    float* pg = gt.data_mut().data();
    const float* src = g.data().data();
    auto rows = n.saved[0].ids();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      float* dst = pg + static_cast<std::size_t>(rows[i]) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[i * d + j];
    }
    return std::vector<Tensor>{gt};
  });
}

Tensor positional_encoding(PositionalKind kind, std::size_t max_seq, std::size_t d_model,
                           SplitMix64* rng) {
  if (kind == PositionalKind::Learned) {
    SplitMix64 local(0);
    return trainable(xavier_init(d_model, max_seq, rng ? *rng : local));
  }
  if (d_model % 2 != 0) {
    fail(ErrorCode::OddDimension, "sinusoidal encoding needs even d_model, got " + std::to_string(d_model));
  }
  Tensor pe = Tensor::empty({max_seq, d_model});
  float* p = pe.data_mut().data();
  for (std::size_t pos = 0; pos < max_seq; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      p[pos * d_model + 2 * i] = static_cast<float>(std::sin(angle));
      p[pos * d_model + 2 * i + 1] = static_cast<float>(std::cos(angle));
    }
  }
  return pe;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, float eps) {
  require_float(x, "layer_norm");
  if (x.rank() == 0) fail(ErrorCode::ShapeMismatch, "layer_norm needs at least one axis");
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || shift.numel() != d) {
    fail(ErrorCode::ShapeMismatch, "layer_norm affine parameters must have " + std::to_string(d) + " entries");
  }
  const std::size_t rows = x.numel() / d;
  Tensor out = Tensor::empty(x.shape());
  Tensor xhat = Tensor::empty(x.shape());
  Tensor rstd = Tensor::empty({rows});
  const float* px = x.data().data();
  const float* pg = gain.data().data();
  const float* ps = shift.data().data();
  float* po = out.data_mut().data();
  float* ph = xhat.data_mut().data();
  float* pr = rstd.data_mut().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = px + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps));
    pr[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const float h = static_cast<float>(row[j] - mean) * inv;
      ph[r * d + j] = h;
      po[r * d + j] = h * pg[j] + ps[j];
    }
  }
  if (!should_record({&x, &gain, &shift})) return out;
  return record(out, "layer_norm", {x, gain, shift}, {xhat, rstd, gain},
                [rows, d](const Node& n, const Tensor& g) {
                  const float* h = n.saved[0].data().data();
                  const float* inv = n.saved[1].data().data();
                  const float* gn = n.saved[2].data().data();
                  const float* pg = g.data().data();
                  Tensor gx = Tensor::empty(n.saved[0].shape());
                  Tensor ggain = Tensor::zeros({d});
                  Tensor gshift = Tensor::zeros({d});
                  float* px = gx.data_mut().data();
                  float* pgg = ggain.data_mut().data();
                  float* pgs = gshift.data_mut().data();
                  for (std::size_t r = 0; r < rows; ++r) {
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dh = static_cast<double>(pg[r * d + j]) * gn[j];
                      m1 += dh;
                      m2 += dh * h[r * d + j];
                      pgg[j] += pg[r * d + j] * h[r * d + j];
                      pgs[j] += pg[r * d + j];
                    }
                    m1 /= static_cast<double>(d);
                    m2 /= static_cast<double>(d);
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dh = static_cast<double>(pg[r * d + j]) * gn[j];
                      px[r * d + j] = static_cast<float>(inv[r] * (dh - m1 - h[r * d + j] * m2));
                    }
                  }
                  return std::vector<Tensor>{gx, ggain, gshift};
                });
}

KVCache::KVCache(std::size_t layers, std::size_t heads, std::size_t max_seq, std::size_t head_dim)
    : layers_(layers),
      heads_(heads),
      max_seq_(max_seq),
      head_dim_(head_dim),
      keys_(layers * heads * max_seq * head_dim),
      values_(layers * heads * max_seq * head_dim),
      filled_(layers, 0) {}

void KVCache::append(std::size_t layer, const Tensor& k, const Tensor& v) {
  if (layer >= layers_) fail(ErrorCode::IndexOutOfRange, "cache layer " + std::to_string(layer));
  if (k.rank() != 4 || k.dim(0) != 1 || k.dim(1) != heads_ || k.dim(3) != head_dim_ ||
      k.shape() != v.shape()) {
    fail(ErrorCode::ShapeMismatch, "cache expects (1, " + std::to_string(heads_) + ", n, " +
                                       std::to_string(head_dim_) + "), got " + shape_str(k.shape()));
  }
  const std::size_t n = k.dim(2);
  std::size_t& filled = filled_[layer];
  if (filled + n > max_seq_) {
    fail(ErrorCode::CacheOverflow, "appending " + std::to_string(n) + " to " + std::to_string(filled) +
                                       " of " + std::to_string(max_seq_) + " positions");
  }
  auto pk = k.data();
  auto pv = v.data();
  for (std::size_t h = 0; h < heads_; ++h) {
    const std::size_t dst = ((layer * heads_ + h) * max_seq_ + filled) * head_dim_;
    std::copy_n(pk.data() + h * n * head_dim_, n * head_dim_, keys_.data() + dst);
    std::copy_n(pv.data() + h * n * head_dim_, n * head_dim_, values_.data() + dst);
  }
  filled += n;
}

Tensor KVCache::keys(std::size_t layer) const {
  const std::size_t len = filled_.at(layer);
  Tensor out = Tensor::empty({1, heads_, len, head_dim_});
  float* po = out.data_mut().data();
  for (std::size_t h = 0; h < heads_; ++h) {
    std::copy_n(keys_.data() + (layer * heads_ + h) * max_seq_ * head_dim_, len * head_dim_,
                po + h * len * head_dim_);
  }
  return out;
}

Tensor KVCache::values(std::size_t layer) const {
  const std::size_t len = filled_.at(layer);
  Tensor out = Tensor::empty({1, heads_, len, head_dim_});
  float* po = out.data_mut().data();
  for (std::size_t h = 0; h < heads_; ++h) {
    std::copy_n(values_.data() + (layer * heads_ + h) * max_seq_ * head_dim_, len * head_dim_,
                po + h * len * head_dim_);
  }
  return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal, KVCache* cache,
                 std::size_t layer) {
  if (q.rank() != 4 || k.rank() != 4 || v.rank() != 4 || k.shape() != v.shape() ||
      q.dim(0) != k.dim(0) || q.dim(1) != k.dim(1) || q.dim(3) != k.dim(3)) {
    fail(ErrorCode::ShapeMismatch, "attention q " + shape_str(q.shape()) + ", k " +
                                       shape_str(k.shape()) + ", v " + shape_str(v.shape()));
  }
  const std::size_t B = q.dim(0), h = q.dim(1), N = q.dim(2), dh = q.dim(3);
  Tensor keys = k, values = v;
  std::size_t offset = 0;
  if (cache != nullptr) {
    offset = cache->filled(layer);
    cache->append(layer, k, v);
    keys = cache->keys(layer);
    values = cache->values(layer);
  } else if (causal && k.dim(2) != N) {
    fail(ErrorCode::ShapeMismatch, "causal attention without a cache needs as many keys as queries");
  }
  const std::size_t L = keys.dim(2);
  op_counters().attention_score_bytes += static_cast<std::uint64_t>(B) * h * N * L * sizeof(float);

  Tensor scores = mul_scalar(matmul(q, transpose(keys)), 1.0f / std::sqrt(static_cast<float>(dh)));
  if (causal) {
    Tensor mask = Tensor::zeros({N, L});
    float* pm = mask.data_mut().data();
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = offset + i + 1; j < L; ++j) pm[i * L + j] = -std::numeric_limits<float>::infinity();
    }
    scores = scores + mask;
  }
  return matmul(softmax(scores, 3), values);
}

std::vector<Tensor> GPTParams::parameters() const {
  std::vector<Tensor> out{token_embedding};
  if (learned_position) out.push_back(position_embedding);
  for (const auto& b : blocks) {
    for (const Tensor& t : {b.ln1_gain, b.ln1_shift}) out.push_back(t);
    for (const LinearLayer* l : {&b.wq, &b.wk, &b.wv, &b.wo}) {
      out.push_back(l->weight);
      out.push_back(l->bias);
    }
    for (const Tensor& t : {b.ln2_gain, b.ln2_shift}) out.push_back(t);
    for (const LinearLayer* l : {&b.fc1, &b.fc2}) {
      out.push_back(l->weight);
      out.push_back(l->bias);
    }
  }
  out.push_back(lnf_gain);
  out.push_back(lnf_shift);
  out.push_back(head.weight);
  out.push_back(head.bias);
  return out;
}

NamedTensors GPTParams::named() const {
  NamedTensors out{{"token_embedding", token_embedding}, {"position_embedding", position_embedding}};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const std::string p = "blocks." + std::to_string(i) + ".";
    out.emplace_back(p + "ln1.gain", b.ln1_gain);
    out.emplace_back(p + "ln1.shift", b.ln1_shift);
    const std::pair<const char*, const LinearLayer*> linears[] = {
        {"wq", &b.wq}, {"wk", &b.wk}, {"wv", &b.wv}, {"wo", &b.wo}, {"fc1", &b.fc1}, {"fc2", &b.fc2}};
    for (const auto& [name, l] : linears) {
      out.emplace_back(p + name + ".weight", l->weight);
      out.emplace_back(p + name + ".bias", l->bias);
    }
    out.emplace_back(p + "ln2.gain", b.ln2_gain);
    out.emplace_back(p + "ln2.shift", b.ln2_shift);
  }
  out.emplace_back("lnf.gain", lnf_gain);
  out.emplace_back("lnf.shift", lnf_shift);
  out.emplace_back("head.weight", head.weight);
  out.emplace_back("head.bias", head.bias);
  return out;
}

std::size_t GPTParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.numel();
  return n;
}

void validate(const GPTConfig& cfg) {
  if (cfg.n_heads == 0 || cfg.d_model % cfg.n_heads != 0) {
    fail(ErrorCode::InvalidArgument, "d_model " + std::to_string(cfg.d_model) +
                                         " not divisible by n_heads " + std::to_string(cfg.n_heads));
  }
  if (cfg.vocab_size == 0 || cfg.max_seq == 0 || cfg.mlp_ratio == 0) {
    fail(ErrorCode::InvalidArgument, "GPT config sizes must be positive");
  }
}

GPTParams gpt_init(const GPTConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  SplitMix64 rng(seed);
  const std::size_t d = cfg.d_model, hidden = cfg.mlp_ratio * d;
  auto ones = [d] { return trainable(Tensor::ones({d})); };
  auto zeros = [d] { return trainable(Tensor::zeros({d})); };
  GPTParams p{.token_embedding = trainable(xavier_init(d, cfg.vocab_size, rng)),
              .position_embedding = positional_encoding(cfg.positional, cfg.max_seq, d, &rng),
              .blocks = {},
              .lnf_gain = {},
              .lnf_shift = {},
              .head = LinearLayer(d, cfg.vocab_size, rng)};
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    p.blocks.push_back(GPTBlock{ones(), zeros(), LinearLayer(d, d, rng), LinearLayer(d, d, rng),
                                LinearLayer(d, d, rng), LinearLayer(d, d, rng), ones(), zeros(),
                                LinearLayer(d, hidden, rng), LinearLayer(hidden, d, rng)});
  }
  p.lnf_gain = ones();
  p.lnf_shift = zeros();
  p.learned_position = cfg.positional == PositionalKind::Learned;
  return p;
}

Tensor gpt_forward(const GPTConfig& cfg, const GPTParams& params, const Tensor& ids,
                   KVCache* cache) {
  if (ids.rank() != 2) fail(ErrorCode::ShapeMismatch, "gpt_forward expects ids (B, N), got " + shape_str(ids.shape()));
  const std::size_t B = ids.dim(0), N = ids.dim(1);
  const std::size_t offset = cache ? cache->filled(0) : 0;
  if (offset + N > cfg.max_seq) {
    fail(ErrorCode::SequenceTooLong, "sequence of " + std::to_string(offset + N) +
                                         " exceeds max_seq " + std::to_string(cfg.max_seq));
  }
  if (cache && B != 1) fail(ErrorCode::ShapeMismatch, "cached decoding is batch 1");

  std::vector<std::int64_t> positions(N);
  for (std::size_t i = 0; i < N; ++i) positions[i] = static_cast<std::int64_t>(offset + i);
  Tensor x = embed(params.token_embedding, ids) +
             embed(params.position_embedding, Tensor::from_ids(positions, {1, N}));
  op_counters().kv_computations += B * N;

  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    const GPTBlock& b = params.blocks[l];
    Tensor a = layer_norm(x, b.ln1_gain, b.ln1_shift);
    Tensor q = split_heads(b.wq.forward(a), cfg.n_heads);
    Tensor k = split_heads(b.wk.forward(a), cfg.n_heads);
    Tensor v = split_heads(b.wv.forward(a), cfg.n_heads);
    x = x + b.wo.forward(merge_heads(attention(q, k, v, true, cache, l)));
    Tensor m = layer_norm(x, b.ln2_gain, b.ln2_shift);
    x = x + b.fc2.forward(gelu(b.fc1.forward(m)));
  }
  return params.head.forward(layer_norm(x, params.lnf_gain, params.lnf_shift));
}

std::uint64_t GenerationTrace::total_kv() const {
  std::uint64_t n = 0;
  for (auto s : step_kv) n += s;
  return n;
}

GenerationTrace generate(const GPTConfig& cfg, const GPTParams& params,
                         const std::vector<std::int64_t>& prompt, std::size_t max_new,
                         const Sampling& sampling, bool use_cache) {
  if (prompt.empty()) fail(ErrorCode::InvalidArgument, "generate needs a non-empty prompt");
  if (prompt.size() + max_new > cfg.max_seq) {
    fail(ErrorCode::SequenceTooLong, "prompt " + std::to_string(prompt.size()) + " + " +
                                         std::to_string(max_new) + " exceeds max_seq " +
                                         std::to_string(cfg.max_seq));
  }
  NoGradGuard no_grad;
  SplitMix64 rng(sampling.seed);
  std::optional<KVCache> cache;
  if (use_cache) cache.emplace(cfg.n_layers, cfg.n_heads, cfg.max_seq, cfg.head_dim());

  GenerationTrace trace;
  std::vector<std::int64_t> seq = prompt;
  for (std::size_t step = 0; step < max_new; ++step) {
    std::vector<std::int64_t> feed = use_cache && step > 0 ? std::vector<std::int64_t>{seq.back()} : seq;
    const std::uint64_t before = op_counters().kv_computations;
    const std::size_t n = feed.size();
    Tensor logits = gpt_forward(cfg, params, Tensor::from_ids(std::move(feed), {1, n}),
                                use_cache ? &*cache : nullptr);
    trace.step_kv.push_back(op_counters().kv_computations - before);

    auto all = logits.data();
    std::vector<float> last(all.end() - static_cast<std::ptrdiff_t>(cfg.vocab_size), all.end());
    std::int64_t next = 0;
    if (sampling.temperature <= 0.0) {
      next = std::max_element(last.begin(), last.end()) - last.begin();
    } else {
      const float top = *std::max_element(last.begin(), last.end());
      std::vector<double> w(last.size());
      double total = 0.0;
      for (std::size_t i = 0; i < last.size(); ++i) {
        w[i] = std::exp((last[i] - top) / sampling.temperature);
        total += w[i];
      }
      double u = rng.uniform() * total;
      next = static_cast<std::int64_t>(last.size() - 1);
      for (std::size_t i = 0; i < w.size(); ++i) {
        u -= w[i];
        if (u < 0.0) {
          next = static_cast<std::int64_t>(i);
          break;
        }
      }
    }
    trace.step_logits.push_back(std::move(last));
    trace.tokens.push_back(next);
    seq.push_back(next);
  }
  return trace;
}

}  // namespace tt
