#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tt/tensor.hpp"

namespace tt {

struct Sample {
  Tensor input;
  Tensor target;
};

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::size_t size() const = 0;
  // IndexOutOfRange for i >= size(); never wraps.
  virtual Sample get(std::size_t i) const = 0;
};

// Samples are slices along the leading axis of two tensors.
class TensorDataset : public Dataset {
 public:
  TensorDataset(Tensor inputs, Tensor targets);

  std::size_t size() const override { return inputs_.dim(0); }
  Sample get(std::size_t i) const override;

  const Tensor& inputs() const { return inputs_; }
  const Tensor& targets() const { return targets_; }

 private:
  Tensor inputs_;
  Tensor targets_;
};

struct Batch {
  Tensor inputs;
  Tensor targets;
  std::vector<std::size_t> indices;
};

// Stacks equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& items);
// Rows `indices` of t along axis 0.
Tensor select_rows(const Tensor& t, const std::vector<std::size_t>& indices);

class DataLoader {
 public:
  DataLoader(const Dataset& dataset, std::size_t batch_size, bool shuffle, std::uint64_t seed,
             bool drop_last = false);

  std::size_t num_batches() const;
  // Index order of an epoch; a pure function of (seed, epoch) when shuffling.
  std::vector<std::size_t> order(std::size_t epoch) const;
  std::vector<Batch> epoch(std::size_t epoch) const;

 private:
  const Dataset& dataset_;
  std::size_t batch_size_;
  bool shuffle_;
  std::uint64_t seed_;
  bool drop_last_;
};

struct DigitOptions {
  double noise_sigma = 0.1;
  double max_shift_px = 1.0;
  double max_rotation_deg = 10.0;
};

inline constexpr std::size_t kDigitSize = 8;

// (10, 8, 8) glyph templates in [0, 1].
Tensor digit_templates();

/// Procedural 8x8 grayscale digits: inputs (count, 1, 8, 8) in [0, 1],
/// targets int64 labels 0-9 assigned round-robin (balanced within 1).
TensorDataset synth_digits(std::uint64_t seed, std::size_t count,
                           const DigitOptions& options = {});

// Raw little-endian float32 pixels plus a JSON manifest {shape, labels}.
void export_digits(const TensorDataset& digits, const std::string& raw_path,
                   const std::string& manifest_path);

struct TalksCorpus {
  std::vector<std::pair<std::string, std::string>> pairs;
  // One "Q: ...\tA: ..." line per pair, newline terminated.
  std::string text() const;
};

inline constexpr std::size_t kDefaultTalkPairs = 350;

/// Template-grammar question/answer corpus over a fixed small vocabulary.
/// Answers are consistent with a seeded "world" of facts so the text is
/// learnable. Printable ASCII plus tab and newline only.
TalksCorpus synth_talks(std::uint64_t seed, std::size_t pairs = kDefaultTalkPairs);

// Next-token windows over an id stream: inputs (M, seq_len), targets the
// same windows shifted by one.
TensorDataset token_windows(const std::vector<std::int64_t>& ids, std::size_t seq_len,
                            std::size_t stride);

}  // namespace tt
