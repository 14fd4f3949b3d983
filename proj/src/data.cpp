#include "tt/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <type_traits>

#include "json.hpp"

#include "tt/rng.hpp"

namespace tt {

namespace {

Tensor slice_leading(const Tensor& t, std::size_t i) {
  if (i >= t.dim(0)) {
    fail(ErrorCode::IndexOutOfRange,
         "index " + std::to_string(i) + " for dataset of size " + std::to_string(t.dim(0)));
  }
  Tensor row = select_rows(t, {i});
  row.impl()->shape = Shape(t.shape().begin() + 1, t.shape().end());
  return row;
}

template <class S>
auto* raw_bytes(S& s) {
  using Byte = std::conditional_t<std::is_const_v<S>, const unsigned char, unsigned char>;
  switch (s.dtype()) {
    case DType::Float32: return reinterpret_cast<Byte*>(s.f32.data());
    case DType::Int8: return reinterpret_cast<Byte*>(s.i8.data());
    case DType::Int64: return reinterpret_cast<Byte*>(s.i64.data());
  }
  return static_cast<Byte*>(nullptr);
}

}  // namespace

TensorDataset::TensorDataset(Tensor inputs, Tensor targets)
    : inputs_(std::move(inputs)), targets_(std::move(targets)) {
  if (inputs_.rank() == 0 || targets_.rank() == 0 || inputs_.dim(0) != targets_.dim(0)) {
    fail(ErrorCode::ShapeMismatch, "inputs " + shape_str(inputs_.shape()) + " and targets " +
                                       shape_str(targets_.shape()) + " must share the leading extent");
  }
}

Sample TensorDataset::get(std::size_t i) const {
  return {slice_leading(inputs_, i), slice_leading(targets_, i)};
}

Tensor select_rows(const Tensor& t, const std::vector<std::size_t>& indices) {
  if (t.rank() == 0) fail(ErrorCode::ShapeMismatch, "select_rows needs rank >= 1");
  Shape shape = t.shape();
  const std::size_t row = t.numel() / std::max<std::size_t>(shape[0], 1);
  shape[0] = indices.size();
  Tensor out = Tensor::empty(shape, t.dtype());
  const std::size_t esz = element_size(t.dtype());
  const auto& src = t.storage();
  auto& dst = out.storage_mut();
  unsigned char* out_bytes = raw_bytes(dst);
  const unsigned char* in_bytes = raw_bytes(src);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= t.dim(0)) fail(ErrorCode::IndexOutOfRange, "row index out of range");
    std::memcpy(out_bytes + r * row * esz, in_bytes + indices[r] * row * esz, row * esz);
  }
  return out;
}

Tensor stack(const std::vector<Tensor>& items) {
  if (items.empty()) fail(ErrorCode::InvalidArgument, "stack of zero tensors");
  const Shape& inner = items[0].shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor out = Tensor::empty(shape, items[0].dtype());
  auto& dst = out.storage_mut();
  const std::size_t n = items[0].numel();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != inner || items[i].dtype() != items[0].dtype()) {
      fail(ErrorCode::ShapeMismatch, "stack of mismatched tensors");
    }
    const auto& src = items[i].storage();
    switch (items[0].dtype()) {
      case DType::Float32: std::copy(src.f32.begin(), src.f32.end(), dst.f32.begin() + i * n); break;
      case DType::Int8: std::copy(src.i8.begin(), src.i8.end(), dst.i8.begin() + i * n); break;
      case DType::Int64: std::copy(src.i64.begin(), src.i64.end(), dst.i64.begin() + i * n); break;
    }
  }
  return out;
}

DataLoader::DataLoader(const Dataset& dataset, std::size_t batch_size, bool shuffle,
                       std::uint64_t seed, bool drop_last)
    : dataset_(dataset), batch_size_(batch_size), shuffle_(shuffle), seed_(seed),
      drop_last_(drop_last) {
  if (batch_size_ == 0) fail(ErrorCode::InvalidArgument, "batch_size must be >= 1");
}

std::size_t DataLoader::num_batches() const {
  const std::size_t n = dataset_.size();
  return drop_last_ ? n / batch_size_ : (n + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> DataLoader::order(std::size_t epoch) const {
  std::vector<std::size_t> idx(dataset_.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (shuffle_) {
    SplitMix64 rng(derive_seed(seed_, epoch));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  }
  return idx;
}

std::vector<Batch> DataLoader::epoch(std::size_t epoch) const {
  const auto idx = order(epoch);
  std::vector<Batch> batches;
  batches.reserve(num_batches());
  for (std::size_t b = 0; b < num_batches(); ++b) {
    const std::size_t lo = b * batch_size_;
    const std::size_t hi = std::min(idx.size(), lo + batch_size_);
    Batch batch;
    batch.indices.assign(idx.begin() + static_cast<long>(lo), idx.begin() + static_cast<long>(hi));
    if (const auto* td = dynamic_cast<const TensorDataset*>(&dataset_)) {
      batch.inputs = select_rows(td->inputs(), batch.indices);
      batch.targets = select_rows(td->targets(), batch.indices);
    } else {
      std::vector<Tensor> xs, ys;
      for (auto i : batch.indices) {
        Sample s = dataset_.get(i);
        xs.push_back(s.input);
        ys.push_back(s.target);
      }
      batch.inputs = stack(xs);
      batch.targets = stack(ys);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

namespace {

// '#' is ink. Glyphs occupy rows 0-6 inside an 8x8 cell.
constexpr std::array<std::array<const char*, 8>, 10> kGlyphs{{
    {"..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####..", "........"},
    {"...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "..####..", "........"},
    {"..####..", ".#....#.", "......#.", ".....#..", "...##...", "..#.....", ".######.", "........"},
    {"..####..", ".#....#.", "......#.", "...###..", "......#.", ".#....#.", "..####..", "........"},
    {".....#..", "....##..", "...#.#..", "..#..#..", ".######.", ".....#..", ".....#..", "........"},
    {".######.", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####..", "........"},
    {"..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", "..####..", "........"},
    {".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "........"},
    {"..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", "..####..", "........"},
    {"..####..", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", "..####..", "........"},
}};

float template_at(const Tensor& templates, std::size_t digit, long r, long c) {
  if (r < 0 || c < 0 || r >= static_cast<long>(kDigitSize) || c >= static_cast<long>(kDigitSize)) {
    return 0.0f;
  }
  return templates.data()[(digit * kDigitSize + static_cast<std::size_t>(r)) * kDigitSize +
                          static_cast<std::size_t>(c)];
}

}  // namespace

Tensor digit_templates() {
  std::vector<float> px(10 * kDigitSize * kDigitSize, 0.0f);
  for (std::size_t d = 0; d < 10; ++d) {
    for (std::size_t r = 0; r < kDigitSize; ++r) {
      for (std::size_t c = 0; c < kDigitSize; ++c) {
        px[(d * kDigitSize + r) * kDigitSize + c] = kGlyphs[d][r][c] == '#' ? 1.0f : 0.0f;
      }
    }
  }
  return Tensor::from(std::move(px), {10, kDigitSize, kDigitSize});
}

TensorDataset synth_digits(std::uint64_t seed, std::size_t count, const DigitOptions& options) {
  if (count < 10) fail(ErrorCode::InvalidArgument, "synth_digits needs count >= 10");
  const Tensor templates = digit_templates();
  SplitMix64 rng(seed);
  constexpr double kCenterR = 3.0;
  constexpr double kCenterC = 3.5;
  std::vector<float> pixels(count * kDigitSize * kDigitSize);
  std::vector<std::int64_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t digit = i % 10;
    labels[i] = static_cast<std::int64_t>(digit);
    const double theta =
        rng.uniform(-options.max_rotation_deg, options.max_rotation_deg) * std::numbers::pi / 180.0;
    const double dr = rng.uniform(-options.max_shift_px, options.max_shift_px);
    const double dc = rng.uniform(-options.max_shift_px, options.max_shift_px);
    const double cs = std::cos(theta), sn = std::sin(theta);
    for (std::size_t r = 0; r < kDigitSize; ++r) {
      for (std::size_t c = 0; c < kDigitSize; ++c) {
        // Inverse map the output pixel back into template coordinates.
        const double y = static_cast<double>(r) - kCenterR - dr;
        const double x = static_cast<double>(c) - kCenterC - dc;
        const double sr = cs * y + sn * x + kCenterR;
        const double sc = -sn * y + cs * x + kCenterC;
        const double r0 = std::floor(sr), c0 = std::floor(sc);
        const double fr = sr - r0, fc = sc - c0;
        const long ir = static_cast<long>(r0), ic = static_cast<long>(c0);
        double v = (1 - fr) * (1 - fc) * template_at(templates, digit, ir, ic) +
                   (1 - fr) * fc * template_at(templates, digit, ir, ic + 1) +
                   fr * (1 - fc) * template_at(templates, digit, ir + 1, ic) +
                   fr * fc * template_at(templates, digit, ir + 1, ic + 1);
        if (options.noise_sigma > 0) v += options.noise_sigma * rng.normal();
        pixels[(i * kDigitSize + r) * kDigitSize + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return TensorDataset(Tensor::from(std::move(pixels), {count, 1, kDigitSize, kDigitSize}),
                       Tensor::from_ids(std::move(labels), {count}));
}

void export_digits(const TensorDataset& digits, const std::string& raw_path,
                   const std::string& manifest_path) {
  std::ofstream raw(raw_path, std::ios::binary);
  if (!raw) fail(ErrorCode::FileNotFound, "cannot write " + raw_path);
  for (float v : digits.inputs().data()) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    const unsigned char le[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                 static_cast<unsigned char>(bits >> 16),
                                 static_cast<unsigned char>(bits >> 24)};
    raw.write(reinterpret_cast<const char*>(le), 4);
  }
  nlohmann::json manifest;
  manifest["shape"] = digits.inputs().shape();
  std::vector<std::int64_t> labels(digits.targets().ids().begin(), digits.targets().ids().end());
  manifest["labels"] = labels;
  std::ofstream out(manifest_path);
  if (!out) fail(ErrorCode::FileNotFound, "cannot write " + manifest_path);
  out << manifest.dump() << '\n';
}

std::string TalksCorpus::text() const {
  std::string out;
  for (const auto& [q, a] : pairs) {
    out += "Q: ";
    out += q;
    out += "\tA: ";
    out += a;
    out += '\n';
  }
  return out;
}

namespace {

const std::vector<std::string> kNames{"anna", "ben",  "cara", "dan",  "emma", "finn", "gina",
                                      "hugo", "iris", "jack", "kate", "leo",  "mia",  "noah",
                                      "olga", "paul", "rosa", "sam",  "tara", "victor"};
const std::vector<std::string> kAnimals{"cat",   "dog",  "bird",  "fish",  "horse",
                                        "mouse", "frog", "rabbit", "duck",  "goat"};
const std::vector<std::string> kFoods{"apples", "bread", "cheese", "rice",   "soup",
                                      "pears",  "cake",  "beans",  "grapes", "carrots"};
const std::vector<std::string> kPlaces{"kitchen", "garden", "park",   "school", "library",
                                       "market",  "forest", "office", "beach",  "station"};
const std::vector<std::string> kColors{"red",   "blue",  "green", "yellow", "black",
                                       "white", "brown", "pink",  "orange", "purple"};
const std::vector<std::string> kThings{"ball", "hat",  "book", "cup",   "kite",
                                       "lamp", "shoe", "coat", "chair", "bike"};
const std::vector<std::string> kSkills{"swim", "run", "jump", "sing", "climb", "fly", "dig", "read"};
const std::vector<std::string> kNumbers{"zero", "one",   "two",   "three", "four",  "five",
                                        "six",  "seven", "eight", "nine",  "ten",   "eleven",
                                        "twelve"};
const std::vector<std::string> kDays{"monday", "tuesday", "wednesday", "thursday",
                                     "friday", "saturday", "sunday"};

template <class T>
const T& pick(const std::vector<T>& v, SplitMix64& rng) {
  return v[rng.below(v.size())];
}

}  // namespace

TalksCorpus synth_talks(std::uint64_t seed, std::size_t pairs) {
  SplitMix64 rng(seed);
  // The world: fixed facts per entity so answers are a function of the question.
  struct Person {
    std::string food, place, color, thing, day;
    std::size_t pets;
  };
  std::vector<Person> people;
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    people.push_back({pick(kFoods, rng), pick(kPlaces, rng), pick(kColors, rng),
                      pick(kThings, rng), pick(kDays, rng), 1 + rng.below(5)});
  }
  std::vector<std::vector<bool>> can(kAnimals.size(), std::vector<bool>(kSkills.size()));
  for (auto& row : can) {
    for (std::size_t s = 0; s < row.size(); ++s) row[s] = rng.below(2) == 1;
  }

  TalksCorpus corpus;
  corpus.pairs.reserve(pairs);
  while (corpus.pairs.size() < pairs) {
    const std::size_t who = rng.below(kNames.size());
    const std::string& name = kNames[who];
    const Person& p = people[who];
    std::string q, a;
    switch (rng.below(9)) {
      case 0:
        q = "what does " + name + " like to eat?";
        a = name + " likes to eat " + p.food + ".";
        break;
      case 1:
        q = "where is " + name + " today?";
        a = name + " is at the " + p.place + ".";
        break;
      case 2:
        q = "what color is the " + p.thing + " of " + name + "?";
        a = "the " + p.thing + " of " + name + " is " + p.color + ".";
        break;
      case 3:
        q = "how many pets does " + name + " have?";
        a = name + " has " + kNumbers[p.pets] + (p.pets == 1 ? " pet." : " pets.");
        break;
      case 4: {
        const std::size_t animal = rng.below(kAnimals.size());
        const std::size_t skill = rng.below(kSkills.size());
        q = "can the " + kAnimals[animal] + " " + kSkills[skill] + "?";
        a = can[animal][skill] ? "yes, the " + kAnimals[animal] + " can " + kSkills[skill] + "."
                               : "no, the " + kAnimals[animal] + " can not " + kSkills[skill] + ".";
        break;
      }
      case 5: {
        const std::size_t x = rng.below(7), y = rng.below(7);
        q = "what is " + kNumbers[x] + " plus " + kNumbers[y] + "?";
        a = kNumbers[x] + " plus " + kNumbers[y] + " is " + kNumbers[x + y] + ".";
        break;
      }
      case 6:
        q = "when does " + name + " go to the " + p.place + "?";
        a = name + " goes to the " + p.place + " on " + p.day + ".";
        break;
      case 7:
        q = "what does " + name + " have?";
        a = name + " has a " + p.color + " " + p.thing + ".";
        break;
      default: {
        const std::size_t other = rng.below(kNames.size());
        q = "is " + kNames[other] + " at the " + p.place + "?";
        a = people[other].place == p.place
                ? "yes, " + kNames[other] + " is at the " + p.place + "."
                : "no, " + kNames[other] + " is at the " + people[other].place + ".";
        break;
      }
    }
    corpus.pairs.emplace_back(std::move(q), std::move(a));
  }
  return corpus;
}

TensorDataset token_windows(const std::vector<std::int64_t>& ids, std::size_t seq_len,
                            std::size_t stride) {
  if (seq_len == 0 || stride == 0 || ids.size() < seq_len + 1) {
    fail(ErrorCode::InvalidArgument, "token stream too short for the window");
  }
  const std::size_t m = (ids.size() - seq_len - 1) / stride + 1;
  std::vector<std::int64_t> x(m * seq_len), y(m * seq_len);
  for (std::size_t w = 0; w < m; ++w) {
    for (std::size_t t = 0; t < seq_len; ++t) {
      x[w * seq_len + t] = ids[w * stride + t];
      y[w * seq_len + t] = ids[w * stride + t + 1];
    }
  }
  return TensorDataset(Tensor::from_ids(std::move(x), {m, seq_len}),
                       Tensor::from_ids(std::move(y), {m, seq_len}));
}

}  // namespace tt
