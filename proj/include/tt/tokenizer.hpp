#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tt {

inline constexpr std::int64_t kPadId = 0;
inline constexpr std::int64_t kUnkId = 1;
inline constexpr std::int64_t kBosId = 2;
inline constexpr std::int64_t kEosId = 3;

/// Byte-pair vocabulary. Ids 0-3 are the specials, then the base alphabet
/// (the distinct bytes of the training corpus, ascending), then one token
/// per merge in rank order.
struct BPEVocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, std::int64_t> lookup;
  std::vector<std::pair<std::string, std::string>> merges;
  std::vector<unsigned char> alphabet;

  std::size_t size() const { return tokens.size(); }
  std::size_t base_size() const { return alphabet.size() + 4; }
  std::int64_t id_of(const std::string& token) const;
};

const std::vector<std::string>& special_tokens();

/// Merges run within newline-terminated chunks: a pair never spans a line
/// break. Pair counts include overlaps ("aaa" holds ("a","a") twice).
/// Stops at vocab_size or when no pair occurs at least twice.
BPEVocab bpe_train(std::string_view corpus, std::size_t vocab_size);

// Bytes outside the alphabet encode to UNK.
std::vector<std::int64_t> bpe_encode(const BPEVocab& vocab, std::string_view text);
// PAD/BOS/EOS decode to nothing, UNK to U+FFFD.
std::string bpe_decode(const BPEVocab& vocab, const std::vector<std::int64_t>& ids);

// {version, merges: [[left, right], ...], specials, alphabet}. Tokens that
// are not valid UTF-8 are written as arrays of byte values.
std::string bpe_to_json(const BPEVocab& vocab);
BPEVocab bpe_from_json(std::string_view json);

}  // namespace tt
