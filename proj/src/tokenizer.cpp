#include "tt/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "json.hpp"

#include "tt/error.hpp"

namespace tt {

namespace {

using Symbols = std::vector<std::string>;
using Pair = std::pair<std::string, std::string>;

// Splits after every '\n' so each chunk keeps its terminator.
std::vector<std::string_view> chunks(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') {
      out.push_back(text.substr(start, i + 1 - start));
      start = i + 1;
    }
  }
  if (start < text.size()) out.push_back(text.substr(start));
  return out;
}

void add_token(BPEVocab& v, const std::string& token) {
  if (v.lookup.count(token)) return;
  v.lookup.emplace(token, static_cast<std::int64_t>(v.tokens.size()));
  v.tokens.push_back(token);
}

BPEVocab base_vocab(const std::vector<unsigned char>& alphabet) {
  BPEVocab v;
  for (const auto& s : special_tokens()) {
    v.lookup.emplace(s, static_cast<std::int64_t>(v.tokens.size()));
    v.tokens.push_back(s);
  }
  v.alphabet = alphabet;
  for (unsigned char c : alphabet) add_token(v, std::string(1, static_cast<char>(c)));
  return v;
}

void merge_in_place(Symbols& s, const Pair& p, const std::string& merged) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < s.size(); ++w) {
    if (r + 1 < s.size() && s[r] == p.first && s[r + 1] == p.second) {
      s[w] = merged;
      r += 2;
    } else {
      if (w != r) s[w] = std::move(s[r]);
      ++r;
    }
  }
  s.resize(w);
}

bool valid_utf8(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += len;
  }
  return true;
}

nlohmann::json token_json(const std::string& t) {
  if (valid_utf8(t)) return t;
  auto arr = nlohmann::json::array();
  for (char c : t) arr.push_back(static_cast<unsigned char>(c));
  return arr;
}

std::string token_from_json(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  std::string out;
  for (const auto& b : j) out.push_back(static_cast<char>(b.get<int>()));
  return out;
}

}  // namespace

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials{"<pad>", "<unk>", "<bos>", "<eos>"};
  return specials;
}

std::int64_t BPEVocab::id_of(const std::string& token) const {
  auto it = lookup.find(token);
  return it == lookup.end() ? kUnkId : it->second;
}

BPEVocab bpe_train(std::string_view corpus, std::size_t vocab_size) {
  std::array<bool, 256> seen{};
  for (char c : corpus) seen[static_cast<unsigned char>(c)] = true;
  std::vector<unsigned char> alphabet;
  for (int c = 0; c < 256; ++c) {
    if (seen[c]) alphabet.push_back(static_cast<unsigned char>(c));
  }
  BPEVocab v = base_vocab(alphabet);
  if (vocab_size <= v.size()) {
    fail(ErrorCode::VocabTooSmall, "vocab_size " + std::to_string(vocab_size) +
                                       " must exceed base alphabet + specials (" +
                                       std::to_string(v.size()) + ")");
  }

  // Identical chunks are merged identically, so train on distinct ones.
  std::map<std::string, std::size_t> freq;
  for (auto c : chunks(corpus)) ++freq[std::string(c)];
  std::vector<std::pair<Symbols, std::size_t>> words;
  for (const auto& [text, n] : freq) {
    Symbols s;
    for (char c : text) s.emplace_back(1, c);
    words.emplace_back(std::move(s), n);
  }

  while (v.size() < vocab_size) {
    std::map<Pair, std::size_t> counts;
    for (const auto& [s, n] : words) {
      for (std::size_t i = 0; i + 1 < s.size(); ++i) counts[{s[i], s[i + 1]}] += n;
    }
    // std::map iterates pairs in lexicographic order, so the first maximum wins ties.
    const Pair* best = nullptr;
    std::size_t best_count = 1;
    for (const auto& [p, n] : counts) {
      if (n > best_count) {
        best = &p;
        best_count = n;
      }
    }
    if (best == nullptr) break;
    const Pair chosen = *best;
    const std::string merged = chosen.first + chosen.second;
    for (auto& w : words) merge_in_place(w.first, chosen, merged);
    v.merges.push_back(chosen);
    add_token(v, merged);
  }
  return v;
}

std::vector<std::int64_t> bpe_encode(const BPEVocab& vocab, std::string_view text) {
  std::map<Pair, std::size_t> rank;
  for (std::size_t i = 0; i < vocab.merges.size(); ++i) rank.emplace(vocab.merges[i], i);
  std::array<bool, 256> known{};
  for (unsigned char c : vocab.alphabet) known[c] = true;

  std::vector<std::int64_t> ids;
  std::map<std::string_view, std::vector<std::int64_t>> memo;
  for (auto chunk : chunks(text)) {
    auto hit = memo.find(chunk);
    if (hit != memo.end()) {
      ids.insert(ids.end(), hit->second.begin(), hit->second.end());
      continue;
    }
    // Unknown bytes become an empty symbol that no merge can match.
    Symbols s;
    for (char c : chunk) {
      s.push_back(known[static_cast<unsigned char>(c)] ? std::string(1, c) : std::string());
    }
    while (s.size() > 1) {
      std::size_t best_rank = vocab.merges.size();
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        if (s[i].empty() || s[i + 1].empty()) continue;
        auto it = rank.find({s[i], s[i + 1]});
        if (it != rank.end()) best_rank = std::min(best_rank, it->second);
      }
      if (best_rank == vocab.merges.size()) break;
      const Pair& p = vocab.merges[best_rank];
      merge_in_place(s, p, p.first + p.second);
    }
    std::vector<std::int64_t> out;
    out.reserve(s.size());
    for (const auto& sym : s) out.push_back(sym.empty() ? kUnkId : vocab.id_of(sym));
    ids.insert(ids.end(), out.begin(), out.end());
    memo.emplace(chunk, std::move(out));
  }
  return ids;
}

std::string bpe_decode(const BPEVocab& vocab, const std::vector<std::int64_t>& ids) {
  std::string out;
  for (std::int64_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
      fail(ErrorCode::InvalidTokenId,
           "id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab.size()));
    }
    if (id == kUnkId) {
      out += "\xEF\xBF\xBD";
    } else if (id > kEosId) {
      out += vocab.tokens[static_cast<std::size_t>(id)];
    }
  }
  return out;
}

std::string bpe_to_json(const BPEVocab& vocab) {
  nlohmann::json j;
  j["version"] = 1;
  auto merges = nlohmann::json::array();
  for (const auto& [l, r] : vocab.merges) merges.push_back({token_json(l), token_json(r)});
  j["merges"] = merges;
  j["specials"] = special_tokens();
  j["alphabet"] = vocab.alphabet;
  return j.dump();
}

BPEVocab bpe_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("tokenizer json: ") + e.what());
  }
  if (!j.contains("merges") || !j.contains("alphabet")) {
    fail(ErrorCode::InvalidArgument, "tokenizer json lacks merges or alphabet");
  }
  BPEVocab v = base_vocab(j["alphabet"].get<std::vector<unsigned char>>());
  for (const auto& m : j["merges"]) {
    Pair p{token_from_json(m.at(0)), token_from_json(m.at(1))};
    add_token(v, p.first + p.second);
    v.merges.push_back(std::move(p));
  }
  return v;
}

}  // namespace tt
