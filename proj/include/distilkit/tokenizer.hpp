#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "distilkit/error.hpp"

namespace distilkit {

inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kMaskToken = "[MASK]";
inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";

enum class Casing { cased, uncased };

namespace utf8 {

inline std::vector<char32_t> decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    unsigned char c = s[i];
    char32_t cp = 0;
    std::size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1F;
      len = 2;
    } else if ((c >> 4) == 0xE) {
      cp = c & 0x0F;
      len = 3;
    } else if ((c >> 3) == 0x1E) {
      cp = c & 0x07;
      len = 4;
    } else {
      out.push_back(0xFFFD);  // stray continuation byte
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(0xFFFD);
      break;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      unsigned char cc = s[i + k];
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(char(cp));
  } else if (cp < 0x800) {
    out.push_back(char(0xC0 | (cp >> 6)));
    out.push_back(char(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(char(0xE0 | (cp >> 12)));
    out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(char(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(char(0xF0 | (cp >> 18)));
    out.push_back(char(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(char(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(char(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode(const std::vector<char32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) append(out, cp);
  return out;
}

// Simple one-to-one lowercase over ASCII, Latin-1 and the Latin Extended
// A/B ranges used by Romanian (Ă Â Î Ș Ț Ş Ţ and friends). Code points
// outside the covered ranges pass through unchanged.
inline char32_t to_lower(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  if (cp >= 0x0100 && cp <= 0x0137) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x0139 && cp <= 0x0148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x014A && cp <= 0x0177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x0179 && cp <= 0x017D) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x0200 && cp <= 0x021F && cp != 0x0220) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x0222 && cp <= 0x0233) return (cp % 2 == 0) ? cp + 1 : cp;
  return cp;
}

inline std::string lowercase(std::string_view s) {
  auto cps = decode(s);
  for (auto& cp : cps) cp = to_lower(cp);
  return encode(cps);
}

inline bool is_letter(char32_t cp) {
  if ((cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z')) return true;
  if (cp >= 0xC0 && cp <= 0x24F && cp != 0xD7 && cp != 0xF7) return true;
  return cp >= 0x250 && cp < 0x2B9;  // IPA extensions, still letters
}

inline bool is_punct(char32_t cp) {
  if ((cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
      (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E))
    return true;
  switch (cp) {
    case 0x00AB: case 0x00BB:                      // « »
    case 0x2010: case 0x2013: case 0x2014:         // hyphen, dashes
    case 0x2018: case 0x2019: case 0x201A:         // single quotes
    case 0x201C: case 0x201D: case 0x201E:         // double quotes incl. „
    case 0x2026:                                   // …
      return true;
    default:
      return false;
  }
}

}  // namespace utf8

// Vocabulary with dense ids 0..V-1 in file order; all five special tokens
// must be present.
class Vocab {
 public:
  Vocab(std::vector<std::string> tokens, Casing casing) : casing_(casing) {
    tokens_ = std::move(tokens);
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      auto [it, inserted] = index_.emplace(tokens_[i], int(i));
      if (!inserted)
        throw FormatError("duplicate token in vocabulary: \"" + tokens_[i] + "\"");
    }
    cls_ = require(kClsToken);
    sep_ = require(kSepToken);
    mask_ = require(kMaskToken);
    pad_ = require(kPadToken);
    unk_ = require(kUnkToken);
  }

  std::size_t size() const { return tokens_.size(); }
  Casing casing() const { return casing_; }

  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }
  int mask_id() const { return mask_; }
  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }

  bool is_special(int id) const {
    return id == cls_ || id == sep_ || id == mask_ || id == pad_ || id == unk_;
  }

  std::optional<int> lookup(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || std::size_t(id) >= tokens_.size())
      throw DataError("token id out of range: " + std::to_string(id));
    return tokens_[std::size_t(id)];
  }

  std::vector<int> ids_of(const std::vector<std::string>& toks) const {
    std::vector<int> out;
    out.reserve(toks.size());
    for (const auto& t : toks) {
      auto id = lookup(t);
      if (!id) throw DataError("token not in vocabulary: \"" + t + "\"");
      out.push_back(*id);
    }
    return out;
  }

 private:
  int require(const char* tok) const {
    auto it = index_.find(tok);
    if (it == index_.end())
      throw FormatError(std::string("vocabulary is missing the special token ") + tok);
    return it->second;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  Casing casing_;
  int cls_ = 0, sep_ = 0, mask_ = 0, pad_ = 0, unk_ = 0;
};

// One token per line, UTF-8, id = line index; "##" prefixes continuation pieces.
inline Vocab load_vocab(const std::string& path, Casing casing) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open vocabulary file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens), casing);
}

// Token ids plus attention mask (1 = real) and segment ids (0 = first
// sentence including its [SEP], 1 = second).
struct Encoding {
  std::vector<int> ids;
  std::vector<int> attention_mask;
  std::vector<int> segment_ids;

  std::size_t size() const { return ids.size(); }
};

namespace detail {

inline constexpr std::size_t kMaxWordChars = 100;

// Whitespace split, then punctuation characters become standalone words.
inline std::vector<std::string> pre_split(std::string_view text) {
  std::vector<std::string> words;
  auto cps = utf8::decode(text);
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      words.push_back(current);
      current.clear();
    }
  };
  for (char32_t cp : cps) {
    if (cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == 0x00A0) {
      flush();
    } else if (utf8::is_punct(cp)) {
      flush();
      std::string p;
      utf8::append(p, cp);
      words.push_back(p);
    } else {
      utf8::append(current, cp);
    }
  }
  flush();
  return words;
}

// Greedy longest-match against the vocabulary; the whole word becomes [UNK]
// if any remainder cannot be matched.
inline void wordpiece(const std::string& word, const Vocab& vocab,
                      std::vector<std::string>& out) {
  auto cps = utf8::decode(word);
  if (cps.size() > kMaxWordChars) {
    out.push_back(kUnkToken);
    return;
  }
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < cps.size()) {
    std::size_t end = cps.size();
    std::string match;
    while (end > start) {
      std::string candidate;
      if (start > 0) candidate = "##";
      for (std::size_t i = start; i < end; ++i) utf8::append(candidate, cps[i]);
      if (vocab.lookup(candidate)) {
        match = candidate;
        break;
      }
      --end;
    }
    if (match.empty()) {
      out.push_back(kUnkToken);
      return;
    }
    pieces.push_back(match);
    start = end;
  }
  for (auto& p : pieces) out.push_back(std::move(p));
}

}  // namespace detail

inline std::vector<std::string> tokenize(std::string_view text, const Vocab& vocab) {
  std::string normalized;
  if (vocab.casing() == Casing::uncased) {
    normalized = utf8::lowercase(text);
    text = normalized;
  }
  std::vector<std::string> out;
  for (const auto& word : detail::pre_split(text)) detail::wordpiece(word, vocab, out);
  return out;
}

// [CLS] a [SEP] (b [SEP]) padded to max_len. Longest-first truncation: drop
// from the back of the longer segment, ties from the second.
inline Encoding encode_pair(const std::string& a, const std::optional<std::string>& b,
                            const Vocab& vocab, std::size_t max_len) {
  if (max_len < 3)
    throw ContractError("encode_pair: max_len must be at least 3, got " +
                        std::to_string(max_len));
  std::vector<int> ta = vocab.ids_of(tokenize(a, vocab));
  std::vector<int> tb;
  if (b) tb = vocab.ids_of(tokenize(*b, vocab));

  std::size_t specials = b ? 3 : 2;
  std::size_t budget = max_len - specials;
  while (ta.size() + tb.size() > budget) {
    if (ta.size() > tb.size())
      ta.pop_back();
    else
      tb.pop_back();
  }

  Encoding enc;
  enc.ids.reserve(max_len);
  enc.ids.push_back(vocab.cls_id());
  enc.segment_ids.assign(1, 0);
  for (int id : ta) {
    enc.ids.push_back(id);
    enc.segment_ids.push_back(0);
  }
  enc.ids.push_back(vocab.sep_id());
  enc.segment_ids.push_back(0);
  if (b) {
    for (int id : tb) {
      enc.ids.push_back(id);
      enc.segment_ids.push_back(1);
    }
    enc.ids.push_back(vocab.sep_id());
    enc.segment_ids.push_back(1);
  }
  enc.attention_mask.assign(enc.ids.size(), 1);
  while (enc.ids.size() < max_len) {
    enc.ids.push_back(vocab.pad_id());
    enc.attention_mask.push_back(0);
    enc.segment_ids.push_back(0);
  }
  return enc;
}

}  // namespace distilkit
