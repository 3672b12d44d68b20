#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "distilkit/error.hpp"
#include "distilkit/hash.hpp"
#include "distilkit/tokenizer.hpp"  // utf8 helpers

namespace distilkit {

struct CorpusStats {
  std::uint64_t lines = 0;
  std::uint64_t words = 0;
  std::uint64_t bytes = 0;

  nlohmann::json to_json() const {
    return {{"lines", lines}, {"words", words}, {"bytes", bytes}};
  }
};

namespace detail {

inline std::string_view rtrim(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::string_view trim(std::string_view s) {
  s = rtrim(s);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline std::uint64_t count_words(std::string_view s) {
  std::uint64_t n = 0;
  bool in_word = false;
  for (char c : s) {
    bool space = c == ' ' || c == '\t' || c == '\r' || c == '\n';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

// Frequent Romanian words the shipped language model is built from. Function
// words dominate on purpose: they are the most language-discriminative.
inline const std::vector<std::string>& romanian_seed_words() {
  static const std::vector<std::string> words = {
      "și",      "de",      "la",       "cu",       "în",      "pe",      "un",
      "o",       "este",    "sunt",     "al",       "ale",     "ai",      "lui",
      "ei",      "lor",     "că",       "să",       "se",      "nu",      "din",
      "pentru",  "mai",     "dar",      "sau",      "când",    "cum",     "unde",
      "cine",    "ce",      "care",     "această",  "acest",   "aceasta", "acesta",
      "după",    "până",    "între",    "către",    "fără",    "sub",     "peste",
      "prin",    "despre",  "asupra",   "foarte",   "mult",    "multe",   "mulți",
      "puțin",   "toate",   "toți",     "tot",      "fiecare", "alte",    "alți",
      "avea",    "are",     "avem",     "aveți",    "fost",    "fi",      "fie",
      "era",     "erau",    "va",       "vor",      "vom",     "fel",     "ani",
      "anul",    "zi",      "zile",     "timp",     "timpul",  "oameni",  "oamenii",
      "țară",    "țara",    "țării",    "oraș",     "orașul",  "lume",    "lumea",
      "viață",   "viața",   "casă",     "casa",     "apă",     "apa",     "copii",
      "copiii",  "femeie",  "bărbat",   "guvern",   "guvernul","președinte",
      "ministru","român",   "română",   "românesc", "astăzi",  "acum",    "aici",
      "acolo",   "bine",    "rău",      "mare",     "mic",     "mică",    "nou",
      "nouă",    "vechi",   "prim",     "primul",   "prima",   "ultima",  "ultimul",
      "față",    "fața",    "parte",    "partea",   "loc",     "locul",   "lucru",
      "lucruri", "spus",    "spune",    "face",     "făcut",   "poate",   "putea",
      "trebuie", "există",  "devenit",  "asta",     "acestea", "aceste",  "fiind",
      "doar",    "încă",    "după",     "atunci",   "dacă",    "deci",    "însă",
      "chiar",   "unei",    "unui",     "unor",     "celor",   "celui",   "cele",
      "cel",     "cea",     "lângă",    "înainte",  "împotriva"};
  return words;
}

// Function words used for the stopword-ratio component.
inline const std::unordered_set<std::string>& romanian_stopwords() {
  static const std::unordered_set<std::string> stops = {
      "și",  "de",  "la",   "cu",     "în",   "pe",  "un",   "o",    "este", "sunt",
      "al",  "ale", "că",   "să",     "se",   "nu",  "din",  "pentru", "mai", "dar",
      "sau", "ce",  "care", "după",   "până", "între", "către", "fără", "sub", "prin",
      "a",   "va",  "vor",  "fost",   "fi",   "era",  "dacă", "însă", "doar", "chiar",
      "cel", "cea", "cele", "lui",    "unei", "unui", "acest", "această"};
  return stops;
}

inline const std::unordered_set<std::string>& romanian_trigrams() {
  static const std::unordered_set<std::string> grams = [] {
    std::unordered_set<std::string> g;
    for (const auto& w : romanian_seed_words()) {
      auto cps = utf8::decode(w);
      std::vector<char32_t> padded;
      padded.push_back(U' ');
      padded.insert(padded.end(), cps.begin(), cps.end());
      padded.push_back(U' ');
      for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        std::string tri;
        for (std::size_t k = 0; k < 3; ++k) utf8::append(tri, padded[i + k]);
        g.insert(std::move(tri));
      }
    }
    return g;
  }();
  return grams;
}

}  // namespace detail

// Character-trigram hit rate blended with a Romanian stopword ratio.
// Returns a score in [0,1]; the threshold lives in CleaningRules.
inline double language_gate(std::string_view line) {
  std::string lowered = utf8::lowercase(line);
  auto cps = utf8::decode(lowered);
  std::vector<char32_t> norm;
  norm.reserve(cps.size() + 2);
  norm.push_back(U' ');
  for (char32_t cp : cps) norm.push_back(utf8::is_letter(cp) ? cp : U' ');
  norm.push_back(U' ');

  const auto& grams = detail::romanian_trigrams();
  std::size_t total = 0, hits = 0;
  for (std::size_t i = 0; i + 3 <= norm.size(); ++i) {
    if (norm[i] == U' ' && norm[i + 1] == U' ') continue;  // skip empty windows
    std::string tri;
    for (std::size_t k = 0; k < 3; ++k) utf8::append(tri, norm[i + k]);
    ++total;
    if (grams.count(tri)) ++hits;
  }
  if (total == 0) return 0.0;

  const auto& stops = detail::romanian_stopwords();
  std::size_t words = 0, stop_hits = 0;
  std::string current;
  for (std::size_t i = 1; i + 1 < norm.size(); ++i) {
    if (norm[i] == U' ') {
      if (!current.empty()) {
        ++words;
        if (stops.count(current)) ++stop_hits;
        current.clear();
      }
    } else {
      utf8::append(current, norm[i]);
    }
  }
  if (!current.empty()) {
    ++words;
    if (stops.count(current)) ++stop_hits;
  }

  double trigram_rate = double(hits) / double(total);
  double stop_rate = words ? double(stop_hits) / double(words) : 0.0;
  double score = 0.55 * trigram_rate + 0.45 * std::min(1.0, 2.5 * stop_rate);
  return std::min(1.0, score);
}

struct CleaningRules {
  bool drop_diacritic_noise = true;
  std::vector<std::string> named_entities;  // capitalized forms
  double language_threshold = 0.5;
  std::vector<std::string> artifact_prefixes;
  std::vector<std::string> artifact_suffixes;

  // Lowercased variants of the NE list; matching happens against these.
  std::vector<std::string> lowercased_entities() const {
    std::vector<std::string> out;
    out.reserve(named_entities.size());
    for (const auto& e : named_entities) out.push_back(utf8::lowercase(e));
    return out;
  }

  static CleaningRules defaults() {
    CleaningRules r;
    r.named_entities = {
        "București", "România",    "Iași",      "Cluj",       "Timișoara",
        "Constanța", "Craiova",    "Galați",    "Brașov",     "Ploiești",
        "Oradea",    "Brăila",     "Arad",      "Pitești",    "Sibiu",
        "Bacău",     "Buzău",      "Botoșani",  "Suceava",    "Focșani",
        "Tulcea",    "Târgoviște", "Reșița",    "Slatina",    "Bistrița",
        "Hunedoara", "Giurgiu",    "Deva",      "Zalău",      "Vaslui",
        "Călărași",  "Europa",     "Dunărea",   "Carpați",    "Transilvania",
        "Muntenia",  "Oltenia",    "Banat",     "Bucovina",   "Dobrogea",
        "Maramureș", "Moldova",    "Chișinău",  "Dâmbovița",  "Prahova",
        "Ardeal",    "Severin",    "Năvodari",  "Mangalia",   "Medgidia"};
    r.artifact_prefixes = {"Articolul Anterior", "Articolul Următor",
                           "Citește și:", "Citeste si:", "Publicitate"};
    r.artifact_suffixes = {"Articolul Următor", "Articolul Anterior",
                           "Citește mai mult", "Sursa foto"};
    return r;
  }

  // Sectioned plain text:
  //   [named_entities] / [artifact_prefixes] / [artifact_suffixes] one entry
  //   per line; [language_threshold] a single number; '#' starts a comment.
  static CleaningRules from_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open rules file: " + path);
    CleaningRules r;
    r.named_entities.clear();
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::string_view v = detail::trim(line);
      if (v.empty() || v.front() == '#') continue;
      if (v.front() == '[' && v.back() == ']') {
        section = std::string(v.substr(1, v.size() - 2));
        continue;
      }
      if (section == "named_entities") {
        r.named_entities.emplace_back(v);
      } else if (section == "artifact_prefixes") {
        r.artifact_prefixes.emplace_back(v);
      } else if (section == "artifact_suffixes") {
        r.artifact_suffixes.emplace_back(v);
      } else if (section == "language_threshold") {
        try {
          r.language_threshold = std::stod(std::string(v));
        } catch (const std::exception&) {
          throw FormatError(path + ":" + std::to_string(lineno) +
                            ": language_threshold expects a number");
        }
      } else {
        throw FormatError(path + ":" + std::to_string(lineno) +
                          ": entry outside a known section");
      }
    }
    return r;
  }
};

struct CleanDecision {
  bool keep = false;
  std::string line;    // rewritten line when kept
  std::string reason;  // drop reason otherwise
};

namespace detail {

// '?' flanked by letters on both sides marks corrupted diacritics
// ("c?nd" for "când"); a sentence-final '?' is left alone.
inline bool has_diacritic_noise(std::string_view line) {
  auto cps = utf8::decode(line);
  for (std::size_t i = 1; i + 1 < cps.size(); ++i)
    if (cps[i] == U'?' && utf8::is_letter(cps[i - 1]) && utf8::is_letter(cps[i + 1]))
      return true;
  return false;
}

inline bool contains_word(std::string_view line, const std::string& word) {
  auto cps = utf8::decode(line);
  auto wcps = utf8::decode(word);
  if (wcps.empty()) return false;
  for (std::size_t i = 0; i + wcps.size() <= cps.size(); ++i) {
    bool left_ok = i == 0 || !utf8::is_letter(cps[i - 1]);
    if (!left_ok) continue;
    bool match = true;
    for (std::size_t k = 0; k < wcps.size(); ++k)
      if (cps[i + k] != wcps[k]) {
        match = false;
        break;
      }
    if (!match) continue;
    std::size_t end = i + wcps.size();
    if (end == cps.size() || !utf8::is_letter(cps[end])) return true;
  }
  return false;
}

}  // namespace detail

inline CleanDecision clean_line(std::string_view raw, const CleaningRules& rules) {
  std::string line{detail::trim(raw)};

  // Strip web artifacts until a fixed point, so cleaning is idempotent.
  bool stripped = true;
  while (stripped) {
    stripped = false;
    for (const auto& p : rules.artifact_prefixes) {
      if (line.size() >= p.size() && line.compare(0, p.size(), p) == 0) {
        line = std::string(detail::trim(std::string_view(line).substr(p.size())));
        stripped = true;
      }
    }
    for (const auto& s : rules.artifact_suffixes) {
      if (line.size() >= s.size() &&
          line.compare(line.size() - s.size(), s.size(), s) == 0) {
        line = std::string(detail::trim(std::string_view(line).substr(0, line.size() - s.size())));
        stripped = true;
      }
    }
  }

  if (rules.drop_diacritic_noise && detail::has_diacritic_noise(line))
    return {false, "", "diacritic-noise"};

  for (const auto& lowered : rules.lowercased_entities())
    if (detail::contains_word(line, lowered))
      return {false, "", "uncapitalized-named-entity"};

  if (language_gate(line) < rules.language_threshold) return {false, "", "not-romanian"};

  return {true, line, ""};
}

struct CleanReport {
  CorpusStats kept;
  std::uint64_t dropped_diacritic = 0;
  std::uint64_t dropped_entity = 0;
  std::uint64_t dropped_language = 0;

  std::uint64_t dropped_total() const {
    return dropped_diacritic + dropped_entity + dropped_language;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = kept.to_json();
    j["dropped"] = {{"diacritic-noise", dropped_diacritic},
                    {"uncapitalized-named-entity", dropped_entity},
                    {"not-romanian", dropped_language}};
    return j;
  }
};

inline CleanReport clean_stream(std::istream& in, std::ostream& out,
                                const CleaningRules& rules) {
  CleanReport report;
  std::string line;
  while (std::getline(in, line)) {
    CleanDecision d = clean_line(line, rules);
    if (d.keep) {
      out << d.line << '\n';
      report.kept.lines += 1;
      report.kept.words += detail::count_words(d.line);
      report.kept.bytes += d.line.size() + 1;
    } else if (d.reason == "diacritic-noise") {
      ++report.dropped_diacritic;
    } else if (d.reason == "uncapitalized-named-entity") {
      ++report.dropped_entity;
    } else {
      ++report.dropped_language;
    }
  }
  return report;
}

// Streaming exact-line dedup over 128-bit content hashes; first occurrence
// wins, lines are trimmed of trailing whitespace before hashing. Memory is
// bounded by the hash set, not the input size.
inline CorpusStats dedup_merge(const std::vector<std::string>& inputs,
                               const std::string& output) {
  std::ofstream os(output, std::ios::binary);
  if (!os) throw IoError("cannot open output file: " + output);
  std::unordered_set<Hash128, Hash128Hasher> seen;
  CorpusStats stats;
  for (const auto& path : inputs) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open input file: " + path);
    std::string line;
    while (std::getline(is, line)) {
      std::string trimmed{detail::rtrim(line)};
      if (!seen.insert(murmur3_128(trimmed)).second) continue;
      os << trimmed << '\n';
      stats.lines += 1;
      stats.words += detail::count_words(trimmed);
      stats.bytes += trimmed.size() + 1;
    }
    if (is.bad()) throw IoError("read failure on input file: " + path);
  }
  if (!os) throw IoError("write failure on output file: " + output);
  return stats;
}

// Exact line/word/byte counts. A final line without a trailing newline still
// counts as a line; bytes is the raw file size.
inline CorpusStats corpus_stats(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open file: " + path);
  CorpusStats stats;
  char buf[1 << 16];
  bool in_word = false;
  bool pending_line = false;
  while (is) {
    is.read(buf, sizeof(buf));
    std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      char c = buf[i];
      ++stats.bytes;
      pending_line = true;
      if (c == '\n') {
        ++stats.lines;
        pending_line = false;
      }
      bool space = c == ' ' || c == '\t' || c == '\r' || c == '\n';
      if (!space && !in_word) ++stats.words;
      in_word = !space;
    }
  }
  if (pending_line) ++stats.lines;
  return stats;
}

}  // namespace distilkit
