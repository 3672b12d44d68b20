#pragma once

// Brute-force four-schema NER reference used by both the unit suite and the
// acceptance suite. Independent of the library implementation: separate IOB
// decoder, separate event bookkeeping, separate P/R/F1 arithmetic.

#include <random>
#include <string>
#include <vector>

#include "distilkit/taskmetrics.hpp"

namespace ner_reference {

struct Span {
  std::size_t lo, hi;
  std::string type;
};

inline std::vector<Span> decode(const std::vector<std::string>& labels) {
  std::vector<Span> out;
  std::size_t i = 0;
  while (i < labels.size()) {
    if (labels[i] == "O") {
      ++i;
      continue;
    }
    std::string type = labels[i].substr(2);
    std::size_t lo = i;
    ++i;
    while (i < labels.size() && labels[i].size() > 2 && labels[i][0] == 'I' &&
           labels[i].substr(2) == type)
      ++i;
    out.push_back({lo, i, type});
  }
  return out;
}

struct Counts {
  double cor = 0, inc = 0, par = 0, mis = 0, spu = 0;
  double possible() const { return cor + inc + par + mis; }
  double actual() const { return cor + inc + par + spu; }
  double score() const { return cor + 0.5 * par; }
  double prec() const { return actual() ? score() / actual() : 0.0; }
  double rec() const { return possible() ? score() / possible() : 0.0; }
  double f1() const {
    double p = prec(), r = rec();
    return p + r ? 2 * p * r / (p + r) : 0.0;
  }
};

struct FourSchemas {
  Counts strict, exact, partial, type;
};

// Each pred binds the first full match, else the first boundary match, else
// the first overlap; unbound golds are missed.
inline void score_doc(const std::vector<Span>& gold, const std::vector<Span>& pred,
                      FourSchemas& s) {
  std::vector<bool> bound(gold.size(), false);
  for (const auto& p : pred) {
    int kind = -1;  // 0 full, 1 boundary, 2 overlap-same-type, 3 overlap-diff
    std::size_t which = gold.size();
    for (std::size_t g = 0; g < gold.size() && kind != 0; ++g) {
      bool same_b = gold[g].lo == p.lo && gold[g].hi == p.hi;
      bool over = gold[g].lo < p.hi && p.lo < gold[g].hi;
      if (same_b && gold[g].type == p.type) {
        kind = 0;
        which = g;
      } else if (kind == -1 || kind > 1) {
        if (same_b) {
          kind = 1;
          which = g;
        } else if (over && kind == -1) {
          kind = gold[g].type == p.type ? 2 : 3;
          which = g;
        }
      }
    }
    if (kind == -1) {
      s.strict.spu++;
      s.exact.spu++;
      s.partial.spu++;
      s.type.spu++;
      continue;
    }
    bound[which] = true;
    switch (kind) {
      case 0:
        s.strict.cor++;
        s.exact.cor++;
        s.partial.cor++;
        s.type.cor++;
        break;
      case 1:
        s.strict.inc++;
        s.exact.cor++;
        s.partial.cor++;
        s.type.inc++;
        break;
      case 2:
        s.strict.inc++;
        s.exact.inc++;
        s.partial.par++;
        s.type.cor++;
        break;
      case 3:
        s.strict.inc++;
        s.exact.inc++;
        s.partial.par++;
        s.type.inc++;
        break;
    }
  }
  for (std::size_t g = 0; g < gold.size(); ++g)
    if (!bound[g]) {
      s.strict.mis++;
      s.exact.mis++;
      s.partial.mis++;
      s.type.mis++;
    }
}

inline FourSchemas eval_ref(const std::vector<distilkit::NerDocument>& docs) {
  FourSchemas s;
  for (const auto& d : docs) score_doc(decode(d.gold), decode(d.pred), s);
  return s;
}

inline std::vector<std::string> random_labels(std::mt19937_64& rng, std::size_t len) {
  static const std::vector<std::string> menu = {"O",     "B-PER", "I-PER", "B-LOC",
                                                "I-LOC", "B-ORG", "I-ORG"};
  std::uniform_int_distribution<std::size_t> pick(0, menu.size() - 1);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < len; ++i) out.push_back(menu[pick(rng)]);
  return out;
}

}  // namespace ner_reference
