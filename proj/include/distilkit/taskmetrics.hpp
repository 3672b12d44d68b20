#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "distilkit/error.hpp"

namespace distilkit {

// ---------------------------------------------------------------------------
// Classification metrics
// ---------------------------------------------------------------------------

inline double accuracy(const std::vector<int>& gold, const std::vector<int>& pred) {
  if (gold.size() != pred.size())
    throw ContractError("accuracy: length mismatch, " + std::to_string(gold.size()) +
                        " vs " + std::to_string(pred.size()));
  if (gold.empty()) throw ContractError("accuracy on empty sequences");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i] == pred[i]) ++hits;
  return double(hits) / double(gold.size());
}

// Unweighted mean of per-class F1 over all num_labels classes; a class absent
// from both gold and pred contributes F1 = 0 and is still averaged.
inline double macro_f1(const std::vector<int>& gold, const std::vector<int>& pred,
                       int num_labels) {
  if (gold.size() != pred.size())
    throw ContractError("macro_f1: length mismatch, " + std::to_string(gold.size()) +
                        " vs " + std::to_string(pred.size()));
  if (num_labels < 1) throw ContractError("macro_f1: num_labels must be positive");
  std::vector<std::size_t> tp(num_labels, 0), fp(num_labels, 0), fn(num_labels, 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= num_labels || pred[i] < 0 || pred[i] >= num_labels)
      throw DataError("macro_f1: label out of range at index " + std::to_string(i));
    if (gold[i] == pred[i]) {
      ++tp[std::size_t(gold[i])];
    } else {
      ++fp[std::size_t(pred[i])];
      ++fn[std::size_t(gold[i])];
    }
  }
  double total = 0.0;
  for (int c = 0; c < num_labels; ++c) {
    double p = tp[c] + fp[c] ? double(tp[c]) / double(tp[c] + fp[c]) : 0.0;
    double r = tp[c] + fn[c] ? double(tp[c]) / double(tp[c] + fn[c]) : 0.0;
    total += (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
  }
  return total / double(num_labels);
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw ContractError("pearson: length mismatch");
  if (x.size() < 2) throw ContractError("pearson needs at least two points");
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  double my = std::accumulate(y.begin(), y.end(), 0.0) / double(y.size());
  double cov = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    cov += dx * dy;
    vx += dx * dx;
    vy += dy * dy;
  }
  if (vx == 0.0 || vy == 0.0)
    throw DomainError("pearson undefined: zero variance input");
  return cov / std::sqrt(vx * vy);
}

// Average ranks, ties receiving the mean of their rank block (1-based).
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    double mean_rank = (double(i + 1) + double(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw ContractError("spearman: length mismatch");
  if (x.size() < 2) throw ContractError("spearman needs at least two points");
  return pearson(average_ranks(x), average_ranks(y));
}

// ---------------------------------------------------------------------------
// Four-schema NER scoring (SemEval-2013 task 9.1 style)
// ---------------------------------------------------------------------------

struct NerSpan {
  std::size_t start = 0;  // token index, inclusive
  std::size_t end = 0;    // token index, exclusive
  std::string type;

  bool operator==(const NerSpan&) const = default;
  bool same_boundary(const NerSpan& o) const { return start == o.start && end == o.end; }
  bool overlaps(const NerSpan& o) const { return start < o.end && o.start < end; }
};

// Lenient IOB decoding: an I-X without a preceding B-X/I-X opens a new span.
// Malformed label strings raise a DataError naming the position.
inline std::vector<NerSpan> spans_from_iob(const std::vector<std::string>& labels) {
  std::vector<NerSpan> spans;
  std::string open_type;
  std::size_t open_start = 0;
  auto close = [&](std::size_t end) {
    if (!open_type.empty()) {
      spans.push_back({open_start, end, open_type});
      open_type.clear();
    }
  };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string& l = labels[i];
    if (l == "O") {
      close(i);
      continue;
    }
    if (l.size() < 3 || (l[0] != 'B' && l[0] != 'I') || l[1] != '-')
      throw DataError("malformed IOB label \"" + l + "\" at position " + std::to_string(i));
    std::string type = l.substr(2);
    if (l[0] == 'B' || type != open_type) {
      close(i);
      open_type = type;
      open_start = i;
    }
  }
  close(labels.size());
  return spans;
}

struct NerDocument {
  std::vector<std::string> tokens;  // optional, evaluation only needs labels
  std::vector<std::string> gold;
  std::vector<std::string> pred;
};

struct SchemaCounts {
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  std::size_t partial = 0;
  std::size_t missed = 0;
  std::size_t spurious = 0;

  std::size_t possible() const { return correct + incorrect + partial + missed; }
  std::size_t actual() const { return correct + incorrect + partial + spurious; }
  double score() const { return double(correct) + 0.5 * double(partial); }
  double precision() const { return actual() ? score() / double(actual()) : 0.0; }
  double recall() const { return possible() ? score() / double(possible()) : 0.0; }
  double f1() const {
    double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }

  SchemaCounts& operator+=(const SchemaCounts& o) {
    correct += o.correct;
    incorrect += o.incorrect;
    partial += o.partial;
    missed += o.missed;
    spurious += o.spurious;
    return *this;
  }

  nlohmann::json to_json() const {
    return {{"correct", correct},   {"incorrect", incorrect}, {"partial", partial},
            {"missed", missed},     {"spurious", spurious},   {"precision", precision()},
            {"recall", recall()},   {"f1", f1()}};
  }
};

struct SchemaScores {
  SchemaCounts strict;   // boundary and type must both match
  SchemaCounts exact;    // boundary must match, type ignored
  SchemaCounts partial;  // exact boundary = 1, overlap = 0.5
  SchemaCounts type;     // types match and boundaries overlap
};

namespace detail {

// One (gold set, pred set) comparison. Each predicted span binds the first
// gold span that fully matches, else the first whose boundary matches, else
// the first that overlaps; golds never bound by any prediction are missed.
inline void score_spans(const std::vector<NerSpan>& gold, const std::vector<NerSpan>& pred,
                        SchemaScores& s) {
  std::vector<bool> gold_bound(gold.size(), false);
  for (const auto& p : pred) {
    std::size_t full = gold.size(), boundary = gold.size(), overlap = gold.size();
    for (std::size_t gi = 0; gi < gold.size(); ++gi) {
      if (full == gold.size() && gold[gi] == p) full = gi;
      if (boundary == gold.size() && gold[gi].same_boundary(p)) boundary = gi;
      if (overlap == gold.size() && gold[gi].overlaps(p)) overlap = gi;
    }
    if (full != gold.size()) {
      gold_bound[full] = true;
      s.strict.correct++;
      s.exact.correct++;
      s.partial.correct++;
      s.type.correct++;
    } else if (boundary != gold.size()) {
      gold_bound[boundary] = true;
      s.strict.incorrect++;
      s.exact.correct++;
      s.partial.correct++;
      s.type.incorrect++;  // boundary equal means overlap; types differ here
    } else if (overlap != gold.size()) {
      gold_bound[overlap] = true;
      s.strict.incorrect++;
      s.exact.incorrect++;
      s.partial.partial++;
      if (gold[overlap].type == p.type)
        s.type.correct++;
      else
        s.type.incorrect++;
    } else {
      s.strict.spurious++;
      s.exact.spurious++;
      s.partial.spurious++;
      s.type.spurious++;
    }
  }
  for (std::size_t gi = 0; gi < gold.size(); ++gi) {
    if (gold_bound[gi]) continue;
    s.strict.missed++;
    s.exact.missed++;
    s.partial.missed++;
    s.type.missed++;
  }
}

}  // namespace detail

struct NerEvalReport {
  SchemaScores overall;
  std::map<std::string, SchemaScores> per_type;

  // Unweighted mean of per-type F1 for one schema.
  double macro_f1_over_types(const std::string& schema) const {
    if (per_type.empty()) return 0.0;
    double total = 0.0;
    for (const auto& [t, s] : per_type) {
      const SchemaCounts& c = schema == "strict"   ? s.strict
                              : schema == "exact"  ? s.exact
                              : schema == "partial" ? s.partial
                                                    : s.type;
      total += c.f1();
    }
    return total / double(per_type.size());
  }

  nlohmann::json to_json() const {
    nlohmann::json per_type_json = nlohmann::json::object();
    for (const auto& [t, s] : per_type)
      per_type_json[t] = {{"type", s.type.to_json()},
                          {"partial", s.partial.to_json()},
                          {"strict", s.strict.to_json()},
                          {"exact", s.exact.to_json()}};
    return {{"type", overall.type.to_json()},
            {"partial", overall.partial.to_json()},
            {"strict", overall.strict.to_json()},
            {"exact", overall.exact.to_json()},
            {"per_type", per_type_json},
            {"macro_f1_over_types",
             {{"type", macro_f1_over_types("type")},
              {"partial", macro_f1_over_types("partial")},
              {"strict", macro_f1_over_types("strict")},
              {"exact", macro_f1_over_types("exact")}}}};
  }
};

inline NerEvalReport ner_schema_eval(const std::vector<NerDocument>& docs) {
  NerEvalReport report;
  std::set<std::string> types;
  std::vector<std::pair<std::vector<NerSpan>, std::vector<NerSpan>>> decoded;
  decoded.reserve(docs.size());
  for (const auto& doc : docs) {
    if (doc.gold.size() != doc.pred.size())
      throw ContractError("ner_schema_eval: gold/pred labels differ in length");
    auto gold = spans_from_iob(doc.gold);
    auto pred = spans_from_iob(doc.pred);
    for (const auto& sp : gold) types.insert(sp.type);
    for (const auto& sp : pred) types.insert(sp.type);
    detail::score_spans(gold, pred, report.overall);
    decoded.emplace_back(std::move(gold), std::move(pred));
  }
  for (const auto& t : types) {
    SchemaScores& s = report.per_type[t];
    for (const auto& [gold, pred] : decoded) {
      std::vector<NerSpan> g, p;
      for (const auto& sp : gold)
        if (sp.type == t) g.push_back(sp);
      for (const auto& sp : pred)
        if (sp.type == t) p.push_back(sp);
      detail::score_spans(g, p, s);
    }
  }
  return report;
}

}  // namespace distilkit
