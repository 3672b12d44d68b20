#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "distilkit/error.hpp"
#include "distilkit/prediction.hpp"
#include "distilkit/taskmetrics.hpp"

namespace distilkit {

// Jensen-Shannon divergence in bits (base-2 logs): the mean of the two KL
// terms against the mixture M = (P+Q)/2, which keeps the value in [0,1].
// Zero-probability cells are floored at 1e-12 before the logs.
inline double jensen_shannon_divergence(const std::vector<double>& p,
                                        const std::vector<double>& q) {
  if (p.size() != q.size())
    throw ContractError("jensen_shannon_divergence: arity mismatch, " +
                        std::to_string(p.size()) + " vs " + std::to_string(q.size()));
  constexpr double kFloor = 1e-12;
  const double inv_log2 = 1.4426950408889634074;  // 1 / ln 2
  double kl_pm = 0.0, kl_qm = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0)
      kl_pm += p[i] * std::log(std::max(p[i], kFloor) / std::max(m, kFloor)) * inv_log2;
    if (q[i] > 0.0)
      kl_qm += q[i] * std::log(std::max(q[i], kFloor) / std::max(m, kFloor)) * inv_log2;
  }
  return 0.5 * (kl_pm + kl_qm);
}

namespace detail {

// Indices of `other` aligned to `anchor` id order; the id sets must match.
inline std::vector<std::size_t> align_ids(const PredictionSet& anchor,
                                          const PredictionSet& other) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < other.ids.size(); ++i) index.emplace(other.ids[i], i);
  std::vector<std::size_t> mapping;
  std::vector<std::string> missing;
  mapping.reserve(anchor.ids.size());
  for (const auto& id : anchor.ids) {
    auto it = index.find(id);
    if (it == index.end()) {
      if (missing.size() < 5) missing.push_back(id);
    } else {
      mapping.push_back(it->second);
    }
  }
  if (!missing.empty() || anchor.ids.size() != other.ids.size()) {
    std::string msg = "prediction sets are not aligned";
    if (!missing.empty()) {
      msg += "; missing ids:";
      for (const auto& id : missing) msg += " " + id;
    }
    if (anchor.ids.size() != other.ids.size())
      msg += "; sizes " + std::to_string(anchor.ids.size()) + " vs " +
             std::to_string(other.ids.size());
    throw AlignmentError(msg);
  }
  return mapping;
}

inline void require_kind(const PredictionSet& ps, PredictionSet::Kind kind,
                         const char* metric) {
  if (ps.kind != kind)
    throw ContractError(std::string(metric) + " requires " +
                        (kind == PredictionSet::Kind::classification ? "classification"
                                                                     : "regression") +
                        " prediction sets");
}

}  // namespace detail

// Accuracy of student labels with teacher labels as the ground truth.
inline double label_loyalty(const PredictionSet& teacher, const PredictionSet& student) {
  detail::require_kind(teacher, PredictionSet::Kind::classification, "label_loyalty");
  detail::require_kind(student, PredictionSet::Kind::classification, "label_loyalty");
  auto mapping = detail::align_ids(teacher, student);
  std::vector<int> t = teacher.labels, s;
  s.reserve(mapping.size());
  for (std::size_t idx : mapping) s.push_back(student.labels[idx]);
  return accuracy(t, s);
}

// Mean over examples of 1 - sqrt(JSD) between the two output distributions.
inline double probability_loyalty(const PredictionSet& teacher, const PredictionSet& student) {
  detail::require_kind(teacher, PredictionSet::Kind::classification, "probability_loyalty");
  detail::require_kind(student, PredictionSet::Kind::classification, "probability_loyalty");
  auto mapping = detail::align_ids(teacher, student);
  double total = 0.0;
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    const auto& pt = teacher.probabilities[i];
    const auto& ps = student.probabilities[mapping[i]];
    total += 1.0 - std::sqrt(std::max(0.0, jensen_shannon_divergence(pt, ps)));
  }
  return teacher.size() ? total / double(teacher.size()) : 0.0;
}

// Pearson correlation between teacher and student scalar outputs.
inline double regression_loyalty(const PredictionSet& teacher, const PredictionSet& student) {
  detail::require_kind(teacher, PredictionSet::Kind::regression, "regression_loyalty");
  detail::require_kind(student, PredictionSet::Kind::regression, "regression_loyalty");
  auto mapping = detail::align_ids(teacher, student);
  std::vector<double> s;
  s.reserve(mapping.size());
  for (std::size_t idx : mapping) s.push_back(student.scalars[idx]);
  return pearson(teacher.scalars, s);
}

struct LoyaltyReport {
  std::optional<double> label_loyalty;
  std::optional<double> probability_loyalty;
  std::optional<double> regression_loyalty;

  struct PerTeacher {
    std::optional<double> label_loyalty;
    std::optional<double> probability_loyalty;
    std::optional<double> regression_loyalty;
  };
  std::vector<PerTeacher> per_teacher;

  nlohmann::json to_json() const {
    auto put = [](nlohmann::json& j, const char* key, const std::optional<double>& v) {
      if (v) j[key] = *v;
    };
    nlohmann::json j = nlohmann::json::object();
    put(j, "label_loyalty", label_loyalty);
    put(j, "probability_loyalty", probability_loyalty);
    put(j, "regression_loyalty", regression_loyalty);
    j["per_teacher"] = nlohmann::json::array();
    for (const auto& t : per_teacher) {
      nlohmann::json tj = nlohmann::json::object();
      put(tj, "label_loyalty", t.label_loyalty);
      put(tj, "probability_loyalty", t.probability_loyalty);
      put(tj, "regression_loyalty", t.regression_loyalty);
      j["per_teacher"].push_back(tj);
    }
    return j;
  }
};

// Each loyalty metric computed per teacher, then arithmetically averaged;
// the per-teacher values are retained in the report.
inline LoyaltyReport multi_teacher_loyalty(const std::vector<PredictionSet>& teachers,
                                           const PredictionSet& student) {
  if (teachers.empty()) throw ContractError("multi_teacher_loyalty needs >= 1 teacher");
  LoyaltyReport report;
  double ll = 0.0, pl = 0.0, rl = 0.0;
  bool classification = student.kind == PredictionSet::Kind::classification;
  for (std::size_t k = 0; k < teachers.size(); ++k) {
    LoyaltyReport::PerTeacher pt;
    try {
      if (classification) {
        pt.label_loyalty = label_loyalty(teachers[k], student);
        pt.probability_loyalty = probability_loyalty(teachers[k], student);
        ll += *pt.label_loyalty;
        pl += *pt.probability_loyalty;
      } else {
        pt.regression_loyalty = regression_loyalty(teachers[k], student);
        rl += *pt.regression_loyalty;
      }
    } catch (const AlignmentError& e) {
      throw AlignmentError("teacher " + std::to_string(k) + ": " + e.what());
    } catch (const ContractError& e) {
      throw ContractError("teacher " + std::to_string(k) + ": " + e.what());
    } catch (const DomainError& e) {
      throw DomainError("teacher " + std::to_string(k) + ": " + e.what());
    }
    report.per_teacher.push_back(pt);
  }
  double n = double(teachers.size());
  if (classification) {
    report.label_loyalty = ll / n;
    report.probability_loyalty = pl / n;
  } else {
    report.regression_loyalty = rl / n;
  }
  return report;
}

}  // namespace distilkit
