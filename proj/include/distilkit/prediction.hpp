#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "distilkit/error.hpp"

namespace distilkit {

// Aligned per-example outputs of one model on one dataset. Classification
// sets carry a label and a probability vector per example; regression sets a
// scalar. TSV layout: "id \t label \t p0,p1,..." or "id \t scalar".
struct PredictionSet {
  enum class Kind { classification, regression };

  Kind kind = Kind::classification;
  std::vector<std::string> ids;
  std::vector<int> labels;                         // classification
  std::vector<std::vector<double>> probabilities;  // classification
  std::vector<double> scalars;                     // regression

  std::size_t size() const { return ids.size(); }

  void validate() const {
    if (kind == Kind::classification) {
      if (labels.size() != ids.size() || probabilities.size() != ids.size())
        throw ContractError("classification prediction set fields misaligned");
      for (std::size_t i = 0; i < probabilities.size(); ++i) {
        double s = 0.0;
        for (double p : probabilities[i]) s += p;
        if (std::abs(s - 1.0) > 1e-6)
          throw ContractError("probability row " + std::to_string(i) +
                              " sums to " + std::to_string(s) + ", expected 1");
      }
    } else {
      if (scalars.size() != ids.size())
        throw ContractError("regression prediction set fields misaligned");
    }
  }

  void write_tsv(std::ostream& os) const {
    validate();
    char buf[64];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (kind == Kind::classification) {
        os << ids[i] << '\t' << labels[i] << '\t';
        for (std::size_t c = 0; c < probabilities[i].size(); ++c) {
          std::snprintf(buf, sizeof(buf), "%.17g", probabilities[i][c]);
          if (c) os << ',';
          os << buf;
        }
        os << '\n';
      } else {
        std::snprintf(buf, sizeof(buf), "%.17g", scalars[i]);
        os << ids[i] << '\t' << buf << '\n';
      }
    }
  }

  void save_tsv(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open prediction file for writing: " + path);
    write_tsv(os);
    if (!os) throw IoError("failed writing prediction file: " + path);
  }

  static PredictionSet read_tsv(std::istream& is) {
    PredictionSet ps;
    std::string line;
    std::size_t lineno = 0;
    bool kind_known = false;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string> cols;
      std::stringstream ss(line);
      std::string col;
      while (std::getline(ss, col, '\t')) cols.push_back(col);
      if (cols.size() != 2 && cols.size() != 3)
        throw FormatError("prediction file line " + std::to_string(lineno) +
                          ": expected 2 or 3 tab-separated columns");
      Kind row_kind = cols.size() == 3 ? Kind::classification : Kind::regression;
      if (!kind_known) {
        ps.kind = row_kind;
        kind_known = true;
      } else if (row_kind != ps.kind) {
        throw FormatError("prediction file line " + std::to_string(lineno) +
                          ": mixed classification and regression rows");
      }
      ps.ids.push_back(cols[0]);
      try {
        if (row_kind == Kind::classification) {
          ps.labels.push_back(std::stoi(cols[1]));
          std::vector<double> probs;
          std::stringstream ps_ss(cols[2]);
          std::string cell;
          while (std::getline(ps_ss, cell, ',')) probs.push_back(std::stod(cell));
          if (probs.empty())
            throw FormatError("prediction file line " + std::to_string(lineno) +
                              ": empty probability vector");
          ps.probabilities.push_back(std::move(probs));
        } else {
          ps.scalars.push_back(std::stod(cols[1]));
        }
      } catch (const std::invalid_argument&) {
        throw FormatError("prediction file line " + std::to_string(lineno) +
                          ": numeric field could not be parsed");
      } catch (const std::out_of_range&) {
        throw FormatError("prediction file line " + std::to_string(lineno) +
                          ": numeric field out of range");
      }
    }
    ps.validate();
    return ps;
  }

  static PredictionSet load_tsv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open prediction file: " + path);
    return read_tsv(is);
  }
};

}  // namespace distilkit
