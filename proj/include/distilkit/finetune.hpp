#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "distilkit/encoder.hpp"
#include "distilkit/error.hpp"
#include "distilkit/optimizer.hpp"
#include "distilkit/prediction.hpp"
#include "distilkit/taskmetrics.hpp"
#include "distilkit/tensor.hpp"
#include "distilkit/tokenizer.hpp"

namespace distilkit {

enum class TaskKind {
  token_classification,
  binary_classification,
  multiclass_classification,
  pair_regression
};

inline std::string task_kind_to_string(TaskKind k) {
  switch (k) {
    case TaskKind::token_classification: return "token_classification";
    case TaskKind::binary_classification: return "binary_classification";
    case TaskKind::multiclass_classification: return "multiclass_classification";
    case TaskKind::pair_regression: return "pair_regression";
  }
  throw ContractError("unreachable task kind");
}

inline TaskKind task_kind_from_string(const std::string& s) {
  if (s == "token_classification") return TaskKind::token_classification;
  if (s == "binary_classification") return TaskKind::binary_classification;
  if (s == "multiclass_classification") return TaskKind::multiclass_classification;
  if (s == "pair_regression") return TaskKind::pair_regression;
  throw ConfigError("unknown task kind: " + s);
}

// Encoder plus one linear head over per-token embeddings (token tasks) or the
// [CLS] embedding (everything else).
struct TaskModel {
  EncoderModel encoder;
  TaskKind kind = TaskKind::binary_classification;
  int num_labels = 2;
  Tensor head_w, head_b;
  double head_dropout = 0.1;
  std::vector<std::string> label_names;

  int head_out_dim() const {
    switch (kind) {
      case TaskKind::token_classification:
      case TaskKind::multiclass_classification:
        return num_labels;
      case TaskKind::binary_classification:
      case TaskKind::pair_regression:
        return 1;
    }
    throw ContractError("unreachable task kind");
  }

  std::vector<Tensor> parameters() const {
    auto out = encoder.parameters();
    out.push_back(head_w);
    out.push_back(head_b);
    return out;
  }

  void set_trainable(bool trainable) {
    encoder.set_trainable(trainable);
    head_w.set_requires_grad(trainable);
    head_b.set_requires_grad(trainable);
  }
};

inline TaskModel attach_head(EncoderModel encoder, TaskKind kind, int num_labels,
                             std::uint64_t seed) {
  if (num_labels < 2 && kind != TaskKind::pair_regression)
    throw ConfigError("classification heads need at least two labels");
  TaskModel tm;
  tm.encoder = std::move(encoder);
  tm.kind = kind;
  tm.num_labels = kind == TaskKind::pair_regression ? 1 : num_labels;
  std::mt19937_64 rng(seed);
  std::size_t h = std::size_t(tm.encoder.config().hidden);
  tm.head_w = trunc_normal({h, std::size_t(tm.head_out_dim())}, 0.02, rng);
  tm.head_b = Tensor::zeros({std::size_t(tm.head_out_dim())});
  return tm;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

// token-per-line "token \t tag", blank line between sentences
struct TaggingExample {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

// "a \t label", "a \t b \t label" or "a \t b \t score"
struct TextExample {
  std::string a;
  std::optional<std::string> b;
  std::string label;
};

struct TaskDataset {
  TaskKind kind = TaskKind::binary_classification;
  std::vector<TaggingExample> tagging;
  std::vector<TextExample> text;
  std::vector<std::string> label_names;  // classification label space, order of appearance

  std::size_t size() const {
    return kind == TaskKind::token_classification ? tagging.size() : text.size();
  }
};

inline std::vector<TaggingExample> load_tagging_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset: " + path);
  std::vector<TaggingExample> out;
  TaggingExample current;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!current.tokens.empty()) {
        out.push_back(std::move(current));
        current = {};
      }
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected \"token<TAB>tag\"");
    current.tokens.push_back(line.substr(0, tab));
    current.tags.push_back(line.substr(tab + 1));
  }
  if (!current.tokens.empty()) out.push_back(std::move(current));
  return out;
}

inline std::vector<TextExample> load_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset: " + path);
  std::vector<TextExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() == 2) {
      out.push_back({cols[0], std::nullopt, cols[1]});
    } else if (cols.size() == 3) {
      out.push_back({cols[0], cols[1], cols[2]});
    } else {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 2 or 3 tab-separated columns");
    }
  }
  return out;
}

inline std::vector<std::string> collect_label_names(const TaskDataset& data) {
  std::vector<std::string> names;
  auto add = [&](const std::string& l) {
    if (std::find(names.begin(), names.end(), l) == names.end()) names.push_back(l);
  };
  if (data.kind == TaskKind::token_classification) {
    for (const auto& ex : data.tagging)
      for (const auto& t : ex.tags) add(t);
  } else if (data.kind != TaskKind::pair_regression) {
    for (const auto& ex : data.text) add(ex.label);
  }
  return names;
}

inline TaskDataset load_task_dataset(TaskKind kind, const std::string& path) {
  TaskDataset data;
  data.kind = kind;
  if (kind == TaskKind::token_classification)
    data.tagging = load_tagging_file(path);
  else
    data.text = load_text_file(path);
  data.label_names = collect_label_names(data);
  return data;
}

// ---------------------------------------------------------------------------
// Featurization
// ---------------------------------------------------------------------------

struct TaggedEncoding {
  Encoding enc;
  std::vector<std::size_t> word_positions;  // first wordpiece of each kept word
  std::vector<int> word_labels;
};

inline TaggedEncoding encode_tagged(const TaggingExample& ex, const Vocab& vocab,
                                    std::size_t max_len,
                                    const std::map<std::string, int>& label_map,
                                    std::size_t example_index) {
  TaggedEncoding out;
  out.enc.ids.push_back(vocab.cls_id());
  out.enc.segment_ids.push_back(0);
  for (std::size_t w = 0; w < ex.tokens.size(); ++w) {
    auto pieces = tokenize(ex.tokens[w], vocab);
    if (pieces.empty()) pieces.push_back(kUnkToken);
    if (out.enc.ids.size() + pieces.size() + 1 > max_len) break;  // truncate whole words
    auto it = label_map.find(ex.tags[w]);
    if (it == label_map.end())
      throw DataError("example " + std::to_string(example_index) + ": unknown label \"" +
                      ex.tags[w] + "\"");
    out.word_positions.push_back(out.enc.ids.size());
    out.word_labels.push_back(it->second);
    for (const auto& p : pieces) {
      out.enc.ids.push_back(*vocab.lookup(p));
      out.enc.segment_ids.push_back(0);
    }
  }
  out.enc.ids.push_back(vocab.sep_id());
  out.enc.segment_ids.push_back(0);
  out.enc.attention_mask.assign(out.enc.ids.size(), 1);
  while (out.enc.ids.size() < max_len) {
    out.enc.ids.push_back(vocab.pad_id());
    out.enc.attention_mask.push_back(0);
    out.enc.segment_ids.push_back(0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hyperparameters (task defaults follow the standard fine-tuning grid)
// ---------------------------------------------------------------------------

struct FinetuneHyperparams {
  int epochs = 0;  // > 0 in fixed-epoch mode
  bool early_stopping = false;
  std::string metric = "accuracy";  // dev metric for best-model selection
  int patience = 3;
  int max_epochs = 30;  // schedule horizon when early stopping drives
  int batch_size = 16;
  int warmup_steps = 0;
  double learning_rate = 5e-5;
  std::uint64_t seed = 42;
  std::size_t max_len = 64;

  void validate() const {
    if ((epochs > 0) == early_stopping)
      throw ConfigError("exactly one of fixed epochs or early stopping must be active");
    if (batch_size < 1 || learning_rate <= 0 || warmup_steps < 0)
      throw ConfigError("bad fine-tuning hyperparameters");
    if (early_stopping && (patience < 1 || max_epochs < 1))
      throw ConfigError("early stopping needs positive patience and max_epochs");
    if (max_len < 3) throw ConfigError("max_len must be at least 3");
  }
};

struct TaskSpec {
  std::string name;
  TaskKind kind;
  bool pair_input = false;
};

inline TaskSpec task_spec(const std::string& name) {
  if (name == "upos" || name == "xpos" || name == "ner")
    return {name, TaskKind::token_classification, false};
  if (name == "sapn") return {name, TaskKind::binary_classification, true};
  if (name == "sar") return {name, TaskKind::multiclass_classification, true};
  if (name == "di") return {name, TaskKind::binary_classification, false};
  if (name == "sts") return {name, TaskKind::pair_regression, true};
  throw ConfigError("unknown task \"" + name +
                    "\"; valid tasks: upos, xpos, ner, sapn, sar, di, sts");
}

inline FinetuneHyperparams hyperparams_for_task(const std::string& name) {
  FinetuneHyperparams hp;
  if (name == "upos") {
    hp.epochs = 10; hp.batch_size = 16; hp.warmup_steps = 1000; hp.learning_rate = 1e-4;
  } else if (name == "xpos") {
    hp.epochs = 10; hp.batch_size = 16; hp.warmup_steps = 1000; hp.learning_rate = 4e-5;
  } else if (name == "ner") {
    hp.epochs = 15; hp.batch_size = 16; hp.warmup_steps = 500; hp.learning_rate = 5e-5;
  } else if (name == "sapn") {
    hp.epochs = 10; hp.batch_size = 16; hp.warmup_steps = 1000; hp.learning_rate = 3e-5;
  } else if (name == "sar") {
    hp.epochs = 10; hp.batch_size = 16; hp.warmup_steps = 1000; hp.learning_rate = 5e-5;
  } else if (name == "di") {
    hp.epochs = 5; hp.batch_size = 8; hp.warmup_steps = 1500; hp.learning_rate = 5e-5;
  } else if (name == "sts") {
    hp.early_stopping = true; hp.metric = "pearson"; hp.batch_size = 256;
    hp.warmup_steps = 0; hp.learning_rate = 2e-5;
  } else {
    throw ConfigError("no hyperparameter defaults for task \"" + name + "\"");
  }
  return hp;
}

// ---------------------------------------------------------------------------
// Fine-tuning loop
// ---------------------------------------------------------------------------

namespace detail {

inline std::map<std::string, int> label_map_of(const std::vector<std::string>& names) {
  std::map<std::string, int> m;
  for (std::size_t i = 0; i < names.size(); ++i) m[names[i]] = int(i);
  return m;
}

inline double sts_target(const std::string& label, std::size_t index) {
  double score;
  try {
    score = std::stod(label);
  } catch (const std::exception&) {
    throw DataError("example " + std::to_string(index) + ": score \"" + label +
                    "\" is not numeric");
  }
  if (score < 0.0 || score > 5.0)
    throw DataError("example " + std::to_string(index) + ": score " + label +
                    " outside [0,5]");
  return score / 5.0;  // train in the sigmoid's range
}

// Linear head over selected rows; token heads add the LeakyReLU before the
// softmax/cross-entropy readout.
inline Tensor head_forward(const TaskModel& tm, const Tensor& rows, bool training,
                           std::mt19937_64* rng) {
  Tensor x = rows;
  if (training && tm.head_dropout > 0.0) x = dropout(x, tm.head_dropout, *rng, true);
  Tensor logits = add_rowwise(matmul(x, tm.head_w), tm.head_b);
  if (tm.kind == TaskKind::token_classification) logits = leaky_relu(logits);
  return logits;
}

struct Featurized {
  EncodingBatch batch;
  std::vector<std::size_t> rows;    // rows of the flattened hidden states the head reads
  std::vector<int> class_targets;   // classification
  std::vector<double> real_targets; // binary (0/1) and regression
};

inline Featurized featurize(const TaskModel& tm, const TaskDataset& data,
                            const std::vector<std::size_t>& indices, const Vocab& vocab,
                            std::size_t max_len,
                            const std::map<std::string, int>& label_map) {
  Featurized f;
  std::vector<Encoding> encs;
  if (tm.kind == TaskKind::token_classification) {
    std::vector<TaggedEncoding> tagged;
    for (std::size_t idx : indices)
      tagged.push_back(encode_tagged(data.tagging[idx], vocab, max_len, label_map, idx));
    for (std::size_t e = 0; e < tagged.size(); ++e) {
      encs.push_back(tagged[e].enc);
      for (std::size_t w = 0; w < tagged[e].word_positions.size(); ++w) {
        f.rows.push_back(e * max_len + tagged[e].word_positions[w]);
        f.class_targets.push_back(tagged[e].word_labels[w]);
      }
    }
  } else {
    for (std::size_t idx : indices) {
      const TextExample& ex = data.text[idx];
      encs.push_back(encode_pair(ex.a, ex.b, vocab, max_len));
      if (tm.kind == TaskKind::pair_regression) {
        f.real_targets.push_back(sts_target(ex.label, idx));
      } else {
        auto it = label_map.find(ex.label);
        if (it == label_map.end())
          throw DataError("example " + std::to_string(idx) + ": unknown label \"" +
                          ex.label + "\"");
        if (tm.kind == TaskKind::binary_classification)
          f.real_targets.push_back(double(it->second));
        else
          f.class_targets.push_back(it->second);
      }
    }
    for (std::size_t e = 0; e < encs.size(); ++e) f.rows.push_back(e * max_len);  // [CLS]
  }
  f.batch = EncodingBatch::from(encs);
  return f;
}

inline Tensor batch_loss(const TaskModel& tm, const Featurized& f, bool training,
                         std::mt19937_64* rng) {
  ForwardResult fr = tm.encoder.forward(f.batch, training, rng);
  std::size_t h = std::size_t(tm.encoder.config().hidden);
  Tensor flat = reshape(fr.final_hidden(), {fr.final_hidden().numel() / h, h});
  Tensor rows = select_rows(flat, f.rows);
  Tensor logits = head_forward(tm, rows, training, rng);
  switch (tm.kind) {
    case TaskKind::token_classification:
    case TaskKind::multiclass_classification:
      return cross_entropy_with_logits(logits, f.class_targets);
    case TaskKind::binary_classification:
      return bce_with_logits(reshape(logits, {logits.numel()}), f.real_targets);
    case TaskKind::pair_regression: {
      Tensor probs = sigmoid(reshape(logits, {logits.numel()}));
      Tensor target = Tensor::from({f.real_targets.size()},
                                   std::vector<double>(f.real_targets));
      return loss(probs, target, LossKind::mse);
    }
  }
  throw ContractError("unreachable task kind");
}

}  // namespace detail

// Deterministic per-example predictions (dropout off). Token tasks emit one
// row per word with ids "example:word".
inline PredictionSet predict(const TaskModel& tm, const TaskDataset& data, const Vocab& vocab,
                             std::size_t max_len, std::size_t eval_batch = 16) {
  auto label_map = detail::label_map_of(tm.label_names.empty()
                                            ? data.label_names
                                            : tm.label_names);
  PredictionSet ps;
  ps.kind = tm.kind == TaskKind::pair_regression ? PredictionSet::Kind::regression
                                                 : PredictionSet::Kind::classification;
  std::size_t n = data.size();
  for (std::size_t start = 0; start < n; start += eval_batch) {
    std::vector<std::size_t> indices;
    for (std::size_t i = start; i < std::min(n, start + eval_batch); ++i) indices.push_back(i);
    detail::Featurized f = detail::featurize(tm, data, indices, vocab, max_len, label_map);
    ForwardResult fr = tm.encoder.forward(f.batch);
    std::size_t h = std::size_t(tm.encoder.config().hidden);
    Tensor flat = reshape(fr.final_hidden(), {fr.final_hidden().numel() / h, h});
    Tensor logits = detail::head_forward(tm, select_rows(flat, f.rows), false, nullptr);

    if (tm.kind == TaskKind::token_classification) {
      Tensor probs = softmax(logits);
      std::size_t row = 0;
      for (std::size_t e = 0; e < indices.size(); ++e) {
        // rows were appended per example in order; recover the per-example count
        std::size_t count = 0;
        for (std::size_t r = row; r < f.rows.size(); ++r) {
          if (f.rows[r] / max_len == e)
            ++count;
          else
            break;
        }
        for (std::size_t w = 0; w < count; ++w, ++row) {
          auto p = probs.data().subspan(row * std::size_t(tm.num_labels),
                                        std::size_t(tm.num_labels));
          ps.ids.push_back(std::to_string(indices[e]) + ":" + std::to_string(w));
          ps.labels.push_back(int(argmax(p)));
          ps.probabilities.emplace_back(p.begin(), p.end());
        }
      }
    } else if (tm.kind == TaskKind::multiclass_classification) {
      Tensor probs = softmax(logits);
      for (std::size_t e = 0; e < indices.size(); ++e) {
        auto p = probs.data().subspan(e * std::size_t(tm.num_labels),
                                      std::size_t(tm.num_labels));
        ps.ids.push_back(std::to_string(indices[e]));
        ps.labels.push_back(int(argmax(p)));
        ps.probabilities.emplace_back(p.begin(), p.end());
      }
    } else if (tm.kind == TaskKind::binary_classification) {
      Tensor probs = sigmoid(logits);
      for (std::size_t e = 0; e < indices.size(); ++e) {
        double p1 = probs.data()[e];
        ps.ids.push_back(std::to_string(indices[e]));
        ps.labels.push_back(p1 > 0.5 ? 1 : 0);
        ps.probabilities.push_back({1.0 - p1, p1});
      }
    } else {
      Tensor out = sigmoid(logits);
      for (std::size_t e = 0; e < indices.size(); ++e) {
        ps.ids.push_back(std::to_string(indices[e]));
        ps.scalars.push_back(out.data()[e]);
      }
    }
  }
  ps.validate();
  return ps;
}

// Dev metrics for one dataset; keys depend on the task family.
inline std::map<std::string, double> evaluate_dev(const TaskModel& tm, const TaskDataset& data,
                                                  const Vocab& vocab, std::size_t max_len) {
  auto label_map = detail::label_map_of(tm.label_names);
  std::map<std::string, double> out;
  PredictionSet ps = predict(tm, data, vocab, max_len);
  if (tm.kind == TaskKind::pair_regression) {
    std::vector<double> gold, pred;
    for (std::size_t i = 0; i < data.text.size(); ++i)
      gold.push_back(detail::sts_target(data.text[i].label, i));
    pred = ps.scalars;
    out["pearson"] = pearson(gold, pred);
    out["spearman"] = spearman(gold, pred);
    return out;
  }
  std::vector<int> gold, pred;
  if (tm.kind == TaskKind::token_classification) {
    std::size_t row = 0;
    for (std::size_t i = 0; i < data.tagging.size(); ++i) {
      TaggedEncoding te = encode_tagged(data.tagging[i], vocab, max_len, label_map, i);
      for (int lbl : te.word_labels) {
        gold.push_back(lbl);
        pred.push_back(ps.labels[row++]);
      }
    }
  } else {
    for (std::size_t i = 0; i < data.text.size(); ++i) {
      auto it = label_map.find(data.text[i].label);
      if (it == label_map.end())
        throw DataError("example " + std::to_string(i) + ": unknown label \"" +
                        data.text[i].label + "\"");
      gold.push_back(it->second);
      pred.push_back(ps.labels[i]);
    }
  }
  out["accuracy"] = accuracy(gold, pred);
  out["macro_f1"] = macro_f1(gold, pred, int(tm.label_names.size()));
  return out;
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::map<std::string, double> dev;
};

struct FinetuneResult {
  std::vector<EpochRecord> history;
  std::map<std::string, double> dev;  // metrics of the returned model
  int best_epoch = 0;
};

// Linear warmup over hp.warmup_steps then linear decay to zero. Fixed-epoch
// mode returns the final model; early stopping returns the best dev snapshot.
inline FinetuneResult finetune(TaskModel& tm, const TaskDataset& train, const TaskDataset& dev,
                               const Vocab& vocab, const FinetuneHyperparams& hp) {
  hp.validate();
  if (train.size() == 0 || dev.size() == 0)
    throw ContractError("finetune needs non-empty train and dev data");
  if (tm.label_names.empty()) tm.label_names = train.label_names;
  if (tm.kind != TaskKind::pair_regression &&
      int(tm.label_names.size()) != tm.num_labels &&
      !(tm.kind == TaskKind::binary_classification && tm.label_names.size() == 2))
    throw ConfigError("head arity (" + std::to_string(tm.num_labels) +
                      ") does not match the label set (" +
                      std::to_string(tm.label_names.size()) + ")");
  auto label_map = detail::label_map_of(tm.label_names);

  tm.set_trainable(true);
  std::mt19937_64 rng(hp.seed);
  AdamW optimizer(tm.parameters(), {.weight_decay = 0.0});

  int horizon = hp.early_stopping ? hp.max_epochs : hp.epochs;
  std::size_t batches_per_epoch = (train.size() + hp.batch_size - 1) / hp.batch_size;
  std::size_t total_steps = std::size_t(horizon) * batches_per_epoch;

  FinetuneResult result;
  double best_metric = -1e300;
  std::vector<Tensor> best_params;
  auto snapshot = [&] {
    best_params.clear();
    for (const auto& p : tm.parameters()) best_params.push_back(p.clone());
  };
  auto restore = [&] {
    auto params = tm.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto dst = params[i].mutable_data();
      auto src = best_params[i].data();
      std::copy(src.begin(), src.end(), dst.begin());
    }
  };

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  int since_best = 0;
  for (int epoch = 1; epoch <= horizon; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t nb = 0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      std::vector<std::size_t> indices(
          order.begin() + start,
          order.begin() + std::min(order.size(), start + hp.batch_size));
      detail::Featurized f =
          detail::featurize(tm, train, indices, vocab, hp.max_len, label_map);
      if (f.rows.empty()) continue;
      Tape tape;
      Tensor l = detail::batch_loss(tm, f, true, &rng);
      if (!all_finite(l)) throw TrainingError("non-finite fine-tuning loss");
      backward(l);
      ++step;
      double lr = hp.learning_rate *
                  linear_warmup_decay(step, total_steps, std::size_t(hp.warmup_steps));
      optimizer.step(lr);
      epoch_loss += l.item();
      ++nb;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = nb ? epoch_loss / double(nb) : 0.0;
    rec.dev = evaluate_dev(tm, dev, vocab, hp.max_len);
    result.history.push_back(rec);

    std::string metric = hp.metric;
    if (!rec.dev.count(metric))
      metric = tm.kind == TaskKind::pair_regression ? "pearson" : "accuracy";
    double value = rec.dev.at(metric);
    if (value > best_metric) {
      best_metric = value;
      result.best_epoch = epoch;
      since_best = 0;
      if (hp.early_stopping) snapshot();
    } else {
      ++since_best;
    }
    if (hp.early_stopping && since_best >= hp.patience) break;
  }

  if (hp.early_stopping && !best_params.empty()) {
    restore();
    result.dev = result.history[std::size_t(result.best_epoch - 1)].dev;
  } else {
    result.dev = result.history.back().dev;
  }
  return result;
}

// Mean and standard deviation over n seeded runs (the run-5-times protocol).
struct SeedStats {
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;
  std::vector<std::map<std::string, double>> runs;
};

template <typename RunFn>
SeedStats run_seeds(int n, std::uint64_t base_seed, RunFn&& run) {
  if (n < 1) throw ConfigError("seed count must be positive");
  SeedStats stats;
  for (int i = 0; i < n; ++i) stats.runs.push_back(run(base_seed + std::uint64_t(i)));
  for (const auto& [k, v] : stats.runs.front()) {
    double sum = 0.0;
    for (const auto& r : stats.runs) sum += r.at(k);
    double mean = sum / double(n);
    double var = 0.0;
    for (const auto& r : stats.runs) var += (r.at(k) - mean) * (r.at(k) - mean);
    stats.mean[k] = mean;
    stats.stddev[k] = n > 1 ? std::sqrt(var / double(n - 1)) : 0.0;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Task-model checkpoints
// ---------------------------------------------------------------------------

inline void save_task_model(const TaskModel& tm, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open task checkpoint for writing: " + path);
  nlohmann::json extra = {{"task_kind", task_kind_to_string(tm.kind)},
                          {"num_labels", tm.num_labels},
                          {"label_names", tm.label_names},
                          {"head_dropout", tm.head_dropout}};
  auto tensors = tm.encoder.named_parameters();
  tensors.emplace_back("head.w", tm.head_w);
  tensors.emplace_back("head.b", tm.head_b);
  write_checkpoint_stream(os, tm.encoder.config(), tensors, extra);
  if (!os) throw IoError("failed writing task checkpoint: " + path);
}

inline TaskModel load_task_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open task checkpoint: " + path);
  CheckpointData data = read_checkpoint_stream(is);
  if (!data.extra.contains("task_kind"))
    throw FormatError("checkpoint lacks task metadata: " + path);
  TaskModel tm;
  tm.encoder = EncoderModel(data.config, 0);
  tm.kind = task_kind_from_string(data.extra.at("task_kind").get<std::string>());
  tm.num_labels = data.extra.at("num_labels").get<int>();
  tm.label_names = data.extra.value("label_names", std::vector<std::string>{});
  tm.head_dropout = data.extra.value("head_dropout", 0.1);
  bool have_w = false, have_b = false;
  for (auto& [name, t] : data.tensors) {
    if (name == "head.w") {
      tm.head_w = std::move(t);
      have_w = true;
    } else if (name == "head.b") {
      tm.head_b = std::move(t);
      have_b = true;
    } else {
      tm.encoder.set_parameter(name, std::move(t));
    }
  }
  if (!have_w || !have_b) throw FormatError("checkpoint lacks head tensors: " + path);
  return tm;
}

}  // namespace distilkit
