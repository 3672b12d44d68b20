#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "distilkit/encoder.hpp"
#include "distilkit/error.hpp"
#include "distilkit/optimizer.hpp"
#include "distilkit/tensor.hpp"
#include "distilkit/tokenizer.hpp"

namespace distilkit {

struct DistillConfig {
  double lambda_kd = 0.625;
  double lambda_mlm = 0.25;
  double lambda_cos = 0.125;
  double temperature = 2.0;
  int epochs = 3;
  int batch_size = 256;
  double learning_rate = 5e-4;
  double weight_decay = 1e-4;
  double warmup_fraction = 0.05;
  double clip_norm = 5.0;
  double mask_fraction = 0.15;
  std::uint64_t seed = 42;

  void validate() const {
    if (std::abs(lambda_kd + lambda_mlm + lambda_cos - 1.0) > 1e-12)
      throw ConfigError("loss weights must sum to one, got " +
                        std::to_string(lambda_kd + lambda_mlm + lambda_cos));
    if (lambda_kd < 0 || lambda_mlm < 0 || lambda_cos < 0)
      throw ConfigError("loss weights must be non-negative");
    if (!(temperature > 0)) throw ConfigError("temperature must be positive");
    if (epochs < 1 || batch_size < 1) throw ConfigError("epochs and batch_size must be positive");
    if (!(mask_fraction > 0.0 && mask_fraction < 1.0))
      throw ConfigError("mask_fraction must be in (0,1)");
    if (warmup_fraction < 0.0 || warmup_fraction > 1.0)
      throw ConfigError("warmup_fraction must be in [0,1]");
    if (!(clip_norm > 0)) throw ConfigError("clip_norm must be positive");
  }

  nlohmann::json to_json() const {
    return {{"lambda_kd", lambda_kd},     {"lambda_mlm", lambda_mlm},
            {"lambda_cos", lambda_cos},   {"temperature", temperature},
            {"epochs", epochs},           {"batch_size", batch_size},
            {"learning_rate", learning_rate}, {"weight_decay", weight_decay},
            {"warmup_fraction", warmup_fraction}, {"clip_norm", clip_norm},
            {"mask_fraction", mask_fraction}, {"seed", seed}};
  }

  static DistillConfig from_json(const nlohmann::json& j) {
    DistillConfig c;
    c.lambda_kd = j.value("lambda_kd", c.lambda_kd);
    c.lambda_mlm = j.value("lambda_mlm", c.lambda_mlm);
    c.lambda_cos = j.value("lambda_cos", c.lambda_cos);
    c.temperature = j.value("temperature", c.temperature);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.mask_fraction = j.value("mask_fraction", c.mask_fraction);
    c.seed = j.value("seed", c.seed);
    return c;
  }

  static DistillConfig from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open distill config: " + path);
    try {
      return from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("distill config " + path + " is not valid JSON: " + e.what());
    }
  }
};

// ---------------------------------------------------------------------------
// Student initialization: layer j copies teacher layer 2j.
// ---------------------------------------------------------------------------

inline EncoderModel init_student(const EncoderModel& teacher, const ModelConfig& student_config) {
  const ModelConfig& tc = teacher.config();
  ModelConfig sc = student_config;
  sc.validate();
  if (sc.hidden != tc.hidden || sc.num_heads != tc.num_heads ||
      sc.vocab_size != tc.vocab_size ||
      sc.resolved_intermediate() != tc.resolved_intermediate() ||
      sc.max_position != tc.max_position || sc.type_vocab != tc.type_vocab)
    throw ConfigError("student config must match the teacher in everything but depth");
  if (sc.num_layers * 2 > tc.num_layers)
    throw ConfigError("student needs at most half the teacher layers: " +
                      std::to_string(sc.num_layers) + " x 2 > " +
                      std::to_string(tc.num_layers));

  EncoderModel student(sc, /*seed=*/0);
  for (const auto& [name, tensor] : teacher.named_parameters()) {
    if (name.rfind("layer.", 0) == 0) continue;
    student.set_parameter(name, tensor.clone());  // embeddings, pooler, MLM head verbatim
  }
  for (int j = 0; j < sc.num_layers; ++j) {
    std::string src = "layer." + std::to_string(2 * j) + ".";
    std::string dst = "layer." + std::to_string(j) + ".";
    for (const char* leaf :
         {"attn.wq", "attn.bq", "attn.wk", "attn.bk", "attn.wv", "attn.bv", "attn.wo",
          "attn.bo", "attn_ln.gamma", "attn_ln.beta", "ffn.w1", "ffn.b1", "ffn.w2",
          "ffn.b2", "ffn_ln.gamma", "ffn_ln.beta"})
      student.set_parameter(dst + leaf, teacher.get_parameter(src + leaf).clone());
  }
  return student;
}

inline EncoderModel init_student(const EncoderModel& teacher, int student_layers) {
  ModelConfig sc = teacher.config();
  sc.num_layers = student_layers;
  return init_student(teacher, sc);
}

// ---------------------------------------------------------------------------
// MLM masking (from the BERT lineage: 80% [MASK], 10% random, 10% kept).
// ---------------------------------------------------------------------------

struct MaskedBatch {
  EncodingBatch batch;                    // ids carry the substitutions
  std::vector<int> original_ids;          // pre-substitution ids
  std::vector<std::uint8_t> supervised;   // 1 at positions the MLM loss sees

  std::vector<std::size_t> supervised_rows() const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < supervised.size(); ++i)
      if (supervised[i]) rows.push_back(i);
    return rows;
  }
};

inline MaskedBatch mask_batch(const EncodingBatch& batch, const Vocab& vocab,
                              double mask_fraction, std::mt19937_64& rng) {
  if (!(mask_fraction > 0.0 && mask_fraction < 1.0))
    throw DomainError("mask_fraction must be in (0,1)");
  MaskedBatch mb;
  mb.batch = batch;
  mb.original_ids = batch.ids;
  mb.supervised.assign(batch.ids.size(), 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> random_id(0, int(vocab.size()) - 1);
  for (std::size_t i = 0; i < batch.ids.size(); ++i) {
    if (batch.attention_mask[i] == 0) continue;
    int id = batch.ids[i];
    if (id == vocab.cls_id() || id == vocab.sep_id() || id == vocab.pad_id()) continue;
    if (unit(rng) >= mask_fraction) continue;
    mb.supervised[i] = 1;
    double u = unit(rng);
    if (u < 0.8) {
      mb.batch.ids[i] = vocab.mask_id();
    } else if (u < 0.9) {
      int r = random_id(rng);
      while (vocab.is_special(r)) r = random_id(rng);
      mb.batch.ids[i] = r;
    }  // else keep the original token
  }
  return mb;
}

// ---------------------------------------------------------------------------
// Loss algebra
// ---------------------------------------------------------------------------

namespace detail {

inline Tensor flatten_rows(const Tensor& t) {
  if (t.rank() == 2) return t;
  std::size_t width = t.shape().back();
  return reshape(t, {t.numel() / width, width});
}

}  // namespace detail

// Tempered cross-entropy of the student under the teacher distribution,
// scaled by T^2 and averaged over supervised positions. The teacher side is
// excluded from gradient flow. Returns zero (and sets *warned) when no
// position is supervised.
inline Tensor kd_loss(const Tensor& teacher_logits, const Tensor& student_logits,
                      const std::vector<std::uint8_t>& supervised, double temperature,
                      bool* warned = nullptr) {
  if (teacher_logits.shape() != student_logits.shape())
    throw ShapeError("kd_loss: logit shapes differ, " + shape_str(teacher_logits.shape()) +
                     " vs " + shape_str(student_logits.shape()));
  if (!(temperature > 0)) throw DomainError("kd_loss temperature must be positive");
  Tensor t_flat = detail::flatten_rows(teacher_logits);
  Tensor s_flat = detail::flatten_rows(student_logits);
  if (supervised.size() != t_flat.shape()[0])
    throw ShapeError("kd_loss: supervised mask length does not match positions");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < supervised.size(); ++i)
    if (supervised[i]) rows.push_back(i);
  if (rows.empty()) {
    if (warned) *warned = true;
    return Tensor::scalar(0.0);
  }
  if (warned) *warned = false;
  Tensor teacher_probs =
      softmax_with_temperature(select_rows(t_flat, rows).detach(), temperature);
  Tensor student_log = log_softmax_with_temperature(select_rows(s_flat, rows), temperature);
  Tensor per_position = sum_last_axis(mul(teacher_probs, student_log));
  return scale(mean(per_position), -temperature * temperature);
}

// Mean over real positions of (1 - cosine(teacher, student)) on the final
// hidden states. A zero vector at a real position contributes 1 (cosine
// defined as 0) and bumps *zero_count.
inline Tensor cos_align_loss(const Tensor& teacher_hidden, const Tensor& student_hidden,
                             const std::vector<int>& attention_mask,
                             std::size_t* zero_count = nullptr) {
  if (teacher_hidden.shape() != student_hidden.shape())
    throw ShapeError("cos_align_loss: hidden shapes differ, " +
                     shape_str(teacher_hidden.shape()) + " vs " +
                     shape_str(student_hidden.shape()));
  std::size_t width = teacher_hidden.shape().back();
  std::size_t rows = teacher_hidden.numel() / width;
  if (attention_mask.size() != rows)
    throw ShapeError("cos_align_loss: attention mask length does not match positions");

  std::vector<std::size_t> real;
  for (std::size_t i = 0; i < rows; ++i)
    if (attention_mask[i]) real.push_back(i);
  if (real.empty()) return Tensor::scalar(0.0);
  double inv_m = 1.0 / double(real.size());

  auto tv = teacher_hidden.data();
  auto sv = student_hidden.data();
  double total = 0.0;
  std::vector<double> cached_cos(real.size(), 0.0);
  std::vector<std::uint8_t> degenerate(real.size(), 0);
  for (std::size_t idx = 0; idx < real.size(); ++idx) {
    const double* t = &tv[real[idx] * width];
    const double* s = &sv[real[idx] * width];
    double dot = 0.0, nt = 0.0, ns = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      dot += t[j] * s[j];
      nt += t[j] * t[j];
      ns += s[j] * s[j];
    }
    double denom = std::sqrt(nt) * std::sqrt(ns);
    double c;
    if (denom < 1e-300) {
      c = 0.0;
      degenerate[idx] = 1;
      if (zero_count) ++(*zero_count);
    } else {
      c = dot / denom;
    }
    cached_cos[idx] = c;
    total += 1.0 - c;
  }
  Tensor out = Tensor::scalar(total * inv_m);

  const Tensor& th = teacher_hidden;
  const Tensor& sh = student_hidden;
  if (detail::track({&th, &sh})) {
    out.set_requires_grad(true);
    auto tn = th.node(), sn = sh.node(), on = out.node();
    Tape::active()->record(
        {tn, sn, on},
        [tn, sn, on, real, width, inv_m, cached_cos, degenerate] {
          double g = on->grad[0] * inv_m;
          for (std::size_t idx = 0; idx < real.size(); ++idx) {
            if (degenerate[idx]) continue;
            const double* t = &tn->value[real[idx] * width];
            const double* s = &sn->value[real[idx] * width];
            double nt = 0.0, ns = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
              nt += t[j] * t[j];
              ns += s[j] * s[j];
            }
            double norm_t = std::sqrt(nt), norm_s = std::sqrt(ns);
            double c = cached_cos[idx];
            if (sn->requires_grad) {
              double* gs = &sn->grad[real[idx] * width];
              for (std::size_t j = 0; j < width; ++j)
                gs[j] += g * (-(t[j] / (norm_t * norm_s) - c * s[j] / ns));
            }
            if (tn->requires_grad) {
              double* gt = &tn->grad[real[idx] * width];
              for (std::size_t j = 0; j < width; ++j)
                gt[j] += g * (-(s[j] / (norm_t * norm_s) - c * t[j] / nt));
            }
          }
        });
  }
  return out;
}

struct LossParts {
  Tensor kd;
  Tensor mlm;
  Tensor cos;
};

// Exact weighted sum: lambda_kd * L_KD + lambda_mlm * L_MLM + lambda_cos * L_COS.
inline Tensor total_loss(const LossParts& parts, const DistillConfig& config) {
  config.validate();
  return add(add(scale(parts.kd, config.lambda_kd), scale(parts.mlm, config.lambda_mlm)),
             scale(parts.cos, config.lambda_cos));
}

// ---------------------------------------------------------------------------
// Ensemble losses: per-teacher KD and cosine terms, equally weighted.
// ---------------------------------------------------------------------------

struct EnsembleLosses {
  Tensor kd;
  Tensor cos;
  bool kd_warning = false;
};

namespace detail {

inline void check_teacher_compat(const EncoderModel& teacher, const EncoderModel& student) {
  if (teacher.config().vocab_size != student.config().vocab_size)
    throw ConfigError("teacher vocabulary (" + std::to_string(teacher.config().vocab_size) +
                      ") does not match the student's (" +
                      std::to_string(student.config().vocab_size) +
                      "); shared vocabularies are required");
  if (teacher.config().hidden != student.config().hidden)
    throw ConfigError("teacher hidden size does not match the student's");
}

struct StudentForwardCache {
  Tensor final_hidden_flat;  // [rows, hidden]
  Tensor mlm_logits;         // [rows, vocab]
};

inline EnsembleLosses ensemble_from_cache(const std::vector<const EncoderModel*>& teachers,
                                          const StudentForwardCache& student_fwd,
                                          const MaskedBatch& mb, double temperature) {
  EnsembleLosses out;
  Tensor kd_sum, cos_sum;
  for (std::size_t k = 0; k < teachers.size(); ++k) {
    ForwardResult tf = teachers[k]->forward(mb.batch);
    Tensor t_logits = teachers[k]->mlm_logits(tf.final_hidden());
    bool warned = false;
    Tensor kd_k =
        kd_loss(detail::flatten_rows(t_logits), student_fwd.mlm_logits, mb.supervised,
                temperature, &warned);
    out.kd_warning = out.kd_warning || warned;
    Tensor cos_k = cos_align_loss(detail::flatten_rows(tf.final_hidden()).detach(),
                                  student_fwd.final_hidden_flat, mb.batch.attention_mask);
    kd_sum = k == 0 ? kd_k : add(kd_sum, kd_k);
    cos_sum = k == 0 ? cos_k : add(cos_sum, cos_k);
  }
  double inv_k = 1.0 / double(teachers.size());
  out.kd = scale(kd_sum, inv_k);
  out.cos = scale(cos_sum, inv_k);
  return out;
}

}  // namespace detail

inline EnsembleLosses ensemble_losses(const std::vector<const EncoderModel*>& teachers,
                                      const EncoderModel& student, const MaskedBatch& mb,
                                      double temperature) {
  if (teachers.empty()) throw ConfigError("ensemble requires at least one teacher");
  for (const auto* t : teachers) detail::check_teacher_compat(*t, student);
  ForwardResult sf = student.forward(mb.batch);
  detail::StudentForwardCache cache;
  cache.final_hidden_flat = detail::flatten_rows(sf.final_hidden());
  cache.mlm_logits = detail::flatten_rows(student.mlm_logits(sf.final_hidden()));
  return detail::ensemble_from_cache(teachers, cache, mb, temperature);
}

// ---------------------------------------------------------------------------
// The pre-training loop.
// ---------------------------------------------------------------------------

struct DistillStepMetrics {
  std::size_t step = 0;
  double lr = 0.0;
  double kd = 0.0;
  double mlm = 0.0;
  double cos = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
};

inline void write_metrics_csv(std::ostream& os, const std::vector<DistillStepMetrics>& log) {
  os << "step,lr,L_KD,L_MLM,L_COS,total,grad_norm\n";
  char buf[256];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g\n", row.step, row.lr,
                  row.kd, row.mlm, row.cos, row.total, row.grad_norm);
    os << buf;
  }
}

// Packs text lines into fixed-length MLM batches; optional deterministic
// shuffle of the line order.
inline std::vector<EncodingBatch> build_mlm_batches(std::vector<std::string> lines,
                                                    const Vocab& vocab, std::size_t seq_len,
                                                    std::size_t batch_size,
                                                    std::optional<std::uint64_t> shuffle_seed =
                                                        std::nullopt) {
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(lines.begin(), lines.end(), rng);
  }
  auto blank = [](const std::string& s) {
    return s.find_first_not_of(" \t\r") == std::string::npos;
  };
  std::vector<EncodingBatch> batches;
  std::vector<Encoding> group;
  for (const auto& line : lines) {
    if (blank(line)) continue;
    group.push_back(encode_pair(line, std::nullopt, vocab, seq_len));
    if (group.size() == batch_size) {
      batches.push_back(EncodingBatch::from(group));
      group.clear();
    }
  }
  if (!group.empty()) batches.push_back(EncodingBatch::from(group));
  return batches;
}

// Distills one or more frozen teachers into the student. Deterministic for a
// fixed config seed; aborts with the offending component on NaN/Inf.
inline std::vector<DistillStepMetrics> train_distill(std::vector<EncoderModel*> teachers,
                                                     EncoderModel& student, const Vocab& vocab,
                                                     const std::vector<EncodingBatch>& corpus,
                                                     const DistillConfig& config) {
  config.validate();
  if (teachers.empty()) throw ConfigError("train_distill requires at least one teacher");
  if (corpus.empty()) throw ConfigError("train_distill requires a non-empty corpus");

  std::vector<const EncoderModel*> frozen;
  for (auto* t : teachers) {
    t->set_trainable(false);
    detail::check_teacher_compat(*t, student);
    frozen.push_back(t);
  }
  student.set_trainable(true);

  std::size_t total_steps = std::size_t(config.epochs) * corpus.size();
  std::size_t warmup_steps =
      std::size_t(std::llround(config.warmup_fraction * double(total_steps)));
  std::mt19937_64 rng(config.seed);
  AdamW optimizer(student.parameters(), {.weight_decay = config.weight_decay});

  auto check_finite = [](const Tensor& t, const char* component) {
    if (!all_finite(t))
      throw TrainingError(std::string("non-finite value in loss component ") + component);
  };

  std::vector<DistillStepMetrics> log;
  log.reserve(total_steps);
  for (std::size_t step = 1; step <= total_steps; ++step) {
    const EncodingBatch& batch = corpus[(step - 1) % corpus.size()];
    MaskedBatch mb = mask_batch(batch, vocab, config.mask_fraction, rng);

    Tape tape;
    ForwardResult sf = student.forward(mb.batch);
    detail::StudentForwardCache cache;
    cache.final_hidden_flat = detail::flatten_rows(sf.final_hidden());
    cache.mlm_logits = detail::flatten_rows(student.mlm_logits(sf.final_hidden()));
    EnsembleLosses ens = detail::ensemble_from_cache(frozen, cache, mb, config.temperature);

    auto sup_rows = mb.supervised_rows();
    Tensor mlm;
    if (sup_rows.empty()) {
      mlm = Tensor::scalar(0.0);
    } else {
      std::vector<int> targets;
      targets.reserve(sup_rows.size());
      for (std::size_t r : sup_rows) targets.push_back(mb.original_ids[r]);
      mlm = cross_entropy_with_logits(select_rows(cache.mlm_logits, sup_rows), targets);
    }

    check_finite(ens.kd, "L_KD");
    check_finite(mlm, "L_MLM");
    check_finite(ens.cos, "L_COS");
    Tensor total = total_loss({ens.kd, mlm, ens.cos}, config);
    check_finite(total, "total");

    backward(total);
    double grad_norm = clip_grad_norm(student.parameters(), config.clip_norm);
    double lr = config.learning_rate * linear_warmup_decay(step, total_steps, warmup_steps);
    optimizer.step(lr);

    log.push_back({step, lr, ens.kd.item(), mlm.item(), ens.cos.item(), total.item(),
                   grad_norm});
  }
  return log;
}

}  // namespace distilkit
