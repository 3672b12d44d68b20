#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "distilkit/error.hpp"
#include "distilkit/tensor.hpp"
#include "distilkit/tokenizer.hpp"

namespace distilkit {

// Architecture description. intermediate defaults to 4 x hidden when left 0.
struct ModelConfig {
  int num_layers = 0;
  int hidden = 0;
  int num_heads = 0;
  int intermediate = 0;
  int vocab_size = 0;
  int max_position = 512;
  int type_vocab = 2;
  double dropout = 0.1;

  int resolved_intermediate() const { return intermediate > 0 ? intermediate : 4 * hidden; }

  void validate() const {
    if (num_layers < 1 || hidden < 1 || num_heads < 1 || vocab_size < 1 ||
        max_position < 1 || type_vocab < 1)
      throw ConfigError("model config extents must be positive");
    if (hidden % num_heads != 0)
      throw ConfigError("hidden (" + std::to_string(hidden) +
                        ") not divisible by num_heads (" + std::to_string(num_heads) + ")");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("dropout must be in [0,1)");
  }

  nlohmann::json to_json() const {
    return {{"num_layers", num_layers}, {"hidden", hidden},
            {"num_heads", num_heads},   {"intermediate", intermediate},
            {"vocab_size", vocab_size}, {"max_position", max_position},
            {"type_vocab", type_vocab}, {"dropout", dropout}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.num_layers = j.at("num_layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.intermediate = j.value("intermediate", 0);
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_position = j.value("max_position", 512);
    c.type_vocab = j.value("type_vocab", 2);
    c.dropout = j.value("dropout", 0.1);
    return c;
  }

  bool operator==(const ModelConfig&) const = default;
};

// Parameters reported for model-size comparison: embeddings plus the encoder
// stack. The tied MLM projection is counted once (as the embedding table);
// pooler and MLM transform are excluded so the formula matches published
// size tables; count_params_total below covers the whole in-memory model.
inline std::int64_t count_params(const ModelConfig& c) {
  std::int64_t h = c.hidden;
  std::int64_t inter = c.resolved_intermediate();
  std::int64_t embeddings = std::int64_t(c.vocab_size) * h + std::int64_t(c.max_position) * h +
                            std::int64_t(c.type_vocab) * h + 2 * h;
  std::int64_t per_layer = 4 * (h * h + h)      // q, k, v, o projections
                           + 2 * h              // attention layer norm
                           + (h * inter + inter) + (inter * h + h)  // feed-forward
                           + 2 * h;             // output layer norm
  return embeddings + std::int64_t(c.num_layers) * per_layer;
}

struct EncoderLayerParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor attn_ln_gamma, attn_ln_beta;
  Tensor w1, b1, w2, b2;
  Tensor ffn_ln_gamma, ffn_ln_beta;
};

// Flattened batch of encodings, row-major [batch, seq_len].
struct EncodingBatch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<int> ids;
  std::vector<int> attention_mask;
  std::vector<int> segment_ids;

  static EncodingBatch from(const std::vector<Encoding>& encs) {
    if (encs.empty()) throw ContractError("empty encoding batch");
    EncodingBatch b;
    b.batch = encs.size();
    b.seq_len = encs[0].size();
    for (const auto& e : encs) {
      if (e.size() != b.seq_len)
        throw ShapeError("encodings in a batch must share a length");
      b.ids.insert(b.ids.end(), e.ids.begin(), e.ids.end());
      b.attention_mask.insert(b.attention_mask.end(), e.attention_mask.begin(),
                              e.attention_mask.end());
      b.segment_ids.insert(b.segment_ids.end(), e.segment_ids.begin(), e.segment_ids.end());
    }
    return b;
  }
};

struct ForwardResult {
  // hidden[0] is the embedding output, hidden[i] the output of layer i-1;
  // each is [batch, seq_len, hidden].
  std::vector<Tensor> hidden;
  Tensor pooled;  // [batch, hidden], tanh(linear) over each [CLS] position

  const Tensor& final_hidden() const { return hidden.back(); }
};

// Post-layer-norm BERT-style encoder with a weight-tied MLM head.
class EncoderModel {
 public:
  EncoderModel() = default;

  EncoderModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(seed);
    const double std = 0.02;
    std::size_t h = std::size_t(config_.hidden);
    std::size_t inter = std::size_t(config_.resolved_intermediate());

    token_embedding_ = trunc_normal({std::size_t(config_.vocab_size), h}, std, rng);
    position_embedding_ = trunc_normal({std::size_t(config_.max_position), h}, std, rng);
    segment_embedding_ = trunc_normal({std::size_t(config_.type_vocab), h}, std, rng);
    embedding_ln_gamma_ = Tensor::full({h}, 1.0);
    embedding_ln_beta_ = Tensor::zeros({h});

    layers_.resize(std::size_t(config_.num_layers));
    for (auto& l : layers_) {
      l.wq = trunc_normal({h, h}, std, rng);
      l.bq = Tensor::zeros({h});
      l.wk = trunc_normal({h, h}, std, rng);
      l.bk = Tensor::zeros({h});
      l.wv = trunc_normal({h, h}, std, rng);
      l.bv = Tensor::zeros({h});
      l.wo = trunc_normal({h, h}, std, rng);
      l.bo = Tensor::zeros({h});
      l.attn_ln_gamma = Tensor::full({h}, 1.0);
      l.attn_ln_beta = Tensor::zeros({h});
      l.w1 = trunc_normal({h, inter}, std, rng);
      l.b1 = Tensor::zeros({inter});
      l.w2 = trunc_normal({inter, h}, std, rng);
      l.b2 = Tensor::zeros({h});
      l.ffn_ln_gamma = Tensor::full({h}, 1.0);
      l.ffn_ln_beta = Tensor::zeros({h});
    }

    pooler_w_ = trunc_normal({h, h}, std, rng);
    pooler_b_ = Tensor::zeros({h});

    mlm_transform_w_ = trunc_normal({h, h}, std, rng);
    mlm_transform_b_ = Tensor::zeros({h});
    mlm_ln_gamma_ = Tensor::full({h}, 1.0);
    mlm_ln_beta_ = Tensor::zeros({h});
    mlm_output_bias_ = Tensor::zeros({std::size_t(config_.vocab_size)});
  }

  const ModelConfig& config() const { return config_; }
  std::size_t num_layers() const { return layers_.size(); }

  Tensor& token_embedding() { return token_embedding_; }
  const Tensor& token_embedding() const { return token_embedding_; }
  EncoderLayerParams& layer(std::size_t i) { return layers_.at(i); }
  const EncoderLayerParams& layer(std::size_t i) const { return layers_.at(i); }

  // All trainable tensors, checkpoint order.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("embeddings.token", token_embedding_);
    out.emplace_back("embeddings.position", position_embedding_);
    out.emplace_back("embeddings.segment", segment_embedding_);
    out.emplace_back("embeddings.ln.gamma", embedding_ln_gamma_);
    out.emplace_back("embeddings.ln.beta", embedding_ln_beta_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      std::string p = "layer." + std::to_string(i) + ".";
      out.emplace_back(p + "attn.wq", l.wq);
      out.emplace_back(p + "attn.bq", l.bq);
      out.emplace_back(p + "attn.wk", l.wk);
      out.emplace_back(p + "attn.bk", l.bk);
      out.emplace_back(p + "attn.wv", l.wv);
      out.emplace_back(p + "attn.bv", l.bv);
      out.emplace_back(p + "attn.wo", l.wo);
      out.emplace_back(p + "attn.bo", l.bo);
      out.emplace_back(p + "attn_ln.gamma", l.attn_ln_gamma);
      out.emplace_back(p + "attn_ln.beta", l.attn_ln_beta);
      out.emplace_back(p + "ffn.w1", l.w1);
      out.emplace_back(p + "ffn.b1", l.b1);
      out.emplace_back(p + "ffn.w2", l.w2);
      out.emplace_back(p + "ffn.b2", l.b2);
      out.emplace_back(p + "ffn_ln.gamma", l.ffn_ln_gamma);
      out.emplace_back(p + "ffn_ln.beta", l.ffn_ln_beta);
    }
    out.emplace_back("pooler.w", pooler_w_);
    out.emplace_back("pooler.b", pooler_b_);
    out.emplace_back("mlm.transform.w", mlm_transform_w_);
    out.emplace_back("mlm.transform.b", mlm_transform_b_);
    out.emplace_back("mlm.ln.gamma", mlm_ln_gamma_);
    out.emplace_back("mlm.ln.beta", mlm_ln_beta_);
    out.emplace_back("mlm.output_bias", mlm_output_bias_);
    return out;
  }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }

  void set_trainable(bool trainable) {
    for (auto& t : parameters()) const_cast<Tensor&>(t).set_requires_grad(trainable);
  }

  // Total scalars actually held in memory (pooler and MLM head included).
  std::int64_t count_params_total() const {
    std::int64_t n = 0;
    for (const auto& t : parameters()) n += std::int64_t(t.numel());
    return n;
  }

  // The size-table count: embeddings + encoder stack (see count_params above).
  std::int64_t count_core_params() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : named_parameters()) {
      if (name.rfind("pooler.", 0) == 0 || name.rfind("mlm.", 0) == 0) continue;
      n += std::int64_t(t.numel());
    }
    return n;
  }

  ForwardResult forward(const EncodingBatch& batch, bool training = false,
                        std::mt19937_64* rng = nullptr) const {
    if (batch.seq_len > std::size_t(config_.max_position))
      throw DataError("sequence length " + std::to_string(batch.seq_len) +
                      " exceeds max_position " + std::to_string(config_.max_position));
    for (int id : batch.ids)
      if (id < 0 || id >= config_.vocab_size)
        throw DataError("token id " + std::to_string(id) + " out of range [0, " +
                        std::to_string(config_.vocab_size) + ")");
    if (training && config_.dropout > 0.0 && rng == nullptr)
      throw ContractError("training-mode forward with dropout requires an RNG");

    std::size_t b = batch.batch, s = batch.seq_len;
    std::size_t heads = std::size_t(config_.num_heads);
    std::size_t dh = std::size_t(config_.hidden) / heads;
    double inv_sqrt_dh = 1.0 / std::sqrt(double(dh));

    std::vector<int> position_ids(b * s);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < s; ++j) position_ids[i * s + j] = int(j);

    Tensor x = add(add(embedding_lookup(token_embedding_, batch.ids),
                       embedding_lookup(position_embedding_, position_ids)),
                   embedding_lookup(segment_embedding_, batch.segment_ids));
    x = layer_norm(x, embedding_ln_gamma_, embedding_ln_beta_);
    x = maybe_dropout(x, training, rng);

    // Additive attention mask: 0 over real keys, a large negative constant
    // over padding so softmax assigns them ~0 weight.
    Tensor attn_mask = Tensor::zeros({b * heads, s, s});
    {
      auto mv = attn_mask.mutable_data();
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t key = 0; key < s; ++key)
          if (batch.attention_mask[i * s + key] == 0)
            for (std::size_t h = 0; h < heads; ++h)
              for (std::size_t q = 0; q < s; ++q)
                mv[((i * heads + h) * s + q) * s + key] = -1e30;
    }

    ForwardResult result;
    std::size_t h = std::size_t(config_.hidden);
    result.hidden.push_back(reshape(x, {b, s, h}));

    for (const auto& l : layers_) {
      Tensor q = split_heads(add_rowwise(matmul(x, l.wq), l.bq), b, s, heads);
      Tensor k = split_heads(add_rowwise(matmul(x, l.wk), l.bk), b, s, heads);
      Tensor v = split_heads(add_rowwise(matmul(x, l.wv), l.bv), b, s, heads);
      Tensor scores = add(scale(bmm(q, k, /*trans_b=*/true), inv_sqrt_dh), attn_mask);
      Tensor probs = softmax(scores);
      probs = maybe_dropout(probs, training, rng);
      Tensor context = merge_heads(bmm(probs, v), b, s, heads);
      Tensor attn_out = add_rowwise(matmul(context, l.wo), l.bo);
      attn_out = maybe_dropout(attn_out, training, rng);
      x = layer_norm(add(x, attn_out), l.attn_ln_gamma, l.attn_ln_beta);

      Tensor ffn = add_rowwise(matmul(gelu(add_rowwise(matmul(x, l.w1), l.b1)), l.w2), l.b2);
      ffn = maybe_dropout(ffn, training, rng);
      x = layer_norm(add(x, ffn), l.ffn_ln_gamma, l.ffn_ln_beta);
      result.hidden.push_back(reshape(x, {b, s, h}));
    }

    std::vector<std::size_t> cls_rows(b);
    for (std::size_t i = 0; i < b; ++i) cls_rows[i] = i * s;
    result.pooled = tanh_op(add_rowwise(matmul(select_rows(x, cls_rows), pooler_w_), pooler_b_));
    return result;
  }

  // Transform + weight-tied projection into vocabulary logits.
  // [batch, seq, hidden] -> [batch, seq, vocab]; also accepts [rows, hidden].
  Tensor mlm_logits(const Tensor& final_hidden) const {
    std::size_t h = std::size_t(config_.hidden);
    if (final_hidden.rank() < 2 || final_hidden.shape().back() != h)
      throw ShapeError("mlm_logits expects a trailing hidden extent of " +
                       std::to_string(config_.hidden) + ", got " +
                       shape_str(final_hidden.shape()));
    std::size_t rows = final_hidden.numel() / h;
    Tensor flat = final_hidden.rank() == 2 ? final_hidden : reshape(final_hidden, {rows, h});
    Tensor t = gelu(add_rowwise(matmul(flat, mlm_transform_w_), mlm_transform_b_));
    t = layer_norm(t, mlm_ln_gamma_, mlm_ln_beta_);
    Tensor logits = add_rowwise(matmul(t, token_embedding_, /*trans_b=*/true), mlm_output_bias_);
    if (final_hidden.rank() == 2) return logits;
    Shape out_shape(final_hidden.shape().begin(), final_hidden.shape().end() - 1);
    out_shape.push_back(std::size_t(config_.vocab_size));
    return reshape(logits, out_shape);
  }

  // Returns the attention probabilities of one layer for inspection
  // (shape [batch * heads, seq, seq]); eval mode, no tape interaction.
  Tensor attention_probs(const EncodingBatch& batch, std::size_t layer_index) const {
    if (layer_index >= layers_.size()) throw ContractError("layer index out of range");
    std::size_t b = batch.batch, s = batch.seq_len;
    std::size_t heads = std::size_t(config_.num_heads);
    std::size_t dh = std::size_t(config_.hidden) / heads;
    ForwardResult partial;  // recompute up to the requested layer
    std::vector<int> position_ids(b * s);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < s; ++j) position_ids[i * s + j] = int(j);
    Tensor x = add(add(embedding_lookup(token_embedding_, batch.ids),
                       embedding_lookup(position_embedding_, position_ids)),
                   embedding_lookup(segment_embedding_, batch.segment_ids));
    x = layer_norm(x, embedding_ln_gamma_, embedding_ln_beta_);
    Tensor attn_mask = Tensor::zeros({b * heads, s, s});
    auto mv = attn_mask.mutable_data();
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t key = 0; key < s; ++key)
        if (batch.attention_mask[i * s + key] == 0)
          for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t q = 0; q < s; ++q)
              mv[((i * heads + h) * s + q) * s + key] = -1e30;
    for (std::size_t li = 0;; ++li) {
      const auto& l = layers_[li];
      Tensor q = split_heads(add_rowwise(matmul(x, l.wq), l.bq), b, s, heads);
      Tensor k = split_heads(add_rowwise(matmul(x, l.wk), l.bk), b, s, heads);
      Tensor scores =
          add(scale(bmm(q, k, true), 1.0 / std::sqrt(double(dh))), attn_mask);
      Tensor probs = softmax(scores);
      if (li == layer_index) return probs;
      Tensor v = split_heads(add_rowwise(matmul(x, l.wv), l.bv), b, s, heads);
      Tensor context = merge_heads(bmm(probs, v), b, s, heads);
      x = layer_norm(add(x, add_rowwise(matmul(context, l.wo), l.bo)), l.attn_ln_gamma,
                     l.attn_ln_beta);
      Tensor ffn = add_rowwise(matmul(gelu(add_rowwise(matmul(x, l.w1), l.b1)), l.w2), l.b2);
      x = layer_norm(add(x, ffn), l.ffn_ln_gamma, l.ffn_ln_beta);
    }
  }

  // Replaces a parameter buffer (checkpoint load, student init).
  void set_parameter(const std::string& name, Tensor value) {
    Tensor* slot = find_parameter(name);
    if (!slot) throw FormatError("unknown parameter name: " + name);
    if (slot->shape() != value.shape())
      throw FormatError("parameter " + name + " shape mismatch: " +
                        shape_str(slot->shape()) + " vs " + shape_str(value.shape()));
    bool rg = slot->requires_grad();
    *slot = std::move(value);
    slot->set_requires_grad(rg);
  }

  Tensor get_parameter(const std::string& name) const {
    Tensor* slot = const_cast<EncoderModel*>(this)->find_parameter(name);
    if (!slot) throw FormatError("unknown parameter name: " + name);
    return *slot;
  }

 private:
  Tensor maybe_dropout(const Tensor& x, bool training, std::mt19937_64* rng) const {
    if (!training || config_.dropout <= 0.0) return x;
    return dropout(x, config_.dropout, *rng, true);
  }

  Tensor* find_parameter(const std::string& name) {
    auto match = [&](const std::string& n, Tensor& t) -> Tensor* {
      return n == name ? &t : nullptr;
    };
    if (auto* t = match("embeddings.token", token_embedding_)) return t;
    if (auto* t = match("embeddings.position", position_embedding_)) return t;
    if (auto* t = match("embeddings.segment", segment_embedding_)) return t;
    if (auto* t = match("embeddings.ln.gamma", embedding_ln_gamma_)) return t;
    if (auto* t = match("embeddings.ln.beta", embedding_ln_beta_)) return t;
    if (name.rfind("layer.", 0) == 0) {
      std::size_t dot = name.find('.', 6);
      if (dot == std::string::npos) return nullptr;
      std::size_t idx = std::stoul(name.substr(6, dot - 6));
      if (idx >= layers_.size()) return nullptr;
      auto& l = layers_[idx];
      std::string rest = name.substr(dot + 1);
      if (rest == "attn.wq") return &l.wq;
      if (rest == "attn.bq") return &l.bq;
      if (rest == "attn.wk") return &l.wk;
      if (rest == "attn.bk") return &l.bk;
      if (rest == "attn.wv") return &l.wv;
      if (rest == "attn.bv") return &l.bv;
      if (rest == "attn.wo") return &l.wo;
      if (rest == "attn.bo") return &l.bo;
      if (rest == "attn_ln.gamma") return &l.attn_ln_gamma;
      if (rest == "attn_ln.beta") return &l.attn_ln_beta;
      if (rest == "ffn.w1") return &l.w1;
      if (rest == "ffn.b1") return &l.b1;
      if (rest == "ffn.w2") return &l.w2;
      if (rest == "ffn.b2") return &l.b2;
      if (rest == "ffn_ln.gamma") return &l.ffn_ln_gamma;
      if (rest == "ffn_ln.beta") return &l.ffn_ln_beta;
      return nullptr;
    }
    if (auto* t = match("pooler.w", pooler_w_)) return t;
    if (auto* t = match("pooler.b", pooler_b_)) return t;
    if (auto* t = match("mlm.transform.w", mlm_transform_w_)) return t;
    if (auto* t = match("mlm.transform.b", mlm_transform_b_)) return t;
    if (auto* t = match("mlm.ln.gamma", mlm_ln_gamma_)) return t;
    if (auto* t = match("mlm.ln.beta", mlm_ln_beta_)) return t;
    if (auto* t = match("mlm.output_bias", mlm_output_bias_)) return t;
    return nullptr;
  }

  ModelConfig config_;
  Tensor token_embedding_, position_embedding_, segment_embedding_;
  Tensor embedding_ln_gamma_, embedding_ln_beta_;
  std::vector<EncoderLayerParams> layers_;
  Tensor pooler_w_, pooler_b_;
  Tensor mlm_transform_w_, mlm_transform_b_, mlm_ln_gamma_, mlm_ln_beta_, mlm_output_bias_;
};

inline EncoderModel new_model(const ModelConfig& config, std::uint64_t seed) {
  return EncoderModel(config, seed);
}

inline std::int64_t count_params(const EncoderModel& model) {
  return model.count_core_params();
}

// ---------------------------------------------------------------------------
// Checkpoints: magic + version + config JSON + named tensors.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'D', 'K', 'C', 'K'};
inline constexpr std::uint64_t kCheckpointVersion = 1;

namespace detail {

inline void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), std::streamsize(s.size()));
}

inline std::string read_string(std::istream& is) {
  std::uint64_t n = read_u64(is);
  if (n > (1ull << 30)) throw FormatError("implausible string length in checkpoint");
  std::string s(n, '\0');
  is.read(s.data(), std::streamsize(n));
  if (!is) throw FormatError("checkpoint truncated while reading string");
  return s;
}

}  // namespace detail

// Extra metadata rides along for task-head checkpoints.
inline void write_checkpoint_stream(std::ostream& os, const ModelConfig& config,
                                    const std::vector<std::pair<std::string, Tensor>>& tensors,
                                    const nlohmann::json& extra = nlohmann::json::object()) {
  os.write(kCheckpointMagic, 4);
  detail::write_u64(os, kCheckpointVersion);
  nlohmann::json header = {{"config", config.to_json()}, {"extra", extra}};
  detail::write_string(os, header.dump());
  detail::write_u64(os, tensors.size());
  for (const auto& [name, t] : tensors) {
    detail::write_string(os, name);
    write_tensor(os, t);
  }
}

struct CheckpointData {
  ModelConfig config;
  nlohmann::json extra;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

inline CheckpointData read_checkpoint_stream(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw FormatError("not a checkpoint file (bad magic)");
  std::uint64_t version = detail::read_u64(is);
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  CheckpointData data;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(detail::read_string(is));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  data.config = ModelConfig::from_json(header.at("config"));
  data.extra = header.value("extra", nlohmann::json::object());
  std::uint64_t count = detail::read_u64(is);
  if (count > 100000) throw FormatError("implausible tensor count in checkpoint");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = detail::read_string(is);
    data.tensors.emplace_back(std::move(name), read_tensor(is));
  }
  return data;
}

inline void save_checkpoint(const EncoderModel& model, const std::string& path,
                            const nlohmann::json& extra = nlohmann::json::object()) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  write_checkpoint_stream(os, model.config(), model.named_parameters(), extra);
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

inline EncoderModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  CheckpointData data = read_checkpoint_stream(is);
  EncoderModel model(data.config, /*seed=*/0);
  for (auto& [name, t] : data.tensors) model.set_parameter(name, std::move(t));
  return model;
}

}  // namespace distilkit
