#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "distilkit/error.hpp"

namespace distilkit {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass populates it
  bool requires_grad = false;

  std::size_t numel() const { return value.size(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
  void zero_grad() { grad.assign(value.size(), 0.0); }
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

// Dense row-major tensor of doubles with reverse-mode gradient support.
// Value-semantics handle: copies share the underlying buffer, which is what
// the tape needs; use clone() for an independent copy.
class Tensor {
 public:
  Tensor() : node_(std::make_shared<detail::Node>()) {}

  static Tensor zeros(Shape shape) {
    Tensor t;
    std::size_t n = checked_numel(shape);
    t.node_->shape = std::move(shape);
    t.node_->value.assign(n, 0.0);
    return t;
  }

  static Tensor full(Shape shape, double v) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.node_->value.begin(), t.node_->value.end(), v);
    return t;
  }

  static Tensor from(Shape shape, std::vector<double> data) {
    std::size_t n = checked_numel(shape);
    if (n != data.size())
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(data);
    return t;
  }

  static Tensor scalar(double v) { return from({1}, {v}); }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  bool is_scalar() const { return numel() == 1; }

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }

  double item() const {
    if (!is_scalar()) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
    return node_->value[0];
  }

  double at(std::initializer_list<std::size_t> idx) const {
    return node_->value[offset(idx)];
  }
  double& at_mut(std::initializer_list<std::size_t> idx) {
    return node_->value[offset(idx)];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    node_->requires_grad = b;
    return *this;
  }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const double> grad() const {
    if (!has_grad()) throw ContractError("gradient not populated; run backward() first");
    return node_->grad;
  }
  std::span<double> mutable_grad() {
    if (!has_grad()) throw ContractError("gradient not populated; run backward() first");
    return node_->grad;
  }
  void zero_grad() { node_->zero_grad(); }

  // Independent deep copy (fresh buffer, no grad, same requires_grad flag).
  Tensor clone() const {
    Tensor t = from(node_->shape, node_->value);
    t.node_->requires_grad = node_->requires_grad;
    return t;
  }

  // Same values as a constant leaf: gradients never flow through the result.
  Tensor detach() const { return from(node_->shape, node_->value); }

  bool same_buffer(const Tensor& other) const { return node_ == other.node_; }

  detail::NodePtr node() const { return node_; }  // internal: used by ops and the tape

 private:
  static std::size_t checked_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
      if (e == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
      n *= e;
    }
    return n;
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != rank()) throw ShapeError("index rank mismatch");
    std::size_t off = 0;
    auto it = idx.begin();
    for (std::size_t d = 0; d < rank(); ++d, ++it) {
      if (*it >= node_->shape[d]) throw ShapeError("index out of range");
      off = off * node_->shape[d] + *it;
    }
    return off;
  }

  detail::NodePtr node_;
};

// Records primitive operations so a scalar loss can be differentiated by
// replaying the records in reverse. One tape per training step, confined to
// a single thread; forward passes with no active tape record nothing.
class Tape {
 public:
  Tape() { stack().push_back(this); }
  ~Tape() {
    if (!stack().empty() && stack().back() == this) stack().pop_back();
  }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return stack().empty() ? nullptr : stack().back(); }

  void record(std::vector<detail::NodePtr> nodes, std::function<void()> backward_fn) {
    entries_.push_back({std::move(nodes), std::move(backward_fn)});
  }

  std::size_t size() const { return entries_.size(); }

  // Replays the recorded operations in reverse, populating .grad of every
  // participating node (fresh per call), then clears the records.
  void backward_from(const Tensor& loss) {
    if (!loss.is_scalar())
      throw ContractError("backward requires a scalar loss, got shape " +
                          shape_str(loss.shape()));
    if (entries_.empty())
      throw ContractError("tape is empty or already consumed");
    if (!loss.requires_grad())
      throw ContractError("loss was not produced on the active tape");
    for (auto& e : entries_)
      for (auto& n : e.nodes) n->zero_grad();
    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->fn();
    entries_.clear();
  }

 private:
  struct Entry {
    std::vector<detail::NodePtr> nodes;
    std::function<void()> fn;
  };
  static std::vector<Tape*>& stack() {
    thread_local std::vector<Tape*> s;
    return s;
  }
  std::vector<Entry> entries_;
};

inline void backward(const Tensor& loss) {
  Tape* t = Tape::active();
  if (!t) throw ContractError("backward called with no active tape");
  t->backward_from(loss);
}

namespace detail {

inline bool track(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

// C[m,n] += op(A) * op(B). Layouts: nn A[m,k] B[k,n]; nt A[m,k] B[n,k];
// tn A[k,m] B[k,n]. Loop orders keep the innermost stride 1.
inline void gemm_acc(const double* a, const double* b, double* c, std::size_t m,
                     std::size_t n, std::size_t k, bool trans_a, bool trans_b) {
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      const double* arow = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        double av = arow[p];
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = a + i * k;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        crow[j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = a + p * m;
      const double* brow = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        double av = arow[i];
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    throw ContractError("gemm tt variant not supported");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  auto ov = out.mutable_data();
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (detail::track({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active()->record({an, bn, on}, [an, bn, on] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        if (an->requires_grad) an->grad[i] += on->grad[i];
        if (bn->requires_grad) bn->grad[i] += on->grad[i];
      }
    });
  }
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  auto ov = out.mutable_data();
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  if (detail::track({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active()->record({an, bn, on}, [an, bn, on] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        if (an->requires_grad) an->grad[i] += on->grad[i];
        if (bn->requires_grad) bn->grad[i] -= on->grad[i];
      }
    });
  }
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  auto ov = out.mutable_data();
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (detail::track({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active()->record({an, bn, on}, [an, bn, on] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        if (an->requires_grad) an->grad[i] += on->grad[i] * bn->value[i];
        if (bn->requires_grad) bn->grad[i] += on->grad[i] * an->value[i];
      }
    });
  }
  return out;
}

inline Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  auto ov = out.mutable_data();
  auto av = a.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * c;
  if (detail::track({&a})) {
    out.set_requires_grad(true);
    auto an = a.node(), on = out.node();
    Tape::active()->record({an, on}, [an, on, c] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * c;
    });
  }
  return out;
}

// x: [rows, width], bias: [width]; adds the bias to every row.
inline Tensor add_rowwise(const Tensor& x, const Tensor& bias) {
  if (x.rank() < 1 || bias.rank() != 1 || x.shape().back() != bias.shape()[0])
    throw ShapeError("add_rowwise: incompatible shapes " + shape_str(x.shape()) +
                     " and " + shape_str(bias.shape()));
  std::size_t width = bias.shape()[0];
  std::size_t rows = x.numel() / width;
  Tensor out = Tensor::zeros(x.shape());
  auto ov = out.mutable_data();
  auto xv = x.data(), bv = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < width; ++j) ov[r * width + j] = xv[r * width + j] + bv[j];
  if (detail::track({&x, &bias})) {
    out.set_requires_grad(true);
    auto xn = x.node(), bn = bias.node(), on = out.node();
    Tape::active()->record({xn, bn, on}, [xn, bn, on, rows, width] {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < width; ++j) {
          double g = on->grad[r * width + j];
          if (xn->requires_grad) xn->grad[r * width + j] += g;
          if (bn->requires_grad) bn->grad[j] += g;
        }
    });
  }
  return out;
}

inline Tensor reshape(const Tensor& x, Shape new_shape) {
  Tensor out = Tensor::from(std::move(new_shape), {x.data().begin(), x.data().end()});
  if (out.numel() != x.numel())
    throw ShapeError("reshape: element count mismatch " + shape_str(x.shape()) +
                     " -> " + shape_str(out.shape()));
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active()->record({xn, on}, [xn, on] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

// a: [m, k], b: [k, n] (or [n, k] when trans_b). Gradients flow to both inputs.
inline Tensor matmul(const Tensor& a, const Tensor& b, bool trans_b = false) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul expects rank-2 tensors, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  std::size_t m = a.shape()[0], k = a.shape()[1];
  std::size_t bk = trans_b ? b.shape()[1] : b.shape()[0];
  std::size_t n = trans_b ? b.shape()[0] : b.shape()[1];
  if (k != bk)
    throw ShapeError("matmul: inner extents disagree, " + shape_str(a.shape()) +
                     (trans_b ? " x transpose " : " x ") + shape_str(b.shape()));
  Tensor out = Tensor::zeros({m, n});
  detail::gemm_acc(a.data().data(), b.data().data(), out.mutable_data().data(), m, n, k,
                   false, trans_b);
  if (detail::track({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active()->record({an, bn, on}, [an, bn, on, m, n, k, trans_b] {
      if (an->requires_grad) {
        // dA = dC * op(B)^T
        detail::gemm_acc(on->grad.data(), bn->value.data(), an->grad.data(), m, k, n,
                         false, !trans_b);
      }
      if (bn->requires_grad) {
        if (!trans_b)  // dB = A^T * dC
          detail::gemm_acc(an->value.data(), on->grad.data(), bn->grad.data(), k, n, m,
                           true, false);
        else  // dB = dC^T * A
          detail::gemm_acc(on->grad.data(), an->value.data(), bn->grad.data(), n, k, m,
                           true, false);
      }
    });
  }
  return out;
}

// Batched product over the leading axis. a: [B, m, k]; b: [B, k, n]
// ([B, n, k] when trans_b).
inline Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false) {
  if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0])
    throw ShapeError("bmm expects matching rank-3 tensors, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  std::size_t batch = a.shape()[0];
  std::size_t m = a.shape()[1], k = a.shape()[2];
  std::size_t bk = trans_b ? b.shape()[2] : b.shape()[1];
  std::size_t n = trans_b ? b.shape()[1] : b.shape()[2];
  if (k != bk)
    throw ShapeError("bmm: inner extents disagree, " + shape_str(a.shape()) +
                     (trans_b ? " x transpose " : " x ") + shape_str(b.shape()));
  Tensor out = Tensor::zeros({batch, m, n});
  for (std::size_t s = 0; s < batch; ++s)
    detail::gemm_acc(a.data().data() + s * m * k, b.data().data() + s * (trans_b ? n * k : k * n),
                     out.mutable_data().data() + s * m * n, m, n, k, false, trans_b);
  if (detail::track({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node(), bn = b.node(), on = out.node();
    Tape::active()->record({an, bn, on}, [an, bn, on, batch, m, n, k, trans_b] {
      for (std::size_t s = 0; s < batch; ++s) {
        const double* go = on->grad.data() + s * m * n;
        const double* av = an->value.data() + s * m * k;
        const double* bv = bn->value.data() + s * (trans_b ? n * k : k * n);
        if (an->requires_grad)
          detail::gemm_acc(go, bv, an->grad.data() + s * m * k, m, k, n, false, !trans_b);
        if (bn->requires_grad) {
          double* gb = bn->grad.data() + s * (trans_b ? n * k : k * n);
          if (!trans_b)
            detail::gemm_acc(av, go, gb, k, n, m, true, false);
          else
            detail::gemm_acc(go, av, gb, n, k, m, true, false);
        }
      }
    });
  }
  return out;
}

// [rows, width] -> [batch * heads, rows_per_batch, width / heads]; the inverse
// of merge_heads. Pure index permutation, so the gradient is the inverse map.
inline Tensor split_heads(const Tensor& x, std::size_t batch, std::size_t seq_len,
                          std::size_t heads) {
  if (x.rank() != 2 || x.shape()[0] != batch * seq_len || x.shape()[1] % heads != 0)
    throw ShapeError("split_heads: bad shape " + shape_str(x.shape()));
  std::size_t hidden = x.shape()[1];
  std::size_t dh = hidden / heads;
  Tensor out = Tensor::zeros({batch * heads, seq_len, dh});
  auto ov = out.mutable_data();
  auto xv = x.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t l = 0; l < seq_len; ++l)
        std::memcpy(&ov[((b * heads + h) * seq_len + l) * dh],
                    &xv[(b * seq_len + l) * hidden + h * dh], dh * sizeof(double));
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active()->record({xn, on}, [xn, on, batch, seq_len, heads, hidden, dh] {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t l = 0; l < seq_len; ++l)
            for (std::size_t d = 0; d < dh; ++d)
              xn->grad[(b * seq_len + l) * hidden + h * dh + d] +=
                  on->grad[((b * heads + h) * seq_len + l) * dh + d];
    });
  }
  return out;
}

inline Tensor merge_heads(const Tensor& x, std::size_t batch, std::size_t seq_len,
                          std::size_t heads) {
  if (x.rank() != 3 || x.shape()[0] != batch * heads || x.shape()[1] != seq_len)
    throw ShapeError("merge_heads: bad shape " + shape_str(x.shape()));
  std::size_t dh = x.shape()[2];
  std::size_t hidden = heads * dh;
  Tensor out = Tensor::zeros({batch * seq_len, hidden});
  auto ov = out.mutable_data();
  auto xv = x.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t l = 0; l < seq_len; ++l)
        std::memcpy(&ov[(b * seq_len + l) * hidden + h * dh],
                    &xv[((b * heads + h) * seq_len + l) * dh], dh * sizeof(double));
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active()->record({xn, on}, [xn, on, batch, seq_len, heads, hidden, dh] {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t l = 0; l < seq_len; ++l)
            for (std::size_t d = 0; d < dh; ++d)
              xn->grad[((b * heads + h) * seq_len + l) * dh + d] +=
                  on->grad[(b * seq_len + l) * hidden + h * dh + d];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gather / scatter
// ---------------------------------------------------------------------------

// table: [vocab, width]; returns [ids.size(), width]. Gradients scatter-add
// back into the table, which is what ties the MLM projection to the embedding.
inline Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw ShapeError("embedding_lookup expects a rank-2 table");
  std::size_t vocab = table.shape()[0], width = table.shape()[1];
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab)
      throw DataError("embedding id " + std::to_string(ids[i]) + " at position " +
                      std::to_string(i) + " out of range [0, " + std::to_string(vocab) + ")");
  Tensor out = Tensor::zeros({ids.size(), width});
  auto ov = out.mutable_data();
  auto tv = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::memcpy(&ov[i * width], &tv[static_cast<std::size_t>(ids[i]) * width],
                width * sizeof(double));
  if (detail::track({&table})) {
    out.set_requires_grad(true);
    auto tn = table.node(), on = out.node();
    Tape::active()->record({tn, on}, [tn, on, ids, width] {
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < width; ++j)
          tn->grad[static_cast<std::size_t>(ids[i]) * width + j] += on->grad[i * width + j];
    });
  }
  return out;
}

// x: [rows, ...]; picks the given rows (first-axis slices).
inline Tensor select_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  if (x.rank() < 1) throw ShapeError("select_rows on rank-0 tensor");
  std::size_t nrows = x.shape()[0];
  std::size_t width = x.numel() / nrows;
  for (std::size_t r : rows)
    if (r >= nrows) throw ShapeError("select_rows: row index out of range");
  Shape out_shape = x.shape();
  out_shape[0] = rows.size();
  Tensor out = Tensor::zeros(out_shape);
  auto ov = out.mutable_data();
  auto xv = x.data();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::memcpy(&ov[i * width], &xv[rows[i] * width], width * sizeof(double));
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active()->record({xn, on}, [xn, on, rows, width] {
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j)
          xn->grad[rows[i] * width + j] += on->grad[i * width + j];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Softmax family
// ---------------------------------------------------------------------------

// exp(z_i/T) / sum_j exp(z_j/T) over the last axis, computed with
// max-subtraction. Each slice sums to 1.
inline Tensor softmax_with_temperature(const Tensor& z, double temperature) {
  if (!(temperature > 0.0))
    throw DomainError("softmax temperature must be positive, got " +
                      std::to_string(temperature));
  if (z.rank() < 1) throw ShapeError("softmax on rank-0 tensor");
  std::size_t c = z.shape().back();
  std::size_t rows = z.numel() / c;
  Tensor out = Tensor::zeros(z.shape());
  auto ov = out.mutable_data();
  auto zv = z.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = &zv[r * c];
    double* yr = &ov[r * c];
    double zmax = *std::max_element(zr, zr + c);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      yr[j] = std::exp((zr[j] - zmax) / temperature);
      denom += yr[j];
    }
    for (std::size_t j = 0; j < c; ++j) yr[j] /= denom;
  }
  if (detail::track({&z})) {
    out.set_requires_grad(true);
    auto zn = z.node(), on = out.node();
    Tape::active()->record({zn, on}, [zn, on, rows, c, temperature] {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = &on->value[r * c];
        const double* g = &on->grad[r * c];
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += g[j] * y[j];
        for (std::size_t j = 0; j < c; ++j)
          zn->grad[r * c + j] += y[j] * (g[j] - dot) / temperature;
      }
    });
  }
  return out;
}

inline Tensor softmax(const Tensor& z) { return softmax_with_temperature(z, 1.0); }

inline Tensor log_softmax_with_temperature(const Tensor& z, double temperature) {
  if (!(temperature > 0.0))
    throw DomainError("softmax temperature must be positive, got " +
                      std::to_string(temperature));
  std::size_t c = z.shape().back();
  std::size_t rows = z.numel() / c;
  Tensor out = Tensor::zeros(z.shape());
  auto ov = out.mutable_data();
  auto zv = z.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = &zv[r * c];
    double* lr = &ov[r * c];
    double zmax = *std::max_element(zr, zr + c);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp((zr[j] - zmax) / temperature);
    double log_denom = std::log(denom);
    for (std::size_t j = 0; j < c; ++j) lr[j] = (zr[j] - zmax) / temperature - log_denom;
  }
  if (detail::track({&z})) {
    out.set_requires_grad(true);
    auto zn = z.node(), on = out.node();
    Tape::active()->record({zn, on}, [zn, on, rows, c, temperature] {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* l = &on->value[r * c];
        const double* g = &on->grad[r * c];
        double gsum = 0.0;
        for (std::size_t j = 0; j < c; ++j) gsum += g[j];
        for (std::size_t j = 0; j < c; ++j)
          zn->grad[r * c + j] += (g[j] - std::exp(l[j]) * gsum) / temperature;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class Activation { gelu, leaky_relu, sigmoid, tanh };

inline Activation activation_from_string(const std::string& name) {
  if (name == "gelu") return Activation::gelu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation kind: " + name);
}

inline constexpr double kLeakyReluSlope = 0.01;

inline Tensor activation(const Tensor& x, Activation kind) {
  Tensor out = Tensor::zeros(x.shape());
  auto ov = out.mutable_data();
  auto xv = x.data();
  const double inv_sqrt2 = 0.7071067811865475244;
  switch (kind) {
    case Activation::gelu:  // exact erf form
      for (std::size_t i = 0; i < ov.size(); ++i)
        ov[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * inv_sqrt2));
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < ov.size(); ++i)
        ov[i] = xv[i] >= 0.0 ? xv[i] : kLeakyReluSlope * xv[i];
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = 1.0 / (1.0 + std::exp(-xv[i]));
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(xv[i]);
      break;
  }
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active()->record({xn, on}, [xn, on, kind, inv_sqrt2] {
      const double inv_sqrt_2pi = 0.3989422804014326779;
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        double x = xn->value[i], y = on->value[i], d = 0.0;
        switch (kind) {
          case Activation::gelu:
            d = 0.5 * (1.0 + std::erf(x * inv_sqrt2)) +
                x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
            break;
          case Activation::leaky_relu:
            d = x >= 0.0 ? 1.0 : kLeakyReluSlope;
            break;
          case Activation::sigmoid:
            d = y * (1.0 - y);
            break;
          case Activation::tanh:
            d = 1.0 - y * y;
            break;
        }
        xn->grad[i] += on->grad[i] * d;
      }
    });
  }
  return out;
}

inline Tensor gelu(const Tensor& x) { return activation(x, Activation::gelu); }
inline Tensor leaky_relu(const Tensor& x) { return activation(x, Activation::leaky_relu); }
inline Tensor sigmoid(const Tensor& x) { return activation(x, Activation::sigmoid); }
inline Tensor tanh_op(const Tensor& x) { return activation(x, Activation::tanh); }

// ---------------------------------------------------------------------------
// Layer norm
// ---------------------------------------------------------------------------

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-12) {
  std::size_t width = x.shape().back();
  if (gamma.shape() != Shape{width} || beta.shape() != Shape{width})
    throw ShapeError("layer_norm: gamma/beta must be [" + std::to_string(width) + "]");
  std::size_t rows = x.numel() / width;
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> mean(rows), rstd(rows);
  auto ov = out.mutable_data();
  auto xv = x.data();
  auto gv = gamma.data(), bv = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &xv[r * width];
    double m = 0.0;
    for (std::size_t j = 0; j < width; ++j) m += xr[j];
    m /= double(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (xr[j] - m) * (xr[j] - m);
    var /= double(width);
    double rs = 1.0 / std::sqrt(var + eps);
    mean[r] = m;
    rstd[r] = rs;
    for (std::size_t j = 0; j < width; ++j)
      ov[r * width + j] = gv[j] * (xr[j] - m) * rs + bv[j];
  }
  if (detail::track({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
    Tape::active()->record(
        {xn, gn, bn, on}, [xn, gn, bn, on, rows, width, mean, rstd] {
          for (std::size_t r = 0; r < rows; ++r) {
            const double* xr = &xn->value[r * width];
            const double* g = &on->grad[r * width];
            double m = mean[r], rs = rstd[r];
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
              double xhat = (xr[j] - m) * rs;
              double dxhat = g[j] * gn->value[j];
              sum_dxhat += dxhat;
              sum_dxhat_xhat += dxhat * xhat;
              if (gn->requires_grad) gn->grad[j] += g[j] * xhat;
              if (bn->requires_grad) bn->grad[j] += g[j];
            }
            if (xn->requires_grad) {
              for (std::size_t j = 0; j < width; ++j) {
                double xhat = (xr[j] - m) * rs;
                double dxhat = g[j] * gn->value[j];
                xn->grad[r * width + j] +=
                    rs * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / double(width));
              }
            }
          }
        });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out = Tensor::scalar(s);
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active()->record({xn, on}, [xn, on] {
      for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[0];
    });
  }
  return out;
}

inline Tensor mean(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  double n = double(x.numel());
  Tensor out = Tensor::scalar(s / n);
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active()->record({xn, on}, [xn, on, n] {
      for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[0] / n;
    });
  }
  return out;
}

// Sums over the last axis: [..., C] -> [...]; a [C] input reduces to a scalar.
inline Tensor sum_last_axis(const Tensor& x) {
  std::size_t c = x.shape().back();
  std::size_t rows = x.numel() / c;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  if (out_shape.empty()) out_shape = {1};
  Tensor out = Tensor::zeros(out_shape);
  auto ov = out.mutable_data();
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += xv[r * c + j];
    ov[r] = s;
  }
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active()->record({xn, on}, [xn, on, rows, c] {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) xn->grad[r * c + j] += on->grad[r];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

enum class LossKind { cross_entropy, binary_cross_entropy, mse };

inline LossKind loss_from_string(const std::string& name) {
  if (name == "cross_entropy") return LossKind::cross_entropy;
  if (name == "binary_cross_entropy") return LossKind::binary_cross_entropy;
  if (name == "mse") return LossKind::mse;
  throw ConfigError("unknown loss kind: " + name);
}

// Probability-space losses with mean reduction: cross_entropy averages over
// rows (last axis = classes), BCE/MSE over all elements.
inline Tensor loss(const Tensor& pred, const Tensor& target, LossKind kind) {
  check_same_shape(pred, target, "loss");
  auto pv = pred.data();
  auto tv = target.data();
  constexpr double kFloor = 1e-300;
  double value = 0.0;
  double n = 0.0;
  switch (kind) {
    case LossKind::cross_entropy: {
      std::size_t c = pred.shape().back();
      if (pred.rank() < 1 || c < 1) throw ShapeError("cross_entropy needs a class axis");
      n = double(pred.numel() / c);
      for (std::size_t i = 0; i < pv.size(); ++i) {
        if (pv[i] < -1e-9 || pv[i] > 1.0 + 1e-9)
          throw DomainError("cross_entropy probability out of [0,1]: " +
                            std::to_string(pv[i]));
        if (tv[i] != 0.0) value -= tv[i] * std::log(std::max(pv[i], kFloor));
      }
      value /= n;
      break;
    }
    case LossKind::binary_cross_entropy: {
      n = double(pred.numel());
      for (std::size_t i = 0; i < pv.size(); ++i) {
        if (pv[i] <= 0.0 || pv[i] >= 1.0)
          throw DomainError("binary_cross_entropy probability out of (0,1): " +
                            std::to_string(pv[i]));
        value -= tv[i] * std::log(pv[i]) + (1.0 - tv[i]) * std::log(1.0 - pv[i]);
      }
      value /= n;
      break;
    }
    case LossKind::mse: {
      n = double(pred.numel());
      for (std::size_t i = 0; i < pv.size(); ++i)
        value += (pv[i] - tv[i]) * (pv[i] - tv[i]);
      value /= n;
      break;
    }
  }
  Tensor out = Tensor::scalar(value);
  if (detail::track({&pred, &target})) {
    out.set_requires_grad(true);
    auto pn = pred.node(), tn = target.node(), on = out.node();
    Tape::active()->record({pn, tn, on}, [pn, tn, on, kind, n, kFloor] {
      double g = on->grad[0];
      for (std::size_t i = 0; i < pn->value.size(); ++i) {
        double p = pn->value[i], t = tn->value[i];
        switch (kind) {
          case LossKind::cross_entropy:
            if (pn->requires_grad && t != 0.0)
              pn->grad[i] += g * (-t / std::max(p, kFloor)) / n;
            if (tn->requires_grad) tn->grad[i] += g * (-std::log(std::max(p, kFloor))) / n;
            break;
          case LossKind::binary_cross_entropy:
            if (pn->requires_grad)
              pn->grad[i] += g * (-(t / p) + (1.0 - t) / (1.0 - p)) / n;
            if (tn->requires_grad)
              tn->grad[i] += g * (std::log(1.0 - p) - std::log(p)) / n;
            break;
          case LossKind::mse:
            if (pn->requires_grad) pn->grad[i] += g * 2.0 * (p - t) / n;
            if (tn->requires_grad) tn->grad[i] += g * 2.0 * (t - p) / n;
            break;
        }
      }
    });
  }
  return out;
}

// Numerically stable fused log-softmax + NLL; mean over rows.
inline Tensor cross_entropy_with_logits(const Tensor& logits, const std::vector<int>& targets) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy_with_logits expects [N, C]");
  std::size_t rows = logits.shape()[0], c = logits.shape()[1];
  if (targets.size() != rows)
    throw ShapeError("cross_entropy_with_logits: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(rows) + " rows");
  auto zv = logits.data();
  double value = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= c)
      throw DataError("target class " + std::to_string(targets[r]) + " out of range at row " +
                      std::to_string(r));
    const double* zr = &zv[r * c];
    double zmax = *std::max_element(zr, zr + c);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(zr[j] - zmax);
    value += std::log(denom) + zmax - zr[targets[r]];
  }
  value /= double(rows);
  Tensor out = Tensor::scalar(value);
  if (detail::track({&logits})) {
    out.set_requires_grad(true);
    auto zn = logits.node(), on = out.node();
    Tape::active()->record({zn, on}, [zn, on, targets, rows, c] {
      double g = on->grad[0] / double(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* zr = &zn->value[r * c];
        double zmax = *std::max_element(zr, zr + c);
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) denom += std::exp(zr[j] - zmax);
        for (std::size_t j = 0; j < c; ++j) {
          double p = std::exp(zr[j] - zmax) / denom;
          zn->grad[r * c + j] += g * (p - (static_cast<std::size_t>(targets[r]) == j ? 1.0 : 0.0));
        }
      }
    });
  }
  return out;
}

// Stable sigmoid cross-entropy from logits; targets are constants in [0,1].
inline Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
  if (logits.numel() != targets.size())
    throw ShapeError("bce_with_logits: size mismatch");
  auto zv = logits.data();
  auto softplus = [](double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  };
  double value = 0.0;
  for (std::size_t i = 0; i < zv.size(); ++i)
    value += targets[i] * softplus(-zv[i]) + (1.0 - targets[i]) * softplus(zv[i]);
  double n = double(zv.size());
  value /= n;
  Tensor out = Tensor::scalar(value);
  if (detail::track({&logits})) {
    out.set_requires_grad(true);
    auto zn = logits.node(), on = out.node();
    Tape::active()->record({zn, on}, [zn, on, targets, n] {
      double g = on->grad[0] / n;
      for (std::size_t i = 0; i < zn->value.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-zn->value[i]));
        zn->grad[i] += g * (s - targets[i]);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

inline Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng, bool training) {
  if (p < 0.0 || p >= 1.0) throw DomainError("dropout probability must be in [0,1)");
  if (!training || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<double> mask(x.numel());
  double inv_keep = 1.0 / (1.0 - p);
  for (auto& m : mask) m = keep(rng) ? inv_keep : 0.0;
  Tensor out = Tensor::zeros(x.shape());
  auto ov = out.mutable_data();
  auto xv = x.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * mask[i];
  if (detail::track({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    Tape::active()->record({xn, on}, [xn, on, mask = std::move(mask)] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i] * mask[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient clipping
// ---------------------------------------------------------------------------

// Returns the pre-clip global L2 norm; rescales all gradients in place when
// the norm exceeds max_norm. Applying twice equals applying once.
inline double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  if (!(max_norm > 0.0)) throw DomainError("max_norm must be positive");
  double sq = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad())
      throw ContractError("clip_grad_norm: parameter with unpopulated gradient");
    for (double g : p.grad()) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm) {
    double s = max_norm / norm;
    for (const Tensor& p : params) {
      Tensor& mp = const_cast<Tensor&>(p);
      for (double& g : mp.mutable_grad()) g *= s;
    }
  }
  return norm;
}

inline bool all_finite(const Tensor& t) {
  for (double v : t.data())
    if (!std::isfinite(v)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Random initialization
// ---------------------------------------------------------------------------

// Normal(0, stddev) resampled until within two standard deviations.
inline Tensor trunc_normal(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.mutable_data()) {
    double x = dist(rng);
    while (std::abs(x) > 2.0 * stddev) x = dist(rng);
    v = x;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Serialization: magic, rank and extents as 64-bit little-endian, then the
// values as 64-bit floats. Used by model checkpoints.
// ---------------------------------------------------------------------------

inline constexpr char kTensorMagic[4] = {'D', 'K', 'T', '1'};

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = (v >> (8 * i)) & 0xFF;
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw FormatError("tensor stream truncated while reading header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kTensorMagic, 4);
  detail::write_u64(os, t.rank());
  for (std::size_t e : t.shape()) detail::write_u64(os, e);
  for (double v : t.data()) detail::write_u64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw IoError("failed writing tensor data");
}

inline Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kTensorMagic, 4) != 0)
    throw FormatError("bad tensor magic");
  std::uint64_t rank = detail::read_u64(is);
  if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  std::size_t n = 1;
  for (auto& e : shape) {
    e = detail::read_u64(is);
    if (e == 0 || e > (1ull << 40)) throw FormatError("implausible tensor extent");
    n *= e;
  }
  std::vector<double> data(n);
  for (auto& v : data) v = std::bit_cast<double>(detail::read_u64(is));
  return Tensor::from(std::move(shape), std::move(data));
}

// ---------------------------------------------------------------------------
// Small helpers shared by prediction and metrics code
// ---------------------------------------------------------------------------

inline std::size_t argmax(std::span<const double> v) {
  return std::distance(v.begin(), std::max_element(v.begin(), v.end()));
}

}  // namespace distilkit
