// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "detqe/common.hpp"
#include "detqe/rng.hpp"
#include "detqe/tensor.hpp"

namespace detqe {

// One learnable tensor with its gradient slot and Adam moments. The store
// that owns it guarantees a stable address for the lifetime of the model.
template <typename T>
struct ParamTensor {
  std::string name;
  Mat<T> value;
  Mat<T> grad;
  Mat<T> m;  // first Adam moment
  Mat<T> v;  // second Adam moment
};

// Reverse-mode tape. Each operation records a node holding its value and a
// closure that routes the node's gradient to its inputs. A tape covers one
// forward pass; backward() may run once, after which the tape is spent.
template <typename T>
class Tape {
 public:
  using M = Mat<T>;

  struct Node {
    M value;
    M grad;
    std::function<void(Node&)> back;  // empty for constant leaves
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves ----

  Node* input(M value) { return make(std::move(value)); }

  // Parameter leaf: the node holds a copy of the current value; backward
  // accumulates into the tensor's persistent grad slot.
  Node* param(ParamTensor<T>& p) {
    Node* n = make(p.value);
    ParamTensor<T>* tensor = &p;
    n->back = [tensor](Node& self) { tensor->grad += self.grad; };
    return n;
  }

  // ---- shape ops ----

  Node* gather_rows(Node* table, const std::vector<int>& ids) {
    const int rows = static_cast<int>(table->value.rows());
    M out(static_cast<Eigen::Index>(ids.size()), table->value.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= rows)
        throw input_error("gather_rows: id out of range: " + std::to_string(ids[i]));
      out.row(static_cast<Eigen::Index>(i)) = table->value.row(ids[i]);
    }
    Node* n = make(std::move(out));
    n->back = [table, ids](Node& self) {
      for (size_t i = 0; i < ids.size(); ++i)
        table->grad.row(ids[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    };
    return n;
  }

  Node* slice_rows(Node* a, int begin, int len) {
    Node* n = make(a->value.middleRows(begin, len));
    n->back = [a, begin, len](Node& self) { a->grad.middleRows(begin, len) += self.grad; };
    return n;
  }

  Node* slice_cols(Node* a, int begin, int len) {
    Node* n = make(a->value.middleCols(begin, len));
    n->back = [a, begin, len](Node& self) { a->grad.middleCols(begin, len) += self.grad; };
    return n;
  }

  Node* concat_cols(const std::vector<Node*>& parts) {
    if (parts.empty()) throw state_error("concat_cols: no inputs");
    Eigen::Index rows = parts[0]->value.rows(), cols = 0;
    for (Node* p : parts) cols += p->value.cols();
    M out(rows, cols);
    Eigen::Index at = 0;
    for (Node* p : parts) {
      out.middleCols(at, p->value.cols()) = p->value;
      at += p->value.cols();
    }
    Node* n = make(std::move(out));
    n->back = [parts](Node& self) {
      Eigen::Index at = 0;
      for (Node* p : parts) {
        p->grad += self.grad.middleCols(at, p->value.cols());
        at += p->value.cols();
      }
    };
    return n;
  }

  // ---- arithmetic ----

  Node* matmul(Node* a, Node* b) {
    Node* n = make(a->value * b->value);
    n->back = [a, b](Node& self) {
      a->grad.noalias() += self.grad * b->value.transpose();
      b->grad.noalias() += a->value.transpose() * self.grad;
    };
    return n;
  }

  // a * b^T without materializing the transpose as a node
  Node* matmul_bt(Node* a, Node* b) {
    Node* n = make(a->value * b->value.transpose());
    n->back = [a, b](Node& self) {
      a->grad.noalias() += self.grad * b->value;
      b->grad.noalias() += self.grad.transpose() * a->value;
    };
    return n;
  }

  Node* add(Node* a, Node* b) {
    Node* n = make(a->value + b->value);
    n->back = [a, b](Node& self) {
      a->grad += self.grad;
      b->grad += self.grad;
    };
    return n;
  }

  // broadcast-add a 1 x m row vector to every row
  Node* add_rowvec(Node* a, Node* row) {
    Node* n = make(a->value.rowwise() + row->value.row(0));
    n->back = [a, row](Node& self) {
      a->grad += self.grad;
      row->grad.row(0) += self.grad.colwise().sum();
    };
    return n;
  }

  Node* mul_scalar(Node* a, double c) {
    const T s = static_cast<T>(c);
    Node* n = make(a->value * s);
    n->back = [a, s](Node& self) { a->grad += self.grad * s; };
    return n;
  }

  Node* sub_scalar(Node* a, double c) {
    Node* n = make((a->value.array() - static_cast<T>(c)).matrix());
    n->back = [a](Node& self) { a->grad += self.grad; };
    return n;
  }

  Node* square(Node* a) {
    Node* n = make(a->value.cwiseProduct(a->value));
    n->back = [a](Node& self) {
      a->grad += static_cast<T>(2) * self.grad.cwiseProduct(a->value);
    };
    return n;
  }

  Node* relu(Node* a) {
    Node* n = make(a->value.cwiseMax(static_cast<T>(0)));
    n->back = [a](Node& self) {
      a->grad.array() +=
          self.grad.array() * (a->value.array() > static_cast<T>(0)).template cast<T>();
    };
    return n;
  }

  Node* sigmoid(Node* a) {
    M y = (static_cast<T>(1) /
           (static_cast<T>(1) + (-a->value.array()).exp()))
              .matrix();
    Node* n = make(std::move(y));
    n->back = [a](Node& self) {
      a->grad.array() +=
          self.grad.array() * self.value.array() * (static_cast<T>(1) - self.value.array());
    };
    return n;
  }

  // Row-wise layer normalization with learned gain and bias (both 1 x m).
  Node* layernorm(Node* x, Node* gain, Node* bias) {
    constexpr T kEps = static_cast<T>(1e-5);
    const Eigen::Index rows = x->value.rows(), cols = x->value.cols();
    M xhat(rows, cols);
    M inv(rows, 1);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const T mu = x->value.row(r).mean();
      auto centered = x->value.row(r).array() - mu;
      const T var = centered.square().mean();
      const T is = static_cast<T>(1) / std::sqrt(var + kEps);
      inv(r, 0) = is;
      xhat.row(r) = (centered * is).matrix();
    }
    M out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      out.row(r) =
          (xhat.row(r).array() * gain->value.row(0).array() + bias->value.row(0).array()).matrix();
    Node* n = make(std::move(out));
    // keep normalized activations and inverse sigmas for the backward pass
    auto keep_xhat = std::make_shared<M>(std::move(xhat));
    auto keep_inv = std::make_shared<M>(std::move(inv));
    n->back = [x, gain, bias, keep_xhat, keep_inv](Node& self) {
      const M& xh = *keep_xhat;
      const Eigen::Index rows = xh.rows(), cols = xh.cols();
      for (Eigen::Index r = 0; r < rows; ++r) {
        auto dy = self.grad.row(r).array();
        gain->grad.row(0).array() += dy * xh.row(r).array();
        bias->grad.row(0).array() += dy;
        auto dxhat = dy * gain->value.row(0).array();
        const T mean_dxhat = dxhat.mean();
        const T mean_dxhat_xhat = (dxhat * xh.row(r).array()).mean();
        x->grad.row(r).array() +=
            (*keep_inv)(r, 0) * (dxhat - mean_dxhat - xh.row(r).array() * mean_dxhat_xhat);
      }
      (void)cols;
    };
    return n;
  }

  // Row-wise softmax. With `causal` set the matrix must be square and row i
  // distributes only over columns 0..i; masked entries are exactly zero.
  Node* softmax_rows(Node* a, bool causal = false) {
    const Eigen::Index rows = a->value.rows(), cols = a->value.cols();
    if (causal && rows != cols)
      throw state_error("softmax_rows: causal mask requires a square matrix");
    M y = M::Zero(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index n_allowed = causal ? r + 1 : cols;
      auto row = a->value.row(r).head(n_allowed).array();
      const T mx = row.maxCoeff();
      auto e = (row - mx).exp();
      y.row(r).head(n_allowed) = (e / e.sum()).matrix();
    }
    Node* n = make(std::move(y));
    n->back = [a](Node& self) {
      for (Eigen::Index r = 0; r < self.value.rows(); ++r) {
        auto yv = self.value.row(r).array();
        auto dy = self.grad.row(r).array();
        const T dot = (dy * yv).sum();
        a->grad.row(r).array() += yv * (dy - dot);
      }
    };
    return n;
  }

  // Inverted-dropout mask; used only on training paths.
  Node* dropout(Node* a, double rate, Rng& rng) {
    if (rate <= 0.0) return a;
    if (rate >= 1.0) throw config_error("dropout: rate must be below 1");
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    M mask(a->value.rows(), a->value.cols());
    for (Eigen::Index r = 0; r < mask.rows(); ++r)
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        mask(r, c) = rng.uniform() < rate ? static_cast<T>(0) : scale;
    Node* n = make(a->value.cwiseProduct(mask));
    auto keep = std::make_shared<M>(std::move(mask));
    n->back = [a, keep](Node& self) { a->grad += self.grad.cwiseProduct(*keep); };
    return n;
  }

  // ---- reductions and losses (all produce a 1 x 1 node) ----

  Node* sum_all(Node* a) {
    M out(1, 1);
    out(0, 0) = a->value.sum();
    Node* n = make(std::move(out));
    n->back = [a](Node& self) { a->grad.array() += self.grad(0, 0); };
    return n;
  }

  Node* mean_all(Node* a) {
    const T inv = static_cast<T>(1) / static_cast<T>(a->value.size());
    M out(1, 1);
    out(0, 0) = a->value.sum() * inv;
    Node* n = make(std::move(out));
    n->back = [a, inv](Node& self) { a->grad.array() += self.grad(0, 0) * inv; };
    return n;
  }

  // Mean negative log-softmax likelihood of `targets` over the rows where
  // `rows` is nonzero. Fused so the backward pass is softmax minus one-hot.
  Node* masked_cross_entropy(Node* logits, const std::vector<int>& targets,
                             const std::vector<char>& rows) {
    const Eigen::Index n_rows = logits->value.rows(), n_cols = logits->value.cols();
    if (static_cast<Eigen::Index>(targets.size()) != n_rows ||
        static_cast<Eigen::Index>(rows.size()) != n_rows)
      throw state_error("masked_cross_entropy: row count mismatch");
    long n_active = 0;
    for (char c : rows)
      if (c) ++n_active;
    if (n_active == 0) throw state_error("masked_cross_entropy: no active rows");

    auto probs = std::make_shared<M>(M::Zero(n_rows, n_cols));
    T loss = 0;
    for (Eigen::Index r = 0; r < n_rows; ++r) {
      if (!rows[static_cast<size_t>(r)]) continue;
      const int t = targets[static_cast<size_t>(r)];
      if (t < 0 || t >= n_cols)
        throw input_error("masked_cross_entropy: target out of range: " + std::to_string(t));
      auto row = logits->value.row(r).array();
      const T mx = row.maxCoeff();
      auto e = (row - mx).exp();
      const T z = e.sum();
      probs->row(r) = (e / z).matrix();
      loss -= std::log((*probs)(r, t));
    }
    const T inv = static_cast<T>(1) / static_cast<T>(n_active);
    M out(1, 1);
    out(0, 0) = loss * inv;
    Node* n = make(std::move(out));
    n->back = [logits, targets, rows, probs, inv](Node& self) {
      const T g = self.grad(0, 0) * inv;
      for (Eigen::Index r = 0; r < logits->value.rows(); ++r) {
        if (!rows[static_cast<size_t>(r)]) continue;
        logits->grad.row(r) += g * probs->row(r);
        logits->grad(r, targets[static_cast<size_t>(r)]) -= g;
      }
    };
    return n;
  }

  // Mean binary cross-entropy of a logits column against labels in [0,1],
  // computed in the numerically stable max(z,0) - z*y + log1p(exp(-|z|)) form.
  Node* bce_with_logits(Node* logits, const std::vector<double>& labels) {
    const Eigen::Index n_rows = logits->value.rows();
    if (logits->value.cols() != 1 || static_cast<Eigen::Index>(labels.size()) != n_rows)
      throw state_error("bce_with_logits: expects one logit column matching the labels");
    T loss = 0;
    for (Eigen::Index r = 0; r < n_rows; ++r) {
      const T z = logits->value(r, 0);
      const T y = static_cast<T>(labels[static_cast<size_t>(r)]);
      loss += std::max(z, static_cast<T>(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    const T inv = static_cast<T>(1) / static_cast<T>(n_rows);
    M out(1, 1);
    out(0, 0) = loss * inv;
    Node* n = make(std::move(out));
    n->back = [logits, labels, inv](Node& self) {
      const T g = self.grad(0, 0) * inv;
      for (Eigen::Index r = 0; r < logits->value.rows(); ++r) {
        const T z = logits->value(r, 0);
        const T s = static_cast<T>(1) / (static_cast<T>(1) + std::exp(-z));
        logits->grad(r, 0) += g * (s - static_cast<T>(labels[static_cast<size_t>(r)]));
      }
    };
    return n;
  }

  // ---- backward ----

  void backward(Node* loss) {
    if (nodes_.empty()) throw state_error("backward: no forward pass recorded");
    if (backward_run_) throw state_error("backward: tape already consumed");
    if (loss->value.rows() != 1 || loss->value.cols() != 1)
      throw state_error("backward: loss must be scalar");
    backward_run_ = true;
    loss->grad(0, 0) = static_cast<T>(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
      if (it->back) it->back(*it);
  }

  size_t size() const { return nodes_.size(); }

 private:
  Node* make(M value) {
    Node& n = nodes_.emplace_back();
    n.grad = M::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    return &n;
  }

  std::deque<Node> nodes_;  // creation order; deque keeps addresses stable
  bool backward_run_ = false;
};

}  // namespace detqe
