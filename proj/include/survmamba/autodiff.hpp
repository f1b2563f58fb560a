/*
 * Copyright 2026 The survmamba Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <vector>

#include "survmamba/tensor.hpp"

namespace survmamba {

// Reverse-mode automatic differentiation over Tensor values.
//
// Operations record onto the thread's active Tape only when a tape is active
// and at least one input requires a gradient. Without an active tape every
// operation is a plain forward evaluation and intermediates are released as
// soon as their Var handles go out of scope.

using BackwardFn = std::function<void(const Tensor& grad_output)>;

struct Node {
  Tensor value;
  std::optional<Tensor> grad;
  bool requires_grad = false;
  BackwardFn backward;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  Index size() const { return node_->value.size(); }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && node_->grad.has_value(); }

  // Zeros of the value's shape when nothing has been accumulated yet.
  Tensor grad() const { return has_grad() ? *node_->grad : Tensor::zeros(shape()); }
  void zero_grad() { node_->grad.reset(); }

  bool valid() const noexcept { return static_cast<bool>(node_); }
  Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& shared() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Trainable leaf.
Var parameter(Tensor value);
// Untracked leaf.
Var constant(Tensor value);

class Tape {
 public:
  void record(std::shared_ptr<Node> node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  const std::vector<std::shared_ptr<Node>>& nodes() const noexcept { return nodes_; }
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
};

Tape* active_tape() noexcept;

// Makes `tape` the active tape of the calling thread for the scope lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording for the scope lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

void backward(Tape& tape, const Var& loss);

///////////////////////////////////////////
// Extension points for fused operations
///////////////////////////////////////////

// True when an op over these inputs would be recorded.
bool recording(std::initializer_list<const Var*> inputs);

// Wraps an op result; records it with `fn` when recording(inputs) holds.
// Checks the value for NaN/Inf first.
Var make_result(Tensor value, std::initializer_list<const Var*> inputs, BackwardFn fn,
                const char* op_name);

// Adds `g` into v's gradient accumulator; no-op for untracked values.
void accumulate_grad(const Var& v, const Tensor& g);
void accumulate_grad(const Var& v, Tensor&& g);

///////////////////////////////////////////
// Operations
///////////////////////////////////////////

Var matmul(const Var& a, const Var& b);

// Binary elementwise ops accept identical shapes or a size-1 operand.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

// x[M x N] + bias[N] broadcast over rows.
Var add_bias(const Var& x, const Var& bias);
Var scale(const Var& x, double factor);

enum class UnaryOp { Silu, Sigmoid, Softplus, Log, Exp, Neg };
Var unary(UnaryOp op, const Var& x);

inline Var silu(const Var& x) { return unary(UnaryOp::Silu, x); }
inline Var sigmoid(const Var& x) { return unary(UnaryOp::Sigmoid, x); }
inline Var softplus(const Var& x) { return unary(UnaryOp::Softplus, x); }
inline Var log(const Var& x) { return unary(UnaryOp::Log, x); }
inline Var exp(const Var& x) { return unary(UnaryOp::Exp, x); }
inline Var neg(const Var& x) { return unary(UnaryOp::Neg, x); }

// Gradient passes only where lo < x < hi.
Var clamp(const Var& x, double lo, double hi);

Var sum(const Var& x);

inline constexpr double kLayerNormEps = 1e-5;

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = kLayerNormEps);

// Causal depthwise convolution: y[t, d] = sum_j kernel[j, d] * x[t - (W-1) + j, d],
// zero-padded on the left.
Var depthwise_conv1d(const Var& x, const Var& kernel);

// Per-column maximum over rows; ties route the gradient to the first row.
Var max_pool_sequence(const Var& x);

Var reshape(const Var& x, Shape shape);
Var concat_rows(const Var& top, const Var& bottom);
Var slice_rows(const Var& x, Index begin, Index count);
Var reverse_rows(const Var& x);
// Stacks a [N] (or [1 x N]) row `count` times into [count x N].
Var repeat_rows(const Var& row, Index count);

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);

///////////////////////////////////////////
// Scalar helpers shared by ops and tests
///////////////////////////////////////////

inline double sigmoid_scalar(double x)
{
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus_scalar(double x)
{
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double silu_scalar(double x) { return x * sigmoid_scalar(x); }

}  // namespace survmamba
