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

#include "survmamba/autodiff.hpp"

#include <algorithm>

namespace survmamba {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::shared_ptr<Node> new_node(Tensor value, bool requires_grad)
{
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

void require_rank2(const Var& x, const char* op)
{
  if (x.value().rank() != 2)
    fail(ErrorKind::Dimension, std::string(op) + ": expected a matrix, got " + shape_str(x.shape()));
}

// Sum of g over all entries, as a size-1 tensor (gradient of a broadcast scalar).
Tensor reduce_to_scalar(const Tensor& g) { return Tensor::scalar(g.storage().sum()); }

enum class Broadcast { None, Left, Right };

Broadcast broadcast_mode(const Var& a, const Var& b, const char* op)
{
  if (a.value().same_shape(b.value())) return Broadcast::None;
  if (a.size() == 1) return Broadcast::Left;
  if (b.size() == 1) return Broadcast::Right;
  fail(ErrorKind::Dimension, std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                                 shape_str(b.shape()) + " are not broadcast-compatible");
}

}  // namespace

Var parameter(Tensor value) { return Var(new_node(std::move(value), true)); }

Var constant(Tensor value) { return Var(new_node(std::move(value), false)); }

Tape* active_tape() noexcept { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

bool recording(std::initializer_list<const Var*> inputs)
{
  if (!g_active_tape) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Var* v) { return v->requires_grad(); });
}

Var make_result(Tensor value, std::initializer_list<const Var*> inputs, BackwardFn fn,
                const char* op_name)
{
  if (!value.all_finite())
    fail(ErrorKind::Numeric, std::string(op_name) + " produced a non-finite value");
  if (!recording(inputs)) return Var(new_node(std::move(value), false));
  auto node = new_node(std::move(value), true);
  node->backward = std::move(fn);
  g_active_tape->record(node);
  return Var(std::move(node));
}

void accumulate_grad(const Var& v, Tensor&& g)
{
  if (!v.requires_grad()) return;
  Node& n = *v.node();
  if (!g.same_shape(n.value))
    fail(ErrorKind::Contract, "gradient shape " + shape_str(g.shape()) + " does not match value " +
                                  shape_str(n.value.shape()));
  if (n.grad)
    n.grad->storage() += g.storage();
  else
    n.grad = std::move(g);
}

void accumulate_grad(const Var& v, const Tensor& g) { accumulate_grad(v, Tensor(g)); }

void backward(Tape& tape, const Var& loss)
{
  if (!loss.valid() || loss.size() != 1)
    fail(ErrorKind::Contract, "backward requires a scalar loss");
  if (tape.empty()) fail(ErrorKind::Contract, "backward on an empty tape");
  const auto& nodes = tape.nodes();
  auto it = std::find(nodes.begin(), nodes.end(), loss.shared());
  if (it == nodes.end()) fail(ErrorKind::Contract, "loss was not recorded on this tape");

  accumulate_grad(loss, Tensor::constant(loss.shape(), 1.0));
  for (auto rit = std::make_reverse_iterator(it + 1); rit != nodes.rend(); ++rit) {
    Node& n = **rit;
    if (!n.grad || !n.backward) continue;
    n.backward(*n.grad);
  }
}

///////////////////////////////////////////
// Linear algebra
///////////////////////////////////////////

Var matmul(const Var& a, const Var& b)
{
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows())
    fail(ErrorKind::Dimension, "matmul: inner dimensions of " + shape_str(a.shape()) + " and " +
                                   shape_str(b.shape()) + " disagree");
  Tensor out({a.rows(), b.cols()});
  out.matrix().noalias() = a.value().matrix() * b.value().matrix();
  return make_result(std::move(out), {&a, &b}, [a, b](const Tensor& g) {
    if (a.requires_grad()) {
      Tensor ga(a.shape());
      ga.matrix().noalias() = g.matrix() * b.value().matrix().transpose();
      accumulate_grad(a, std::move(ga));
    }
    if (b.requires_grad()) {
      Tensor gb(b.shape());
      gb.matrix().noalias() = a.value().matrix().transpose() * g.matrix();
      accumulate_grad(b, std::move(gb));
    }
  }, "matmul");
}

///////////////////////////////////////////
// Elementwise binary
///////////////////////////////////////////

Var add(const Var& a, const Var& b)
{
  const Broadcast mode = broadcast_mode(a, b, "add");
  Tensor out;
  switch (mode) {
    case Broadcast::None:
      out = a.value();
      out.storage() += b.value().storage();
      break;
    case Broadcast::Left:
      out = b.value();
      out.array() += a.value()[0];
      break;
    case Broadcast::Right:
      out = a.value();
      out.array() += b.value()[0];
      break;
  }
  return make_result(std::move(out), {&a, &b}, [a, b, mode](const Tensor& g) {
    accumulate_grad(a, mode == Broadcast::Left ? reduce_to_scalar(g) : g);
    accumulate_grad(b, mode == Broadcast::Right ? reduce_to_scalar(g) : g);
  }, "add");
}

Var sub(const Var& a, const Var& b) { return add(a, neg(b)); }

Var mul(const Var& a, const Var& b)
{
  const Broadcast mode = broadcast_mode(a, b, "mul");
  Tensor out;
  switch (mode) {
    case Broadcast::None:
      out = a.value();
      out.array() *= b.value().array();
      break;
    case Broadcast::Left:
      out = b.value();
      out.array() *= a.value()[0];
      break;
    case Broadcast::Right:
      out = a.value();
      out.array() *= b.value()[0];
      break;
  }
  return make_result(std::move(out), {&a, &b}, [a, b, mode](const Tensor& g) {
    if (a.requires_grad()) {
      if (mode == Broadcast::None) {
        Tensor ga = g;
        ga.array() *= b.value().array();
        accumulate_grad(a, std::move(ga));
      } else if (mode == Broadcast::Left) {
        accumulate_grad(a, Tensor::scalar((g.array() * b.value().array()).sum()));
      } else {
        Tensor ga = g;
        ga.array() *= b.value()[0];
        accumulate_grad(a, std::move(ga));
      }
    }
    if (b.requires_grad()) {
      if (mode == Broadcast::None) {
        Tensor gb = g;
        gb.array() *= a.value().array();
        accumulate_grad(b, std::move(gb));
      } else if (mode == Broadcast::Right) {
        accumulate_grad(b, Tensor::scalar((g.array() * a.value().array()).sum()));
      } else {
        Tensor gb = g;
        gb.array() *= a.value()[0];
        accumulate_grad(b, std::move(gb));
      }
    }
  }, "mul");
}

Var add_bias(const Var& x, const Var& bias)
{
  if (bias.value().rank() != 1 || bias.size() != x.cols())
    fail(ErrorKind::Dimension, "add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                                   shape_str(x.shape()));
  Tensor out = x.value();
  out.matrix().rowwise() += bias.value().matrix().row(0);
  return make_result(std::move(out), {&x, &bias}, [x, bias](const Tensor& g) {
    accumulate_grad(x, g);
    if (bias.requires_grad()) {
      Tensor gb(bias.shape());
      gb.matrix() = g.matrix().colwise().sum();
      accumulate_grad(bias, std::move(gb));
    }
  }, "add_bias");
}

Var scale(const Var& x, double factor)
{
  Tensor out = x.value();
  out.storage() *= factor;
  return make_result(std::move(out), {&x}, [x, factor](const Tensor& g) {
    Tensor gx = g;
    gx.storage() *= factor;
    accumulate_grad(x, std::move(gx));
  }, "scale");
}

Var operator+(const Var& a, const Var& b) { return add(a, b); }
Var operator-(const Var& a, const Var& b) { return sub(a, b); }
Var operator*(const Var& a, const Var& b) { return mul(a, b); }

///////////////////////////////////////////
// Elementwise unary
///////////////////////////////////////////

Var unary(UnaryOp op, const Var& x)
{
  const Tensor& v = x.value();
  Tensor out(v.shape());
  const Index n = v.size();
  const char* name = "unary";
  switch (op) {
    case UnaryOp::Silu:
      name = "silu";
      for (Index i = 0; i < n; ++i) out[i] = silu_scalar(v[i]);
      break;
    case UnaryOp::Sigmoid:
      name = "sigmoid";
      for (Index i = 0; i < n; ++i) out[i] = sigmoid_scalar(v[i]);
      break;
    case UnaryOp::Softplus:
      name = "softplus";
      for (Index i = 0; i < n; ++i) out[i] = softplus_scalar(v[i]);
      break;
    case UnaryOp::Log:
      name = "log";
      if ((v.array() <= 0.0).any()) fail(ErrorKind::Domain, "log of a non-positive value");
      out.array() = v.array().log();
      break;
    case UnaryOp::Exp:
      name = "exp";
      out.array() = v.array().exp();
      break;
    case UnaryOp::Neg:
      name = "neg";
      out.array() = -v.array();
      break;
  }

  // d/dx expressed from input and output values.
  return make_result(std::move(out), {&x}, [x, op](const Tensor& g) {
    const Tensor& v = x.value();
    Tensor gx = g;
    const Index n = v.size();
    switch (op) {
      case UnaryOp::Silu:
        for (Index i = 0; i < n; ++i) {
          const double s = sigmoid_scalar(v[i]);
          gx[i] *= s * (1.0 + v[i] * (1.0 - s));
        }
        break;
      case UnaryOp::Sigmoid:
        for (Index i = 0; i < n; ++i) {
          const double s = sigmoid_scalar(v[i]);
          gx[i] *= s * (1.0 - s);
        }
        break;
      case UnaryOp::Softplus:
        for (Index i = 0; i < n; ++i) gx[i] *= sigmoid_scalar(v[i]);
        break;
      case UnaryOp::Log:
        gx.array() /= v.array();
        break;
      case UnaryOp::Exp:
        gx.array() *= v.array().exp();
        break;
      case UnaryOp::Neg:
        gx.array() = -gx.array();
        break;
    }
    accumulate_grad(x, std::move(gx));
  }, name);
}

Var clamp(const Var& x, double lo, double hi)
{
  if (!(lo < hi)) fail(ErrorKind::Domain, "clamp: empty interval");
  Tensor out = x.value();
  out.array() = out.array().max(lo).min(hi);
  return make_result(std::move(out), {&x}, [x, lo, hi](const Tensor& g) {
    Tensor gx = g;
    const Tensor& v = x.value();
    for (Index i = 0; i < v.size(); ++i)
      if (v[i] <= lo || v[i] >= hi) gx[i] = 0.0;
    accumulate_grad(x, std::move(gx));
  }, "clamp");
}

Var sum(const Var& x)
{
  return make_result(Tensor::scalar(x.value().storage().sum()), {&x}, [x](const Tensor& g) {
    accumulate_grad(x, Tensor::constant(x.shape(), g[0]));
  }, "sum");
}

///////////////////////////////////////////
// Normalization, convolution, pooling
///////////////////////////////////////////

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps)
{
  require_rank2(x, "layer_norm");
  const Index rows = x.rows();
  const Index d = x.cols();
  if (gamma.size() != d || beta.size() != d)
    fail(ErrorKind::Dimension, "layer_norm: affine parameters must have width " + std::to_string(d));
  if (!(eps > 0)) fail(ErrorKind::Domain, "layer_norm: eps must be positive");

  RowMatrix<double> xhat(rows, d);
  Eigen::VectorXd inv_std(rows);
  const auto xm = x.value().matrix();
  for (Index r = 0; r < rows; ++r) {
    const double mean = xm.row(r).mean();
    const double var = (xm.row(r).array() - mean).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xm.row(r).array() - mean) * inv_std[r];
  }
  Tensor out(x.shape());
  out.matrix() = (xhat.array().rowwise() * gamma.value().matrix().row(0).array()).rowwise() +
                 beta.value().matrix().row(0).array();

  const bool rec = recording({&x, &gamma, &beta});
  return make_result(std::move(out), {&x, &gamma, &beta},
                     [x, gamma, beta, xhat = rec ? std::move(xhat) : RowMatrix<double>(),
                      inv_std](const Tensor& g) {
    const auto gm = g.matrix();
    if (gamma.requires_grad()) {
      Tensor gg(gamma.shape());
      gg.matrix() = (gm.array() * xhat.array()).colwise().sum();
      accumulate_grad(gamma, std::move(gg));
    }
    if (beta.requires_grad()) {
      Tensor gb(beta.shape());
      gb.matrix() = gm.colwise().sum();
      accumulate_grad(beta, std::move(gb));
    }
    if (x.requires_grad()) {
      const Index d = xhat.cols();
      RowMatrix<double> gxhat = gm.array().rowwise() * gamma.value().matrix().row(0).array();
      Tensor gx(x.shape());
      for (Index r = 0; r < xhat.rows(); ++r) {
        const double mean_g = gxhat.row(r).mean();
        const double mean_gx = (gxhat.row(r).array() * xhat.row(r).array()).sum() / double(d);
        gx.matrix().row(r) =
            inv_std[r] * (gxhat.row(r).array() - mean_g - xhat.row(r).array() * mean_gx);
      }
      accumulate_grad(x, std::move(gx));
    }
  }, "layer_norm");
}

Var depthwise_conv1d(const Var& x, const Var& kernel)
{
  require_rank2(x, "depthwise_conv1d");
  require_rank2(kernel, "depthwise_conv1d");
  if (kernel.cols() != x.cols())
    fail(ErrorKind::Dimension, "depthwise_conv1d: kernel has " + std::to_string(kernel.cols()) +
                                   " channels, input has " + std::to_string(x.cols()));
  const Index len = x.rows();
  const Index width = kernel.rows();
  const auto xm = x.value().matrix();
  const auto km = kernel.value().matrix();

  Tensor out(x.shape());
  auto om = out.matrix();
  for (Index t = 0; t < len; ++t) {
    for (Index j = 0; j < width; ++j) {
      const Index src = t - (width - 1) + j;
      if (src < 0) continue;
      om.row(t).array() += km.row(j).array() * xm.row(src).array();
    }
  }
  return make_result(std::move(out), {&x, &kernel}, [x, kernel](const Tensor& g) {
    const Index len = x.rows();
    const Index width = kernel.rows();
    const auto gm = g.matrix();
    const auto xm = x.value().matrix();
    const auto km = kernel.value().matrix();
    Tensor gx(x.shape());
    Tensor gk(kernel.shape());
    auto gxm = gx.matrix();
    auto gkm = gk.matrix();
    for (Index t = 0; t < len; ++t) {
      for (Index j = 0; j < width; ++j) {
        const Index src = t - (width - 1) + j;
        if (src < 0) continue;
        gxm.row(src).array() += km.row(j).array() * gm.row(t).array();
        gkm.row(j).array() += xm.row(src).array() * gm.row(t).array();
      }
    }
    accumulate_grad(x, std::move(gx));
    accumulate_grad(kernel, std::move(gk));
  }, "depthwise_conv1d");
}

Var max_pool_sequence(const Var& x)
{
  require_rank2(x, "max_pool_sequence");
  const auto xm = x.value().matrix();
  const Index d = x.cols();
  Tensor out({d});
  std::vector<Index> argmax(static_cast<std::size_t>(d), 0);
  for (Index c = 0; c < d; ++c) {
    Index best = 0;
    for (Index r = 1; r < xm.rows(); ++r)
      if (xm(r, c) > xm(best, c)) best = r;
    argmax[static_cast<std::size_t>(c)] = best;
    out[c] = xm(best, c);
  }
  return make_result(std::move(out), {&x}, [x, argmax = std::move(argmax)](const Tensor& g) {
    Tensor gx(x.shape());
    for (Index c = 0; c < x.cols(); ++c) gx(argmax[static_cast<std::size_t>(c)], c) = g[c];
    accumulate_grad(x, std::move(gx));
  }, "max_pool_sequence");
}

///////////////////////////////////////////
// Row manipulation
///////////////////////////////////////////

Var reshape(const Var& x, Shape shape)
{
  if (shape_size(shape) != x.size())
    fail(ErrorKind::Dimension, "reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {&x}, [x](const Tensor& g) {
    accumulate_grad(x, g.reshaped(x.shape()));
  }, "reshape");
}

Var concat_rows(const Var& top, const Var& bottom)
{
  require_rank2(top, "concat_rows");
  require_rank2(bottom, "concat_rows");
  if (top.cols() != bottom.cols())
    fail(ErrorKind::Dimension, "concat_rows: widths " + std::to_string(top.cols()) + " and " +
                                   std::to_string(bottom.cols()) + " differ");
  const Index n_top = top.rows();
  Tensor out({n_top + bottom.rows(), top.cols()});
  out.matrix().topRows(n_top) = top.value().matrix();
  out.matrix().bottomRows(bottom.rows()) = bottom.value().matrix();
  return make_result(std::move(out), {&top, &bottom}, [top, bottom, n_top](const Tensor& g) {
    if (top.requires_grad())
      accumulate_grad(top, Tensor::from_matrix(g.matrix().topRows(n_top)));
    if (bottom.requires_grad())
      accumulate_grad(bottom, Tensor::from_matrix(g.matrix().bottomRows(bottom.rows())));
  }, "concat_rows");
}

Var slice_rows(const Var& x, Index begin, Index count)
{
  require_rank2(x, "slice_rows");
  if (begin < 0 || count <= 0 || begin + count > x.rows())
    fail(ErrorKind::Index, "slice_rows: rows [" + std::to_string(begin) + ", " +
                               std::to_string(begin + count) + ") out of " + std::to_string(x.rows()));
  Tensor out = Tensor::from_matrix(x.value().matrix().middleRows(begin, count));
  return make_result(std::move(out), {&x}, [x, begin, count](const Tensor& g) {
    Tensor gx(x.shape());
    gx.matrix().middleRows(begin, count) = g.matrix();
    accumulate_grad(x, std::move(gx));
  }, "slice_rows");
}

Var reverse_rows(const Var& x)
{
  require_rank2(x, "reverse_rows");
  Tensor out = Tensor::from_matrix(x.value().matrix().colwise().reverse());
  return make_result(std::move(out), {&x}, [x](const Tensor& g) {
    accumulate_grad(x, Tensor::from_matrix(g.matrix().colwise().reverse()));
  }, "reverse_rows");
}

Var repeat_rows(const Var& row, Index count)
{
  if (row.rows() != 1) fail(ErrorKind::Dimension, "repeat_rows: expected a single row");
  if (count <= 0) fail(ErrorKind::Domain, "repeat_rows: count must be positive");
  Tensor out({count, row.cols()});
  out.matrix().rowwise() = row.value().matrix().row(0);
  return make_result(std::move(out), {&row}, [row](const Tensor& g) {
    Tensor gr(row.shape());
    gr.matrix() = g.matrix().colwise().sum();
    accumulate_grad(row, std::move(gr));
  }, "repeat_rows");
}

}  // namespace survmamba
