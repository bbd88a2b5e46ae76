// Copyright 2026 The lipger Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LIPGER_AUTOGRAD_HPP_
#define LIPGER_AUTOGRAD_HPP_

// Reverse-mode automatic differentiation over dense double tensors.
//
// A Tape records every operation of one forward pass. Nodes are stored in
// creation order, so a reverse sweep is a valid topological order. Leaves
// bound to a Parameter accumulate into Parameter::grad on backward().
// Gradients are only propagated into nodes that (transitively) depend on a
// Parameter whose requires_grad flag is set; frozen weights cost nothing.

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lipger {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0);
  Tensor(std::vector<int> s, std::vector<double> d);

  std::size_t numel() const { return data.size(); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(shape.size()); }
  // 2-D accessors; rank must be 2.
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }

  std::string shape_str() const;
  bool operator==(const Tensor&) const = default;
};

std::size_t shape_numel(const std::vector<int>& shape);

class Parameter {
 public:
  Parameter() = default;
  explicit Parameter(Tensor init) : value(std::move(init)), grad(value.shape) {}

  void zero_grad();

  Tensor value;
  Tensor grad;
  bool requires_grad = false;
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  const std::vector<int>& shape() const { return value().shape; }
};

class Tape {
 public:
  Var constant(Tensor value);
  Var param(Parameter& p);

  // Seeds d(loss)/d(loss) = 1; loss must hold exactly one element.
  void backward(Var loss);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  // Gradient buffer of a node, allocated on first use.
  Tensor& grad(int id);
  std::size_t size() const { return nodes_.size(); }

  using BackwardFn = std::function<void(Tape&, int self)>;
  Var push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---- 2-D ops ---------------------------------------------------------------

Var matmul(Var a, Var b);                  // [n,k] x [k,m]
Var transpose(Var a);                      // [n,m] -> [m,n]
Var add(Var a, Var b);                     // same shape, any rank
Var sub(Var a, Var b);
Var mul(Var a, Var b);                     // elementwise
Var add_row(Var a, Var bias);              // [n,m] + [m]
Var scale(Var a, double s);
Var scale_by(Var a, Var s);                // s holds one element
Var gelu(Var a);
Var silu(Var a);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var embedding(Var table, std::span<const int> ids);
Var concat_rows(Var a, Var b);
Var slice_rows(Var a, int start, int count);
// Multi-head scaled dot-product attention. q:[n,c], k,v:[m,c]. With causal
// set, n == m and row i attends to keys 0..i.
Var attention(Var q, Var k, Var v, int heads, bool causal);
// Sum of -log softmax(logits)[target] over masked rows, times `scale`.
Var cross_entropy(Var logits, std::span<const int> targets, std::span<const char> mask,
                  double scale);
Var sum(Var a);
Var reshape(Var a, std::vector<int> shape);  // same element count
Var dot_const(Var a, const Tensor& w);     // sum(a * w), w constant

// ---- [C,T,H,W] feature-map ops ---------------------------------------------

struct Conv3dOpts {
  int stride_t = 1, stride_h = 1, stride_w = 1;
  int pad_t = 0, pad_h = 0, pad_w = 0;  // zero padding
  int dil_t = 1;
  int groups = 1;
};
// x:[Cin,T,H,W], w:[Cout,Cin/groups,kt,kh,kw], bias:[Cout].
Var conv3d(Var x, Var w, Var bias, const Conv3dOpts& o);
Var pad_time_replicate_left(Var x, int n);
Var channel_slice(Var x, int start, int count);
Var channel_concat(Var a, Var b);
Var channel_shuffle(Var x, int groups);
Var spatial_mean(Var x);                  // [C,T,H,W] -> [C,T]

}  // namespace lipger

#endif  // LIPGER_AUTOGRAD_HPP_
