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

#include "lipger/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>
#include <utility>

#include "lipger/common.hpp"

namespace lipger {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

namespace {

MapMat as_mat(Tensor& t) { return MapMat(t.data.data(), t.rows(), t.cols()); }
CMapMat as_mat(const Tensor& t) { return CMapMat(t.data.data(), t.rows(), t.cols()); }

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank)
    throw PreconditionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                            ", got " + t.shape_str());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape)
    throw PreconditionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                            b.shape_str());
}

Tape& tape_of(Var a) {
  LIPGER_REQUIRE(a.tape != nullptr, "autograd: unbound Var");
  return *a.tape;
}

}  // namespace

// ---- Tensor / Parameter ----------------------------------------------------

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    LIPGER_REQUIRE(d >= 0, "Tensor: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)), data(shape_numel(shape), fill) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  LIPGER_REQUIRE(data.size() == shape_numel(shape), "Tensor: data size does not match shape");
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

void Parameter::zero_grad() {
  if (grad.shape != value.shape) grad = Tensor(value.shape);
  std::fill(grad.data.begin(), grad.data.end(), 0.0);
}

// ---- Tape ------------------------------------------------------------------

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = p.requires_grad;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) {
    LIPGER_REQUIRE(v.tape == this, "autograd: mixing tapes");
    n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(v.id)].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.data.size() != n.value.data.size()) n.grad = Tensor(n.value.shape);
  return n.grad;
}

void Tape::backward(Var loss) {
  LIPGER_REQUIRE(loss.tape == this, "Tape::backward: foreign Var");
  LIPGER_REQUIRE(value(loss.id).numel() == 1, "Tape::backward: loss must be a scalar");
  if (!requires_grad(loss.id)) return;
  grad(loss.id).data[0] += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.data.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      Parameter& p = *n.param;
      if (p.grad.shape != p.value.shape) p.grad = Tensor(p.value.shape);
      for (std::size_t j = 0; j < p.grad.data.size(); ++j) p.grad.data[j] += n.grad.data[j];
    }
  }
}

// ---- 2-D ops ---------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank(A, 2, "matmul");
  require_rank(B, 2, "matmul");
  if (A.cols() != B.rows())
    throw PreconditionError("matmul: inner dimensions differ " + A.shape_str() + " x " +
                            B.shape_str());
  Tensor out({A.rows(), B.cols()});
  as_mat(out).noalias() = as_mat(A) * as_mat(B);
  return t.push(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    if (tp.requires_grad(a.id)) as_mat(tp.grad(a.id)).noalias() += as_mat(G) * as_mat(tp.value(b.id)).transpose();
    if (tp.requires_grad(b.id)) as_mat(tp.grad(b.id)).noalias() += as_mat(tp.value(a.id)).transpose() * as_mat(G);
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  require_rank(A, 2, "transpose");
  Tensor out({A.cols(), A.rows()});
  as_mat(out) = as_mat(A).transpose();
  return tape_of(a).push(std::move(out), {a}, [a](Tape& tp, int self) {
    as_mat(tp.grad(a.id)) += as_mat(tp.grad(self)).transpose();
  });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_same_shape(A, B, "add");
  Tensor out = A;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
  return tape_of(a).push(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    for (Var v : {a, b}) {
      if (!tp.requires_grad(v.id)) continue;
      Tensor& g = tp.grad(v.id);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += G.data[i];
    }
  });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_same_shape(A, B, "mul");
  Tensor out = A;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
  return tape_of(a).push(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    if (tp.requires_grad(a.id)) {
      Tensor& g = tp.grad(a.id);
      const Tensor& B = tp.value(b.id);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += G.data[i] * B.data[i];
    }
    if (tp.requires_grad(b.id)) {
      Tensor& g = tp.grad(b.id);
      const Tensor& A = tp.value(a.id);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += G.data[i] * A.data[i];
    }
  });
}

Var add_row(Var a, Var bias) {
  const Tensor& A = a.value();
  const Tensor& b = bias.value();
  require_rank(A, 2, "add_row");
  LIPGER_REQUIRE(b.numel() == static_cast<std::size_t>(A.cols()), "add_row: bias width mismatch");
  Tensor out = A;
  for (int r = 0; r < A.rows(); ++r)
    for (int c = 0; c < A.cols(); ++c) out.at(r, c) += b.data[static_cast<std::size_t>(c)];
  return tape_of(a).push(std::move(out), {a, bias}, [a, bias](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    if (tp.requires_grad(a.id)) {
      Tensor& g = tp.grad(a.id);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += G.data[i];
    }
    if (tp.requires_grad(bias.id)) {
      Tensor& g = tp.grad(bias.id);
      const int cols = G.cols();
      for (int r = 0; r < G.rows(); ++r)
        for (int c = 0; c < cols; ++c) g.data[static_cast<std::size_t>(c)] += G.at(r, c);
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& x : out.data) x *= s;
  return tape_of(a).push(std::move(out), {a}, [a, s](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& g = tp.grad(a.id);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += s * G.data[i];
  });
}

Var scale_by(Var a, Var s) {
  LIPGER_REQUIRE(s.value().numel() == 1, "scale_by: scale must hold one element");
  const double k = s.value().data[0];
  Tensor out = a.value();
  for (double& x : out.data) x *= k;
  return tape_of(a).push(std::move(out), {a, s}, [a, s](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    const double k = tp.value(s.id).data[0];
    if (tp.requires_grad(a.id)) {
      Tensor& g = tp.grad(a.id);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += k * G.data[i];
    }
    if (tp.requires_grad(s.id)) {
      const Tensor& A = tp.value(a.id);
      double acc = 0.0;
      for (std::size_t i = 0; i < A.data.size(); ++i) acc += A.data[i] * G.data[i];
      tp.grad(s.id).data[0] += acc;
    }
  });
}

Var gelu(Var a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  Tensor out = a.value();
  for (double& x : out.data) {
    const double u = kC * (x + 0.044715 * x * x * x);
    x = 0.5 * x * (1.0 + std::tanh(u));
  }
  return tape_of(a).push(std::move(out), {a}, [a](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    const Tensor& X = tp.value(a.id);
    Tensor& g = tp.grad(a.id);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const double x = X.data[i];
      const double u = kC * (x + 0.044715 * x * x * x);
      const double th = std::tanh(u);
      const double du = kC * (1.0 + 3.0 * 0.044715 * x * x);
      g.data[i] += G.data[i] * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du);
    }
  });
}

Var silu(Var a) {
  Tensor out = a.value();
  for (double& x : out.data) x = x / (1.0 + std::exp(-x));
  return tape_of(a).push(std::move(out), {a}, [a](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    const Tensor& X = tp.value(a.id);
    Tensor& g = tp.grad(a.id);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const double sg = 1.0 / (1.0 + std::exp(-X.data[i]));
      g.data[i] += G.data[i] * sg * (1.0 + X.data[i] * (1.0 - sg));
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = x.value();
  require_rank(X, 2, "layer_norm");
  const int n = X.rows();
  const int c = X.cols();
  LIPGER_REQUIRE(gain.value().numel() == static_cast<std::size_t>(c) &&
                     bias.value().numel() == static_cast<std::size_t>(c),
                 "layer_norm: gain/bias width mismatch");
  Tensor out({n, c});
  auto xhat = std::make_shared<Tensor>(std::vector<int>{n, c});
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
  const Tensor& g = gain.value();
  const Tensor& b = bias.value();
  for (int r = 0; r < n; ++r) {
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += X.at(r, j);
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (X.at(r, j) - mean) * (X.at(r, j) - mean);
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = is;
    for (int j = 0; j < c; ++j) {
      const double h = (X.at(r, j) - mean) * is;
      xhat->at(r, j) = h;
      out.at(r, j) = h * g.data[static_cast<std::size_t>(j)] + b.data[static_cast<std::size_t>(j)];
    }
  }
  return tape_of(x).push(std::move(out), {x, gain, bias},
                         [x, gain, bias, xhat, inv_std](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    const int n = G.rows();
    const int c = G.cols();
    const Tensor& gv = tp.value(gain.id);
    if (tp.requires_grad(gain.id)) {
      Tensor& gg = tp.grad(gain.id);
      for (int r = 0; r < n; ++r)
        for (int j = 0; j < c; ++j) gg.data[static_cast<std::size_t>(j)] += G.at(r, j) * xhat->at(r, j);
    }
    if (tp.requires_grad(bias.id)) {
      Tensor& gb = tp.grad(bias.id);
      for (int r = 0; r < n; ++r)
        for (int j = 0; j < c; ++j) gb.data[static_cast<std::size_t>(j)] += G.at(r, j);
    }
    if (tp.requires_grad(x.id)) {
      Tensor& gx = tp.grad(x.id);
      std::vector<double> dh(static_cast<std::size_t>(c));
      for (int r = 0; r < n; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < c; ++j) {
          dh[static_cast<std::size_t>(j)] = G.at(r, j) * gv.data[static_cast<std::size_t>(j)];
          m1 += dh[static_cast<std::size_t>(j)];
          m2 += dh[static_cast<std::size_t>(j)] * xhat->at(r, j);
        }
        m1 /= c;
        m2 /= c;
        const double is = (*inv_std)[static_cast<std::size_t>(r)];
        for (int j = 0; j < c; ++j)
          gx.at(r, j) += is * (dh[static_cast<std::size_t>(j)] - m1 - xhat->at(r, j) * m2);
      }
    }
  });
}

Var embedding(Var table, std::span<const int> ids) {
  const Tensor& W = table.value();
  require_rank(W, 2, "embedding");
  const int c = W.cols();
  Tensor out({static_cast<int>(ids.size()), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || id >= W.rows())
      throw PreconditionError("embedding: id " + std::to_string(id) + " out of range [0, " +
                              std::to_string(W.rows()) + ")");
    std::copy_n(W.data.begin() + static_cast<std::ptrdiff_t>(id) * c, c,
                out.data.begin() + static_cast<std::ptrdiff_t>(i) * c);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return tape_of(table).push(std::move(out), {table}, [table, idv](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& g = tp.grad(table.id);
    const int c = G.cols();
    for (std::size_t i = 0; i < idv.size(); ++i)
      for (int j = 0; j < c; ++j) g.at(idv[i], j) += G.at(static_cast<int>(i), j);
  });
}

Var concat_rows(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank(A, 2, "concat_rows");
  require_rank(B, 2, "concat_rows");
  if (A.cols() != B.cols())
    throw PreconditionError("concat_rows: width mismatch " + A.shape_str() + " vs " + B.shape_str());
  Tensor out({A.rows() + B.rows(), A.cols()});
  std::copy(A.data.begin(), A.data.end(), out.data.begin());
  std::copy(B.data.begin(), B.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(A.numel()));
  return tape_of(a).push(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    const std::size_t na = tp.value(a.id).numel();
    if (tp.requires_grad(a.id)) {
      Tensor& g = tp.grad(a.id);
      for (std::size_t i = 0; i < na; ++i) g.data[i] += G.data[i];
    }
    if (tp.requires_grad(b.id)) {
      Tensor& g = tp.grad(b.id);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += G.data[na + i];
    }
  });
}

Var slice_rows(Var a, int start, int count) {
  const Tensor& A = a.value();
  require_rank(A, 2, "slice_rows");
  LIPGER_REQUIRE(start >= 0 && count >= 0 && start + count <= A.rows(), "slice_rows: out of range");
  const int c = A.cols();
  Tensor out({count, c});
  std::copy_n(A.data.begin() + static_cast<std::ptrdiff_t>(start) * c,
              static_cast<std::ptrdiff_t>(count) * c, out.data.begin());
  return tape_of(a).push(std::move(out), {a}, [a, start](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& g = tp.grad(a.id);
    const std::size_t off = static_cast<std::size_t>(start) * static_cast<std::size_t>(G.cols());
    for (std::size_t i = 0; i < G.data.size(); ++i) g.data[off + i] += G.data[i];
  });
}

Var attention(Var q, Var k, Var v, int heads, bool causal) {
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  require_rank(Q, 2, "attention");
  require_rank(K, 2, "attention");
  require_rank(V, 2, "attention");
  const int n = Q.rows();
  const int m = K.rows();
  const int c = Q.cols();
  LIPGER_REQUIRE(K.cols() == c && V.cols() == c && V.rows() == m, "attention: q/k/v shape mismatch");
  LIPGER_REQUIRE(heads > 0 && c % heads == 0, "attention: width not divisible by head count");
  LIPGER_REQUIRE(!causal || n == m, "attention: causal mode needs equal query/key lengths");
  const int hd = c / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(hd));

  // probs[h] is n x m, row-major.
  auto probs = std::make_shared<std::vector<RowMat>>(static_cast<std::size_t>(heads));
  Tensor out({n, c});
  CMapMat Qm = as_mat(Q), Km = as_mat(K), Vm = as_mat(V);
  MapMat Om = as_mat(out);
  for (int h = 0; h < heads; ++h) {
    RowMat S = (Qm.middleCols(h * hd, hd) * Km.middleCols(h * hd, hd).transpose()) * inv;
    for (int i = 0; i < n; ++i) {
      const int lim = causal ? i + 1 : m;
      double mx = -INFINITY;
      for (int j = 0; j < lim; ++j) mx = std::max(mx, S(i, j));
      double z = 0.0;
      for (int j = 0; j < lim; ++j) {
        S(i, j) = std::exp(S(i, j) - mx);
        z += S(i, j);
      }
      for (int j = 0; j < lim; ++j) S(i, j) /= z;
      for (int j = lim; j < m; ++j) S(i, j) = 0.0;
    }
    Om.middleCols(h * hd, hd).noalias() = S * Vm.middleCols(h * hd, hd);
    (*probs)[static_cast<std::size_t>(h)] = std::move(S);
  }
  return tape_of(q).push(std::move(out), {q, k, v}, [q, k, v, heads, hd, inv, probs](Tape& tp, int self) {
    CMapMat G = as_mat(std::as_const(tp.grad(self)));
    CMapMat Qm = as_mat(tp.value(q.id)), Km = as_mat(tp.value(k.id)), Vm = as_mat(tp.value(v.id));
    const bool gq = tp.requires_grad(q.id), gk = tp.requires_grad(k.id), gv = tp.requires_grad(v.id);
    for (int h = 0; h < heads; ++h) {
      const RowMat& P = (*probs)[static_cast<std::size_t>(h)];
      auto Gh = G.middleCols(h * hd, hd);
      if (gv) as_mat(tp.grad(v.id)).middleCols(h * hd, hd).noalias() += P.transpose() * Gh;
      if (!gq && !gk) continue;
      RowMat dP = Gh * Vm.middleCols(h * hd, hd).transpose();
      // softmax backward: dS = P .* (dP - rowsum(dP .* P))
      Eigen::VectorXd rs = (dP.array() * P.array()).rowwise().sum();
      RowMat dS = (P.array() * (dP.array().colwise() - rs.array())).matrix() * inv;
      if (gq) as_mat(tp.grad(q.id)).middleCols(h * hd, hd).noalias() += dS * Km.middleCols(h * hd, hd);
      if (gk) as_mat(tp.grad(k.id)).middleCols(h * hd, hd).noalias() += dS.transpose() * Qm.middleCols(h * hd, hd);
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> targets, std::span<const char> mask, double scale_by_value) {
  const Tensor& L = logits.value();
  require_rank(L, 2, "cross_entropy");
  const int n = L.rows();
  const int vsz = L.cols();
  LIPGER_REQUIRE(targets.size() == static_cast<std::size_t>(n) && mask.size() == targets.size(),
                 "cross_entropy: targets/mask length must equal logit rows");
  auto probs = std::make_shared<Tensor>(std::vector<int>{n, vsz});
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    if (!mask[static_cast<std::size_t>(r)]) continue;
    const int t = targets[static_cast<std::size_t>(r)];
    LIPGER_REQUIRE(t >= 0 && t < vsz, "cross_entropy: target id out of range");
    double mx = -INFINITY;
    for (int j = 0; j < vsz; ++j) mx = std::max(mx, L.at(r, j));
    double z = 0.0;
    for (int j = 0; j < vsz; ++j) z += std::exp(L.at(r, j) - mx);
    const double lz = mx + std::log(z);
    for (int j = 0; j < vsz; ++j) probs->at(r, j) = std::exp(L.at(r, j) - lz);
    total += lz - L.at(r, t);
  }
  std::vector<int> tv(targets.begin(), targets.end());
  std::vector<char> mv(mask.begin(), mask.end());
  Tensor out({1}, {total * scale_by_value});
  return tape_of(logits).push(std::move(out), {logits},
                              [logits, tv, mv, probs, scale_by_value](Tape& tp, int self) {
    const double go = tp.grad(self).data[0] * scale_by_value;
    Tensor& g = tp.grad(logits.id);
    const int vsz = g.cols();
    for (int r = 0; r < g.rows(); ++r) {
      if (!mv[static_cast<std::size_t>(r)]) continue;
      for (int j = 0; j < vsz; ++j) g.at(r, j) += go * probs->at(r, j);
      g.at(r, tv[static_cast<std::size_t>(r)]) -= go;
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().data) s += x;
  return tape_of(a).push(Tensor({1}, {s}), {a}, [a](Tape& tp, int self) {
    const double go = tp.grad(self).data[0];
    for (double& g : tp.grad(a.id).data) g += go;
  });
}

Var reshape(Var a, std::vector<int> shape) {
  LIPGER_REQUIRE(shape_numel(shape) == a.value().numel(),
                 "reshape: element count mismatch for " + a.value().shape_str());
  Tensor out(std::move(shape), a.value().data);
  return tape_of(a).push(std::move(out), {a}, [a](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& g = tp.grad(a.id);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += G.data[i];
  });
}

Var dot_const(Var a, const Tensor& w) {
  require_same_shape(a.value(), w, "dot_const");
  double s = 0.0;
  for (std::size_t i = 0; i < w.data.size(); ++i) s += a.value().data[i] * w.data[i];
  return tape_of(a).push(Tensor({1}, {s}), {a}, [a, w](Tape& tp, int self) {
    const double go = tp.grad(self).data[0];
    Tensor& g = tp.grad(a.id);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += go * w.data[i];
  });
}

// ---- [C,T,H,W] ops ---------------------------------------------------------

namespace {

struct ConvGeom {
  int cin, t, h, w;
  int cout, cin_g, kt, kh, kw;
  int ot, oh, ow;
  int cout_g;
};

ConvGeom conv_geom(const Tensor& X, const Tensor& W, const Conv3dOpts& o) {
  require_rank(X, 4, "conv3d input");
  require_rank(W, 5, "conv3d weight");
  ConvGeom g{};
  g.cin = X.dim(0);
  g.t = X.dim(1);
  g.h = X.dim(2);
  g.w = X.dim(3);
  g.cout = W.dim(0);
  g.cin_g = W.dim(1);
  g.kt = W.dim(2);
  g.kh = W.dim(3);
  g.kw = W.dim(4);
  LIPGER_REQUIRE(o.groups > 0 && g.cin % o.groups == 0 && g.cout % o.groups == 0,
                 "conv3d: channels not divisible by groups");
  if (g.cin / o.groups != g.cin_g)
    throw PreconditionError("conv3d: weight expects " + std::to_string(g.cin_g * o.groups) +
                            " input channels, got " + std::to_string(g.cin));
  g.cout_g = g.cout / o.groups;
  g.ot = (g.t + 2 * o.pad_t - o.dil_t * (g.kt - 1) - 1) / o.stride_t + 1;
  g.oh = (g.h + 2 * o.pad_h - (g.kh - 1) - 1) / o.stride_h + 1;
  g.ow = (g.w + 2 * o.pad_w - (g.kw - 1) - 1) / o.stride_w + 1;
  LIPGER_REQUIRE(g.ot > 0 && g.oh > 0 && g.ow > 0, "conv3d: input smaller than kernel");
  return g;
}

inline std::size_t idx4(int c, int t, int h, int w, int T, int H, int W) {
  return ((static_cast<std::size_t>(c) * T + t) * H + h) * W + w;
}

// Visits every (output, input, weight) index triple that contributes.
template <class F>
void conv_visit(const ConvGeom& g, const Conv3dOpts& o, F&& f) {
  for (int co = 0; co < g.cout; ++co) {
    const int grp = co / g.cout_g;
    for (int cl = 0; cl < g.cin_g; ++cl) {
      const int ci = grp * g.cin_g + cl;
      for (int a = 0; a < g.kt; ++a)
        for (int b = 0; b < g.kh; ++b)
          for (int d = 0; d < g.kw; ++d) {
            const std::size_t wi = (((static_cast<std::size_t>(co) * g.cin_g + cl) * g.kt + a) * g.kh + b) * g.kw + d;
            for (int ot = 0; ot < g.ot; ++ot) {
              const int it = ot * o.stride_t - o.pad_t + a * o.dil_t;
              if (it < 0 || it >= g.t) continue;
              for (int oh = 0; oh < g.oh; ++oh) {
                const int ih = oh * o.stride_h - o.pad_h + b;
                if (ih < 0 || ih >= g.h) continue;
                const std::size_t ob = idx4(co, ot, oh, 0, g.ot, g.oh, g.ow);
                const std::size_t ib = idx4(ci, it, ih, 0, g.t, g.h, g.w);
                for (int ow = 0; ow < g.ow; ++ow) {
                  const int iw = ow * o.stride_w - o.pad_w + d;
                  if (iw < 0 || iw >= g.w) continue;
                  f(ob + static_cast<std::size_t>(ow), ib + static_cast<std::size_t>(iw), wi);
                }
              }
            }
          }
    }
  }
}

}  // namespace

Var conv3d(Var x, Var w, Var bias, const Conv3dOpts& o) {
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  const ConvGeom g = conv_geom(X, W, o);
  LIPGER_REQUIRE(bias.value().numel() == static_cast<std::size_t>(g.cout), "conv3d: bias size mismatch");
  Tensor out({g.cout, g.ot, g.oh, g.ow});
  const std::size_t plane = static_cast<std::size_t>(g.ot) * g.oh * g.ow;
  for (int co = 0; co < g.cout; ++co)
    std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(co * plane), plane,
                bias.value().data[static_cast<std::size_t>(co)]);
  double* od = out.data.data();
  const double* xd = X.data.data();
  const double* wd = W.data.data();
  conv_visit(g, o, [&](std::size_t oi, std::size_t ii, std::size_t wi) { od[oi] += wd[wi] * xd[ii]; });
  return tape_of(x).push(std::move(out), {x, w, bias}, [x, w, bias, o, g, plane](Tape& tp, int self) {
    const double* gd = tp.grad(self).data.data();
    if (tp.requires_grad(bias.id)) {
      Tensor& gb = tp.grad(bias.id);
      for (int co = 0; co < g.cout; ++co) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += gd[co * plane + i];
        gb.data[static_cast<std::size_t>(co)] += s;
      }
    }
    const bool gx = tp.requires_grad(x.id), gw = tp.requires_grad(w.id);
    if (!gx && !gw) return;
    const double* xd = tp.value(x.id).data.data();
    const double* wd = tp.value(w.id).data.data();
    double* dx = gx ? tp.grad(x.id).data.data() : nullptr;
    double* dw = gw ? tp.grad(w.id).data.data() : nullptr;
    conv_visit(g, o, [&](std::size_t oi, std::size_t ii, std::size_t wi) {
      if (dx) dx[ii] += wd[wi] * gd[oi];
      if (dw) dw[wi] += xd[ii] * gd[oi];
    });
  });
}

Var pad_time_replicate_left(Var x, int n) {
  const Tensor& X = x.value();
  require_rank(X, 4, "pad_time_replicate_left");
  LIPGER_REQUIRE(n >= 0, "pad_time_replicate_left: negative pad");
  const int C = X.dim(0), T = X.dim(1), H = X.dim(2), W = X.dim(3);
  Tensor out({C, T + n, H, W});
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  for (int c = 0; c < C; ++c)
    for (int t = 0; t < T + n; ++t) {
      const int src = std::max(0, t - n);
      std::copy_n(X.data.begin() + static_cast<std::ptrdiff_t>(idx4(c, src, 0, 0, T, H, W)), hw,
                  out.data.begin() + static_cast<std::ptrdiff_t>(idx4(c, t, 0, 0, T + n, H, W)));
    }
  return tape_of(x).push(std::move(out), {x}, [x, n, C, T, H, W, hw](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& g = tp.grad(x.id);
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < T + n; ++t) {
        const int src = std::max(0, t - n);
        const std::size_t si = idx4(c, src, 0, 0, T, H, W);
        const std::size_t oi = idx4(c, t, 0, 0, T + n, H, W);
        for (std::size_t i = 0; i < hw; ++i) g.data[si + i] += G.data[oi + i];
      }
  });
}

Var channel_slice(Var x, int start, int count) {
  const Tensor& X = x.value();
  LIPGER_REQUIRE(X.rank() >= 1 && start >= 0 && count >= 0 && start + count <= X.dim(0),
                 "channel_slice: out of range");
  std::vector<int> shape = X.shape;
  shape[0] = count;
  const std::size_t per = X.numel() / static_cast<std::size_t>(X.dim(0));
  Tensor out(shape);
  std::copy_n(X.data.begin() + static_cast<std::ptrdiff_t>(start * per), count * per, out.data.begin());
  return tape_of(x).push(std::move(out), {x}, [x, start, per](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& g = tp.grad(x.id);
    for (std::size_t i = 0; i < G.data.size(); ++i) g.data[start * per + i] += G.data[i];
  });
}

Var channel_concat(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  LIPGER_REQUIRE(A.rank() == B.rank() && A.rank() >= 1 &&
                     std::equal(A.shape.begin() + 1, A.shape.end(), B.shape.begin() + 1),
                 "channel_concat: trailing shape mismatch " + A.shape_str() + " vs " + B.shape_str());
  std::vector<int> shape = A.shape;
  shape[0] += B.dim(0);
  Tensor out(shape);
  std::copy(A.data.begin(), A.data.end(), out.data.begin());
  std::copy(B.data.begin(), B.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(A.numel()));
  return tape_of(a).push(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    const std::size_t na = tp.value(a.id).numel();
    if (tp.requires_grad(a.id)) {
      Tensor& g = tp.grad(a.id);
      for (std::size_t i = 0; i < na; ++i) g.data[i] += G.data[i];
    }
    if (tp.requires_grad(b.id)) {
      Tensor& g = tp.grad(b.id);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += G.data[na + i];
    }
  });
}

Var channel_shuffle(Var x, int groups) {
  const Tensor& X = x.value();
  const int C = X.dim(0);
  LIPGER_REQUIRE(groups > 0 && C % groups == 0, "channel_shuffle: channels not divisible by groups");
  const int per_group = C / groups;
  const std::size_t per = X.numel() / static_cast<std::size_t>(C);
  // Output channel (j * groups + g) takes input channel (g * per_group + j).
  std::vector<int> src(static_cast<std::size_t>(C));
  for (int g = 0; g < groups; ++g)
    for (int j = 0; j < per_group; ++j) src[static_cast<std::size_t>(j * groups + g)] = g * per_group + j;
  Tensor out(X.shape);
  for (int c = 0; c < C; ++c)
    std::copy_n(X.data.begin() + static_cast<std::ptrdiff_t>(src[static_cast<std::size_t>(c)] * per), per,
                out.data.begin() + static_cast<std::ptrdiff_t>(c * per));
  return tape_of(x).push(std::move(out), {x}, [x, src, per](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& g = tp.grad(x.id);
    for (std::size_t c = 0; c < src.size(); ++c)
      for (std::size_t i = 0; i < per; ++i) g.data[static_cast<std::size_t>(src[c]) * per + i] += G.data[c * per + i];
  });
}

Var spatial_mean(Var x) {
  const Tensor& X = x.value();
  require_rank(X, 4, "spatial_mean");
  const int C = X.dim(0), T = X.dim(1);
  const std::size_t hw = static_cast<std::size_t>(X.dim(2)) * X.dim(3);
  Tensor out({C, T});
  for (std::size_t ct = 0; ct < static_cast<std::size_t>(C) * T; ++ct) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += X.data[ct * hw + i];
    out.data[ct] = s / static_cast<double>(hw);
  }
  return tape_of(x).push(std::move(out), {x}, [x, hw](Tape& tp, int self) {
    const Tensor& G = tp.grad(self);
    Tensor& g = tp.grad(x.id);
    for (std::size_t ct = 0; ct < G.data.size(); ++ct) {
      const double v = G.data[ct] / static_cast<double>(hw);
      for (std::size_t i = 0; i < hw; ++i) g.data[ct * hw + i] += v;
    }
  });
}

}  // namespace lipger
