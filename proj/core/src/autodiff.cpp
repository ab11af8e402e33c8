// Copyright 2026 The dpcpsf Authors
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

#include "dpcpsf/autodiff.hpp"

#include <cassert>
#include <limits>
#include <sstream>

namespace dpcpsf::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kAddConst: return "add_const";
    case Op::kMulConst: return "mul_const";
    case Op::kDivConst: return "div_const";
    case Op::kConstSub: return "const_sub";
    case Op::kConstDiv: return "const_div";
    case Op::kPow: return "pow";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSqrt: return "sqrt";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kRelu: return "relu";
    case Op::kSoftplus: return "softplus";
    case Op::kAbs: return "abs";
    case Op::kMin: return "min";
    case Op::kMax: return "max";
    case Op::kDot: return "dot";
    case Op::kAffine: return "affine";
  }
  return "unknown";
}

namespace {

std::string domain_message(Op op, std::size_t node, const std::string& what) {
  std::ostringstream os;
  os << what << " at tape node " << node << " (" << op_name(op) << ")";
  return os.str();
}

Tape* tape_of(Var a, [[maybe_unused]] Var b) {
  assert(a.tape() == b.tape() && "operands live on different tapes");
  return a.tape();
}

}  // namespace

DomainError::DomainError(Op op, std::size_t node, const std::string& what)
    : std::domain_error(domain_message(op, node, what)), op_(op), node_(node) {}

// Tape -----------------------------------------------------------------------

Var Tape::variable(double value) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({value, 0.0, static_cast<std::uint32_t>(parents_.size()), 0,
                    Op::kLeaf});
  return {this, index};
}

std::vector<Var> Tape::variables(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(variable(v));
  return out;
}

std::vector<Var> Tape::variables(const Eigen::VectorXd& values) {
  return variables(std::span<const double>(values.data(),
                                           static_cast<std::size_t>(values.size())));
}

void Tape::clear() {
  nodes_.clear();
  parents_.clear();
  partials_.clear();
}

void Tape::reserve(std::size_t nodes, std::size_t edges) {
  nodes_.reserve(nodes);
  parents_.reserve(edges);
  partials_.reserve(edges);
}

void Tape::fail(Op op, const std::string& what) const {
  throw DomainError(op, nodes_.size(), what);
}

Var Tape::push_unary(Op op, Var a, double value, double partial, double aux) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({value, aux, static_cast<std::uint32_t>(parents_.size()), 1, op});
  parents_.push_back(a.index());
  partials_.push_back(partial);
  return {this, index};
}

Var Tape::push_binary(Op op, Var a, Var b, double value, double da, double db) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({value, 0.0, static_cast<std::uint32_t>(parents_.size()), 2, op});
  parents_.push_back(a.index());
  parents_.push_back(b.index());
  partials_.push_back(da);
  partials_.push_back(db);
  return {this, index};
}

Var Tape::push_dot(std::span<const Var> a, std::span<const Var> b, Var bias) {
  assert(a.size() == b.size());
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  const auto begin = static_cast<std::uint32_t>(parents_.size());
  double acc = bias.value();
  parents_.push_back(bias.index());
  partials_.push_back(1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double av = nodes_[a[i].index()].value;
    const double bv = nodes_[b[i].index()].value;
    acc += av * bv;
    parents_.push_back(a[i].index());
    partials_.push_back(bv);
    parents_.push_back(b[i].index());
    partials_.push_back(av);
  }
  nodes_.push_back({acc, 0.0, begin,
                    static_cast<std::uint32_t>(parents_.size() - begin), Op::kDot});
  return {this, index};
}

Var Tape::push_affine(std::span<const double> w, std::span<const Var> x, double c) {
  assert(w.size() == x.size());
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  const auto begin = static_cast<std::uint32_t>(parents_.size());
  double acc = c;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i] * nodes_[x[i].index()].value;
    parents_.push_back(x[i].index());
    partials_.push_back(w[i]);
  }
  nodes_.push_back({acc, c, begin, static_cast<std::uint32_t>(w.size()), Op::kAffine});
  return {this, index};
}

std::span<const std::uint32_t> Tape::parents(std::uint32_t index) const {
  const Node& n = nodes_[index];
  return {parents_.data() + n.edge_begin, n.edge_count};
}

void Tape::adjoints(Var output, std::vector<double>& adj) const {
  adj.assign(nodes_.size(), 0.0);
  adj[output.index()] = 1.0;
  for (std::size_t i = output.index() + 1; i-- > 0;) {
    const double a = adj[i];
    if (a == 0.0) continue;
    const Node& n = nodes_[i];
    const std::uint32_t end = n.edge_begin + n.edge_count;
    for (std::uint32_t e = n.edge_begin; e < end; ++e) {
      adj[parents_[e]] += a * partials_[e];
    }
  }
}

std::vector<double> Tape::adjoints(Var output) const {
  std::vector<double> adj;
  adjoints(output, adj);
  return adj;
}

std::vector<double> Tape::replay() const {
  std::vector<double> v(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    const std::uint32_t* p = parents_.data() + n.edge_begin;
    const double* w = partials_.data() + n.edge_begin;
    const double x = n.edge_count > 0 ? v[p[0]] : 0.0;
    const double y = n.edge_count > 1 ? v[p[1]] : 0.0;
    switch (n.op) {
      case Op::kLeaf: v[i] = n.value; break;
      case Op::kAdd: v[i] = x + y; break;
      case Op::kSub: v[i] = x - y; break;
      case Op::kMul: v[i] = x * y; break;
      case Op::kDiv: v[i] = x / y; break;
      case Op::kNeg: v[i] = -x; break;
      case Op::kAddConst: v[i] = x + n.aux; break;
      case Op::kMulConst: v[i] = x * n.aux; break;
      case Op::kDivConst: v[i] = x / n.aux; break;
      case Op::kConstSub: v[i] = n.aux - x; break;
      case Op::kConstDiv: v[i] = n.aux / x; break;
      case Op::kPow: v[i] = std::pow(x, n.aux); break;
      case Op::kExp: v[i] = std::exp(x); break;
      case Op::kLog: v[i] = std::log(x); break;
      case Op::kSqrt: v[i] = std::sqrt(x); break;
      case Op::kTanh: v[i] = std::tanh(x); break;
      case Op::kSigmoid: v[i] = sigmoid(x); break;
      case Op::kRelu: v[i] = relu(x); break;
      case Op::kSoftplus: v[i] = softplus(x); break;
      case Op::kAbs: v[i] = std::abs(x); break;
      case Op::kMin:
        v[i] = n.edge_count == 2 ? min(x, y) : min(x, n.aux);
        break;
      case Op::kMax:
        v[i] = n.edge_count == 2 ? max(x, y) : max(x, n.aux);
        break;
      case Op::kDot: {
        double acc = x;  // bias
        for (std::uint32_t e = 1; e + 1 < n.edge_count; e += 2) {
          acc += v[p[e]] * v[p[e + 1]];
        }
        v[i] = acc;
        break;
      }
      case Op::kAffine: {
        double acc = n.aux;
        for (std::uint32_t e = 0; e < n.edge_count; ++e) acc += w[e] * v[p[e]];
        v[i] = acc;
        break;
      }
    }
  }
  return v;
}

// Scalar helpers ---------------------------------------------------------------

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double dot(std::span<const double> a, std::span<const double> b, double bias) {
  double acc = bias;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

Var dot(std::span<const Var> a, std::span<const Var> b, Var bias) {
  return bias.tape()->push_dot(a, b, bias);
}

Var dot(std::span<const double> a, std::span<const Var> b, double bias) {
  assert(!b.empty());
  return b[0].tape()->push_affine(a, b, bias);
}

Var dot(std::span<const Var> a, std::span<const double> b, Var bias) {
  // Recorded as an affine node with the bias as a unit-weight leading term;
  // 0 + 1 * bias reproduces bias exactly, so the value matches the double path.
  thread_local std::vector<double> w;
  thread_local std::vector<Var> x;
  w.assign(1, 1.0);
  w.insert(w.end(), b.begin(), b.end());
  x.assign(1, bias);
  x.insert(x.end(), a.begin(), a.end());
  return bias.tape()->push_affine(w, x, 0.0);
}

// Operators --------------------------------------------------------------------

Var operator+(Var a, Var b) {
  return tape_of(a, b)->push_binary(Op::kAdd, a, b, a.value() + b.value(), 1.0, 1.0);
}

Var operator-(Var a, Var b) {
  return tape_of(a, b)->push_binary(Op::kSub, a, b, a.value() - b.value(), 1.0, -1.0);
}

Var operator*(Var a, Var b) {
  const double av = a.value();
  const double bv = b.value();
  return tape_of(a, b)->push_binary(Op::kMul, a, b, av * bv, bv, av);
}

Var operator/(Var a, Var b) {
  const double av = a.value();
  const double bv = b.value();
  Tape* t = tape_of(a, b);
  if (bv == 0.0) t->fail(Op::kDiv, "division by zero");
  const double q = av / bv;
  return t->push_binary(Op::kDiv, a, b, q, 1.0 / bv, -q / bv);
}

Var operator-(Var a) { return a.tape()->push_unary(Op::kNeg, a, -a.value(), -1.0); }

Var operator+(Var a, double c) {
  return a.tape()->push_unary(Op::kAddConst, a, a.value() + c, 1.0, c);
}
Var operator+(double c, Var a) {
  return a.tape()->push_unary(Op::kAddConst, a, a.value() + c, 1.0, c);
}
Var operator-(Var a, double c) {
  return a.tape()->push_unary(Op::kAddConst, a, a.value() + (-c), 1.0, -c);
}
Var operator-(double c, Var a) {
  return a.tape()->push_unary(Op::kConstSub, a, c - a.value(), -1.0, c);
}
Var operator*(Var a, double c) {
  return a.tape()->push_unary(Op::kMulConst, a, a.value() * c, c, c);
}
Var operator*(double c, Var a) {
  return a.tape()->push_unary(Op::kMulConst, a, a.value() * c, c, c);
}
Var operator/(Var a, double c) {
  if (c == 0.0) a.tape()->fail(Op::kDivConst, "division by zero");
  return a.tape()->push_unary(Op::kDivConst, a, a.value() / c, 1.0 / c, c);
}
Var operator/(double c, Var a) {
  const double av = a.value();
  if (av == 0.0) a.tape()->fail(Op::kConstDiv, "division by zero");
  const double q = c / av;
  return a.tape()->push_unary(Op::kConstDiv, a, q, -q / av, c);
}

// Functions ----------------------------------------------------------------------

Var exp(Var a) {
  const double e = std::exp(a.value());
  return a.tape()->push_unary(Op::kExp, a, e, e);
}

Var log(Var a) {
  const double x = a.value();
  if (!(x > 0.0)) a.tape()->fail(Op::kLog, "log of non-positive value");
  return a.tape()->push_unary(Op::kLog, a, std::log(x), 1.0 / x);
}

Var sqrt(Var a) {
  const double x = a.value();
  if (x < 0.0) a.tape()->fail(Op::kSqrt, "sqrt of negative value");
  const double s = std::sqrt(x);
  // The derivative is unbounded at zero; use the zero subgradient there.
  return a.tape()->push_unary(Op::kSqrt, a, s, s > 0.0 ? 0.5 / s : 0.0);
}

Var tanh(Var a) {
  const double t = std::tanh(a.value());
  return a.tape()->push_unary(Op::kTanh, a, t, 1.0 - t * t);
}

Var pow(Var a, double p) {
  const double x = a.value();
  if (x < 0.0 && p != std::floor(p)) {
    a.tape()->fail(Op::kPow, "non-integer power of negative value");
  }
  if (x == 0.0 && p < 0.0) a.tape()->fail(Op::kPow, "negative power of zero");
  const double v = std::pow(x, p);
  const double d = (p == 0.0) ? 0.0 : p * std::pow(x, p - 1.0);
  return a.tape()->push_unary(Op::kPow, a, v, d, p);
}

Var sigmoid(Var a) {
  const double s = sigmoid(a.value());
  return a.tape()->push_unary(Op::kSigmoid, a, s, s * (1.0 - s));
}

Var relu(Var a) {
  const double x = a.value();
  return a.tape()->push_unary(Op::kRelu, a, relu(x), x > 0.0 ? 1.0 : 0.0);
}

Var softplus(Var a) {
  const double x = a.value();
  return a.tape()->push_unary(Op::kSoftplus, a, softplus(x), sigmoid(x));
}

Var abs(Var a) {
  const double x = a.value();
  return a.tape()->push_unary(Op::kAbs, a, std::abs(x), x > 0.0 ? 1.0 : -1.0);
}

Var min(Var a, Var b) {
  const bool left = !(b.value() < a.value());
  return tape_of(a, b)->push_binary(Op::kMin, a, b, left ? a.value() : b.value(),
                                    left ? 1.0 : 0.0, left ? 0.0 : 1.0);
}

Var max(Var a, Var b) {
  const bool left = !(b.value() > a.value());
  return tape_of(a, b)->push_binary(Op::kMax, a, b, left ? a.value() : b.value(),
                                    left ? 1.0 : 0.0, left ? 0.0 : 1.0);
}

Var min(Var a, double c) {
  const bool left = !(c < a.value());
  return a.tape()->push_unary(Op::kMin, a, left ? a.value() : c, left ? 1.0 : 0.0, c);
}

Var max(Var a, double c) {
  const bool left = !(c > a.value());
  return a.tape()->push_unary(Op::kMax, a, left ? a.value() : c, left ? 1.0 : 0.0, c);
}

}  // namespace dpcpsf::ad
