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

// Reverse-mode automatic differentiation over scalar expression tapes.
//
// A Tape records every scalar operation as a node holding its value, its
// parents and the local partial derivatives with respect to each parent.
// Nodes are appended in evaluation order, so parents always precede their
// children and a single reverse sweep accumulates adjoints.
//
// Numeric code in this library is written once as templates over the scalar
// type and instantiated with either `double` or `ad::Var`. The double path and
// the Var path perform the same floating-point operations in the same order,
// which makes recorded values bit-identical to plain evaluation.
//
// Kinks (relu, min, max, abs) take the left branch at exact ties.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dpcpsf::ad {

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kAddConst,
  kMulConst,
  kDivConst,  // x / c
  kConstSub,  // c - x
  kConstDiv,  // c / x
  kPow,       // x ^ c
  kExp,
  kLog,
  kSqrt,
  kTanh,
  kSigmoid,
  kRelu,
  kSoftplus,
  kAbs,
  kMin,
  kMax,
  kDot,     // bias + sum a_i * b_i, all operands on tape
  kAffine,  // c + sum w_i * x_i, constant weights
};

const char* op_name(Op op);

// Raised when a primitive is evaluated outside its domain during the forward
// pass. The message names the offending node.
class DomainError : public std::domain_error {
 public:
  DomainError(Op op, std::size_t node, const std::string& what);
  Op op() const { return op_; }
  std::size_t node() const { return node_; }

 private:
  Op op_;
  std::size_t node_;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives and is
// not cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  double value() const;
  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return index_; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Creates an independent variable.
  Var variable(double value);
  std::vector<Var> variables(std::span<const double> values);
  std::vector<Var> variables(const Eigen::VectorXd& values);

  std::size_t size() const { return nodes_.size(); }
  std::size_t edge_count() const { return parents_.size(); }
  double value(std::uint32_t index) const { return nodes_[index].value; }
  Op op(std::uint32_t index) const { return nodes_[index].op; }

  // Drops all nodes but keeps allocated storage for reuse.
  void clear();
  void reserve(std::size_t nodes, std::size_t edges);

  // One reverse sweep seeded at `output`. Returns the adjoint of every node
  // (indexed by node), so callers can read gradients of any set of leaves.
  std::vector<double> adjoints(Var output) const;
  void adjoints(Var output, std::vector<double>& out) const;

  // Recomputes every node value from the recorded operations and parents.
  std::vector<double> replay() const;

  // Parents of node i (used by tests to check topological order).
  std::span<const std::uint32_t> parents(std::uint32_t index) const;

  // Node construction; used by the operator overloads.
  Var push_unary(Op op, Var a, double value, double partial, double aux = 0.0);
  Var push_binary(Op op, Var a, Var b, double value, double da, double db);
  Var push_dot(std::span<const Var> a, std::span<const Var> b, Var bias);
  Var push_affine(std::span<const double> w, std::span<const Var> x, double c);

  [[noreturn]] void fail(Op op, const std::string& what) const;

 private:
  struct Node {
    double value;
    double aux;
    std::uint32_t edge_begin;
    std::uint32_t edge_count;
    Op op;
  };

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> parents_;
  std::vector<double> partials_;
};

inline double Var::value() const { return tape_->value(index_); }

// Arithmetic ---------------------------------------------------------------

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(Var a, double c);
Var operator*(double c, Var a);
Var operator/(Var a, double c);
Var operator/(double c, Var a);

inline Var& operator+=(Var& a, Var b) { return a = a + b; }
inline Var& operator-=(Var& a, Var b) { return a = a - b; }
inline Var& operator*=(Var& a, Var b) { return a = a * b; }
inline Var& operator/=(Var& a, Var b) { return a = a / b; }
inline Var& operator+=(Var& a, double c) { return a = a + c; }
inline Var& operator-=(Var& a, double c) { return a = a - c; }
inline Var& operator*=(Var& a, double c) { return a = a * c; }
inline Var& operator/=(Var& a, double c) { return a = a / c; }

// Elementary functions. The std overloads are pulled in so generic code can
// call ad::exp and friends for either scalar type.

Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var tanh(Var a);
Var pow(Var a, double p);
Var sigmoid(Var a);
Var relu(Var a);
Var softplus(Var a);
Var abs(Var a);
Var min(Var a, Var b);
Var max(Var a, Var b);
Var min(Var a, double c);
Var max(Var a, double c);

using std::exp;
using std::log;
using std::sqrt;
using std::tanh;
using std::pow;
using std::abs;

double sigmoid(double x);
double relu(double x);
double softplus(double x);
inline double min(double a, double b) { return b < a ? b : a; }
inline double max(double a, double b) { return b > a ? b : a; }

// bias + sum a_i * b_i, accumulated left to right.
double dot(std::span<const double> a, std::span<const double> b, double bias);
Var dot(std::span<const Var> a, std::span<const Var> b, Var bias);
Var dot(std::span<const double> a, std::span<const Var> b, double bias);
Var dot(std::span<const Var> a, std::span<const double> b, Var bias);

// Value extraction that works for both scalar types.
inline double value_of(double x) { return x; }
inline double value_of(Var x) { return x.value(); }

template <class T>
inline constexpr bool is_var_v = std::is_same_v<std::remove_cvref_t<T>, Var>;

// Function transforms --------------------------------------------------------
//
// `f` receives `std::span<const Var>` and returns a Var (or a double, for
// constant functions). Vector-valued `f` returns a std::vector<Var>.

template <class F>
std::pair<double, Eigen::VectorXd> value_and_grad(F&& f,
                                                  const Eigen::VectorXd& x) {
  Tape tape;
  const std::vector<Var> xs = tape.variables(x);
  auto out = f(std::span<const Var>(xs));
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  if constexpr (std::is_arithmetic_v<decltype(out)>) {
    return {static_cast<double>(out), g};
  } else {
    const std::vector<double> adj = tape.adjoints(out);
    for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = adj[xs[i].index()];
    return {out.value(), g};
  }
}

template <class F>
Eigen::VectorXd grad(F&& f, const Eigen::VectorXd& x) {
  return value_and_grad(std::forward<F>(f), x).second;
}

template <class F>
Eigen::MatrixXd jacobian(F&& f, const Eigen::VectorXd& x) {
  Tape tape;
  const std::vector<Var> xs = tape.variables(x);
  const std::vector<Var> ys = f(std::span<const Var>(xs));
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(ys.size()), x.size());
  std::vector<double> adj;
  for (std::size_t r = 0; r < ys.size(); ++r) {
    if (ys[r].tape() == nullptr) {
      jac.row(static_cast<Eigen::Index>(r)).setZero();
      continue;
    }
    tape.adjoints(ys[r], adj);
    for (Eigen::Index c = 0; c < x.size(); ++c) {
      jac(static_cast<Eigen::Index>(r), c) = adj[xs[c].index()];
    }
  }
  return jac;
}

}  // namespace dpcpsf::ad
