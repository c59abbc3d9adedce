/*
 * Copyright 2026 The fairfuse Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Tape-based reverse-mode differentiation over Tensor2 values.
//
// A Tape records each operation as a node holding its forward value and a
// closure that pushes the node's upstream gradient into its inputs. Calling
// backward() on a 1x1 node walks the tape in reverse and finally adds leaf
// gradients into the bound Parameter objects.
//
//   Tape tape;
//   Var w = tape.parameter(weights);
//   Var x = tape.constant(batch);
//   Var loss = ad::mean_abs(tape, ad::matmul(tape, x, w));
//   tape.backward(loss);  // weights.gradient now holds dloss/dw

#ifndef FAME_AUTODIFF_HPP_
#define FAME_AUTODIFF_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "fame/tensor.hpp"

namespace fame {

// Trainable tensor plus its AdamW state.
struct Parameter {
  Tensor2 value;
  Tensor2 gradient;
  Tensor2 moment1;
  Tensor2 moment2;
  std::uint64_t step_count = 0;

  Parameter() = default;
  explicit Parameter(Tensor2 v)
      : value(std::move(v)),
        gradient(value.rows(), value.cols()),
        moment1(value.rows(), value.cols()),
        moment2(value.rows(), value.cols()) {}

  void zero_grad() { gradient.fill(0.0); }
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor2 xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor2& upstream)>;

  // A non-recording tape only computes forward values.
  explicit Tape(bool record = true) : record_(record) {}

  Var constant(Tensor2 value);
  // Leaf that reads `p.value` in place; its gradient lands in `p.gradient`.
  // The Parameter must outlive the tape.
  Var parameter(Parameter& p);
  // Leaf that reads `v` in place and never receives a gradient. Used to
  // evaluate frozen parameters without mutating them.
  Var frozen(const Tensor2& v);

  // Appends a node. `inputs` decides whether it needs a gradient at all.
  Var record(Tensor2 value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor2 value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor2& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Adds `g` into the gradient slot of `v` (no-op for constant subgraphs).
  void accumulate(Var v, const Tensor2& g);

  // Seeds d(root)/d(root) = 1 and propagates. Root must be 1x1.
  void backward(Var root);

 private:
  struct Node {
    Tensor2 value;
    const Tensor2* external = nullptr;
    Tensor2 grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  bool record_;
  std::vector<Node> nodes_;
};

// Per-task class weights for the weighted BCE.
struct ClassWeights {
  double pos = 1.0;
  double neg = 1.0;
};

namespace ad {

Var matmul(Tape& t, Var a, Var b);
// x (N x D) plus a 1 x D row broadcast over every row.
Var add_row(Tape& t, Var x, Var row);
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var x, double factor);
Var sigmoid(Tape& t, Var x);
Var relu(Tape& t, Var x);
// Inverted dropout; identity when !training or rate == 0.
Var dropout(Tape& t, Var x, double rate, bool training, std::mt19937_64& rng);
// gate (1 x D) times each row of x (N x D).
Var elementwise_scale(Tape& t, Var gate, Var x);
Var concat_cols(Tape& t, std::span<const Var> parts);
// Mean over all entries of |x|; 1x1.
Var mean_abs(Tape& t, Var x);
// Weighted mean BCE over all N x T entries, stable softplus form; 1x1.
Var weighted_bce(Tape& t, Var logits, const Tensor2& targets,
                 std::span<const ClassWeights> weights);
// sum_i coef_i * term_i over 1x1 terms.
Var linear_combination(Tape& t, std::span<const Var> terms, std::span<const double> coefs);

}  // namespace ad

// Plain-value forms of the ops above, usable without a tape.
namespace ops {
double sigmoid(double x);
// log(1 + e^x) without overflow.
double softplus(double x);
Tensor2 sigmoid(const Tensor2& x);
Tensor2 relu(const Tensor2& x);
Tensor2 elementwise_scale(const Tensor2& gate, const Tensor2& x);
Tensor2 concat_cols(std::span<const Tensor2> parts);
double weighted_bce(const Tensor2& logits, const Tensor2& targets,
                    std::span<const ClassWeights> weights);
}  // namespace ops

// Decoupled-weight-decay Adam. Zeroes gradients after each step.
struct AdamW {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void step(std::span<Parameter* const> params) const;
};

}  // namespace fame

#endif  // FAME_AUTODIFF_HPP_
