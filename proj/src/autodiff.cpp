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

#include "fame/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fame/errors.hpp"
#include "fame/kernels.hpp"

namespace fame {

Tensor2 xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor2 out(fan_in, fan_out);
  for (double& v : out.values()) v = dist(rng);
  return out;
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor2 value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var Tape::frozen(const Tensor2& v) {
  Node n;
  n.external = &v;
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var Tape::record(Tensor2 value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor2 value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [&](Var v) { return nodes_[v.id].requires_grad; });
    if (n.requires_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

const Tensor2& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.external ? *n.external : n.value;
}

void Tape::accumulate(Var v, const Tensor2& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    const Tensor2& val = value(v);
    n.grad = Tensor2(val.rows(), val.cols());
  }
  require_same_shape(n.grad, g, "Tape::accumulate");
  auto dst = n.grad.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var root) {
  const Tensor2& rv = value(root);
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ShapeError("Tape::backward: root must be 1x1, got " + rv.shape_string());
  }
  if (!nodes_[root.id].requires_grad) return;
  accumulate(root, Tensor2(1, 1, 1.0));
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) {
      auto dst = n.param->gradient.values();
      auto src = n.grad.values();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Scalar helpers

namespace ops {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Tensor2 sigmoid(const Tensor2& x) {
  Tensor2 out = x;
  for (double& v : out.values()) v = sigmoid(v);
  return out;
}

Tensor2 relu(const Tensor2& x) {
  Tensor2 out = x;
  for (double& v : out.values()) v = std::max(v, 0.0);
  return out;
}

Tensor2 elementwise_scale(const Tensor2& gate, const Tensor2& x) {
  if (gate.rows() != 1 || gate.cols() != x.cols()) {
    throw ShapeError("elementwise_scale: gate " + gate.shape_string() +
                     " does not broadcast over " + x.shape_string());
  }
  Tensor2 out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row_span(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] *= gate[c];
  }
  return out;
}

Tensor2 concat_cols(std::span<const Tensor2> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t rows = parts.front().rows();
  std::size_t width = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + parts.front().shape_string() + " vs " +
                       p.shape_string());
    }
    width += p.cols();
  }
  Tensor2 out(rows, width);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.row_span(r).data();
    for (const auto& p : parts) {
      auto src = p.row_span(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

namespace {
void check_bce_shapes(const Tensor2& logits, const Tensor2& targets,
                      std::span<const ClassWeights> weights) {
  require_same_shape(logits, targets, "weighted_bce");
  if (weights.size() != logits.cols()) {
    throw ShapeError("weighted_bce: " + std::to_string(weights.size()) +
                     " class-weight pairs for " + std::to_string(logits.cols()) + " tasks");
  }
}
}  // namespace

double weighted_bce(const Tensor2& logits, const Tensor2& targets,
                    std::span<const ClassWeights> weights) {
  check_bce_shapes(logits, targets, weights);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      const double l = logits(r, c);
      const double y = targets(r, c);
      // -log(sigmoid(l)) = softplus(-l); -log(1 - sigmoid(l)) = softplus(l)
      total += weights[c].pos * y * softplus(-l) + weights[c].neg * (1.0 - y) * softplus(l);
    }
  }
  return total / static_cast<double>(logits.size());
}

}  // namespace ops

// ---------------------------------------------------------------------------
// Differentiable ops

namespace ad {

Var matmul(Tape& t, Var a, Var b) {
  Tensor2 out = kernels::matmul(t.value(a), t.value(b));
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor2& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, kernels::matmul_nt(g, tp.value(b)));
    if (tp.requires_grad(b)) tp.accumulate(b, kernels::matmul_tn(tp.value(a), g));
  });
}

Var add_row(Tape& t, Var x, Var row) {
  const Tensor2& xv = t.value(x);
  const Tensor2& rv = t.value(row);
  if (rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw ShapeError("add_row: " + rv.shape_string() + " does not broadcast over " +
                     xv.shape_string());
  }
  Tensor2 out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row_span(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += rv[c];
  }
  return t.record(std::move(out), {x, row}, [x, row](Tape& tp, const Tensor2& g) {
    tp.accumulate(x, g);
    if (tp.requires_grad(row)) {
      Tensor2 col_sum(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) col_sum[c] += g(r, c);
      }
      tp.accumulate(row, col_sum);
    }
  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor2& av = t.value(a);
  const Tensor2& bv = t.value(b);
  require_same_shape(av, bv, "add");
  Tensor2 out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor2& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var scale(Tape& t, Var x, double factor) {
  Tensor2 out = t.value(x);
  for (double& v : out.values()) v *= factor;
  return t.record(std::move(out), {x}, [x, factor](Tape& tp, const Tensor2& g) {
    Tensor2 gx = g;
    for (double& v : gx.values()) v *= factor;
    tp.accumulate(x, gx);
  });
}

Var sigmoid(Tape& t, Var x) {
  Tensor2 s = ops::sigmoid(t.value(x));
  Tensor2 out = s;
  return t.record(std::move(out), {x}, [x, s = std::move(s)](Tape& tp, const Tensor2& g) {
    Tensor2 gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= s[i] * (1.0 - s[i]);
    tp.accumulate(x, gx);
  });
}

Var relu(Tape& t, Var x) {
  Tensor2 out = ops::relu(t.value(x));
  return t.record(std::move(out), {x}, [x](Tape& tp, const Tensor2& g) {
    const Tensor2& xv = tp.value(x);
    Tensor2 gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (xv[i] <= 0.0) gx[i] = 0.0;
    }
    tp.accumulate(x, gx);
  });
}

Var dropout(Tape& t, Var x, double rate, bool training, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate " + std::to_string(rate) + " outside [0, 1)");
  }
  if (!training || rate == 0.0) return x;
  const Tensor2& xv = t.value(x);
  Tensor2 mask(xv.rows(), xv.cols());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = unit(rng) < rate ? 0.0 : keep_scale;
  Tensor2 out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return t.record(std::move(out), {x}, [x, mask](Tape& tp, const Tensor2& g) {
    Tensor2 gx = g;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= mask[i];
    tp.accumulate(x, gx);
  });
}

Var elementwise_scale(Tape& t, Var gate, Var x) {
  Tensor2 out = ops::elementwise_scale(t.value(gate), t.value(x));
  return t.record(std::move(out), {gate, x}, [gate, x](Tape& tp, const Tensor2& g) {
    const Tensor2& gv = tp.value(gate);
    const Tensor2& xv = tp.value(x);
    if (tp.requires_grad(x)) tp.accumulate(x, ops::elementwise_scale(gv, g));
    if (tp.requires_grad(gate)) {
      Tensor2 gg(1, gv.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gg[c] += g(r, c) * xv(r, c);
      }
      tp.accumulate(gate, gg);
    }
  });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  std::vector<Tensor2> values;
  values.reserve(parts.size());
  for (Var p : parts) values.push_back(t.value(p));
  Tensor2 out = ops::concat_cols(values);
  std::vector<Var> inputs(parts.begin(), parts.end());
  std::vector<std::size_t> widths;
  for (const auto& v : values) widths.push_back(v.cols());
  return t.record(std::move(out), parts, [inputs, widths](Tape& tp, const Tensor2& g) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < inputs.size(); ++p) {
      const std::size_t w = widths[p];
      if (tp.requires_grad(inputs[p])) {
        Tensor2 slice(g.rows(), w);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          auto src = g.row_span(r).subspan(offset, w);
          std::copy(src.begin(), src.end(), slice.row_span(r).begin());
        }
        tp.accumulate(inputs[p], slice);
      }
      offset += w;
    }
  });
}

Var mean_abs(Tape& t, Var x) {
  const Tensor2& xv = t.value(x);
  if (xv.empty()) throw ShapeError("mean_abs: empty tensor");
  double total = 0.0;
  for (double v : xv.values()) total += std::abs(v);
  const double n = static_cast<double>(xv.size());
  return t.record(Tensor2(1, 1, total / n), {x}, [x, n](Tape& tp, const Tensor2& g) {
    const Tensor2& v = tp.value(x);
    Tensor2 gx(v.rows(), v.cols());
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double sign = v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
      gx[i] = g[0] * sign / n;
    }
    tp.accumulate(x, gx);
  });
}

Var weighted_bce(Tape& t, Var logits, const Tensor2& targets,
                 std::span<const ClassWeights> weights) {
  const double loss = ops::weighted_bce(t.value(logits), targets, weights);
  std::vector<ClassWeights> w(weights.begin(), weights.end());
  return t.record(Tensor2(1, 1, loss), {logits},
                  [logits, targets, w](Tape& tp, const Tensor2& g) {
                    const Tensor2& lv = tp.value(logits);
                    const double n = static_cast<double>(lv.size());
                    Tensor2 gl(lv.rows(), lv.cols());
                    for (std::size_t r = 0; r < lv.rows(); ++r) {
                      for (std::size_t c = 0; c < lv.cols(); ++c) {
                        const double s = ops::sigmoid(lv(r, c));
                        const double y = targets(r, c);
                        gl(r, c) = g[0] *
                                   (w[c].pos * y * (s - 1.0) + w[c].neg * (1.0 - y) * s) / n;
                      }
                    }
                    tp.accumulate(logits, gl);
                  });
}

Var linear_combination(Tape& t, std::span<const Var> terms, std::span<const double> coefs) {
  if (terms.size() != coefs.size() || terms.empty()) {
    throw ShapeError("linear_combination: need one coefficient per term");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Tensor2& v = t.value(terms[i]);
    if (v.size() != 1) throw ShapeError("linear_combination: terms must be 1x1");
    total += coefs[i] * v[0];
  }
  std::vector<Var> inputs(terms.begin(), terms.end());
  std::vector<double> c(coefs.begin(), coefs.end());
  return t.record(Tensor2(1, 1, total), terms, [inputs, c](Tape& tp, const Tensor2& g) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      tp.accumulate(inputs[i], Tensor2(1, 1, g[0] * c[i]));
    }
  });
}

}  // namespace ad

// ---------------------------------------------------------------------------
// AdamW

void AdamW::step(std::span<Parameter* const> params) const {
  for (Parameter* p : params) {
    p->step_count += 1;
    const double t = static_cast<double>(p->step_count);
    const double bias1 = 1.0 - std::pow(beta1, t);
    const double bias2 = 1.0 - std::pow(beta2, t);
    auto value = p->value.values();
    auto grad = p->gradient.values();
    auto m = p->moment1.values();
    auto v = p->moment2.values();
    for (std::size_t i = 0; i < value.size(); ++i) {
      value[i] *= 1.0 - lr * weight_decay;
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
      grad[i] = 0.0;
    }
  }
}

}  // namespace fame
