// Copyright 2026 The llearn Authors
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

// Small dense feed-forward networks with smooth activations.
//
// Besides plain evaluation, a network can be pushed forward as a "jet": the
// output together with its derivatives with respect to every input
// coordinate. Losses that consume those input derivatives are differentiated
// with respect to the parameters by running the jet computation backwards,
// which needs the second derivative of the activation.

#ifndef LLEARN_DIFFCORE_HPP_
#define LLEARN_DIFFCORE_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <charconv>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "llearn/errors.hpp"

namespace llearn {

enum class Activation { kSoftplus };

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kSoftplus:
      return "softplus";
  }
  return "unknown";
}

inline Activation parse_activation(const std::string& name) {
  if (name == "softplus") return Activation::kSoftplus;
  throw InvalidInput("unknown activation '" + name + "'");
}

struct NetworkSpec {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::vector<std::size_t> hidden_layers;
  Activation activation = Activation::kSoftplus;

  std::size_t num_layers() const { return hidden_layers.size() + 1; }
  std::size_t layer_inputs(std::size_t l) const {
    return l == 0 ? input_dim : hidden_layers[l - 1];
  }
  std::size_t layer_outputs(std::size_t l) const {
    return l + 1 == num_layers() ? output_dim : hidden_layers[l];
  }

  void validate() const {
    require(input_dim >= 1 && output_dim >= 1, "network dims must be >= 1");
    for (std::size_t h : hidden_layers) require(h >= 1, "hidden width must be >= 1");
  }

  bool operator==(const NetworkSpec&) const = default;
};

// Weights are stored row-major (out x in), each followed by its bias.
struct LayerSlice {
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

inline std::vector<LayerSlice> parameter_layout(const NetworkSpec& spec) {
  spec.validate();
  std::vector<LayerSlice> layout;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    LayerSlice s;
    s.rows = spec.layer_outputs(l);
    s.cols = spec.layer_inputs(l);
    s.weight_offset = offset;
    offset += s.rows * s.cols;
    s.bias_offset = offset;
    offset += s.rows;
    layout.push_back(s);
  }
  return layout;
}

inline std::size_t parameter_count(const NetworkSpec& spec) {
  const auto layout = parameter_layout(spec);
  const auto& last = layout.back();
  return last.bias_offset + last.rows;
}

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ParameterVector {
  Eigen::VectorXd values;
  std::vector<LayerSlice> layout;

  static ParameterVector zeros(const NetworkSpec& spec) {
    ParameterVector p;
    p.layout = parameter_layout(spec);
    p.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count(spec)));
    return p;
  }

  // Uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static ParameterVector glorot(const NetworkSpec& spec, std::uint64_t seed) {
    ParameterVector p = zeros(spec);
    std::mt19937_64 rng(seed);
    for (const auto& s : p.layout) {
      const double bound = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t i = 0; i < s.rows * s.cols; ++i) p.values[s.weight_offset + i] = dist(rng);
    }
    return p;
  }

  Eigen::Map<const RowMajorMatrix> weight(std::size_t l) const {
    const auto& s = layout[l];
    return {values.data() + s.weight_offset, static_cast<Eigen::Index>(s.rows),
            static_cast<Eigen::Index>(s.cols)};
  }
  Eigen::Map<RowMajorMatrix> weight(std::size_t l) {
    const auto& s = layout[l];
    return {values.data() + s.weight_offset, static_cast<Eigen::Index>(s.rows),
            static_cast<Eigen::Index>(s.cols)};
  }
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const {
    const auto& s = layout[l];
    return {values.data() + s.bias_offset, static_cast<Eigen::Index>(s.rows)};
  }
  Eigen::Map<Eigen::VectorXd> bias(std::size_t l) {
    const auto& s = layout[l];
    return {values.data() + s.bias_offset, static_cast<Eigen::Index>(s.rows)};
  }

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

inline void check_params(const NetworkSpec& spec, const ParameterVector& params) {
  require(params.size() == parameter_count(spec), "parameter vector length does not match network spec");
}

namespace activation {

inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace activation

// Output value and input derivatives for a batch of inputs (one per column).
// tangent[k](i, b) = d output_i / d input_k at sample b.
struct Jet {
  Eigen::MatrixXd value;
  std::vector<Eigen::MatrixXd> tangent;

  static Jet zeros(std::size_t rows, std::size_t dirs, Eigen::Index batch) {
    Jet j;
    j.value = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), batch);
    j.tangent.assign(dirs, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), batch));
    return j;
  }
};

// Intermediate values kept for the backward pass. Every matrix stacks the
// value block and the input_dim tangent blocks side by side: [v | t_0 | t_1 ...].
struct JetTape {
  Eigen::Index batch = 0;
  std::vector<Eigen::MatrixXd> layer_input;   // stacked input to layer l
  std::vector<Eigen::MatrixXd> preactivation;  // stacked W*input (+ bias on the value block)
};

namespace detail {

inline Eigen::MatrixXd stacked_input(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), b = x.cols();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, b * (n + 1));
  s.leftCols(b) = x;
  for (Eigen::Index k = 0; k < n; ++k) s.block(k, b * (k + 1), 1, b).setOnes();
  return s;
}

}  // namespace detail

inline Jet net_jet(const NetworkSpec& spec, const ParameterVector& params, const Eigen::MatrixXd& inputs,
                   JetTape* tape = nullptr) {
  check_params(spec, params);
  require(static_cast<std::size_t>(inputs.rows()) == spec.input_dim, "input dimension mismatch");
  const Eigen::Index b = inputs.cols();
  const Eigen::Index dirs = static_cast<Eigen::Index>(spec.input_dim);
  Eigen::MatrixXd current = detail::stacked_input(inputs);
  if (tape) {
    tape->batch = b;
    tape->layer_input.clear();
    tape->preactivation.clear();
  }
  const std::size_t layers = spec.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = params.weight(l) * current;
    z.leftCols(b).colwise() += params.bias(l);
    if (tape) {
      tape->layer_input.push_back(std::move(current));
      tape->preactivation.push_back(z);
    }
    if (l + 1 == layers) {
      current = std::move(z);
      break;
    }
    Eigen::MatrixXd a(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < b; ++c) {
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double zz = z(r, c);
        a(r, c) = activation::softplus(zz);
        const double slope = activation::sigmoid(zz);
        for (Eigen::Index k = 0; k < dirs; ++k) a(r, c + b * (k + 1)) = slope * z(r, c + b * (k + 1));
      }
    }
    current = std::move(a);
  }
  Jet out;
  out.value = current.leftCols(b);
  out.tangent.reserve(static_cast<std::size_t>(dirs));
  for (Eigen::Index k = 0; k < dirs; ++k) out.tangent.emplace_back(current.middleCols(b * (k + 1), b));
  return out;
}

// Accumulates d(loss)/d(params) into grad given the loss adjoints of a jet
// produced with the same tape.
inline void net_jet_backward(const NetworkSpec& spec, const ParameterVector& params, const JetTape& tape,
                             const Jet& adjoint, Eigen::Ref<Eigen::VectorXd> grad) {
  require(static_cast<std::size_t>(grad.size()) == params.size(), "gradient length mismatch");
  const Eigen::Index b = tape.batch;
  const Eigen::Index dirs = static_cast<Eigen::Index>(spec.input_dim);
  const std::size_t layers = spec.num_layers();
  Eigen::MatrixXd upstream(static_cast<Eigen::Index>(spec.output_dim), b * (dirs + 1));
  upstream.leftCols(b) = adjoint.value;
  for (Eigen::Index k = 0; k < dirs; ++k) upstream.middleCols(b * (k + 1), b) = adjoint.tangent[k];

  for (std::size_t l = layers; l-- > 0;) {
    const auto& s = params.layout[l];
    Eigen::Map<RowMajorMatrix> gw(grad.data() + s.weight_offset, static_cast<Eigen::Index>(s.rows),
                                  static_cast<Eigen::Index>(s.cols));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + s.bias_offset, static_cast<Eigen::Index>(s.rows));
    gw.noalias() += upstream * tape.layer_input[l].transpose();
    gb += upstream.leftCols(b).rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd down = params.weight(l).transpose() * upstream;
    // Back through the activation of layer l-1 (value and tangent blocks).
    const Eigen::MatrixXd& z = tape.preactivation[l - 1];
    upstream.resize(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < b; ++c) {
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double sig = activation::sigmoid(z(r, c));
        const double curv = sig * (1.0 - sig);
        double acc = sig * down(r, c);
        for (Eigen::Index k = 0; k < dirs; ++k) {
          const Eigen::Index ck = c + b * (k + 1);
          acc += curv * down(r, ck) * z(r, ck);
          upstream(r, ck) = sig * down(r, ck);
        }
        upstream(r, c) = acc;
      }
    }
  }
}

inline Eigen::VectorXd net_forward(const NetworkSpec& spec, const ParameterVector& params,
                                   const Eigen::VectorXd& x) {
  check_params(spec, params);
  require(static_cast<std::size_t>(x.size()) == spec.input_dim, "input dimension mismatch");
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    Eigen::VectorXd z = params.weight(l) * a + params.bias(l);
    if (l + 1 == spec.num_layers()) return z;
    a = z.unaryExpr([](double v) { return activation::softplus(v); });
  }
  return a;
}

// Exact (output_dim x input_dim) Jacobian.
inline Eigen::MatrixXd net_input_jacobian(const NetworkSpec& spec, const ParameterVector& params,
                                          const Eigen::VectorXd& x) {
  const Jet j = net_jet(spec, params, x);
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(spec.output_dim), static_cast<Eigen::Index>(spec.input_dim));
  for (std::size_t k = 0; k < spec.input_dim; ++k) jac.col(static_cast<Eigen::Index>(k)) = j.tangent[k].col(0);
  return jac;
}

struct NetBinding {
  const NetworkSpec* spec;
  const ParameterVector* params;
};

// Gradient of a scalar batch loss with respect to the parameters of one or
// more networks that all see the same inputs. The loss receives each
// network's jet and writes d(loss)/d(jet) into the pre-sized adjoints:
//
//   double loss(std::span<const Jet> outputs, std::span<Jet> adjoints);
//
// The returned gradient concatenates the per-network gradients in order.
template <class LossFn>
double loss_param_gradient(std::span<const NetBinding> nets, const Eigen::MatrixXd& inputs, LossFn&& loss,
                           Eigen::VectorXd& grad, long batch_index = -1) {
  std::vector<JetTape> tapes(nets.size());
  std::vector<Jet> outputs;
  std::vector<Jet> adjoints;
  std::size_t total = 0;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    outputs.push_back(net_jet(*nets[i].spec, *nets[i].params, inputs, &tapes[i]));
    adjoints.push_back(Jet::zeros(nets[i].spec->output_dim, nets[i].spec->input_dim, inputs.cols()));
    total += nets[i].params->size();
  }
  const double value = loss(std::span<const Jet>(outputs), std::span<Jet>(adjoints));
  if (!std::isfinite(value)) throw TrainingDivergence("non-finite loss", batch_index);
  grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
  std::size_t offset = 0;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    const auto n = nets[i].params->size();
    net_jet_backward(*nets[i].spec, *nets[i].params, tapes[i], adjoints[i],
                     grad.segment(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(n)));
    offset += n;
  }
  if (!grad.allFinite()) throw TrainingDivergence("non-finite gradient", batch_index);
  return value;
}

struct OptimizerState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  long step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerState for_size(std::size_t n, double learning_rate = 1e-3) {
    OptimizerState s;
    s.first_moment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    s.second_moment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    s.learning_rate = learning_rate;
    return s;
  }
};

struct AdamResult {
  Eigen::VectorXd params;
  OptimizerState state;
};

/// Adam with bias correction.
inline AdamResult adam_step(OptimizerState state, Eigen::VectorXd params, const Eigen::VectorXd& grad) {
  require(params.size() == grad.size() && state.first_moment.size() == params.size() &&
              state.second_moment.size() == params.size(),
          "adam_step: length mismatch");
  ++state.step_count;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double m = state.first_moment[i] / c1;
    const double v = state.second_moment[i] / c2;
    params[i] -= state.learning_rate * m / (std::sqrt(v) + state.epsilon);
  }
  return {std::move(params), std::move(state)};
}

/// Max over coordinates of |central difference - analytic| / max(1, |analytic|).
inline double finite_diff_check(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& analytic_grad, double h) {
  require(h > 0.0, "finite_diff_check: h must be positive");
  require(x.size() == analytic_grad.size(), "finite_diff_check: length mismatch");
  double worst = 0.0;
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    const double fd = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - analytic_grad[i]) / std::max(1.0, std::abs(analytic_grad[i])));
  }
  return worst;
}

// Checkpoint text format:
//   llearn-network 1
//   input_dim <n>
//   output_dim <m>
//   hidden <count> <w1> <w2> ...
//   activation softplus
//   seed <s>
//   params <count>
//   <one value per line, shortest round-trip representation>
// Values follow the layer declaration order: W (row-major) then b per layer.

struct NetworkCheckpoint {
  NetworkSpec spec;
  ParameterVector params;
  std::uint64_t seed = 0;
};

namespace detail {

inline void write_double(std::ostream& os, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  os.write(buf, res.ptr - buf);
}

inline double read_double(std::istream& is) {
  std::string tok;
  is >> tok;
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw InvalidInput("checkpoint: malformed number '" + tok + "'");
  return v;
}

inline void expect_token(std::istream& is, const std::string& want) {
  std::string tok;
  if (!(is >> tok) || tok != want) throw InvalidInput("checkpoint: expected '" + want + "', got '" + tok + "'");
}

}  // namespace detail

inline void write_network(std::ostream& os, const NetworkCheckpoint& ck) {
  const auto& spec = ck.spec;
  os << "llearn-network 1\n";
  os << "input_dim " << spec.input_dim << "\n";
  os << "output_dim " << spec.output_dim << "\n";
  os << "hidden " << spec.hidden_layers.size();
  for (auto h : spec.hidden_layers) os << ' ' << h;
  os << "\nactivation " << activation_name(spec.activation) << "\n";
  os << "seed " << ck.seed << "\n";
  os << "params " << ck.params.size() << "\n";
  for (Eigen::Index i = 0; i < ck.params.values.size(); ++i) {
    detail::write_double(os, ck.params.values[i]);
    os << '\n';
  }
}

inline NetworkCheckpoint read_network(std::istream& is) {
  NetworkCheckpoint ck;
  detail::expect_token(is, "llearn-network");
  int version = 0;
  is >> version;
  if (version != 1) throw InvalidInput("checkpoint: unsupported network version");
  std::size_t count = 0;
  detail::expect_token(is, "input_dim");
  is >> ck.spec.input_dim;
  detail::expect_token(is, "output_dim");
  is >> ck.spec.output_dim;
  detail::expect_token(is, "hidden");
  is >> count;
  ck.spec.hidden_layers.resize(count);
  for (auto& h : ck.spec.hidden_layers) is >> h;
  detail::expect_token(is, "activation");
  std::string act;
  is >> act;
  ck.spec.activation = parse_activation(act);
  detail::expect_token(is, "seed");
  is >> ck.seed;
  detail::expect_token(is, "params");
  is >> count;
  if (!is) throw InvalidInput("checkpoint: truncated header");
  ck.params = ParameterVector::zeros(ck.spec);
  if (count != ck.params.size()) throw InvalidInput("checkpoint: parameter count does not match spec");
  for (std::size_t i = 0; i < count; ++i) ck.params.values[static_cast<Eigen::Index>(i)] = detail::read_double(is);
  return ck;
}

}  // namespace llearn

#endif  // LLEARN_DIFFCORE_HPP_
