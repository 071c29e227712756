// Copyright 2026 The FedHe Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedhe/nn.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "fedhe/error.h"

namespace fedhe {
namespace {

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

Gradients shaped_like(const ModelSpec& spec) {
  Gradients out;
  out.reserve(spec.layer_count());
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.layer_widths[l];
    const std::size_t width = spec.layer_widths[l + 1];
    out.push_back(DenseLayer{in, width, std::vector<double>(in * width, 0.0),
                             std::vector<double>(width, 0.0)});
  }
  return out;
}

double activate(Activation a, double z) {
  return a == Activation::kRelu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through the pre-activation value.
double activate_grad(Activation a, double z) {
  if (a == Activation::kRelu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

// out[b, :] = bias + in[b, :] · W
void affine(const DenseLayer& layer, const Tensor& in, Tensor& out) {
  const std::size_t batch = in.rows();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* x = in.data().data() + b * layer.in;
    double* y = out.data().data() + b * layer.out;
    std::copy(layer.bias.begin(), layer.bias.end(), y);
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* w = layer.weights.data() + i * layer.out;
      for (std::size_t j = 0; j < layer.out; ++j) y[j] += xi * w[j];
    }
  }
}

void check_same_shape(const Gradients& a, const Gradients& b) {
  if (a.size() != b.size()) {
    throw DimensionError("gradient has " + std::to_string(b.size()) +
                         " layers, model has " + std::to_string(a.size()));
  }
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].weights.size() != b[l].weights.size() ||
        a[l].bias.size() != b[l].bias.size()) {
      throw DimensionError("gradient shape mismatch at layer " +
                           std::to_string(l));
    }
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation '" + std::string(name) +
                              "' (expected relu or tanh)");
}

void ModelSpec::validate() const {
  if (layer_widths.size() < 2) {
    throw DimensionError("model spec needs at least 2 layer widths");
  }
  for (std::size_t w : layer_widths) {
    if (w == 0) throw DimensionError("layer widths must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
}

std::size_t param_count(const ModelSpec& spec) {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    total += spec.layer_widths[l] * spec.layer_widths[l + 1] +
             spec.layer_widths[l + 1];
  }
  return total;
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  layers_ = shaped_like(spec_);
  first_moment_ = shaped_like(spec_);
  second_moment_ = shaped_like(spec_);
  version_ = next_version();
}

Model::Model(ModelSpec spec, Rng& rng) : Model(std::move(spec)) {
  for (DenseLayer& layer : layers_) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (double& w : layer.weights) w = rng.uniform(-limit, limit);
  }
}

Model Model::zeros(ModelSpec spec) { return Model(std::move(spec)); }

std::vector<DenseLayer>& Model::mutable_layers() {
  version_ = next_version();
  return layers_;
}

std::size_t Model::param_count() const { return fedhe::param_count(spec_); }

ForwardTrace forward(const Model& model, const Tensor& x, bool train_mode,
                     Rng* rng) {
  const ModelSpec& spec = model.spec();
  if (x.rank() > 2 || x.cols() != spec.input_dim()) {
    throw DimensionError("input has " + std::to_string(x.cols()) +
                         " features, model expects " +
                         std::to_string(spec.input_dim()));
  }
  const bool dropout = train_mode && spec.dropout_rate > 0.0;
  if (dropout && rng == nullptr) {
    throw StateError("train-mode forward with dropout needs an rng");
  }
  const std::size_t batch = x.rows();
  const std::size_t layers = spec.layer_count();

  ForwardTrace trace;
  trace.model_version = model.version();
  trace.layer_inputs.reserve(layers);
  trace.pre_activations.reserve(layers);
  trace.dropout_scale.resize(layers);
  trace.layer_inputs.push_back(Tensor({batch, spec.input_dim()},
                                      {x.data().begin(), x.data().end()}));

  const double keep = 1.0 - spec.dropout_rate;
  for (std::size_t l = 0; l < layers; ++l) {
    const DenseLayer& layer = model.layers()[l];
    Tensor z({batch, layer.out});
    affine(layer, trace.layer_inputs[l], z);
    if (l + 1 == layers) {
      trace.logits = std::move(z);
      break;
    }
    Tensor h({batch, layer.out});
    for (std::size_t i = 0; i < z.size(); ++i) {
      h.data()[i] = activate(spec.activation, z.data()[i]);
    }
    if (dropout) {
      std::vector<double>& scale = trace.dropout_scale[l + 1];
      scale.resize(h.size());
      for (std::size_t i = 0; i < h.size(); ++i) {
        scale[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
        h.data()[i] *= scale[i];
      }
    }
    trace.pre_activations.push_back(std::move(z));
    trace.layer_inputs.push_back(std::move(h));
  }

  trace.probabilities = Tensor({batch, spec.class_count()});
  for (std::size_t b = 0; b < batch; ++b) {
    const std::vector<double> p = softmax(trace.logits.row(b));
    std::copy(p.begin(), p.end(), trace.probabilities.row(b).begin());
  }
  return trace;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  // max_element returns the first maximum.
  return static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
}

std::size_t predict(const ForwardTrace& trace, std::size_t row) {
  return argmax(trace.probabilities_row(row));
}

LossGrad cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw std::out_of_range("label " + std::to_string(label) +
                            " outside [0, " + std::to_string(logits.size()) +
                            ")");
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double p : logits) total += std::exp(p - peak);
  const double log_norm = peak + std::log(total);

  LossGrad out;
  out.loss = log_norm - logits[label];
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.grad[i] = std::exp(logits[i] - log_norm);
  }
  out.grad[label] -= 1.0;
  return out;
}

LossGrad cross_entropy(const ForwardTrace& trace, std::size_t label,
                       std::size_t row) {
  return cross_entropy(trace.logits_row(row), label);
}

LossGrad logit_loss(std::span<const double> p, std::span<const double> target) {
  if (p.size() != target.size() || p.empty()) {
    throw DimensionError("logit length " + std::to_string(p.size()) +
                         " vs target length " + std::to_string(target.size()));
  }
  const double n = static_cast<double>(p.size());
  LossGrad out;
  out.grad.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - target[i];
    out.loss += d * d;
    out.grad[i] = 2.0 * d / n;
  }
  out.loss /= n;
  return out;
}

Gradients zero_gradients(const ModelSpec& spec) { return shaped_like(spec); }

Gradients backward(const Model& model, const ForwardTrace& trace,
                   const Tensor& loss_grad_at_logits) {
  if (trace.model_version != model.version()) {
    throw StateError("forward trace is stale: model changed since forward()");
  }
  const ModelSpec& spec = model.spec();
  const std::size_t batch = trace.batch();
  if (loss_grad_at_logits.rows() != batch ||
      loss_grad_at_logits.cols() != spec.class_count()) {
    throw DimensionError("loss gradient must be [batch, C]");
  }

  Gradients grads = shaped_like(spec);
  // delta holds d loss / d (affine output of layer l), [batch, out_l].
  std::vector<double> delta(loss_grad_at_logits.data().begin(),
                            loss_grad_at_logits.data().end());

  for (std::size_t l = spec.layer_count(); l-- > 0;) {
    const DenseLayer& layer = model.layers()[l];
    DenseLayer& g = grads[l];
    const Tensor& input = trace.layer_inputs[l];

    for (std::size_t b = 0; b < batch; ++b) {
      const double* d = delta.data() + b * layer.out;
      const double* a = input.data().data() + b * layer.in;
      for (std::size_t j = 0; j < layer.out; ++j) g.bias[j] += d[j];
      for (std::size_t i = 0; i < layer.in; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        double* gw = g.weights.data() + i * layer.out;
        for (std::size_t j = 0; j < layer.out; ++j) gw[j] += ai * d[j];
      }
    }
    if (l == 0) break;

    // Through W, then the dropout mask, then the activation of layer l-1.
    std::vector<double> upstream(batch * layer.in, 0.0);
    const Tensor& z = trace.pre_activations[l - 1];
    const std::vector<double>& scale = trace.dropout_scale[l];
    for (std::size_t b = 0; b < batch; ++b) {
      const double* d = delta.data() + b * layer.out;
      double* u = upstream.data() + b * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) {
        const double* w = layer.weights.data() + i * layer.out;
        double acc = 0.0;
        for (std::size_t j = 0; j < layer.out; ++j) acc += w[j] * d[j];
        const std::size_t k = b * layer.in + i;
        if (!scale.empty()) acc *= scale[k];
        u[i] = acc * activate_grad(spec.activation, z.data()[k]);
      }
    }
    delta = std::move(upstream);
  }
  return grads;
}

void optimizer_step(Model& model, const Gradients& grads, double lr,
                    const AdamOptions& options) {
  check_same_shape(model.layers_, grads);
  model.steps_ += 1;
  const double t = static_cast<double>(model.steps_);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);

  auto update = [&](std::vector<double>& w, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  };
  for (std::size_t l = 0; l < grads.size(); ++l) {
    update(model.layers_[l].weights, grads[l].weights,
           model.first_moment_[l].weights, model.second_moment_[l].weights);
    update(model.layers_[l].bias, grads[l].bias, model.first_moment_[l].bias,
           model.second_moment_[l].bias);
  }
  model.version_ = next_version();
}

}  // namespace fedhe
