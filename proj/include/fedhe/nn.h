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

// Minimal dense feed-forward network: forward pass that exposes the
// pre-softmax logits, backprop, the two losses the clients optimise, and Adam.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedhe/rng.h"
#include "fedhe/tensor.h"

namespace fedhe {

enum class Activation { kRelu, kTanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

// Architecture of one client network. layer_widths runs from the input
// dimension to the class count, so a spec with n widths has n-1 dense layers.
// The activation is applied after every layer except the last.
struct ModelSpec {
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::kRelu;
  double dropout_rate = 0.0;

  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t class_count() const { return layer_widths.back(); }
  std::size_t layer_count() const { return layer_widths.size() - 1; }

  // Throws DimensionError / std::invalid_argument on a malformed spec.
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Σ_l (w_l · w_{l+1} + w_{l+1}).
std::size_t param_count(const ModelSpec& spec);

// Weight matrix is `in` x `out`, row-major.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Parameter gradients mirror the model layers one-to-one.
using Gradients = std::vector<DenseLayer>;

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Model {
 public:
  // Glorot-uniform weights in ±sqrt(6 / (fan_in + fan_out)), zero biases.
  Model(ModelSpec spec, Rng& rng);

  // All parameters zero. Tests use this to hand-set weights.
  static Model zeros(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Mutable access invalidates outstanding forward traces.
  std::vector<DenseLayer>& mutable_layers();

  std::size_t param_count() const;

  // Fresh process-wide value whenever parameters change, so a trace can only
  // match the model (or an unmodified copy) that produced it.
  std::uint64_t version() const { return version_; }

  // Adam state.
  std::uint64_t step_count() const { return steps_; }
  const Gradients& first_moment() const { return first_moment_; }
  const Gradients& second_moment() const { return second_moment_; }

  friend void optimizer_step(Model& model, const Gradients& grads, double lr,
                             const AdamOptions& options);

 private:
  explicit Model(ModelSpec spec);

  ModelSpec spec_;
  std::vector<DenseLayer> layers_;
  Gradients first_moment_;
  Gradients second_moment_;
  std::uint64_t steps_ = 0;
  std::uint64_t version_ = 0;
};

// Everything backward() needs, plus the logits p and softmax(p) for every row
// of the input batch.
struct ForwardTrace {
  Tensor logits;         // [batch, C]
  Tensor probabilities;  // [batch, C]

  // layer_inputs[l] is what dense layer l consumed (post activation and
  // dropout of the previous layer). pre_activations[l] is layer l's affine
  // output for hidden layers. dropout_scale[l] is empty when no dropout ran.
  std::vector<Tensor> layer_inputs;
  std::vector<Tensor> pre_activations;
  std::vector<std::vector<double>> dropout_scale;

  std::uint64_t model_version = 0;

  std::size_t batch() const { return logits.rows(); }
  std::size_t class_count() const { return logits.cols(); }
  std::span<const double> logits_row(std::size_t r) const {
    return logits.row(r);
  }
  std::span<const double> probabilities_row(std::size_t r) const {
    return probabilities.row(r);
  }
};

// x is either one sample [input_dim] or a batch [B, input_dim]. Dropout
// (inverted, rate from the spec) runs only when train_mode is set, and then
// needs an rng.
ForwardTrace forward(const Model& model, const Tensor& x, bool train_mode,
                     Rng* rng = nullptr);

std::vector<double> softmax(std::span<const double> logits);

// Index of the largest element; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);
std::size_t predict(const ForwardTrace& trace, std::size_t row = 0);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

// -log softmax(p)[label], evaluated as logsumexp(p) - p[label] so it stays
// finite. Gradient is softmax(p) - onehot(label).
LossGrad cross_entropy(std::span<const double> logits, std::size_t label);
LossGrad cross_entropy(const ForwardTrace& trace, std::size_t label,
                       std::size_t row = 0);

// Mean squared error between raw logit vectors: (1/C)·Σ(p - t)².
LossGrad logit_loss(std::span<const double> p, std::span<const double> target);

// Backprop of a per-row loss gradient at the logits ([B, C], same batch as
// the trace). Gradients are summed over rows, so callers that optimise a
// batch mean should pre-scale by 1/B. Throws StateError if the model changed
// since the trace was recorded.
Gradients backward(const Model& model, const ForwardTrace& trace,
                   const Tensor& loss_grad_at_logits);

Gradients zero_gradients(const ModelSpec& spec);

// One Adam step. Throws DimensionError when gradient shapes do not match.
void optimizer_step(Model& model, const Gradients& grads, double lr,
                    const AdamOptions& options = {});

}  // namespace fedhe
