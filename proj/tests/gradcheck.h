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

// Finite-difference oracle shared by the unit tests and the acceptance gate.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "fedhe/nn.h"
#include "fedhe/protocol.h"
#include "fedhe/trainer.h"

namespace fedhe::testing {

// Central differences of `loss` with respect to every weight and bias.
inline Gradients numeric_gradient(Model model,
                                  const std::function<double(const Model&)>& loss,
                                  double h = 1e-6) {
  Gradients out = zero_gradients(model.spec());
  for (std::size_t l = 0; l < out.size(); ++l) {
    auto perturb = [&](std::vector<double> DenseLayer::*field,
                       std::vector<double>& dest) {
      for (std::size_t i = 0; i < dest.size(); ++i) {
        const double saved = (model.mutable_layers()[l].*field)[i];
        (model.mutable_layers()[l].*field)[i] = saved + h;
        const double up = loss(model);
        (model.mutable_layers()[l].*field)[i] = saved - h;
        const double down = loss(model);
        (model.mutable_layers()[l].*field)[i] = saved;
        dest[i] = (up - down) / (2.0 * h);
      }
    };
    perturb(&DenseLayer::weights, out[l].weights);
    perturb(&DenseLayer::bias, out[l].bias);
  }
  return out;
}

// Largest |a - n| / max(|a|, |n|) over all parameters. Pairs that agree to
// 1e-9 absolutely count as exact, so parameters with a vanishing gradient do
// not turn rounding noise into a large ratio.
inline double max_relative_error(const Gradients& analytic,
                                 const Gradients& numeric) {
  double worst = 0.0;
  auto scan = [&](const std::vector<double>& a, const std::vector<double>& n) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = std::abs(a[i] - n[i]);
      if (diff < 1e-9) continue;
      worst = std::max(worst, diff / std::max(std::abs(a[i]), std::abs(n[i])));
    }
  };
  for (std::size_t l = 0; l < analytic.size(); ++l) {
    scan(analytic[l].weights, numeric[l].weights);
    scan(analytic[l].bias, numeric[l].bias);
  }
  return worst;
}

inline ModelSpec random_spec(Rng& rng, std::size_t input_dim,
                             std::size_t classes) {
  ModelSpec spec;
  spec.layer_widths.push_back(input_dim);
  const std::size_t hidden = rng.below(3);
  for (std::size_t i = 0; i < hidden; ++i) {
    spec.layer_widths.push_back(2 + rng.below(6));
  }
  spec.layer_widths.push_back(classes);
  spec.activation = rng.below(2) == 0 ? Activation::kTanh : Activation::kRelu;
  return spec;
}

inline Tensor random_batch(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor x({rows, cols});
  for (double& v : x.data()) v = rng.uniform(-1.5, 1.5);
  return x;
}

enum class Objective { kCrossEntropy, kLogitLoss, kCombined };

inline std::string to_string(Objective o) {
  switch (o) {
    case Objective::kCrossEntropy:
      return "cross-entropy";
    case Objective::kLogitLoss:
      return "logit-loss";
    case Objective::kCombined:
      return "combined";
  }
  return "?";
}

// One randomized gradient check. Cross-entropy and logit-loss cases go
// through forward/backward directly. Combined cases run one real
// train_combined_batch and read the gradient it used back out of Adam's first
// moment (m = (1 - beta1)·g after the first step), so the trainer's own loss
// assembly is what gets checked.
inline double gradient_check_case(Rng& rng, Objective objective) {
  const std::size_t classes = 2 + rng.below(5);
  const std::size_t input_dim = 1 + rng.below(5);
  const std::size_t batch = 1 + rng.below(4);
  const ModelSpec spec = random_spec(rng, input_dim, classes);
  Model model(spec, rng);
  // Nonzero biases keep pre-activations off the ReLU kink at exactly 0, which
  // zero biases hit whenever a whole upstream layer is inactive.
  for (DenseLayer& layer : model.mutable_layers()) {
    for (double& b : layer.bias) b = rng.uniform(-0.5, 0.5);
  }
  const Tensor x = random_batch(rng, batch, input_dim);
  std::vector<std::size_t> labels(batch);
  for (auto& y : labels) y = rng.below(classes);
  AverageLogits targets(classes);
  for (std::size_t y = 0; y < classes; ++y) {
    if (rng.below(4) == 0) continue;  // some classes have no target
    std::vector<double> t(classes);
    for (double& v : t) v = rng.uniform(-2.0, 2.0);
    targets.set(y, std::move(t));
  }
  const double alpha = rng.uniform(0.1, 2.0);
  const double scale = 1.0 / static_cast<double>(batch);
  const std::vector<double> zero(classes);

  auto loss_of = [&](const Model& m) {
    const ForwardTrace t = forward(m, x, false);
    double total = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
      const auto logits = t.logits_row(r);
      if (objective != Objective::kLogitLoss) {
        total += cross_entropy(logits, labels[r]).loss;
      }
      if (objective == Objective::kLogitLoss) {
        total += logit_loss(logits, targets.has(labels[r])
                                        ? targets.at(labels[r])
                                        : std::span<const double>(zero))
                     .loss;
      } else if (objective == Objective::kCombined && targets.has(labels[r])) {
        total += alpha * logit_loss(logits, targets.at(labels[r])).loss;
      }
    }
    return total * scale;
  };
  const Gradients numeric = numeric_gradient(model, loss_of);

  Gradients analytic;
  if (objective == Objective::kCombined) {
    std::vector<double> features(x.data().begin(), x.data().end());
    auto data = std::make_shared<const Dataset>(input_dim, classes,
                                                std::move(features), labels);
    ClientState cs(0, model, data, Rng(1), 1.0);
    cs.latest_average = targets;
    std::vector<std::size_t> all(batch);
    std::iota(all.begin(), all.end(), std::size_t{0});
    train_combined_batch(cs, all, alpha, 1e-3);
    analytic = cs.model.first_moment();
    for (DenseLayer& layer : analytic) {
      for (double& v : layer.weights) v /= 1.0 - AdamOptions{}.beta1;
      for (double& v : layer.bias) v /= 1.0 - AdamOptions{}.beta1;
    }
  } else {
    const ForwardTrace t = forward(model, x, false);
    Tensor g({batch, classes});
    for (std::size_t r = 0; r < batch; ++r) {
      const LossGrad lg =
          objective == Objective::kCrossEntropy
              ? cross_entropy(t.logits_row(r), labels[r])
              : logit_loss(t.logits_row(r), targets.has(labels[r])
                                                ? targets.at(labels[r])
                                                : std::span<const double>(zero));
      for (std::size_t c = 0; c < classes; ++c) g.at(r, c) = lg.grad[c] * scale;
    }
    analytic = backward(model, t, g);
  }
  return max_relative_error(analytic, numeric);
}

}  // namespace fedhe::testing
