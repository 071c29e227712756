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

#include "fedhe/trainer.h"

#include <stdexcept>
#include <string>

#include "fedhe/error.h"

namespace fedhe {
namespace {

BatchLosses train_batch(ClientState& cs, std::span<const std::size_t> batch,
                        const AverageLogits* targets, double alpha,
                        double lr) {
  const Dataset& data = *cs.data;
  const std::size_t c = cs.model.spec().class_count();
  const double scale = 1.0 / static_cast<double>(batch.size());

  const ForwardTrace trace =
      forward(cs.model, data.gather(batch), /*train_mode=*/true, &cs.rng);

  Tensor grad({batch.size(), c});
  BatchLosses losses;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const std::size_t y = data.label(batch[r]);
    const auto logits = trace.logits_row(r);
    const LossGrad ce = cross_entropy(logits, y);
    losses.private_loss += ce.loss;
    auto g = grad.row(r);
    for (std::size_t i = 0; i < c; ++i) g[i] = ce.grad[i] * scale;

    if (targets != nullptr && targets->has(y)) {
      const LossGrad ll = logit_loss(logits, targets->at(y));
      losses.logit_loss += ll.loss;
      losses.logit_terms += 1;
      // alpha == 0 leaves the gradient untouched, bit for bit.
      if (alpha != 0.0) {
        for (std::size_t i = 0; i < c; ++i) g[i] += alpha * ll.grad[i] * scale;
      }
    }
    cs.accumulator.add(logits, y);
  }
  losses.private_loss *= scale;
  if (losses.logit_terms > 0) {
    losses.logit_loss /= static_cast<double>(losses.logit_terms);
  }

  optimizer_step(cs.model, backward(cs.model, trace, grad), lr);
  return losses;
}

}  // namespace

ClientState::ClientState(std::size_t id, Model model,
                         std::shared_ptr<const Dataset> data, Rng rng,
                         double speed)
    : id(id),
      model(std::move(model)),
      data(std::move(data)),
      accumulator(this->model.spec().class_count()),
      rng(std::move(rng)),
      speed(speed) {
  if (this->data == nullptr || this->data->empty()) {
    throw std::invalid_argument("client " + std::to_string(id) +
                                " has no data");
  }
  if (this->model.spec().class_count() != this->data->class_count()) {
    throw DimensionError("client " + std::to_string(id) +
                         " model class count differs from its dataset");
  }
  if (this->model.spec().input_dim() != this->data->input_dim()) {
    throw DimensionError("client " + std::to_string(id) +
                         " model input_dim differs from its dataset");
  }
  if (!(speed > 0.0)) {
    throw std::invalid_argument("client speed must be positive");
  }
}

BatchLosses train_private_batch(ClientState& cs,
                                std::span<const std::size_t> batch,
                                double lr) {
  return train_batch(cs, batch, nullptr, 0.0, lr);
}

BatchLosses train_combined_batch(ClientState& cs,
                                 std::span<const std::size_t> batch,
                                 double alpha, double lr) {
  if (!cs.latest_average) {
    throw StateError("client " + std::to_string(cs.id) +
                     " has no server logits yet; train privately first");
  }
  return train_batch(cs, batch, &*cs.latest_average, alpha, lr);
}

RoundOutput client_round(ClientState& cs, const AverageLogits* incoming,
                         const TrainOptions& options) {
  if (options.inner_epochs == 0) {
    throw std::invalid_argument("inner_epochs must be at least 1");
  }
  if (incoming != nullptr) cs.latest_average = *incoming;

  TrainReport report;
  report.round = cs.rounds_completed + 1;
  std::size_t logit_terms = 0;
  for (std::size_t e = 0; e < options.inner_epochs; ++e) {
    const std::vector<std::size_t> batch =
        sample_batch(*cs.data, options.batch_size, cs.rng);
    const BatchLosses losses =
        cs.latest_average
            ? train_combined_batch(cs, batch, options.alpha, options.lr)
            : train_private_batch(cs, batch, options.lr);
    report.private_loss += losses.private_loss;
    report.logit_loss += losses.logit_loss * losses.logit_terms;
    logit_terms += losses.logit_terms;
    report.batches += 1;
  }
  report.private_loss /= static_cast<double>(report.batches);
  if (logit_terms > 0) report.logit_loss /= static_cast<double>(logit_terms);
  report.transmitted = true;

  RoundOutput out{finalize(cs.accumulator, cs.id), report};
  cs.rounds_completed += 1;
  cs.last_report = report;
  return out;
}

InstanceLosses instance_losses(const Model& model, std::span<const double> x,
                               std::size_t label, const AverageLogits* targets,
                               double alpha) {
  const ForwardTrace trace = forward(
      model, Tensor::vector({x.begin(), x.end()}), /*train_mode=*/false);
  InstanceLosses out;
  out.private_loss = cross_entropy(trace, label).loss;
  if (targets != nullptr && targets->has(label)) {
    out.logit_loss = logit_loss(trace.logits_row(0), targets->at(label)).loss;
  }
  out.total = out.private_loss + alpha * out.logit_loss;
  return out;
}

}  // namespace fedhe
