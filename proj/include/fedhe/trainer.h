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

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>

#include "fedhe/data.h"
#include "fedhe/nn.h"
#include "fedhe/protocol.h"
#include "fedhe/rng.h"

namespace fedhe {

struct TrainReport {
  std::size_t round = 0;
  double private_loss = 0.0;  // mean cross-entropy over all trained instances
  double logit_loss = 0.0;    // mean over instances that had a target
  std::size_t batches = 0;
  bool transmitted = false;
};

// One client: its model, private data, logit accumulator and random stream.
struct ClientState {
  ClientState(std::size_t id, Model model, std::shared_ptr<const Dataset> data,
              Rng rng, double speed);

  std::size_t id;
  Model model;
  std::shared_ptr<const Dataset> data;
  ClassLogitAccumulator accumulator;
  std::optional<AverageLogits> latest_average;
  Rng rng;
  double speed;  // simulated seconds per round
  std::size_t rounds_completed = 0;
  TrainReport last_report;
};

struct TrainOptions {
  double lr = 0.001;
  double alpha = 1.0;
  std::size_t inner_epochs = 3;
  std::size_t batch_size = 32;
};

struct BatchLosses {
  double private_loss = 0.0;  // batch mean
  double logit_loss = 0.0;    // mean over instances with a target
  std::size_t logit_terms = 0;
};

// One Adam step on the batch-mean cross-entropy. Logits from the training
// forward pass (dropout active) go into the accumulator.
BatchLosses train_private_batch(ClientState& cs,
                                std::span<const std::size_t> batch, double lr);

// One Adam step on the batch mean of cross_entropy + alpha·logit_loss(p,
// p_s[y]). Instances whose class has no server average train on
// cross-entropy only. Requires cs.latest_average (StateError otherwise).
BatchLosses train_combined_batch(ClientState& cs,
                                 std::span<const std::size_t> batch,
                                 double alpha, double lr);

struct RoundOutput {
  LogitUpdate update;
  TrainReport report;
};

// inner_epochs batches (combined once any server average has been received,
// private before that), then finalize the accumulator into a LogitUpdate.
// A non-null `incoming` replaces cs.latest_average first.
RoundOutput client_round(ClientState& cs, const AverageLogits* incoming,
                         const TrainOptions& options);

struct InstanceLosses {
  double private_loss = 0.0;
  double logit_loss = 0.0;
  double total = 0.0;
};

// Evaluation-mode losses for one instance. logit_loss is 0 when `targets`
// is null or lacks the label.
InstanceLosses instance_losses(const Model& model, std::span<const double> x,
                               std::size_t label, const AverageLogits* targets,
                               double alpha);

}  // namespace fedhe
