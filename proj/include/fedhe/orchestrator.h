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

// End-to-end experiment runs.
//
// FedHe and Private share one discrete-event loop: each client finishes a
// round every `speed` simulated seconds and the server handles one arrival per
// event, so a slow client never holds anyone else back. FedAvg and the
// simplified FedMD baseline are synchronous: a round lasts as long as the
// slowest client.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "fedhe/data.h"
#include "fedhe/nn.h"
#include "fedhe/protocol.h"
#include "fedhe/trainer.h"

namespace fedhe {

struct ClientConfig {
  std::vector<std::size_t> hidden;  // hidden layer widths, input to output
  Activation activation = Activation::kRelu;
  double dropout = 0.0;
  double speed = 1.0;

  friend bool operator==(const ClientConfig&, const ClientConfig&) = default;
};

enum class DataSourceKind { kSynthetic, kIdx };

struct DataSource {
  DataSourceKind kind = DataSourceKind::kSynthetic;

  // kSynthetic
  std::size_t classes = 10;
  std::size_t dim = 20;
  std::size_t per_class = 100;
  double separation = 2.0;
  double noise = 0.5;

  // kIdx. Without test files, test_fraction of the training file is held out.
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;

  std::size_t limit = 0;  // keep a seeded random subset of this size; 0 = all
  double test_fraction = 0.2;

  friend bool operator==(const DataSource&, const DataSource&) = default;
};

struct ExperimentConfig {
  Method method = Method::kFedHe;
  std::size_t clients = 0;
  // Server events (FedHe, Private) or synchronous rounds (FedAvg, FedMD).
  std::size_t rounds = 0;
  double horizon = 0.0;  // optional simulated-time cap; 0 = none
  std::uint64_t seed = 0;
  DataSource data;
  std::vector<ClientConfig> client_specs;

  std::size_t batch_size = 32;
  std::size_t inner_epochs = 3;
  double alpha = 1.0;
  double lr = 0.001;
  StoreMode store_mode = StoreMode::kLatestPerClient;
  bool exchange_logits = true;  // FedHe only

  double eval_every = 0.0;  // simulated seconds; 0 = final evaluation only

  std::size_t n_public = 10;  // FedMD
  double public_fraction = 0.1;

  // Parameter count used for overhead reporting instead of the count of the
  // configured dense model (lets reports quote an external architecture).
  std::size_t reported_param_count = 0;

  // Throws ConfigError naming the field and constraint.
  void validate() const;

  friend bool operator==(const ExperimentConfig&,
                         const ExperimentConfig&) = default;
};

// Dataset after loading, test split, mean subtraction and partitioning.
struct PreparedData {
  std::vector<std::shared_ptr<const Dataset>> clients;
  Dataset test;
  Dataset public_set;  // FedMD only
  std::size_t input_dim = 0;
  std::size_t class_count = 0;
};

// Everything is seeded from cfg.seed through Rng::derive.
PreparedData prepare_data(const ExperimentConfig& cfg);

ModelSpec model_spec_for(const ClientConfig& client, std::size_t input_dim,
                         std::size_t class_count);

CommParams comm_params(const ExperimentConfig& cfg, const PreparedData& data);

enum class EventKind { kClientFinishes, kEvaluate };

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::kClientFinishes;
  std::size_t client = 0;
  std::uint64_t sequence = 0;
};

// Pops in (time, sequence) order; sequence is assigned at push, so ties go to
// whatever was scheduled first.
class EventQueue {
 public:
  const SimEvent& push(double time, EventKind kind, std::size_t client = 0);
  SimEvent pop();
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.sequence > b.sequence;
    }
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  std::uint64_t next_sequence_ = 0;
  SimEvent last_pushed_;
};

struct MetricsRow {
  double time = 0.0;
  std::size_t round = 0;
  std::vector<double> accuracy;
  double mean_accuracy = 0.0;
  std::vector<double> loss;
  std::vector<std::uint64_t> comm;
  std::uint64_t comm_total = 0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

// Version of the metrics CSV layout below.
inline constexpr int kMetricsSchemaVersion = 1;

std::string metrics_header(std::size_t clients);
void write_metrics_row(std::ostream& out, const MetricsRow& row);
void write_metrics_csv(std::ostream& out, std::size_t clients,
                       std::span<const MetricsRow> rows);

struct RunResult {
  Method method = Method::kFedHe;
  std::vector<MetricsRow> rows;
  CommLedger ledger;
  std::vector<std::size_t> rounds_per_client;
  std::size_t server_events = 0;
  double end_time = 0.0;
  std::vector<Model> models;
};

// Optional callbacks for tests and tracing.
struct RunObserver {
  // After every server event (async) or synchronous round.
  std::function<void(std::size_t round, std::span<const ClientState> clients)>
      after_round;
  // FedHe: each received update together with the average sent back.
  std::function<void(const LogitUpdate& update, const AverageLogits& reply)>
      on_exchange;
  // Streaming metrics; rows are also kept in RunResult.
  std::function<void(const MetricsRow&)> on_metrics;
};

RunResult run_fedhe(const ExperimentConfig& cfg, const PreparedData& data,
                    const RunObserver& observer = {});
RunResult run_private(const ExperimentConfig& cfg, const PreparedData& data,
                      const RunObserver& observer = {});
RunResult run_fedavg(const ExperimentConfig& cfg, const PreparedData& data,
                     const RunObserver& observer = {});
RunResult run_fedmd_lite(const ExperimentConfig& cfg, const PreparedData& data,
                         const RunObserver& observer = {});

// Validates, prepares data and dispatches on cfg.method.
RunResult run_experiment(const ExperimentConfig& cfg,
                         const RunObserver& observer = {});

// Σ_k n_k·w_k / Σ_k n_k, layer by layer. All models must share one spec.
std::vector<DenseLayer> fedavg_aggregate(std::span<const Model* const> models,
                                         std::span<const std::size_t> sizes);

// Per-instance mean of client logits; every entry is [n, C].
Tensor fedmd_consensus(std::span<const Tensor> client_logits);

// Fraction of test samples predicted correctly, evaluation mode.
double accuracy(const Model& model, const Dataset& test);
std::vector<double> evaluate(std::span<const Model> models,
                             const Dataset& test);

}  // namespace fedhe
