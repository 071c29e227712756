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

#include "fedhe/orchestrator.h"

#include <algorithm>
#include <numeric>
#include <string>

#include "fedhe/error.h"
#include "fedhe/format.h"

namespace fedhe {
namespace {

constexpr std::size_t kEvalChunk = 512;

std::string client_list(const std::vector<std::size_t>& ids) {
  std::string out;
  for (std::size_t id : ids) {
    if (!out.empty()) out += ", ";
    out += std::to_string(id);
  }
  return out;
}

std::vector<ClientState> make_clients(const ExperimentConfig& cfg,
                                      const PreparedData& data) {
  std::vector<ClientState> clients;
  clients.reserve(cfg.clients);
  for (std::size_t k = 0; k < cfg.clients; ++k) {
    const ModelSpec spec =
        model_spec_for(cfg.client_specs[k], data.input_dim, data.class_count);
    Rng init = Rng::derive(cfg.seed, "init", k);
    clients.emplace_back(k, Model(spec, init), data.clients[k],
                         Rng::derive(cfg.seed, "client", k),
                         cfg.client_specs[k].speed);
  }
  return clients;
}

TrainOptions train_options(const ExperimentConfig& cfg) {
  return TrainOptions{cfg.lr, cfg.alpha, cfg.inner_epochs, cfg.batch_size};
}

MetricsRow snapshot(double time, std::size_t round,
                    std::span<const ClientState> clients,
                    const CommLedger& ledger, const Dataset& test) {
  MetricsRow row;
  row.time = time;
  row.round = round;
  for (const ClientState& cs : clients) {
    row.accuracy.push_back(accuracy(cs.model, test));
    row.loss.push_back(cs.last_report.private_loss);
  }
  row.mean_accuracy =
      std::accumulate(row.accuracy.begin(), row.accuracy.end(), 0.0) /
      static_cast<double>(row.accuracy.size());
  row.comm = ledger.client_totals();
  row.comm_total = ledger.total();
  return row;
}

class MetricsLog {
 public:
  MetricsLog(RunResult& result, const RunObserver& observer)
      : result_(result), observer_(observer) {}

  void emit(MetricsRow row) {
    if (observer_.on_metrics) observer_.on_metrics(row);
    result_.rows.push_back(std::move(row));
  }

  bool last_is(double time, std::size_t round) const {
    return !result_.rows.empty() && result_.rows.back().time == time &&
           result_.rows.back().round == round;
  }

 private:
  RunResult& result_;
  const RunObserver& observer_;
};

void finish(RunResult& result, std::vector<ClientState>& clients) {
  for (ClientState& cs : clients) {
    result.rounds_per_client.push_back(cs.rounds_completed);
    result.models.push_back(std::move(cs.model));
  }
}

// Shared by FedHe and Private; `exchange` switches the server on.
RunResult run_event_loop(const ExperimentConfig& cfg, const PreparedData& data,
                         const RunObserver& observer, bool exchange) {
  std::vector<ClientState> clients = make_clients(cfg, data);
  const TrainOptions options = train_options(cfg);

  RunResult result;
  result.method = exchange ? Method::kFedHe : cfg.method;
  result.ledger = CommLedger(result.method, cfg.clients);
  MetricsLog log(result, observer);
  ServerLogitStore store(data.class_count, cfg.store_mode);

  EventQueue queue;
  for (std::size_t k = 0; k < clients.size(); ++k) {
    queue.push(clients[k].speed, EventKind::kClientFinishes, k);
  }
  if (cfg.eval_every > 0.0) queue.push(cfg.eval_every, EventKind::kEvaluate);

  double now = 0.0;
  while (!queue.empty()) {
    const SimEvent event = queue.pop();
    if (cfg.horizon > 0.0 && event.time > cfg.horizon) break;
    now = event.time;

    if (event.kind == EventKind::kEvaluate) {
      log.emit(snapshot(now, result.server_events, clients, result.ledger,
                        data.test));
      queue.push(now + cfg.eval_every, EventKind::kEvaluate);
      continue;
    }

    ClientState& cs = clients[event.client];
    RoundOutput out = client_round(cs, nullptr, options);
    if (exchange) {
      const std::size_t round = cs.rounds_completed;
      result.ledger.record(cs.id, round, MessageKind::kLogitsUp,
                           out.update.wire_floats());
      store.receive(out.update);
      AverageLogits reply = store.average();
      result.ledger.record(cs.id, round, MessageKind::kAverageLogitsDown,
                           reply.wire_floats());
      if (observer.on_exchange) observer.on_exchange(out.update, reply);
      cs.latest_average = std::move(reply);
    }
    result.server_events += 1;
    if (observer.after_round) observer.after_round(result.server_events, clients);
    if (cfg.rounds > 0 && result.server_events == cfg.rounds) break;
    queue.push(now + cs.speed, EventKind::kClientFinishes, cs.id);
  }

  if (!log.last_is(now, result.server_events)) {
    log.emit(snapshot(now, result.server_events, clients, result.ledger,
                      data.test));
  }
  result.end_time = now;
  finish(result, clients);
  return result;
}

// Drives synchronous methods: `round_body` runs one full round, then the
// clock advances by the slowest client's speed.
template <typename RoundBody>
RunResult run_synchronous(const ExperimentConfig& cfg, const PreparedData& data,
                          const RunObserver& observer,
                          std::vector<ClientState>& clients,
                          RoundBody&& round_body) {
  RunResult result;
  result.method = cfg.method;
  result.ledger = CommLedger(cfg.method, cfg.clients);
  MetricsLog log(result, observer);

  double round_time = 0.0;
  for (const ClientState& cs : clients) {
    round_time = std::max(round_time, cs.speed);
  }
  double now = 0.0;
  double next_eval = cfg.eval_every;
  for (std::size_t round = 1;; ++round) {
    if (cfg.rounds > 0 && round > cfg.rounds) break;
    if (cfg.horizon > 0.0 && now + round_time > cfg.horizon) break;
    round_body(round, result.ledger);
    now += round_time;
    result.server_events = round;
    if (observer.after_round) observer.after_round(round, clients);
    if (cfg.eval_every > 0.0 && now >= next_eval) {
      log.emit(snapshot(now, round, clients, result.ledger, data.test));
      while (next_eval <= now) next_eval += cfg.eval_every;
    }
  }
  if (!log.last_is(now, result.server_events)) {
    log.emit(snapshot(now, result.server_events, clients, result.ledger,
                      data.test));
  }
  result.end_time = now;
  finish(result, clients);
  return result;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (clients == 0) throw ConfigError("clients", "must be at least 1");
  if (client_specs.size() != clients) {
    throw ConfigError("clients", "clients = " + std::to_string(clients) +
                                     " but " +
                                     std::to_string(client_specs.size()) +
                                     " client model specs are given");
  }
  if (rounds == 0 && !(horizon > 0.0)) {
    throw ConfigError("rounds", "must be positive (or set a positive horizon)");
  }
  if (horizon < 0.0) throw ConfigError("horizon", "must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size", "must be at least 1");
  if (inner_epochs == 0) throw ConfigError("inner_epochs", "must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("lr", "must be positive");
  if (!(alpha >= 0.0)) throw ConfigError("alpha", "must be >= 0");
  if (!(eval_every >= 0.0)) throw ConfigError("eval_every", "must be >= 0");

  for (std::size_t k = 0; k < client_specs.size(); ++k) {
    const ClientConfig& c = client_specs[k];
    const std::string prefix = "client." + std::to_string(k) + ".";
    for (std::size_t w : c.hidden) {
      if (w == 0) throw ConfigError(prefix + "hidden", "widths must be positive");
    }
    if (!(c.dropout >= 0.0 && c.dropout < 1.0)) {
      throw ConfigError(prefix + "dropout", "must lie in [0, 1)");
    }
    if (!(c.speed > 0.0)) throw ConfigError(prefix + "speed", "must be positive");
  }

  if (method == Method::kFedAvg) {
    std::vector<std::size_t> offending;
    for (std::size_t k = 1; k < client_specs.size(); ++k) {
      const ClientConfig& a = client_specs[0];
      const ClientConfig& b = client_specs[k];
      if (a.hidden != b.hidden || a.activation != b.activation ||
          a.dropout != b.dropout) {
        offending.push_back(k);
      }
    }
    if (!offending.empty()) {
      throw ConfigError("method",
                        "fedavg needs homogeneous models; clients " +
                            client_list(offending) +
                            " differ from client 0");
    }
  }
  if (method == Method::kFedMD) {
    if (n_public == 0) throw ConfigError("n_public", "must be at least 1");
    if (!(public_fraction > 0.0 && public_fraction < 1.0)) {
      throw ConfigError("public_fraction", "must lie in (0, 1)");
    }
  }

  if (data.kind == DataSourceKind::kSynthetic) {
    if (data.classes < 2) throw ConfigError("synthetic.classes", "must be >= 2");
    if (data.dim == 0) throw ConfigError("synthetic.dim", "must be positive");
    if (data.per_class == 0) {
      throw ConfigError("synthetic.per_class", "must be positive");
    }
    if (!(data.noise >= 0.0)) throw ConfigError("synthetic.noise", "must be >= 0");
  } else {
    if (data.train_images.empty()) {
      throw ConfigError("idx.train_images", "path required");
    }
    if (data.train_labels.empty()) {
      throw ConfigError("idx.train_labels", "path required");
    }
    if (data.test_images.empty() != data.test_labels.empty()) {
      throw ConfigError("idx.test_images",
                        "test images and labels must be given together");
    }
  }
  const bool needs_split =
      data.kind == DataSourceKind::kSynthetic || data.test_images.empty();
  if (needs_split && !(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
    throw ConfigError("test_fraction", "must lie in (0, 1)");
  }
}

ModelSpec model_spec_for(const ClientConfig& client, std::size_t input_dim,
                         std::size_t class_count) {
  ModelSpec spec;
  spec.layer_widths.push_back(input_dim);
  spec.layer_widths.insert(spec.layer_widths.end(), client.hidden.begin(),
                           client.hidden.end());
  spec.layer_widths.push_back(class_count);
  spec.activation = client.activation;
  spec.dropout_rate = client.dropout;
  return spec;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  const DataSource& src = cfg.data;
  Dataset full;
  std::optional<Dataset> given_test;
  if (src.kind == DataSourceKind::kSynthetic) {
    SyntheticOptions opts{src.separation, src.noise};
    full = gen_synthetic(src.classes, src.dim, src.per_class,
                         Rng::derive(cfg.seed, "synthetic").next_u64(), opts);
  } else {
    full = load_idx(src.train_images, src.train_labels);
    if (!src.test_images.empty()) {
      given_test = load_idx(src.test_images, src.test_labels);
    }
  }
  if (src.limit > 0 && src.limit < full.size()) {
    full = split_holdout(full,
                         1.0 - static_cast<double>(src.limit) /
                                   static_cast<double>(full.size()),
                         Rng::derive(cfg.seed, "subset").next_u64())
               .kept;
  }

  Dataset train;
  Dataset test;
  if (given_test) {
    train = std::move(full);
    test = std::move(*given_test);
  } else {
    Holdout split = split_holdout(full, src.test_fraction,
                                  Rng::derive(cfg.seed, "split").next_u64());
    train = std::move(split.kept);
    test = std::move(split.held_out);
  }

  const Dataset others[] = {test};
  MeanSubtracted centred = subtract_mean(train, others);

  PreparedData out;
  out.input_dim = train.input_dim();
  out.class_count = train.class_count();
  out.test = std::move(centred.others.front());
  Dataset private_pool = std::move(centred.train);
  if (cfg.method == Method::kFedMD) {
    Holdout pub = split_holdout(private_pool, cfg.public_fraction,
                                Rng::derive(cfg.seed, "public").next_u64());
    private_pool = std::move(pub.kept);
    out.public_set = std::move(pub.held_out);
  }
  if (cfg.clients > private_pool.size()) {
    throw ConfigError("clients", "more clients than training samples (" +
                                     std::to_string(private_pool.size()) + ")");
  }
  Partition part = partition_iid(private_pool, cfg.clients,
                                 Rng::derive(cfg.seed, "partition").next_u64());
  for (Dataset& d : part.clients) {
    out.clients.push_back(std::make_shared<const Dataset>(std::move(d)));
  }
  return out;
}

CommParams comm_params(const ExperimentConfig& cfg, const PreparedData& data) {
  CommParams p;
  p.class_count = data.class_count;
  p.input_dim = data.input_dim;
  p.n_public = cfg.n_public;
  p.param_count =
      cfg.reported_param_count > 0
          ? cfg.reported_param_count
          : param_count(model_spec_for(cfg.client_specs.front(),
                                       data.input_dim, data.class_count));
  return p;
}

const SimEvent& EventQueue::push(double time, EventKind kind,
                                 std::size_t client) {
  last_pushed_ = SimEvent{time, kind, client, next_sequence_++};
  heap_.push(last_pushed_);
  return last_pushed_;
}

SimEvent EventQueue::pop() {
  SimEvent top = heap_.top();
  heap_.pop();
  return top;
}

std::string metrics_header(std::size_t clients) {
  std::string h = "time,round";
  for (std::size_t k = 0; k < clients; ++k) h += ",acc_" + std::to_string(k);
  h += ",mean_acc";
  for (std::size_t k = 0; k < clients; ++k) h += ",loss_" + std::to_string(k);
  for (std::size_t k = 0; k < clients; ++k) h += ",comm_" + std::to_string(k);
  h += ",comm_total";
  return h;
}

void write_metrics_row(std::ostream& out, const MetricsRow& row) {
  out << format_double(row.time) << ',' << row.round;
  for (double a : row.accuracy) out << ',' << format_double(a);
  out << ',' << format_double(row.mean_accuracy);
  for (double l : row.loss) out << ',' << format_double(l);
  for (std::uint64_t c : row.comm) out << ',' << c;
  out << ',' << row.comm_total << '\n';
}

void write_metrics_csv(std::ostream& out, std::size_t clients,
                       std::span<const MetricsRow> rows) {
  out << metrics_header(clients) << '\n';
  for (const MetricsRow& row : rows) write_metrics_row(out, row);
}

RunResult run_fedhe(const ExperimentConfig& cfg, const PreparedData& data,
                    const RunObserver& observer) {
  return run_event_loop(cfg, data, observer, cfg.exchange_logits);
}

RunResult run_private(const ExperimentConfig& cfg, const PreparedData& data,
                      const RunObserver& observer) {
  RunResult result = run_event_loop(cfg, data, observer, /*exchange=*/false);
  result.method = Method::kPrivate;
  return result;
}

RunResult run_fedavg(const ExperimentConfig& cfg, const PreparedData& data,
                     const RunObserver& observer) {
  ExperimentConfig checked = cfg;
  checked.method = Method::kFedAvg;
  checked.validate();

  std::vector<ClientState> clients = make_clients(cfg, data);
  const TrainOptions options = train_options(cfg);
  Model global = clients.front().model;
  const std::uint64_t weight_floats = global.param_count();

  std::vector<std::size_t> sizes;
  for (const ClientState& cs : clients) sizes.push_back(cs.data->size());

  return run_synchronous(
      checked, data, observer, clients,
      [&](std::size_t round, CommLedger& ledger) {
        std::vector<const Model*> trained;
        for (ClientState& cs : clients) {
          cs.model.mutable_layers() = global.layers();
          ledger.record(cs.id, round, MessageKind::kWeightsDown, weight_floats);
          client_round(cs, nullptr, options);
          ledger.record(cs.id, round, MessageKind::kWeightsUp, weight_floats);
          trained.push_back(&cs.model);
        }
        global.mutable_layers() = fedavg_aggregate(trained, sizes);
        // Clients hold the new global model between rounds so evaluation sees
        // it; the next round's broadcast is what gets charged.
        for (ClientState& cs : clients) {
          cs.model.mutable_layers() = global.layers();
        }
      });
}

RunResult run_fedmd_lite(const ExperimentConfig& cfg, const PreparedData& data,
                         const RunObserver& observer) {
  if (cfg.n_public == 0) throw ConfigError("n_public", "must be at least 1");
  if (cfg.n_public > data.public_set.size()) {
    throw ConfigError("n_public", std::to_string(cfg.n_public) +
                                      " exceeds the public set of " +
                                      std::to_string(data.public_set.size()) +
                                      " samples");
  }
  std::vector<ClientState> clients = make_clients(cfg, data);
  const TrainOptions options = train_options(cfg);
  Rng public_rng = Rng::derive(cfg.seed, "public-sample");
  const std::size_t n = cfg.n_public;
  const std::size_t c = data.class_count;

  return run_synchronous(
      cfg, data, observer, clients,
      [&](std::size_t round, CommLedger& ledger) {
        const std::vector<std::size_t> picks =
            sample_batch(data.public_set, n, public_rng);
        const Tensor x = data.public_set.gather(picks);

        std::vector<ForwardTrace> traces;
        std::vector<Tensor> logits;
        for (ClientState& cs : clients) {
          ledger.record(cs.id, round, MessageKind::kPublicSamplesDown,
                        std::uint64_t{n} * data.input_dim);
          traces.push_back(forward(cs.model, x, /*train_mode=*/false));
          logits.push_back(traces.back().logits);
          ledger.record(cs.id, round, MessageKind::kPublicLogitsUp,
                        std::uint64_t{n} * c);
        }
        const Tensor consensus = fedmd_consensus(logits);

        for (std::size_t k = 0; k < clients.size(); ++k) {
          ClientState& cs = clients[k];
          Tensor grad({n, c});
          for (std::size_t r = 0; r < n; ++r) {
            const LossGrad ll =
                logit_loss(traces[k].logits_row(r), consensus.row(r));
            for (std::size_t i = 0; i < c; ++i) {
              grad.at(r, i) = ll.grad[i] / static_cast<double>(n);
            }
          }
          optimizer_step(cs.model, backward(cs.model, traces[k], grad),
                         options.lr);
          client_round(cs, nullptr, options);
        }
      });
}

RunResult run_experiment(const ExperimentConfig& cfg,
                         const RunObserver& observer) {
  cfg.validate();
  const PreparedData data = prepare_data(cfg);
  switch (cfg.method) {
    case Method::kFedHe:
      return run_fedhe(cfg, data, observer);
    case Method::kPrivate:
      return run_private(cfg, data, observer);
    case Method::kFedAvg:
      return run_fedavg(cfg, data, observer);
    case Method::kFedMD:
      return run_fedmd_lite(cfg, data, observer);
  }
  throw ConfigError("method", "unknown method");
}

std::vector<DenseLayer> fedavg_aggregate(std::span<const Model* const> models,
                                         std::span<const std::size_t> sizes) {
  if (models.empty() || models.size() != sizes.size()) {
    throw DimensionError("need one dataset size per model");
  }
  const ModelSpec& spec = models.front()->spec();
  std::size_t total = 0;
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k]->spec().layer_widths != spec.layer_widths) {
      throw DimensionError("fedavg_aggregate: model " + std::to_string(k) +
                           " has a different architecture");
    }
    total += sizes[k];
  }
  if (total == 0) throw DimensionError("fedavg_aggregate: no samples");

  std::vector<DenseLayer> out = zero_gradients(spec);
  for (std::size_t k = 0; k < models.size(); ++k) {
    const double n = static_cast<double>(sizes[k]);
    const std::vector<DenseLayer>& layers = models[k]->layers();
    for (std::size_t l = 0; l < out.size(); ++l) {
      for (std::size_t i = 0; i < out[l].weights.size(); ++i) {
        out[l].weights[i] += n * layers[l].weights[i];
      }
      for (std::size_t i = 0; i < out[l].bias.size(); ++i) {
        out[l].bias[i] += n * layers[l].bias[i];
      }
    }
  }
  const double denom = static_cast<double>(total);
  for (DenseLayer& layer : out) {
    for (double& w : layer.weights) w /= denom;
    for (double& b : layer.bias) b /= denom;
  }
  return out;
}

Tensor fedmd_consensus(std::span<const Tensor> client_logits) {
  if (client_logits.empty()) throw DimensionError("no client logits");
  Tensor out(client_logits.front().shape());
  for (const Tensor& t : client_logits) {
    if (t.shape() != out.shape()) {
      throw DimensionError("client logit tensors differ in shape");
    }
    for (std::size_t i = 0; i < t.size(); ++i) out.data()[i] += t.data()[i];
  }
  const double k = static_cast<double>(client_logits.size());
  for (double& v : out.data()) v /= k;
  return out;
}

double accuracy(const Model& model, const Dataset& test) {
  if (test.empty()) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < test.size(); start += kEvalChunk) {
    const std::size_t end = std::min(test.size(), start + kEvalChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const ForwardTrace trace =
        forward(model, test.gather(idx), /*train_mode=*/false);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (predict(trace, r) == test.label(idx[r])) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::vector<double> evaluate(std::span<const Model> models,
                             const Dataset& test) {
  std::vector<double> out;
  out.reserve(models.size());
  for (const Model& m : models) out.push_back(accuracy(m, test));
  return out;
}

}  // namespace fedhe
