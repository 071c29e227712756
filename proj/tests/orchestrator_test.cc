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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "fedhe/error.h"

namespace fedhe {
namespace {

ExperimentConfig synthetic_config(Method method, std::size_t clients,
                                  std::size_t rounds) {
  ExperimentConfig cfg;
  cfg.method = method;
  cfg.clients = clients;
  cfg.rounds = rounds;
  cfg.seed = 17;
  cfg.data.kind = DataSourceKind::kSynthetic;
  cfg.data.classes = 10;
  cfg.data.dim = 12;
  cfg.data.per_class = 60;
  for (std::size_t k = 0; k < clients; ++k) {
    cfg.client_specs.push_back({{16}, Activation::kRelu, 0.0, 1.0});
  }
  return cfg;
}

std::string csv_of(const RunResult& r, std::size_t clients) {
  std::ostringstream out;
  write_metrics_csv(out, clients, r.rows);
  return out.str();
}

TEST(EventQueue, PopsByTimeThenPushOrder) {
  EventQueue q;
  q.push(1.0, EventKind::kClientFinishes, 2);
  q.push(1.0, EventKind::kClientFinishes, 0);
  q.push(0.5, EventKind::kClientFinishes, 1);
  q.push(1.0, EventKind::kEvaluate);
  EXPECT_EQ(q.pop().client, 1u);
  EXPECT_EQ(q.pop().client, 2u);
  EXPECT_EQ(q.pop().client, 0u);
  EXPECT_EQ(q.pop().kind, EventKind::kEvaluate);
  EXPECT_TRUE(q.empty());
}

TEST(FedHe, EqualSpeedsServeClientsInIdOrder) {
  const ExperimentConfig cfg = synthetic_config(Method::kFedHe, 4, 12);
  std::vector<std::size_t> order;
  RunObserver obs;
  obs.on_exchange = [&](const LogitUpdate& u, const AverageLogits&) {
    order.push_back(u.client);
  };
  run_experiment(cfg, obs);
  EXPECT_EQ(order, (std::vector<std::size_t>{0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3}));
}

TEST(FedHe, ReplyIsTheAverageOfTheStore) {
  ExperimentConfig cfg = synthetic_config(Method::kFedHe, 3, 9);
  ServerLogitStore mirror(10);
  int checked = 0;
  RunObserver obs;
  obs.on_exchange = [&](const LogitUpdate& u, const AverageLogits& reply) {
    mirror.receive(u);
    EXPECT_EQ(reply, server_average(mirror));
    ++checked;
  };
  run_experiment(cfg, obs);
  EXPECT_EQ(checked, 9);
}

TEST(FedHe, LedgerChargesLogitsUpAndAverageDown) {
  ExperimentConfig cfg = synthetic_config(Method::kFedHe, 3, 30);
  cfg.client_specs[1].speed = 2.0;
  const RunResult r = run_experiment(cfg);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(r.ledger.table_total(k), r.rounds_per_client[k] * 110u);
  }
  for (const CommLedger::Entry& e : r.ledger.entries()) {
    if (e.kind == MessageKind::kLogitsUp) {
      EXPECT_EQ(e.floats, 110u);
    } else {
      EXPECT_EQ(e.kind, MessageKind::kAverageLogitsDown);
      EXPECT_EQ(e.floats % 11, 0u);
      EXPECT_LE(e.floats, 110u);
    }
  }
  EXPECT_EQ(r.server_events, 30u);
  EXPECT_EQ(std::accumulate(r.rounds_per_client.begin(),
                            r.rounds_per_client.end(), std::size_t{0}),
            30u);
}

TEST(FedHe, SingleClientRunsAndTracksPrivate) {
  ExperimentConfig cfg = synthetic_config(Method::kFedHe, 1, 150);
  const RunResult fedhe = run_experiment(cfg);
  cfg.method = Method::kPrivate;
  const RunResult priv = run_experiment(cfg);
  EXPECT_EQ(fedhe.rounds_per_client[0], 150u);
  EXPECT_NEAR(fedhe.rows.back().mean_accuracy, priv.rows.back().mean_accuracy,
              0.05);
}

TEST(FedHe, SlowClientNeverBlocksFastOne) {
  ExperimentConfig cfg = synthetic_config(Method::kFedHe, 2, 0);
  cfg.client_specs[1].speed = 100.0;
  cfg.horizon = 1000.0;
  const RunResult r = run_experiment(cfg);
  ASSERT_GE(r.rounds_per_client[1], 1u);
  EXPECT_GE(r.rounds_per_client[0], 90u * r.rounds_per_client[1]);
  EXPECT_EQ(r.rounds_per_client[0], 1000u);
  EXPECT_EQ(r.rounds_per_client[1], 10u);
}

TEST(FedHe, HorizonAndRoundsBothStopTheLoop) {
  ExperimentConfig cfg = synthetic_config(Method::kFedHe, 2, 0);
  cfg.client_specs[1].speed = 3.0;
  cfg.horizon = 10.0;
  RunResult r = run_experiment(cfg);
  EXPECT_EQ(r.rounds_per_client, (std::vector<std::size_t>{10, 3}));
  EXPECT_EQ(r.end_time, 10.0);
  cfg.rounds = 5;
  r = run_experiment(cfg);
  EXPECT_EQ(r.server_events, 5u);
}

TEST(FedHe, AlphaZeroWithoutExchangeIsPrivate) {
  ExperimentConfig cfg = synthetic_config(Method::kFedHe, 3, 40);
  cfg.client_specs[0].dropout = 0.2;
  cfg.client_specs[2].speed = 1.5;
  cfg.eval_every = 5;
  cfg.alpha = 0.0;
  cfg.exchange_logits = false;
  const RunResult fedhe = run_experiment(cfg);
  cfg.method = Method::kPrivate;
  const RunResult priv = run_experiment(cfg);
  EXPECT_EQ(csv_of(fedhe, 3), csv_of(priv, 3));
  EXPECT_EQ(fedhe.ledger.total(), 0u);
}

TEST(FedHe, AlphaZeroWithExchangeTrainsLikePrivate) {
  ExperimentConfig cfg = synthetic_config(Method::kFedHe, 3, 40);
  cfg.client_specs[0].dropout = 0.2;
  cfg.eval_every = 5;
  cfg.alpha = 0.0;
  const RunResult fedhe = run_experiment(cfg);
  cfg.method = Method::kPrivate;
  const RunResult priv = run_experiment(cfg);
  ASSERT_EQ(fedhe.rows.size(), priv.rows.size());
  for (std::size_t i = 0; i < priv.rows.size(); ++i) {
    EXPECT_EQ(fedhe.rows[i].accuracy, priv.rows[i].accuracy);
    EXPECT_EQ(fedhe.rows[i].loss, priv.rows[i].loss);
  }
  EXPECT_GT(fedhe.ledger.total(), 0u);
}

TEST(Private, NoCommunicationAndSeparableClustersAreLearned) {
  // Server events are shared, so 300 local rounds each takes 5 x 300 events.
  ExperimentConfig cfg = synthetic_config(Method::kPrivate, 5, 1500);
  cfg.data.per_class = 100;
  const RunResult r = run_experiment(cfg);
  EXPECT_EQ(r.ledger.total(), 0u);
  EXPECT_EQ(r.rounds_per_client, std::vector<std::size_t>(5, 300));
  for (double acc : r.rows.back().accuracy) EXPECT_GT(acc, 0.9);
}

TEST(Determinism, SameConfigSameMetrics) {
  for (Method m : {Method::kFedHe, Method::kPrivate, Method::kFedAvg,
                   Method::kFedMD}) {
    ExperimentConfig cfg = synthetic_config(m, 3, 12);
    cfg.eval_every = 3;
    if (m != Method::kFedAvg) cfg.client_specs[1] = {{8, 8}, Activation::kTanh, 0.3, 2.0};
    EXPECT_EQ(csv_of(run_experiment(cfg), 3), csv_of(run_experiment(cfg), 3))
        << to_string(m);
  }
}

TEST(Determinism, AddingAClientLeavesOthersStreamsAlone) {
  EXPECT_EQ(Rng::derive(5, "client", 0), Rng::derive(5, "client", 0));
  EXPECT_FALSE(Rng::derive(5, "client", 0) == Rng::derive(5, "client", 1));
  EXPECT_FALSE(Rng::derive(5, "client", 0) == Rng::derive(5, "init", 0));
}

TEST(FedAvg, EqualSizesGivePlainMean) {
  const ModelSpec spec{{2, 2}};
  Model a = Model::zeros(spec);
  Model b = Model::zeros(spec);
  a.mutable_layers()[0].weights = {0.5, 1.25, -3.0, 8.0};
  b.mutable_layers()[0].weights = {1.5, 0.25, 1.0, -2.0};
  a.mutable_layers()[0].bias = {1.0, 2.0};
  b.mutable_layers()[0].bias = {3.0, -2.0};
  const Model* models[] = {&a, &b};
  const std::size_t sizes[] = {40, 40};
  const auto out = fedavg_aggregate(models, sizes);
  EXPECT_EQ(out[0].weights, (std::vector<double>{1.0, 0.75, -1.0, 3.0}));
  EXPECT_EQ(out[0].bias, (std::vector<double>{2.0, 0.0}));
}

TEST(FedAvg, WeightedMeanOfConstantTensors) {
  const ModelSpec spec{{3, 4, 2}};
  std::vector<Model> ms;
  for (double v : {1.0, 2.0, 3.0}) {
    Model m = Model::zeros(spec);
    for (DenseLayer& l : m.mutable_layers()) {
      std::fill(l.weights.begin(), l.weights.end(), v);
      std::fill(l.bias.begin(), l.bias.end(), v);
    }
    ms.push_back(m);
  }
  const Model* models[] = {&ms[0], &ms[1], &ms[2]};
  const std::size_t sizes[] = {10, 20, 30};
  for (const DenseLayer& l : fedavg_aggregate(models, sizes)) {
    for (double w : l.weights) EXPECT_EQ(w, 14.0 / 6.0);
    for (double b : l.bias) EXPECT_EQ(b, 14.0 / 6.0);
  }
}

TEST(FedAvg, HeterogeneousSpecsAreAConfigError) {
  ExperimentConfig cfg = synthetic_config(Method::kFedAvg, 4, 5);
  cfg.client_specs[1].hidden = {32};
  cfg.client_specs[3].dropout = 0.5;
  try {
    cfg.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1, 3"), std::string::npos) << msg;
  }
  // Speeds may differ; they are not part of the architecture.
  cfg.client_specs[1].hidden = {16};
  cfg.client_specs[3].dropout = 0.0;
  cfg.client_specs[2].speed = 4.0;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(FedAvg, LedgerChargesTwiceTheWeightsPerRound) {
  const ExperimentConfig cfg = synthetic_config(Method::kFedAvg, 3, 7);
  const RunResult r = run_experiment(cfg);
  const std::uint64_t p = param_count(ModelSpec{{12, 16, 10}});
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(r.ledger.client_total(k), 7u * 2u * p);
    EXPECT_EQ(r.ledger.table_total(k), 7u * p);
  }
}

TEST(FedAvg, ClientsShareTheGlobalModelAfterEachRound) {
  const ExperimentConfig cfg = synthetic_config(Method::kFedAvg, 3, 4);
  RunObserver obs;
  obs.after_round = [](std::size_t, std::span<const ClientState> cs) {
    for (const ClientState& c : cs) EXPECT_EQ(c.model.layers(), cs[0].model.layers());
  };
  run_experiment(cfg, obs);
}

TEST(FedAvg, ConvexProblemLossFallsAlmostEveryRound) {
  ExperimentConfig cfg = synthetic_config(Method::kFedAvg, 4, 50);
  for (ClientConfig& c : cfg.client_specs) c.hidden.clear();  // linear model
  cfg.lr = 0.01;
  const PreparedData data = prepare_data(cfg);
  std::vector<double> losses;
  RunObserver obs;
  obs.after_round = [&](std::size_t, std::span<const ClientState> cs) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& d : data.clients) {
      std::vector<std::size_t> all(d->size());
      std::iota(all.begin(), all.end(), std::size_t{0});
      const ForwardTrace t = forward(cs[0].model, d->gather(all), false);
      for (std::size_t i = 0; i < d->size(); ++i) {
        total += cross_entropy(t, d->label(i), i).loss;
      }
      n += d->size();
    }
    losses.push_back(total / static_cast<double>(n));
  };
  run_fedavg(cfg, data, obs);
  ASSERT_EQ(losses.size(), 50u);
  int increases = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) increases += losses[i] > losses[i - 1];
  EXPECT_LE(increases, 2);  // 5% of 49 steps
  EXPECT_LT(losses.back(), losses.front());
}

TEST(FedMD, LedgerUsesSamplesPlusLogits) {
  ExperimentConfig cfg = synthetic_config(Method::kFedMD, 2, 6);
  cfg.n_public = 5;
  const RunResult r = run_experiment(cfg);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(r.ledger.table_total(k), 6u * 5u * (10u + 12u));
  }
  const PreparedData d = prepare_data(cfg);
  EXPECT_EQ(comm_cost(Method::kFedMD, comm_params(cfg, d)), 5u * 22u);
}

TEST(FedMD, MnistDimensionsCostSevenThousandNineHundredForty) {
  const CommParams p{10, 784, 0, 10};
  EXPECT_EQ(comm_cost(Method::kFedMD, p), 7940u);
}

TEST(FedMD, TooManyPublicSamplesIsConfigError) {
  ExperimentConfig cfg = synthetic_config(Method::kFedMD, 2, 3);
  cfg.n_public = 10000;
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

TEST(FedMD, PublicSetIsCarvedFromTraining) {
  const ExperimentConfig cfg = synthetic_config(Method::kFedMD, 2, 3);
  const PreparedData d = prepare_data(cfg);
  std::size_t private_total = 0;
  for (const auto& c : d.clients) private_total += c->size();
  // 600 samples, 20% test, then 10% of the remaining 480 held out as public.
  EXPECT_EQ(d.test.size(), 120u);
  EXPECT_EQ(d.public_set.size(), 48u);
  EXPECT_EQ(private_total, 432u);
}

TEST(FedMD, ConsensusIsPerInstanceMean) {
  Rng rng(4);
  std::vector<Tensor> logits;
  for (int k = 0; k < 4; ++k) {
    Tensor t({3, 5});
    for (double& v : t.data()) v = rng.uniform(-2, 2);
    logits.push_back(t);
  }
  const Tensor c = fedmd_consensus(logits);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t j = 0; j < 5; ++j) {
      double sum = 0.0;
      for (const Tensor& t : logits) sum += t.at(r, j);
      EXPECT_NEAR(c.at(r, j), sum / 4.0, 1e-15);
    }
  }
  EXPECT_EQ(fedmd_consensus(std::span<const Tensor>(logits.data(), 1)), logits[0]);
}

TEST(Evaluate, ConstantClassZeroOnBalancedSet) {
  const Dataset test = gen_synthetic(10, 3, 7, 1);
  Model m = Model::zeros(ModelSpec{{3, 10}});
  m.mutable_layers()[0].bias[0] = 1.0;
  EXPECT_DOUBLE_EQ(accuracy(m, test), 0.1);
}

TEST(Evaluate, PerfectLookupScoresOne) {
  const Dataset test(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 1, 2});
  Model m = Model::zeros(ModelSpec{{3, 3}});
  m.mutable_layers()[0].weights = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const Model models[] = {m};
  EXPECT_EQ(evaluate(models, test), (std::vector<double>{1.0}));
}

TEST(Evaluate, MatchesRecountOfPredictions) {
  ExperimentConfig cfg = synthetic_config(Method::kPrivate, 2, 20);
  const PreparedData data = prepare_data(cfg);
  const RunResult r = run_private(cfg, data);
  for (std::size_t k = 0; k < 2; ++k) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.test.size(); ++i) {
      const ForwardTrace t = forward(
          r.models[k],
          Tensor::vector({data.test.x(i).begin(), data.test.x(i).end()}), false);
      hits += predict(t) == data.test.label(i);
    }
    EXPECT_EQ(r.rows.back().accuracy[k],
              static_cast<double>(hits) / static_cast<double>(data.test.size()));
  }
}

TEST(Metrics, HeaderAndRowShape) {
  EXPECT_EQ(metrics_header(2),
            "time,round,acc_0,acc_1,mean_acc,loss_0,loss_1,comm_0,comm_1,"
            "comm_total");
  MetricsRow row{1.5, 3, {0.5, 0.25}, 0.375, {0.1, 2}, {110, 220}, 330};
  std::ostringstream out;
  write_metrics_row(out, row);
  EXPECT_EQ(out.str(), "1.5,3,0.5,0.25,0.375,0.1,2,110,220,330\n");
}

TEST(Metrics, RowsAreBoundedAndCommNeverShrinks) {
  ExperimentConfig cfg = synthetic_config(Method::kFedHe, 3, 60);
  cfg.eval_every = 2;
  cfg.client_specs[2].speed = 3.0;
  const RunResult r = run_experiment(cfg);
  ASSERT_GT(r.rows.size(), 5u);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    for (double a : r.rows[i].accuracy) {
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 1.0);
    }
    if (i > 0) {
      EXPECT_GE(r.rows[i].comm_total, r.rows[i - 1].comm_total);
      EXPECT_GE(r.rows[i].time, r.rows[i - 1].time);
    }
  }
}

TEST(Config, LengthMismatchIsNamed) {
  ExperimentConfig cfg = synthetic_config(Method::kFedHe, 10, 5);
  cfg.client_specs.pop_back();
  try {
    cfg.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "clients");
    EXPECT_NE(std::string(e.what()).find("10"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("9"), std::string::npos);
  }
}

TEST(Config, RejectsNonsense) {
  ExperimentConfig cfg = synthetic_config(Method::kFedHe, 2, 5);
  cfg.client_specs[0].speed = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = synthetic_config(Method::kFedHe, 2, 5);
  cfg.client_specs[1].dropout = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = synthetic_config(Method::kFedHe, 2, 0);
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = synthetic_config(Method::kFedHe, 2, 5);
  cfg.lr = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace fedhe
