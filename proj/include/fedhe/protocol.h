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

// Logit exchange between clients and server, and the accounting of how many
// floats every message puts on the wire.
//
// Client side: logits seen during training are summed per class together with
// a per-class instance count. At the end of a round each class sum is divided
// by (count + 1) and the resulting (logit, label) pairs are shipped. The +1
// keeps a class that was never seen well defined: it becomes the zero vector.
//
// Server side: a per-class store of received client logits, and the per-class
// arithmetic mean over that store, which is what clients distil towards.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace fedhe {

struct ClassLogit {
  std::size_t label = 0;
  std::uint64_t count = 0;  // V before the +1; logged, not transmitted
  std::vector<double> logit;

  friend bool operator==(const ClassLogit&, const ClassLogit&) = default;
};

// One client's upload: a (logit, label) pair for every class it reports.
struct LogitUpdate {
  std::size_t client = 0;
  std::size_t class_count = 0;
  std::vector<ClassLogit> entries;

  // Each pair costs C logit floats plus one label float.
  std::uint64_t wire_floats() const {
    return entries.size() * (class_count + 1);
  }

  friend bool operator==(const LogitUpdate&, const LogitUpdate&) = default;
};

class ClassLogitAccumulator {
 public:
  explicit ClassLogitAccumulator(std::size_t class_count);

  std::size_t class_count() const { return counts_.size(); }

  // Adds one instance's logit vector under `label`. Throws DimensionError on a
  // wrong length and std::out_of_range on a bad label.
  void add(std::span<const double> logits, std::size_t label);

  // Rows of `logits` ([n, C] flat) paired with `labels`.
  void accumulate(std::span<const double> logits,
                  std::span<const std::size_t> labels);

  std::span<const double> sum(std::size_t label) const;
  std::uint64_t count(std::size_t label) const { return counts_[label]; }
  bool empty() const;

  // True between finalize() and the next add()/reset().
  bool consumed() const { return consumed_; }

  void reset();

  // See the free function finalize().
  LogitUpdate finalize(std::size_t client);

 private:
  std::vector<double> sums_;  // [C, C]
  std::vector<std::uint64_t> counts_;
  bool consumed_ = false;
};

// Emits sum / (count + 1) for every class, including unseen ones (zero
// vector), then resets the accumulator and marks it consumed. Throws
// StateError when called twice without an intervening add().
LogitUpdate finalize(ClassLogitAccumulator& acc, std::size_t client);

// CSV log rows, one per class: round,client,y,V,p_0,...,p_{C-1}.
void write_update_csv(std::ostream& out, std::size_t round,
                      const LogitUpdate& update);

// Per-class server mean; classes with an empty store are absent.
class AverageLogits {
 public:
  AverageLogits() = default;
  explicit AverageLogits(std::size_t class_count)
      : per_class_(class_count) {}

  std::size_t class_count() const { return per_class_.size(); }
  bool has(std::size_t label) const {
    return label < per_class_.size() && per_class_[label].has_value();
  }
  std::span<const double> at(std::size_t label) const;
  void set(std::size_t label, std::vector<double> logit);
  std::size_t present_classes() const;

  std::uint64_t wire_floats() const {
    return present_classes() * (class_count() + 1);
  }

  friend bool operator==(const AverageLogits&, const AverageLogits&) = default;

 private:
  std::vector<std::optional<std::vector<double>>> per_class_;
};

enum class StoreMode {
  kLatestPerClient,  // one entry per (client, class); newer replaces older
  kAppend,           // every received vector is kept
};

std::string_view to_string(StoreMode mode);
StoreMode parse_store_mode(std::string_view name);

class ServerLogitStore {
 public:
  struct Entry {
    std::size_t client = 0;
    std::vector<double> logit;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  ServerLogitStore(std::size_t class_count,
                   StoreMode mode = StoreMode::kLatestPerClient);

  std::size_t class_count() const { return per_class_.size(); }
  StoreMode mode() const { return mode_; }

  // Validates the whole update before touching the store; a malformed update
  // throws ProtocolError and leaves the store unchanged.
  void receive(const LogitUpdate& update);

  // Entries for one class. Latest mode keeps them ordered by client id, so
  // the contents (and their mean) do not depend on arrival order. Append mode
  // keeps arrival order.
  const std::vector<Entry>& entries(std::size_t label) const {
    return per_class_[label];
  }
  std::size_t total_entries() const;

  AverageLogits average() const;

  friend bool operator==(const ServerLogitStore&,
                         const ServerLogitStore&) = default;

 private:
  std::vector<std::vector<Entry>> per_class_;
  StoreMode mode_;
};

AverageLogits server_average(const ServerLogitStore& store);

enum class Method { kFedHe, kFedAvg, kFedMD, kPrivate };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct CommParams {
  std::size_t class_count = 0;
  std::size_t input_dim = 0;
  std::size_t param_count = 0;
  std::size_t n_public = 0;
};

// Floats per client per round, counted the way the overhead tables do:
//   FedHe   C·(C+1)              logits plus label for every class
//   FedAvg  param_count          model weights
//   FedMD   n·(C + input_dim)    public samples fetched plus their logits
//   Private 0
std::uint64_t comm_cost(Method method, const CommParams& params);

// 1 - method_cost / fedavg_cost. Throws ProtocolError on a zero baseline.
double reduced_rate(std::uint64_t method_cost, std::uint64_t fedavg_cost);

// Rate as a one-decimal percentage. A rate that is below 1 but would print
// as 100.0% is shown as ">99.9%".
std::string format_rate(double rate);

enum class MessageKind {
  kLogitsUp,          // FedHe client -> server
  kAverageLogitsDown, // FedHe server -> client
  kWeightsDown,       // FedAvg broadcast
  kWeightsUp,         // FedAvg upload
  kPublicSamplesDown, // FedMD public samples fetched by the client
  kPublicLogitsUp,    // FedMD logits on those samples
};

std::string_view to_string(MessageKind kind);

// Whether the overhead tables count this kind of message. Downlink logits and
// the FedAvg broadcast are transmitted (and logged) but not tabulated.
bool counted_in_table(MessageKind kind);

// Floats transmitted, per (client, round, message kind).
class CommLedger {
 public:
  struct Entry {
    std::size_t client = 0;
    std::size_t round = 0;
    MessageKind kind = MessageKind::kLogitsUp;
    std::uint64_t floats = 0;
  };

  CommLedger() = default;
  CommLedger(Method method, std::size_t clients);

  Method method() const { return method_; }
  std::size_t clients() const { return per_client_.size(); }

  void record(std::size_t client, std::size_t round, MessageKind kind,
              std::uint64_t floats);

  const std::vector<Entry>& entries() const { return entries_; }

  std::uint64_t total() const { return total_; }
  std::uint64_t client_total(std::size_t client) const {
    return per_client_.at(client);
  }
  const std::vector<std::uint64_t>& client_totals() const {
    return per_client_;
  }
  std::uint64_t round_total(std::size_t round) const;
  std::uint64_t kind_total(MessageKind kind) const;

  // Only the kinds the overhead tables count.
  std::uint64_t table_total() const;
  std::uint64_t table_total(std::size_t client) const;

 private:
  Method method_ = Method::kPrivate;
  std::vector<Entry> entries_;
  std::vector<std::uint64_t> per_client_;
  std::uint64_t total_ = 0;
};

}  // namespace fedhe
