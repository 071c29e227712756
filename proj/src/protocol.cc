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

#include "fedhe/protocol.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "fedhe/error.h"
#include "fedhe/format.h"

namespace fedhe {

ClassLogitAccumulator::ClassLogitAccumulator(std::size_t class_count)
    : sums_(class_count * class_count, 0.0), counts_(class_count, 0) {
  if (class_count == 0) throw std::invalid_argument("class_count must be > 0");
}

void ClassLogitAccumulator::add(std::span<const double> logits,
                                std::size_t label) {
  const std::size_t c = class_count();
  if (logits.size() != c) {
    throw DimensionError("logit vector has length " +
                         std::to_string(logits.size()) + ", expected " +
                         std::to_string(c));
  }
  if (label >= c) {
    throw std::out_of_range("label " + std::to_string(label) +
                            " outside [0, " + std::to_string(c) + ")");
  }
  double* sum = sums_.data() + label * c;
  for (std::size_t i = 0; i < c; ++i) sum[i] += logits[i];
  counts_[label] += 1;
  consumed_ = false;
}

void ClassLogitAccumulator::accumulate(std::span<const double> logits,
                                       std::span<const std::size_t> labels) {
  const std::size_t c = class_count();
  if (logits.size() != labels.size() * c) {
    throw DimensionError("logit batch is not [labels, C]");
  }
  for (std::size_t r = 0; r < labels.size(); ++r) {
    add(logits.subspan(r * c, c), labels[r]);
  }
}

std::span<const double> ClassLogitAccumulator::sum(std::size_t label) const {
  return std::span<const double>(sums_).subspan(label * class_count(),
                                                class_count());
}

bool ClassLogitAccumulator::empty() const {
  return std::all_of(counts_.begin(), counts_.end(),
                     [](std::uint64_t v) { return v == 0; });
}

void ClassLogitAccumulator::reset() {
  std::fill(sums_.begin(), sums_.end(), 0.0);
  std::fill(counts_.begin(), counts_.end(), 0);
  consumed_ = false;
}

LogitUpdate ClassLogitAccumulator::finalize(std::size_t client) {
  if (consumed_) {
    throw StateError("accumulator already finalized; add logits or reset()");
  }
  const std::size_t c = class_count();
  LogitUpdate update{client, c, {}};
  update.entries.reserve(c);
  for (std::size_t y = 0; y < c; ++y) {
    const double denom = static_cast<double>(counts_[y]) + 1.0;
    ClassLogit entry{y, counts_[y], std::vector<double>(c)};
    const auto s = sum(y);
    for (std::size_t i = 0; i < c; ++i) entry.logit[i] = s[i] / denom;
    update.entries.push_back(std::move(entry));
  }
  reset();
  consumed_ = true;
  return update;
}

LogitUpdate finalize(ClassLogitAccumulator& acc, std::size_t client) {
  return acc.finalize(client);
}

void write_update_csv(std::ostream& out, std::size_t round,
                      const LogitUpdate& update) {
  for (const ClassLogit& e : update.entries) {
    out << round << ',' << update.client << ',' << e.label << ',' << e.count;
    for (double v : e.logit) out << ',' << format_double(v);
    out << '\n';
  }
}

std::span<const double> AverageLogits::at(std::size_t label) const {
  if (!has(label)) {
    throw std::out_of_range("no average logit for class " +
                            std::to_string(label));
  }
  return *per_class_[label];
}

void AverageLogits::set(std::size_t label, std::vector<double> logit) {
  if (label >= per_class_.size() || logit.size() != per_class_.size()) {
    throw DimensionError("average logit does not fit class count");
  }
  per_class_[label] = std::move(logit);
}

std::size_t AverageLogits::present_classes() const {
  return static_cast<std::size_t>(
      std::count_if(per_class_.begin(), per_class_.end(),
                    [](const auto& v) { return v.has_value(); }));
}

std::string_view to_string(StoreMode mode) {
  return mode == StoreMode::kLatestPerClient ? "latest" : "append";
}

StoreMode parse_store_mode(std::string_view name) {
  if (name == "latest") return StoreMode::kLatestPerClient;
  if (name == "append") return StoreMode::kAppend;
  throw std::invalid_argument("unknown store mode '" + std::string(name) +
                              "' (expected latest or append)");
}

ServerLogitStore::ServerLogitStore(std::size_t class_count, StoreMode mode)
    : per_class_(class_count), mode_(mode) {
  if (class_count == 0) throw std::invalid_argument("class_count must be > 0");
}

void ServerLogitStore::receive(const LogitUpdate& update) {
  const std::size_t c = class_count();
  if (update.class_count != c) {
    throw ProtocolError("update from client " + std::to_string(update.client) +
                        " declares " + std::to_string(update.class_count) +
                        " classes, store has " + std::to_string(c));
  }
  std::vector<bool> seen(c, false);
  for (const ClassLogit& e : update.entries) {
    if (e.label >= c) {
      throw ProtocolError("update label " + std::to_string(e.label) +
                          " out of range");
    }
    if (seen[e.label]) {
      throw ProtocolError("update repeats label " + std::to_string(e.label));
    }
    seen[e.label] = true;
    if (e.logit.size() != c) {
      throw ProtocolError("logit for label " + std::to_string(e.label) +
                          " has length " + std::to_string(e.logit.size()));
    }
    for (double v : e.logit) {
      if (!std::isfinite(v)) {
        throw ProtocolError("non-finite logit for label " +
                            std::to_string(e.label));
      }
    }
  }

  for (const ClassLogit& e : update.entries) {
    std::vector<Entry>& bucket = per_class_[e.label];
    if (mode_ == StoreMode::kAppend) {
      bucket.push_back(Entry{update.client, e.logit});
      continue;
    }
    auto it = std::lower_bound(
        bucket.begin(), bucket.end(), update.client,
        [](const Entry& entry, std::size_t k) { return entry.client < k; });
    if (it != bucket.end() && it->client == update.client) {
      it->logit = e.logit;
    } else {
      bucket.insert(it, Entry{update.client, e.logit});
    }
  }
}

std::size_t ServerLogitStore::total_entries() const {
  std::size_t n = 0;
  for (const auto& bucket : per_class_) n += bucket.size();
  return n;
}

AverageLogits ServerLogitStore::average() const {
  const std::size_t c = class_count();
  AverageLogits out(c);
  for (std::size_t y = 0; y < c; ++y) {
    const std::vector<Entry>& bucket = per_class_[y];
    if (bucket.empty()) continue;
    std::vector<double> mean(c, 0.0);
    for (const Entry& e : bucket) {
      for (std::size_t i = 0; i < c; ++i) mean[i] += e.logit[i];
    }
    const double n = static_cast<double>(bucket.size());
    for (double& v : mean) v /= n;
    out.set(y, std::move(mean));
  }
  return out;
}

AverageLogits server_average(const ServerLogitStore& store) {
  return store.average();
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kFedHe:
      return "fedhe";
    case Method::kFedAvg:
      return "fedavg";
    case Method::kFedMD:
      return "fedmd";
    case Method::kPrivate:
      return "private";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "fedhe") return Method::kFedHe;
  if (name == "fedavg") return Method::kFedAvg;
  if (name == "fedmd") return Method::kFedMD;
  if (name == "private") return Method::kPrivate;
  throw ProtocolError("unknown method '" + std::string(name) +
                      "' (expected fedhe, fedavg, fedmd or private)");
}

std::uint64_t comm_cost(Method method, const CommParams& p) {
  switch (method) {
    case Method::kFedHe:
      return std::uint64_t{p.class_count} * (p.class_count + 1);
    case Method::kFedAvg:
      return p.param_count;
    case Method::kFedMD:
      return std::uint64_t{p.n_public} * (p.class_count + p.input_dim);
    case Method::kPrivate:
      return 0;
  }
  throw ProtocolError("unknown method");
}

double reduced_rate(std::uint64_t method_cost, std::uint64_t fedavg_cost) {
  if (fedavg_cost == 0) {
    throw ProtocolError("reduced rate needs a non-zero FedAvg baseline");
  }
  return 1.0 - static_cast<double>(method_cost) /
                   static_cast<double>(fedavg_cost);
}

std::string format_rate(double rate) {
  const double pct = std::round(rate * 1000.0) / 10.0;
  if (pct >= 100.0 && rate < 1.0) return ">99.9%";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", pct);
  return buf;
}

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::kLogitsUp:
      return "logits_up";
    case MessageKind::kAverageLogitsDown:
      return "average_logits_down";
    case MessageKind::kWeightsDown:
      return "weights_down";
    case MessageKind::kWeightsUp:
      return "weights_up";
    case MessageKind::kPublicSamplesDown:
      return "public_samples_down";
    case MessageKind::kPublicLogitsUp:
      return "public_logits_up";
  }
  return "unknown";
}

bool counted_in_table(MessageKind kind) {
  return kind == MessageKind::kLogitsUp || kind == MessageKind::kWeightsUp ||
         kind == MessageKind::kPublicSamplesDown ||
         kind == MessageKind::kPublicLogitsUp;
}

CommLedger::CommLedger(Method method, std::size_t clients)
    : method_(method), per_client_(clients, 0) {}

void CommLedger::record(std::size_t client, std::size_t round,
                        MessageKind kind, std::uint64_t floats) {
  if (client >= per_client_.size()) {
    throw ProtocolError("ledger has no client " + std::to_string(client));
  }
  entries_.push_back(Entry{client, round, kind, floats});
  per_client_[client] += floats;
  total_ += floats;
}

std::uint64_t CommLedger::round_total(std::size_t round) const {
  std::uint64_t n = 0;
  for (const Entry& e : entries_) {
    if (e.round == round) n += e.floats;
  }
  return n;
}

std::uint64_t CommLedger::kind_total(MessageKind kind) const {
  std::uint64_t n = 0;
  for (const Entry& e : entries_) {
    if (e.kind == kind) n += e.floats;
  }
  return n;
}

std::uint64_t CommLedger::table_total() const {
  std::uint64_t n = 0;
  for (const Entry& e : entries_) {
    if (counted_in_table(e.kind)) n += e.floats;
  }
  return n;
}

std::uint64_t CommLedger::table_total(std::size_t client) const {
  std::uint64_t n = 0;
  for (const Entry& e : entries_) {
    if (e.client == client && counted_in_table(e.kind)) n += e.floats;
  }
  return n;
}

}  // namespace fedhe
