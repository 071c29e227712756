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

#include "fedhe/cli.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fedhe/config.h"
#include "fedhe/error.h"
#include "fedhe/format.h"

namespace fedhe {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Write to a sibling temp file, then rename over the target.
void write_atomically(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

struct LoadedRun {
  fs::path manifest;
  std::string method;
  std::string dataset;
  std::uint64_t floats_per_round = 0;
  double final_mean_accuracy = 0.0;
};

// Throws ConfigError for manifests this build cannot interpret and
// runtime_error for unreadable files.
LoadedRun load_run(const fs::path& manifest_path) {
  json m;
  try {
    m = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw ConfigError(manifest_path.string(),
                      std::string("not a JSON manifest: ") + e.what());
  }
  const std::string where = manifest_path.string();
  if (!m.contains("schema_version") || !m["schema_version"].is_number_integer()) {
    throw ConfigError(where, "missing schema_version");
  }
  if (m["schema_version"].get<int>() != kManifestSchemaVersion) {
    throw ConfigError(where, "unknown schema version " +
                                 m["schema_version"].dump() + " (expected " +
                                 std::to_string(kManifestSchemaVersion) + ")");
  }
  LoadedRun run;
  try {
    run.manifest = manifest_path;
    run.method = m.at("method").get<std::string>();
    run.dataset = m.at("dataset").get<std::string>();
    run.floats_per_round = m.at("comm").at("floats_per_round").get<std::uint64_t>();
    if (m.at("metrics_schema_version").get<int>() != kMetricsSchemaVersion) {
      throw ConfigError(where, "unknown metrics schema version");
    }
    const fs::path metrics = manifest_path.parent_path() /
                             m.at("artifacts").at("metrics").get<std::string>();
    std::istringstream csv(read_file(metrics));
    std::string header;
    std::getline(csv, header);
    const auto columns = split_csv_line(header);
    const auto it = std::find(columns.begin(), columns.end(), "mean_acc");
    if (it == columns.end()) {
      throw ConfigError(metrics.string(), "no mean_acc column");
    }
    const auto col = static_cast<std::size_t>(it - columns.begin());
    std::string line;
    std::string last;
    while (std::getline(csv, line)) {
      if (!line.empty()) last = line;
    }
    const auto cells = split_csv_line(last);
    if (cells.size() != columns.size() ||
        !parse_double(cells[col], run.final_mean_accuracy)) {
      throw ConfigError(metrics.string(), "no complete metrics row");
    }
  } catch (const json::exception& e) {
    throw ConfigError(where, std::string("malformed manifest: ") + e.what());
  }
  return run;
}

}  // namespace

std::string resolve_data_path(const std::string& field, const std::string& path,
                              const fs::path& config_dir) {
  if (path.empty()) return path;
  const fs::path p(path);
  std::vector<fs::path> candidates{p};
  if (p.is_relative()) {
    candidates.push_back(config_dir / p);
    candidates.push_back(fs::path(FEDHE_DATA_DIR) / p);
  }
  for (const fs::path& c : candidates) {
    std::error_code ec;
    if (fs::is_regular_file(c, ec)) return fs::absolute(c).lexically_normal().string();
  }
  std::string tried;
  for (const fs::path& c : candidates) {
    tried += (tried.empty() ? "" : ", ") + c.string();
  }
  throw ConfigError(field, "file not found (tried " + tried + ")");
}

ExperimentConfig load_config_file(const fs::path& path,
                                  const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error&) {
    throw ConfigError("--config", "cannot read " + path.string());
  }
  ExperimentConfig cfg = parse_config(text, overrides);
  if (cfg.data.kind == DataSourceKind::kIdx) {
    const fs::path dir = path.parent_path();
    DataSource& d = cfg.data;
    d.train_images = resolve_data_path("idx.train_images", d.train_images, dir);
    d.train_labels = resolve_data_path("idx.train_labels", d.train_labels, dir);
    d.test_images = resolve_data_path("idx.test_images", d.test_images, dir);
    d.test_labels = resolve_data_path("idx.test_labels", d.test_labels, dir);
  }
  return cfg;
}

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  PreparedData data;
  try {
    cfg = load_config_file(args.config, args.overrides);
    cfg.validate();
    data = prepare_data(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }

  try {
    fs::create_directories(args.out_dir);
    const std::string config_text = to_config_text(cfg);
    write_atomically(args.out_dir / "config.txt", config_text);

    const CommParams params = comm_params(cfg, data);
    json manifest = {
        {"schema_version", kManifestSchemaVersion},
        {"metrics_schema_version", kMetricsSchemaVersion},
        {"method", to_string(cfg.method)},
        {"seed", cfg.seed},
        {"clients", cfg.clients},
        {"dataset", dataset_id(cfg.data)},
        {"config", config_text},
        {"artifacts",
         {{"config", "config.txt"},
          {"metrics", "metrics.csv"},
          {"summary", "summary.json"}}},
        {"comm",
         {{"class_count", params.class_count},
          {"input_dim", params.input_dim},
          {"param_count", params.param_count},
          {"n_public", params.n_public},
          {"floats_per_round", comm_cost(cfg.method, params)}}},
    };
    write_atomically(args.out_dir / "manifest.json", manifest.dump(2) + "\n");

    std::ofstream metrics(args.out_dir / "metrics.csv", std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write metrics.csv");
    metrics << metrics_header(cfg.clients) << '\n';
    RunObserver observer;
    observer.on_metrics = [&metrics](const MetricsRow& row) {
      write_metrics_row(metrics, row);
      metrics.flush();
    };

    RunResult result;
    switch (cfg.method) {
      case Method::kFedHe:
        result = run_fedhe(cfg, data, observer);
        break;
      case Method::kPrivate:
        result = run_private(cfg, data, observer);
        break;
      case Method::kFedAvg:
        result = run_fedavg(cfg, data, observer);
        break;
      case Method::kFedMD:
        result = run_fedmd_lite(cfg, data, observer);
        break;
    }
    if (!metrics.flush()) throw std::runtime_error("cannot write metrics.csv");

    const MetricsRow& last = result.rows.back();
    const std::uint64_t per_round = comm_cost(cfg.method, params);
    const double rate = reduced_rate(per_round, params.param_count);
    json summary = {
        {"method", to_string(cfg.method)},
        {"seed", cfg.seed},
        {"time", last.time},
        {"server_events", result.server_events},
        {"rounds_per_client", result.rounds_per_client},
        {"final_accuracy", last.accuracy},
        {"final_mean_accuracy", last.mean_accuracy},
        {"comm_total", result.ledger.table_total()},
        {"comm_per_round", per_round},
        {"reduced_rate_vs_fedavg", rate},
    };
    write_atomically(args.out_dir / "summary.json", summary.dump() + "\n");

    out << "method=" << to_string(cfg.method) << " seed=" << cfg.seed
        << " final_mean_acc=" << std::fixed << std::setprecision(4)
        << last.mean_accuracy << std::defaultfloat
        << " comm_total=" << result.ledger.table_total()
        << " comm_per_round=" << per_round
        << " reduced_rate=" << format_rate(rate) << '\n'
        << "wrote " << (args.out_dir / "manifest.json").string() << '\n';
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return kExitOk;
}

int cmd_compare(std::span<const fs::path> manifests, std::ostream& out,
                std::ostream& err) {
  std::vector<LoadedRun> runs;
  try {
    for (const fs::path& p : manifests) runs.push_back(load_run(p));
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  if (runs.size() < 2) {
    err << "config error: compare needs at least two manifests\n";
    return kExitConfigError;
  }
  for (const LoadedRun& r : runs) {
    if (r.dataset != runs.front().dataset) {
      err << "config error: " << r.manifest.string() << " used dataset '"
          << r.dataset << "' but " << runs.front().manifest.string()
          << " used '" << runs.front().dataset << "'\n";
      return kExitConfigError;
    }
  }

  const LoadedRun* fedavg = nullptr;
  for (const LoadedRun& r : runs) {
    if (r.method == to_string(Method::kFedAvg)) fedavg = &r;
  }
  out << std::left << std::setw(10) << "method" << std::setw(16)
      << "final_mean_acc" << std::setw(16) << "floats/round"
      << "reduced_vs_fedavg\n";
  for (const LoadedRun& r : runs) {
    std::string rate = "n/a";
    if (fedavg != nullptr && fedavg->floats_per_round > 0) {
      rate = format_rate(reduced_rate(r.floats_per_round,
                                      fedavg->floats_per_round));
    }
    std::ostringstream acc;
    acc << std::fixed << std::setprecision(4) << r.final_mean_accuracy;
    out << std::left << std::setw(10) << r.method << std::setw(16) << acc.str()
        << std::setw(16) << r.floats_per_round << rate << '\n';
  }
  return kExitOk;
}

int cmd_gen_config(const std::string& name, const fs::path& dest,
                   std::ostream& out, std::ostream& err) {
  std::string text;
  try {
    text = config_template(name);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }
  if (dest.empty()) {
    out << text;
    return kExitOk;
  }
  try {
    write_atomically(dest, text);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return kExitOk;
}

}  // namespace fedhe
