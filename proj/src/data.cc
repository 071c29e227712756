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

#include "fedhe/data.h"

#include <zlib.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedhe/error.h"

namespace fedhe {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

// gzread passes uncompressed files through unchanged, so this handles both
// the .gz distribution files and raw IDX.
std::vector<std::uint8_t> read_file(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw Error("cannot open " + path);
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) {
    out.insert(out.end(), buf, buf + n);
  }
  int errnum = 0;
  const char* msg = gzerror(f, &errnum);
  const std::string detail = msg ? msg : "";
  gzclose(f);
  if (n < 0 || (errnum != Z_OK && errnum != Z_BUF_ERROR)) {
    throw FormatError(path + ": decompression failed: " + detail, out.size());
  }
  return out;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes,
                        std::size_t offset, const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(path + ": truncated header", bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) |
         std::uint32_t{bytes[offset + 3]};
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

Dataset::Dataset(std::size_t input_dim, std::size_t class_count,
                 std::vector<double> features, std::vector<std::size_t> labels,
                 std::vector<std::size_t> origin)
    : input_dim_(input_dim),
      class_count_(class_count),
      features_(std::move(features)),
      labels_(std::move(labels)),
      origin_(std::move(origin)) {
  if (input_dim_ == 0 || class_count_ == 0) {
    throw DimensionError("dataset needs positive input_dim and class_count");
  }
  if (features_.size() != labels_.size() * input_dim_) {
    throw DimensionError("feature buffer holds " +
                         std::to_string(features_.size()) + " values, expected " +
                         std::to_string(labels_.size() * input_dim_));
  }
  for (std::size_t y : labels_) {
    if (y >= class_count_) {
      throw DimensionError("label " + std::to_string(y) + " outside [0, " +
                           std::to_string(class_count_) + ")");
    }
  }
  if (origin_.empty()) origin_ = iota_indices(labels_.size());
  if (origin_.size() != labels_.size()) {
    throw DimensionError("origin index count does not match sample count");
  }
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  std::vector<double> features;
  features.reserve(indices.size() * input_dim_);
  std::vector<std::size_t> labels;
  std::vector<std::size_t> origin;
  labels.reserve(indices.size());
  origin.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto row = x(i);
    features.insert(features.end(), row.begin(), row.end());
    labels.push_back(labels_[i]);
    origin.push_back(origin_[i]);
  }
  return Dataset(input_dim_, class_count_, std::move(features),
                 std::move(labels), std::move(origin));
}

Tensor Dataset::gather(std::span<const std::size_t> indices) const {
  Tensor out({indices.size(), input_dim_});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto row = x(indices[r]);
    std::copy(row.begin(), row.end(), out.row(r).begin());
  }
  return out;
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> hist(class_count_, 0);
  for (std::size_t y : labels_) ++hist[y];
  return hist;
}

std::size_t Partition::total() const {
  std::size_t n = 0;
  for (const Dataset& d : clients) n += d.size();
  return n;
}

std::vector<std::size_t> Partition::sizes() const {
  std::vector<std::size_t> out;
  for (const Dataset& d : clients) out.push_back(d.size());
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t class_count) {
  const std::vector<std::uint8_t> images = read_file(images_path);
  const std::vector<std::uint8_t> labels = read_file(labels_path);

  const std::uint32_t image_magic = read_be32(images, 0, images_path);
  if (image_magic != kImageMagic) {
    throw FormatError(images_path + ": bad image magic " +
                          std::to_string(image_magic) + ", expected 2051",
                      0);
  }
  const std::size_t image_count = read_be32(images, 4, images_path);
  const std::size_t rows = read_be32(images, 8, images_path);
  const std::size_t cols = read_be32(images, 12, images_path);
  constexpr std::size_t kImageHeader = 16;
  const std::size_t dim = rows * cols;
  if (dim == 0) throw FormatError(images_path + ": zero image size", 8);
  if (images.size() - kImageHeader < image_count * dim) {
    throw FormatError(images_path + ": truncated pixel data, header declares " +
                          std::to_string(image_count) + " images",
                      images.size());
  }

  const std::uint32_t label_magic = read_be32(labels, 0, labels_path);
  if (label_magic != kLabelMagic) {
    throw FormatError(labels_path + ": bad label magic " +
                          std::to_string(label_magic) + ", expected 2049",
                      0);
  }
  const std::size_t label_count = read_be32(labels, 4, labels_path);
  constexpr std::size_t kLabelHeader = 8;
  if (label_count != image_count) {
    throw FormatError("label count " + std::to_string(label_count) +
                          " does not match image count " +
                          std::to_string(image_count),
                      4);
  }
  if (labels.size() - kLabelHeader < label_count) {
    throw FormatError(labels_path + ": truncated label data, header declares " +
                          std::to_string(label_count) + " labels",
                      labels.size());
  }

  std::vector<double> features(image_count * dim);
  for (std::size_t i = 0; i < features.size(); ++i) {
    features[i] = images[kImageHeader + i] / 255.0;
  }
  std::vector<std::size_t> ys(label_count);
  for (std::size_t i = 0; i < label_count; ++i) {
    ys[i] = labels[kLabelHeader + i];
    if (ys[i] >= class_count) {
      throw FormatError(labels_path + ": label " + std::to_string(ys[i]) +
                            " not below class count " +
                            std::to_string(class_count),
                        kLabelHeader + i);
    }
  }
  return Dataset(dim, class_count, std::move(features), std::move(ys));
}

Dataset gen_synthetic(std::size_t class_count, std::size_t input_dim,
                      std::size_t n_per_class, std::uint64_t seed,
                      const SyntheticOptions& options) {
  if (class_count == 0 || input_dim == 0 || n_per_class == 0) {
    throw std::invalid_argument("synthetic dataset sizes must be positive");
  }
  Rng rng(seed);
  std::vector<std::vector<double>> means(class_count,
                                         std::vector<double>(input_dim, 0.0));
  for (std::size_t c = 0; c < class_count; ++c) {
    if (c < input_dim) {
      means[c][c] = options.separation;
      continue;
    }
    double norm = 0.0;
    for (double& v : means[c]) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : means[c]) v *= options.separation / norm;
  }

  std::vector<double> features;
  features.reserve(class_count * n_per_class * input_dim);
  std::vector<std::size_t> labels;
  labels.reserve(class_count * n_per_class);
  for (std::size_t c = 0; c < class_count; ++c) {
    for (std::size_t n = 0; n < n_per_class; ++n) {
      for (std::size_t d = 0; d < input_dim; ++d) {
        features.push_back(means[c][d] + options.noise * rng.normal());
      }
      labels.push_back(c);
    }
  }
  return Dataset(input_dim, class_count, std::move(features), std::move(labels));
}

MeanSubtracted subtract_mean(const Dataset& train,
                             std::span<const Dataset> others) {
  if (train.empty()) throw std::invalid_argument("cannot take mean of nothing");
  for (const Dataset& d : others) {
    if (d.input_dim() != train.input_dim()) {
      throw DimensionError("dataset input_dim " + std::to_string(d.input_dim()) +
                           " differs from training input_dim " +
                           std::to_string(train.input_dim()));
    }
  }
  const std::size_t dim = train.input_dim();
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto row = train.x(i);
    for (std::size_t d = 0; d < dim; ++d) mean[d] += row[d];
  }
  for (double& m : mean) m /= static_cast<double>(train.size());

  MeanSubtracted out;
  out.train = subtract_given_mean(train, mean);
  for (const Dataset& d : others) out.others.push_back(subtract_given_mean(d, mean));
  out.mean = std::move(mean);
  return out;
}

Dataset subtract_given_mean(const Dataset& d, std::span<const double> mean) {
  if (mean.size() != d.input_dim()) {
    throw DimensionError("mean vector length does not match input_dim");
  }
  std::vector<double> features = d.features();
  for (std::size_t i = 0; i < features.size(); ++i) {
    features[i] -= mean[i % mean.size()];
  }
  return Dataset(d.input_dim(), d.class_count(), std::move(features), d.labels(),
                 d.origins());
}

Partition partition_iid(const Dataset& d, std::size_t clients,
                        std::uint64_t seed) {
  if (clients == 0 || clients > d.size()) {
    throw std::invalid_argument("cannot split " + std::to_string(d.size()) +
                                " samples across " + std::to_string(clients) +
                                " clients");
  }
  std::vector<std::size_t> order = iota_indices(d.size());
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);

  const std::size_t base = d.size() / clients;
  const std::size_t extra = d.size() % clients;
  Partition out;
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < clients; ++k) {
    const std::size_t n = base + (k < extra ? 1 : 0);
    out.clients.push_back(
        d.select(std::span<const std::size_t>(order).subspan(cursor, n)));
    cursor += n;
  }
  return out;
}

Holdout split_holdout(const Dataset& d, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("holdout fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> order = iota_indices(d.size());
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);
  const auto held = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(d.size())));
  const std::span<const std::size_t> all(order);
  return Holdout{d.select(all.first(d.size() - held)),
                 d.select(all.last(held))};
}

std::vector<std::size_t> sample_batch(const Dataset& d, std::size_t batch_size,
                                      Rng& rng) {
  if (batch_size == 0 || batch_size > d.size()) {
    throw std::invalid_argument("batch size " + std::to_string(batch_size) +
                                " exceeds dataset size " +
                                std::to_string(d.size()));
  }
  // Partial Fisher-Yates: the first batch_size slots end up uniform without
  // replacement.
  std::vector<std::size_t> pool = iota_indices(d.size());
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(d.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(batch_size);
  return pool;
}

}  // namespace fedhe
