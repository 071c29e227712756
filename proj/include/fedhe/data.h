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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedhe/rng.h"
#include "fedhe/tensor.h"

namespace fedhe {

// Immutable labelled sample set. Features are stored flat, row-major.
// origin(i) is the index the sample had in the dataset it was carved from,
// which is how partitions are checked for disjointness.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t input_dim, std::size_t class_count,
          std::vector<double> features, std::vector<std::size_t> labels,
          std::vector<std::size_t> origin = {});

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t class_count() const { return class_count_; }

  std::span<const double> x(std::size_t i) const {
    return std::span<const double>(features_).subspan(i * input_dim_,
                                                      input_dim_);
  }
  std::size_t label(std::size_t i) const { return labels_[i]; }
  std::size_t origin(std::size_t i) const { return origin_[i]; }

  const std::vector<double>& features() const { return features_; }
  const std::vector<std::size_t>& labels() const { return labels_; }
  const std::vector<std::size_t>& origins() const { return origin_; }

  // Samples at `indices`, in that order; origins are carried over.
  Dataset select(std::span<const std::size_t> indices) const;

  // [indices.size(), input_dim] feature batch.
  Tensor gather(std::span<const std::size_t> indices) const;

  std::vector<std::size_t> class_histogram() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t input_dim_ = 0;
  std::size_t class_count_ = 0;
  std::vector<double> features_;
  std::vector<std::size_t> labels_;
  std::vector<std::size_t> origin_;
};

struct Partition {
  std::vector<Dataset> clients;

  std::size_t total() const;
  std::vector<std::size_t> sizes() const;
};

// Reads an IDX image/label file pair (raw or gzip-compressed). Pixels are
// scaled to [0, 1]. Labels must be below class_count. Throws FormatError with
// the byte offset on a bad magic, truncated payload, count mismatch, or an
// out-of-range label.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t class_count = 10);

struct SyntheticOptions {
  // Distance of each class mean from the origin along its own axis.
  double separation = 2.0;
  // Per-coordinate standard deviation around the class mean.
  double noise = 0.5;
};

// Gaussian class clusters. Class c is centred on separation·e_c when
// c < input_dim, otherwise on a seeded random direction of the same norm.
// Samples are laid out class-major.
Dataset gen_synthetic(std::size_t class_count, std::size_t input_dim,
                      std::size_t n_per_class, std::uint64_t seed,
                      const SyntheticOptions& options = {});

struct MeanSubtracted {
  Dataset train;
  std::vector<Dataset> others;
  std::vector<double> mean;
};

// Mean is taken over `train` only and removed from train and every dataset in
// `others`. Not idempotent: a second call computes a new (zero) mean.
MeanSubtracted subtract_mean(const Dataset& train,
                             std::span<const Dataset> others = {});

Dataset subtract_given_mean(const Dataset& d, std::span<const double> mean);

// Shuffle, then split into K contiguous runs. The first |d| mod K clients get
// one extra sample.
Partition partition_iid(const Dataset& d, std::size_t clients,
                        std::uint64_t seed);

struct Holdout {
  Dataset kept;
  Dataset held_out;
};

// Seeded shuffle, then the last round(fraction·|d|) samples are held out.
Holdout split_holdout(const Dataset& d, double fraction, std::uint64_t seed);

// batch_size distinct indices drawn uniformly from [0, |d|).
std::vector<std::size_t> sample_batch(const Dataset& d, std::size_t batch_size,
                                      Rng& rng);

}  // namespace fedhe
