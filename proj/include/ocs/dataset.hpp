// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ocs/tensor.hpp"

namespace ocs {

struct DataSplit {
  Tensor<float> images;              // [N,C,H,W], already normalized
  std::vector<std::int32_t> labels;  // each in [0, classes)

  int count() const { return images.dim(0); }
};

struct DatasetHandle {
  DataSplit train;
  DataSplit eval;
  int classes = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> mean;    // per-channel constants applied once
  std::vector<double> stddev;
};

/// Gaussian class templates plus per-sample noise. Templates are smoothed
/// white noise, standardized per class; the noise level is calibrated so a
/// small CNN separates the classes within a few epochs. Deterministic in
/// `seed`.
struct SynthSpec {
  int classes = 3;
  int train_per_class = 100;
  int eval_per_class = 25;
  int channels = 1;
  int height = 8;
  int width = 8;
  double noise = 0.5;
  std::uint64_t seed = 0;
};

DatasetHandle synth_dataset(const SynthSpec& spec);

/// IDX-format loader (big-endian magic 0x00000803 for images, 0x00000801 for
/// labels). Pixels scale to [0,1] and then normalize by (mean, stddev).
DatasetHandle load_mnist(const std::string& dir, double mean = 0.1307,
                         double stddev = 0.3081);

/// Single IDX pair, exposed for tests over fabricated files.
DataSplit load_idx_pair(const std::string& images_path,
                        const std::string& labels_path, double mean,
                        double stddev);

/// CIFAR-10 binary batches: 3073-byte records (1 label byte + 3*1024 pixels,
/// channel-planar RGB). Expects data_batch_1..5.bin and test_batch.bin.
DatasetHandle load_cifar10(
    const std::string& dir,
    const std::vector<double>& mean = {0.4914, 0.4822, 0.4465},
    const std::vector<double>& stddev = {0.2470, 0.2435, 0.2616});

/// Copies the indexed samples into one batch tensor.
DataSplit take_batch(const DataSplit& split, const std::vector<int>& indices,
                     std::size_t from, std::size_t count);

}  // namespace ocs
