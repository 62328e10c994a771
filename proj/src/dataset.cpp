// SPDX-License-Identifier: Apache-2.0
#include "ocs/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ocs/error.hpp"
#include "ocs/rng.hpp"

namespace ocs {
namespace {

/// One 3x3 box smoothing pass with edge clamping; keeps templates
/// low-frequency enough for small receptive fields.
std::vector<double> box_smooth(const std::vector<double>& img, int h, int w) {
  std::vector<double> out(img.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = std::min(std::max(y + dy, 0), h - 1);
          const int xx = std::min(std::max(x + dx, 0), w - 1);
          sum += img[static_cast<std::size_t>(yy * w + xx)];
        }
      out[static_cast<std::size_t>(y * w + x)] = sum / 9.0;
    }
  return out;
}

void standardize(std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double inv = 1.0 / std::sqrt(var + 1e-12);
  for (double& x : v) x = (x - mean) * inv;
}

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw IoError("truncated IDX header in " + path);
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) |
         static_cast<std::uint32_t>(b[3]);
}

DataSplit make_synth_split(const SynthSpec& spec,
                           const std::vector<std::vector<double>>& templates,
                           int per_class, std::uint64_t stream) {
  const int n = spec.classes * per_class;
  DataSplit split;
  split.images =
      Tensor<float>({n, spec.channels, spec.height, spec.width});
  split.labels.resize(static_cast<std::size_t>(n));
  const std::int64_t sample_size =
      static_cast<std::int64_t>(spec.channels) * spec.height * spec.width;
  int row = 0;
  for (int cls = 0; cls < spec.classes; ++cls) {
    for (int k = 0; k < per_class; ++k, ++row) {
      Rng rng(derive_seed(spec.seed,
                          stream ^ (static_cast<std::uint64_t>(cls) << 20 |
                                    static_cast<std::uint64_t>(k))));
      const std::vector<double>& tpl = templates[static_cast<std::size_t>(cls)];
      for (std::int64_t i = 0; i < sample_size; ++i)
        split.images[static_cast<std::int64_t>(row) * sample_size + i] =
            static_cast<float>(tpl[static_cast<std::size_t>(i)] +
                               spec.noise * rng.normal());
      split.labels[static_cast<std::size_t>(row)] =
          static_cast<std::int32_t>(cls);
    }
  }
  return split;
}

}  // namespace

DatasetHandle synth_dataset(const SynthSpec& spec) {
  if (spec.classes < 2) throw Error("synthetic dataset needs >= 2 classes");
  if (spec.channels <= 0 || spec.height <= 0 || spec.width <= 0 ||
      spec.train_per_class <= 0 || spec.eval_per_class <= 0)
    throw Error("synthetic dataset extents must be positive");

  std::vector<std::vector<double>> templates;
  const std::size_t pixels = static_cast<std::size_t>(spec.channels) *
                             static_cast<std::size_t>(spec.height) *
                             static_cast<std::size_t>(spec.width);
  for (int cls = 0; cls < spec.classes; ++cls) {
    Rng rng(derive_seed(spec.seed, 0x74706c00ull + static_cast<std::uint64_t>(cls)));
    std::vector<double> tpl(pixels);
    for (double& v : tpl) v = rng.normal();
    for (int c = 0; c < spec.channels; ++c) {
      std::vector<double> plane(tpl.begin() + c * spec.height * spec.width,
                                tpl.begin() + (c + 1) * spec.height * spec.width);
      plane = box_smooth(plane, spec.height, spec.width);
      plane = box_smooth(plane, spec.height, spec.width);
      std::copy(plane.begin(), plane.end(),
                tpl.begin() + c * spec.height * spec.width);
    }
    standardize(tpl);
    templates.push_back(std::move(tpl));
  }

  DatasetHandle handle;
  handle.train = make_synth_split(spec, templates, spec.train_per_class,
                                  0x747261696eull);
  handle.eval =
      make_synth_split(spec, templates, spec.eval_per_class, 0x6576616cull);
  handle.classes = spec.classes;
  handle.channels = spec.channels;
  handle.height = spec.height;
  handle.width = spec.width;
  handle.mean.assign(static_cast<std::size_t>(spec.channels), 0.0);
  handle.stddev.assign(static_cast<std::size_t>(spec.channels), 1.0);
  return handle;
}

DataSplit load_idx_pair(const std::string& images_path,
                        const std::string& labels_path, double mean,
                        double stddev) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path);
  if (read_be32(img, images_path) != 0x00000803u)
    throw IoError("bad IDX image magic in " + images_path);
  const int n = static_cast<int>(read_be32(img, images_path));
  const int h = static_cast<int>(read_be32(img, images_path));
  const int w = static_cast<int>(read_be32(img, images_path));

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path);
  if (read_be32(lab, labels_path) != 0x00000801u)
    throw IoError("bad IDX label magic in " + labels_path);
  if (static_cast<int>(read_be32(lab, labels_path)) != n)
    throw IoError("IDX image/label counts differ: " + images_path);

  DataSplit split;
  split.images = Tensor<float>({n, 1, h, w});
  split.labels.resize(static_cast<std::size_t>(n));

  std::vector<unsigned char> raw(static_cast<std::size_t>(n) * h * w);
  if (!img.read(reinterpret_cast<char*>(raw.data()),
                static_cast<std::streamsize>(raw.size())))
    throw IoError("truncated IDX image data in " + images_path);
  const double inv = 1.0 / (255.0 * stddev);
  for (std::size_t i = 0; i < raw.size(); ++i)
    split.images[static_cast<std::int64_t>(i)] =
        static_cast<float>(static_cast<double>(raw[i]) * inv - mean / stddev);

  std::vector<unsigned char> labels_raw(static_cast<std::size_t>(n));
  if (!lab.read(reinterpret_cast<char*>(labels_raw.data()), n))
    throw IoError("truncated IDX label data in " + labels_path);
  for (int i = 0; i < n; ++i)
    split.labels[static_cast<std::size_t>(i)] =
        static_cast<std::int32_t>(labels_raw[static_cast<std::size_t>(i)]);
  return split;
}

DatasetHandle load_mnist(const std::string& dir, double mean, double stddev) {
  DatasetHandle handle;
  handle.train = load_idx_pair(dir + "/train-images-idx3-ubyte",
                               dir + "/train-labels-idx1-ubyte", mean, stddev);
  handle.eval = load_idx_pair(dir + "/t10k-images-idx3-ubyte",
                              dir + "/t10k-labels-idx1-ubyte", mean, stddev);
  handle.classes = 10;
  handle.channels = 1;
  handle.height = handle.train.images.dim(2);
  handle.width = handle.train.images.dim(3);
  handle.mean = {mean};
  handle.stddev = {stddev};
  return handle;
}

namespace {

void load_cifar_file(const std::string& path, const std::vector<double>& mean,
                     const std::vector<double>& stddev,
                     std::vector<float>& images,
                     std::vector<std::int32_t>& labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  constexpr int kRecord = 3073;
  std::vector<unsigned char> rec(kRecord);
  while (in.read(reinterpret_cast<char*>(rec.data()), kRecord)) {
    labels.push_back(static_cast<std::int32_t>(rec[0]));
    for (int c = 0; c < 3; ++c) {
      const double inv = 1.0 / (255.0 * stddev[static_cast<std::size_t>(c)]);
      const double shift =
          mean[static_cast<std::size_t>(c)] / stddev[static_cast<std::size_t>(c)];
      for (int i = 0; i < 1024; ++i)
        images.push_back(static_cast<float>(
            static_cast<double>(rec[1 + c * 1024 + i]) * inv - shift));
    }
  }
  if (in.gcount() != 0)
    throw IoError("trailing partial record in " + path);
}

DataSplit finish_cifar_split(std::vector<float> images,
                             std::vector<std::int32_t> labels) {
  const int n = static_cast<int>(labels.size());
  DataSplit split;
  split.images = Tensor<float>({n, 3, 32, 32}, std::move(images));
  split.labels = std::move(labels);
  return split;
}

}  // namespace

DatasetHandle load_cifar10(const std::string& dir,
                           const std::vector<double>& mean,
                           const std::vector<double>& stddev) {
  if (mean.size() != 3 || stddev.size() != 3)
    throw Error("CIFAR-10 normalization needs 3 per-channel constants");
  std::vector<float> train_images;
  std::vector<std::int32_t> train_labels;
  for (int i = 1; i <= 5; ++i)
    load_cifar_file(dir + "/data_batch_" + std::to_string(i) + ".bin", mean,
                    stddev, train_images, train_labels);
  std::vector<float> eval_images;
  std::vector<std::int32_t> eval_labels;
  load_cifar_file(dir + "/test_batch.bin", mean, stddev, eval_images,
                  eval_labels);

  DatasetHandle handle;
  handle.train = finish_cifar_split(std::move(train_images),
                                    std::move(train_labels));
  handle.eval =
      finish_cifar_split(std::move(eval_images), std::move(eval_labels));
  handle.classes = 10;
  handle.channels = 3;
  handle.height = 32;
  handle.width = 32;
  handle.mean = mean;
  handle.stddev = stddev;
  return handle;
}

DataSplit take_batch(const DataSplit& split, const std::vector<int>& indices,
                     std::size_t from, std::size_t count) {
  if (from + count > indices.size())
    throw Error("batch range exceeds index list");
  const std::vector<int>& shape = split.images.shape();
  const std::int64_t sample =
      static_cast<std::int64_t>(shape[1]) * shape[2] * shape[3];
  DataSplit batch;
  batch.images = Tensor<float>(
      {static_cast<int>(count), shape[1], shape[2], shape[3]});
  batch.labels.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const int src = indices[from + k];
    std::memcpy(batch.images.data() + static_cast<std::int64_t>(k) * sample,
                split.images.data() + static_cast<std::int64_t>(src) * sample,
                static_cast<std::size_t>(sample) * sizeof(float));
    batch.labels[k] = split.labels[static_cast<std::size_t>(src)];
  }
  return batch;
}

}  // namespace ocs
