// SPDX-License-Identifier: Apache-2.0
#include "ocs/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>
#include <vector>

#include "ocs/arch.hpp"

namespace ocs {

namespace {

constexpr char kCheckpointMagic[8] = {'O', 'C', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr char kModelMagic[8] = {'O', 'C', 'S', 'M', 'O', 'D', 'L', '1'};

template <typename Scalar>
constexpr std::uint8_t scalar_kind();
template <>
constexpr std::uint8_t scalar_kind<float>() {
  return 0;
}
template <>
constexpr std::uint8_t scalar_kind<double>() {
  return 1;
}

void write_bytes(std::ofstream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data),
            static_cast<std::streamsize>(size));
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  write_bytes(out, buf, 8);
}

void read_bytes(std::ifstream& in, void* data, std::size_t size,
                const std::string& what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size)
    throw IoError("truncated file while reading " + what);
}

std::uint64_t read_u64(std::ifstream& in, const std::string& what) {
  unsigned char buf[8];
  read_bytes(in, buf, 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

/// Raw scalars, least-significant byte first regardless of host order.
template <typename Scalar>
void write_scalars(std::ofstream& out, const Scalar* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    write_bytes(out, data, n * sizeof(Scalar));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      unsigned char buf[sizeof(Scalar)];
      std::memcpy(buf, &data[i], sizeof(Scalar));
      for (std::size_t b = 0; b < sizeof(Scalar) / 2; ++b)
        std::swap(buf[b], buf[sizeof(Scalar) - 1 - b]);
      write_bytes(out, buf, sizeof(Scalar));
    }
  }
}

template <typename Scalar>
void read_scalars(std::ifstream& in, Scalar* data, std::size_t n,
                  const std::string& what) {
  read_bytes(in, data, n * sizeof(Scalar), what);
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < n; ++i) {
      unsigned char buf[sizeof(Scalar)];
      std::memcpy(buf, &data[i], sizeof(Scalar));
      for (std::size_t b = 0; b < sizeof(Scalar) / 2; ++b)
        std::swap(buf[b], buf[sizeof(Scalar) - 1 - b]);
      std::memcpy(&data[i], buf, sizeof(Scalar));
    }
  }
}

nlohmann::json value_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

double null_or_value(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

nlohmann::json int_map_to_json(const std::map<int, std::vector<int>>& m) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [k, v] : m) out[std::to_string(k)] = v;
  return out;
}

std::map<int, std::vector<int>> int_map_from_json(const nlohmann::json& j) {
  std::map<int, std::vector<int>> out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[std::stoi(it.key())] = it.value().get<std::vector<int>>();
  return out;
}

nlohmann::json rows_to_json(const std::vector<EpochRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const EpochRow& r : rows) {
    nlohmann::json jr;
    jr["epoch"] = r.epoch;
    jr["lr"] = r.lr;
    jr["train_loss"] = r.train_loss;
    jr["penalty_loss"] = r.penalty_loss;
    jr["train_accuracy"] = r.train_accuracy;
    jr["eval_accuracy"] = r.eval_accuracy;
    jr["j"] = value_or_null(r.j);
    jr["j_avg"] = value_or_null(r.j_avg);
    jr["lambda"] = r.lambda;
    jr["temp_ratio"] = value_or_null(r.temp_ratio);
    jr["sl_start"] = r.sl_start;
    jr["stable"] = r.stable;
    out.push_back(std::move(jr));
  }
  return out;
}

std::vector<EpochRow> rows_from_json(const nlohmann::json& j) {
  std::vector<EpochRow> rows;
  for (const auto& jr : j) {
    EpochRow r;
    r.epoch = jr.at("epoch").get<int>();
    r.lr = jr.at("lr").get<double>();
    r.train_loss = jr.at("train_loss").get<double>();
    r.penalty_loss = jr.at("penalty_loss").get<double>();
    r.train_accuracy = jr.at("train_accuracy").get<double>();
    r.eval_accuracy = jr.at("eval_accuracy").get<double>();
    r.j = null_or_value(jr.at("j"));
    r.j_avg = null_or_value(jr.at("j_avg"));
    r.lambda = jr.at("lambda").get<double>();
    r.temp_ratio = null_or_value(jr.at("temp_ratio"));
    r.sl_start = jr.at("sl_start").get<bool>();
    r.stable = jr.at("stable").get<bool>();
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::json norm_rows_to_json(const std::vector<GroupNormRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const GroupNormRow& r : rows) {
    nlohmann::json jr;
    jr["epoch"] = r.epoch;
    jr["prune_set"] = r.prune_set;
    jr["count"] = r.count;
    jr["mean_norm"] = r.mean_norm;
    jr["min_norm"] = r.min_norm;
    jr["max_norm"] = r.max_norm;
    jr["bins"] = std::vector<int>(r.bins, r.bins + 7);
    out.push_back(std::move(jr));
  }
  return out;
}

std::vector<GroupNormRow> norm_rows_from_json(const nlohmann::json& j) {
  std::vector<GroupNormRow> rows;
  for (const auto& jr : j) {
    GroupNormRow r;
    r.epoch = jr.at("epoch").get<int>();
    r.prune_set = jr.at("prune_set").get<bool>();
    r.count = jr.at("count").get<int>();
    r.mean_norm = jr.at("mean_norm").get<double>();
    r.min_norm = jr.at("min_norm").get<double>();
    r.max_norm = jr.at("max_norm").get<double>();
    const auto bins = jr.at("bins").get<std::vector<int>>();
    if (bins.size() != 7) throw IoError("checkpoint: bad norm-bin count");
    std::copy(bins.begin(), bins.end(), r.bins);
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json signatures_to_json(const std::vector<Signature>& sigs) {
  nlohmann::json out = nlohmann::json::array();
  for (const Signature& s : sigs) out.push_back(int_map_to_json(s));
  return out;
}

std::vector<Signature> signatures_from_json(const nlohmann::json& j) {
  std::vector<Signature> sigs;
  for (const auto& js : j) sigs.push_back(int_map_from_json(js));
  return sigs;
}

struct TensorEntry {
  std::string key;  // "p:" param, "b:" buffer, "m:" momentum
  std::vector<int> shape;
};

template <typename Scalar>
std::vector<TensorEntry> tensor_manifest(const RunState<Scalar>& state) {
  std::vector<TensorEntry> entries;
  for (const auto& [key, t] : state.params.tensors())
    entries.push_back({"p:" + key, t.shape()});
  for (const auto& [key, t] : state.params.buffers())
    entries.push_back({"b:" + key, t.shape()});
  for (const auto& [key, t] : state.opt.momentum_buffers)
    entries.push_back({"m:" + key, t.shape()});
  return entries;
}

}  // namespace

template <typename Scalar>
void save_checkpoint(const std::string& path, const RunState<Scalar>& state) {
  nlohmann::json blob;
  blob["config"] = config_to_json(state.config);
  blob["original_arch"] = arch_to_json(state.original_graph);
  blob["arch"] = arch_to_json(state.graph);
  blob["next_epoch"] = state.next_epoch;
  blob["pruned"] = state.pruned;
  blob["baseline_macs"] = state.baseline_macs;
  blob["kept"] = int_map_to_json(state.kept);
  blob["final_selection"] = int_map_to_json(state.final_selection);
  blob["penalty"] = {{"lambda", state.penalty.lambda},
                     {"start_epoch", state.penalty.start_epoch},
                     {"last_epoch", state.penalty.last_epoch}};
  blob["stability"] = {
      {"first_epoch", state.stability.first_epoch()},
      {"history", signatures_to_json(state.stability.history())},
      {"sl_start", state.stability.sl_start_epoch()},
      {"stable", state.stability.stable_epoch()}};
  blob["rows"] = rows_to_json(state.rows);
  blob["norm_rows"] = norm_rows_to_json(state.norm_rows);

  const auto entries = tensor_manifest(state);
  nlohmann::json jt = nlohmann::json::array();
  for (const TensorEntry& e : entries)
    jt.push_back({{"key", e.key}, {"shape", e.shape}});
  blob["tensors"] = std::move(jt);

  const std::string text = blob.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  write_bytes(out, kCheckpointMagic, 8);
  const std::uint8_t kind = scalar_kind<Scalar>();
  write_bytes(out, &kind, 1);
  write_u64(out, text.size());
  write_bytes(out, text.data(), text.size());

  for (const TensorEntry& e : entries) {
    const std::string key = e.key.substr(2);
    const Tensor<Scalar>& t = e.key[0] == 'p'   ? state.params.tensor(key)
                              : e.key[0] == 'b' ? state.params.buffer(key)
                                                : state.opt.momentum_buffers
                                                      .at(key);
    write_scalars(out, t.data(), static_cast<std::size_t>(t.size()));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

template <typename Scalar>
RunState<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  read_bytes(in, magic, 8, "checkpoint magic");
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IoError("not a checkpoint file: " + path);
  std::uint8_t kind = 0;
  read_bytes(in, &kind, 1, "scalar kind");
  if (kind != scalar_kind<Scalar>())
    throw IoError("checkpoint scalar kind " + std::to_string(kind) +
                  " does not match the requested precision");
  const std::uint64_t len = read_u64(in, "header length");
  std::string text(len, '\0');
  read_bytes(in, text.data(), len, "checkpoint header");
  nlohmann::json blob;
  try {
    blob = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header: " + std::string(e.what()));
  }

  RunState<Scalar> state;
  try {
    state.config = config_from_json(blob.at("config"));
    state.original_graph = build_model(blob.at("original_arch"));
    state.graph = build_model(blob.at("arch"));
    state.next_epoch = blob.at("next_epoch").get<int>();
    state.pruned = blob.at("pruned").get<bool>();
    state.baseline_macs = blob.at("baseline_macs").get<std::int64_t>();
    state.kept = int_map_from_json(blob.at("kept"));
    state.final_selection = int_map_from_json(blob.at("final_selection"));
    state.penalty.lambda = blob.at("penalty").at("lambda").get<double>();
    state.penalty.start_epoch =
        blob.at("penalty").at("start_epoch").get<int>();
    state.penalty.last_epoch = blob.at("penalty").at("last_epoch").get<int>();
    state.rows = rows_from_json(blob.at("rows"));
    state.norm_rows = norm_rows_from_json(blob.at("norm_rows"));

    const auto& js = blob.at("stability");
    state.stability = StabilityTracker::replay(
        state.config.stability, signatures_from_json(js.at("history")),
        js.at("first_epoch").get<int>());
    if (state.stability.sl_start_epoch() != js.at("sl_start").get<int>() ||
        state.stability.stable_epoch() != js.at("stable").get<int>())
      throw IoError("checkpoint stability replay disagrees with the recorded "
                    "events; file is corrupt");

    state.opt = OptimizerState<Scalar>();
    state.opt.momentum = state.config.momentum;
    state.opt.weight_decay = state.config.weight_decay;

    for (const auto& je : blob.at("tensors")) {
      const std::string tagged = je.at("key").get<std::string>();
      const auto shape = je.at("shape").get<std::vector<int>>();
      if (tagged.size() < 3 || tagged[1] != ':')
        throw IoError("checkpoint: bad tensor key " + tagged);
      const std::string key = tagged.substr(2);
      Tensor<Scalar> t(shape);
      read_scalars(in, t.data(), static_cast<std::size_t>(t.size()),
                   "tensor " + tagged);
      switch (tagged[0]) {
        case 'p':
          state.params.tensors()[key] = std::move(t);
          break;
        case 'b':
          state.params.buffers()[key] = std::move(t);
          break;
        case 'm':
          state.opt.momentum_buffers[key] = std::move(t);
          break;
        default:
          throw IoError("checkpoint: bad tensor key " + tagged);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header: " + std::string(e.what()));
  }
  state.params.bump_version();
  return state;
}

template void save_checkpoint<float>(const std::string&,
                                     const RunState<float>&);
template void save_checkpoint<double>(const std::string&,
                                      const RunState<double>&);
template RunState<float> load_checkpoint<float>(const std::string&);
template RunState<double> load_checkpoint<double>(const std::string&);

template <typename Scalar>
void save_model(const std::string& path, const ModelGraph& graph,
                const ParamStore<Scalar>& params, const nlohmann::json& extra) {
  nlohmann::json manifest;
  manifest["arch"] = arch_to_json(graph);
  manifest["scalar"] = "f32";
  nlohmann::json jt = nlohmann::json::array();
  for (const auto& [key, t] : params.tensors())
    jt.push_back(
        {{"key", key}, {"kind", "param"}, {"shape", t.shape()}});
  for (const auto& [key, t] : params.buffers())
    jt.push_back(
        {{"key", key}, {"kind", "buffer"}, {"shape", t.shape()}});
  manifest["tensors"] = std::move(jt);
  if (extra.is_object())
    for (auto it = extra.begin(); it != extra.end(); ++it)
      manifest[it.key()] = it.value();

  const std::string text = manifest.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open model file for writing: " + path);
  write_bytes(out, kModelMagic, 8);
  write_u64(out, text.size());
  write_bytes(out, text.data(), text.size());
  for (const auto& [key, t] : params.tensors()) {
    const Tensor<float> f = t.template cast<float>();
    write_scalars(out, f.data(), static_cast<std::size_t>(f.size()));
  }
  for (const auto& [key, t] : params.buffers()) {
    const Tensor<float> f = t.template cast<float>();
    write_scalars(out, f.data(), static_cast<std::size_t>(f.size()));
  }
  if (!out) throw IoError("failed writing model file: " + path);
}

template void save_model<float>(const std::string&, const ModelGraph&,
                                const ParamStore<float>&,
                                const nlohmann::json&);
template void save_model<double>(const std::string&, const ModelGraph&,
                                 const ParamStore<double>&,
                                 const nlohmann::json&);

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);
  char magic[8];
  read_bytes(in, magic, 8, "model magic");
  if (std::memcmp(magic, kModelMagic, 8) != 0)
    throw IoError("not a model file: " + path);
  const std::uint64_t len = read_u64(in, "manifest length");
  std::string text(len, '\0');
  read_bytes(in, text.data(), len, "model manifest");

  LoadedModel model;
  try {
    model.manifest = nlohmann::json::parse(text);
    model.graph = build_model(model.manifest.at("arch"));
    for (const auto& je : model.manifest.at("tensors")) {
      const std::string key = je.at("key").get<std::string>();
      const std::string kind = je.at("kind").get<std::string>();
      const auto shape = je.at("shape").get<std::vector<int>>();
      Tensor<float> t(shape);
      read_scalars(in, t.data(), static_cast<std::size_t>(t.size()),
                   "tensor " + key);
      if (kind == "param")
        model.params.tensors()[key] = std::move(t);
      else if (kind == "buffer")
        model.params.buffers()[key] = std::move(t);
      else
        throw IoError("model manifest: bad tensor kind " + kind);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt model manifest: " + std::string(e.what()));
  }
  return model;
}

}  // namespace ocs
