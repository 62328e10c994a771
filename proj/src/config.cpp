// SPDX-License-Identifier: Apache-2.0
#include "ocs/config.hpp"

#include <fstream>

#include "ocs/error.hpp"

namespace ocs {
namespace {

using nlohmann::json;

template <typename T>
void pull(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  pull(j, "arch", cfg.arch);
  pull(j, "seed", cfg.seed);
  pull(j, "init_weights", cfg.init_weights);

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    pull(d, "kind", cfg.dataset);
    pull(d, "dir", cfg.data_dir);
    pull(d, "classes", cfg.synth.classes);
    pull(d, "train_per_class", cfg.synth.train_per_class);
    pull(d, "eval_per_class", cfg.synth.eval_per_class);
    pull(d, "channels", cfg.synth.channels);
    pull(d, "height", cfg.synth.height);
    pull(d, "width", cfg.synth.width);
    pull(d, "noise", cfg.synth.noise);
    pull(d, "seed", cfg.synth.seed);
  }

  pull(j, "total_epochs", cfg.total_epochs);
  pull(j, "batch_size", cfg.batch_size);
  pull(j, "momentum", cfg.momentum);
  pull(j, "weight_decay", cfg.weight_decay);

  if (j.contains("lr")) {
    const json& l = j.at("lr");
    std::string kind = lr_kind_name(cfg.lr.kind);
    pull(l, "kind", kind);
    cfg.lr.kind = lr_kind_from_name(kind);
    pull(l, "base", cfg.lr.base_lr);
    pull(l, "milestones", cfg.lr.milestones);
    pull(l, "decay", cfg.lr.decay);
    pull(l, "min", cfg.lr.min_lr);
  }
  cfg.lr.total_epochs = cfg.total_epochs;  // cosine horizon tracks the budget

  pull(j, "alpha", cfg.alpha);
  if (j.contains("saliency")) {
    const json& s = j.at("saliency");
    std::string mode = "per_channel";
    pull(s, "mode", mode);
    if (mode == "per_channel")
      cfg.score.mode = ScoreMode::kPerChannel;
    else if (mode == "group_mean")
      cfg.score.mode = ScoreMode::kGroupMean;
    else
      throw Error("config field 'saliency.mode' must be per_channel or "
                  "group_mean");
    pull(s, "producer_only", cfg.score.producer_only);
  }

  if (j.contains("stability")) {
    const json& s = j.at("stability");
    pull(s, "gap_i", cfg.stability.gap);
    pull(s, "window_r", cfg.stability.window);
    pull(s, "tau", cfg.stability.tau);
    pull(s, "epsilon", cfg.stability.epsilon);
    if (s.contains("sl_start")) {
      if (s.at("sl_start").is_string()) {
        if (s.at("sl_start").get<std::string>() != "auto")
          throw Error("config field 'stability.sl_start' must be an epoch "
                      "index or \"auto\"");
        cfg.stability.fixed_sl_start = -1;
      } else {
        pull(s, "sl_start", cfg.stability.fixed_sl_start);
      }
    }
  }

  if (j.contains("penalty")) {
    const json& p = j.at("penalty");
    pull(p, "lambda0", cfg.penalty.lambda0);
    pull(p, "delta", cfg.penalty.delta);
    pull(p, "every_dt", cfg.penalty.every);
  }
  if (j.contains("ablation")) {
    const json& a = j.at("ablation");
    pull(a, "loss_penalty", cfg.loss_penalty);
    pull(a, "shrink", cfg.shrink);
    pull(a, "shrink_per_iteration", cfg.shrink_per_iteration);
  }
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["arch"] = cfg.arch;
  j["seed"] = cfg.seed;
  j["init_weights"] = cfg.init_weights;
  j["dataset"] = {{"kind", cfg.dataset},
                  {"dir", cfg.data_dir},
                  {"classes", cfg.synth.classes},
                  {"train_per_class", cfg.synth.train_per_class},
                  {"eval_per_class", cfg.synth.eval_per_class},
                  {"channels", cfg.synth.channels},
                  {"height", cfg.synth.height},
                  {"width", cfg.synth.width},
                  {"noise", cfg.synth.noise},
                  {"seed", cfg.synth.seed}};
  j["total_epochs"] = cfg.total_epochs;
  j["batch_size"] = cfg.batch_size;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["lr"] = {{"kind", lr_kind_name(cfg.lr.kind)},
             {"base", cfg.lr.base_lr},
             {"milestones", cfg.lr.milestones},
             {"decay", cfg.lr.decay},
             {"min", cfg.lr.min_lr}};
  j["alpha"] = cfg.alpha;
  j["saliency"] = {
      {"mode",
       cfg.score.mode == ScoreMode::kPerChannel ? "per_channel" : "group_mean"},
      {"producer_only", cfg.score.producer_only}};
  j["stability"] = {{"gap_i", cfg.stability.gap},
                    {"window_r", cfg.stability.window},
                    {"tau", cfg.stability.tau},
                    {"epsilon", cfg.stability.epsilon}};
  if (cfg.stability.fixed_sl_start >= 0)
    j["stability"]["sl_start"] = cfg.stability.fixed_sl_start;
  else
    j["stability"]["sl_start"] = "auto";
  j["penalty"] = {{"lambda0", cfg.penalty.lambda0},
                  {"delta", cfg.penalty.delta},
                  {"every_dt", cfg.penalty.every}};
  j["ablation"] = {{"loss_penalty", cfg.loss_penalty},
                   {"shrink", cfg.shrink},
                   {"shrink_per_iteration", cfg.shrink_per_iteration}};
  return j;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed config JSON " + path + ": " + e.what());
  }
  RunConfig cfg = config_from_json(j);
  validate_config(cfg);
  return cfg;
}

void validate_config(const RunConfig& cfg) {
  if (!(cfg.alpha > 0.0) || cfg.alpha > 1.0)
    throw Error("config field 'alpha' must lie in (0, 1]");
  if (cfg.total_epochs <= 0) throw Error("config field 'total_epochs' must be positive");
  if (cfg.batch_size <= 0) throw Error("config field 'batch_size' must be positive");
  if (cfg.lr.base_lr < 0) throw Error("config field 'lr.base' must be non-negative");
  for (std::size_t i = 0; i < cfg.lr.milestones.size(); ++i) {
    if (cfg.lr.milestones[i] >= cfg.total_epochs)
      throw Error("config field 'lr.milestones' must stay below total_epochs");
    if (i > 0 && cfg.lr.milestones[i] <= cfg.lr.milestones[i - 1])
      throw Error("config field 'lr.milestones' must increase strictly");
  }
  if (cfg.stability.gap < 1) throw Error("config field 'stability.gap_i' must be >= 1");
  if (cfg.stability.window < 1)
    throw Error("config field 'stability.window_r' must be >= 1");
  if (cfg.stability.epsilon < 0)
    throw Error("config field 'stability.epsilon' must be non-negative");
  if (cfg.penalty.every < 1)
    throw Error("config field 'penalty.every_dt' must be >= 1");
  if (cfg.penalty.lambda0 < 0 || cfg.penalty.delta < 0)
    throw Error("config fields 'penalty.lambda0'/'penalty.delta' must be "
                "non-negative");
  if (cfg.dataset != "synth" && cfg.dataset != "mnist" && cfg.dataset != "cifar10")
    throw Error("config field 'dataset.kind' must be synth, mnist or cifar10");
  if (cfg.dataset != "synth" && cfg.data_dir.empty())
    throw Error("config field 'dataset.dir' required for file-backed datasets");
}

}  // namespace ocs
