// SPDX-License-Identifier: Apache-2.0
#include "ocs/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "ocs/config.hpp"

namespace ocs {

namespace {

constexpr const char* kMetricsHeader =
    "epoch,lr,train_loss,penalty_loss,train_accuracy,eval_accuracy,j,j_avg,"
    "lambda,temp_ratio,event";

/// Shortest text that parses back to the identical double ("%.17g" is always
/// sufficient); NaN renders as an empty cell.
std::string csv_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_cell(const std::string& cell, const std::string& column,
                  std::size_t line) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw IoError("metrics.csv line " + std::to_string(line) + ": column " +
                  column + " is not a number: \"" + cell + "\"");
  }
  if (used != cell.size())
    throw IoError("metrics.csv line " + std::to_string(line) + ": column " +
                  column + " has trailing junk: \"" + cell + "\"");
  return v;
}

std::vector<std::string> split_csv(const std::string& row) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : row) {
    if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

std::string event_name(const EpochRow& row) {
  if (row.sl_start && row.stable) return "sl_start+stable";
  if (row.sl_start) return "sl_start";
  if (row.stable) return "stable";
  return "";
}

nlohmann::json sig_to_json(const Signature& sig) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [node, channels] : sig) out[std::to_string(node)] = channels;
  return out;
}

Signature sig_from_json(const nlohmann::json& j) {
  Signature out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[std::stoi(it.key())] = it.value().get<std::vector<int>>();
  return out;
}

}  // namespace

void write_metrics_csv(const std::string& path,
                       const std::vector<EpochRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open metrics file for writing: " + path);
  out << kMetricsHeader << "\n";
  for (const EpochRow& r : rows) {
    out << r.epoch << ',' << csv_double(r.lr) << ','
        << csv_double(r.train_loss) << ',' << csv_double(r.penalty_loss)
        << ',' << csv_double(r.train_accuracy) << ','
        << csv_double(r.eval_accuracy) << ',' << csv_double(r.j) << ','
        << csv_double(r.j_avg) << ',' << csv_double(r.lambda) << ','
        << csv_double(r.temp_ratio) << ',' << event_name(r) << "\n";
  }
  if (!out) throw IoError("failed writing metrics file: " + path);
}

std::vector<EpochRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw IoError("metrics.csv: bad header, expected \"" +
                  std::string(kMetricsHeader) + "\"");
  std::vector<EpochRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 11)
      throw IoError("metrics.csv line " + std::to_string(lineno) +
                    ": expected 11 columns, got " +
                    std::to_string(cells.size()));
    EpochRow r;
    r.epoch = static_cast<int>(parse_cell(cells[0], "epoch", lineno));
    r.lr = parse_cell(cells[1], "lr", lineno);
    r.train_loss = parse_cell(cells[2], "train_loss", lineno);
    r.penalty_loss = parse_cell(cells[3], "penalty_loss", lineno);
    r.train_accuracy = parse_cell(cells[4], "train_accuracy", lineno);
    r.eval_accuracy = parse_cell(cells[5], "eval_accuracy", lineno);
    r.j = parse_cell(cells[6], "j", lineno);
    r.j_avg = parse_cell(cells[7], "j_avg", lineno);
    r.lambda = parse_cell(cells[8], "lambda", lineno);
    r.temp_ratio = parse_cell(cells[9], "temp_ratio", lineno);
    const std::string& event = cells[10];
    if (event == "sl_start") {
      r.sl_start = true;
    } else if (event == "stable") {
      r.stable = true;
    } else if (event == "sl_start+stable") {
      r.sl_start = r.stable = true;
    } else if (!event.empty()) {
      throw IoError("metrics.csv line " + std::to_string(lineno) +
                    ": unknown event \"" + event + "\"");
    }
    rows.push_back(r);
  }
  return rows;
}

void write_partition_log(const std::string& path, const StabilityConfig& cfg,
                         const StabilityTracker& tracker) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open partition log for writing: " + path);
  nlohmann::json meta;
  meta["type"] = "meta";
  meta["gap"] = cfg.gap;
  meta["window"] = cfg.window;
  meta["tau"] = cfg.tau;
  meta["epsilon"] = cfg.epsilon;
  meta["fixed_sl_start"] = cfg.fixed_sl_start;
  meta["first_epoch"] = tracker.first_epoch();
  out << meta.dump() << "\n";
  int epoch = tracker.first_epoch();
  for (const Signature& sig : tracker.history()) {
    nlohmann::json row;
    row["type"] = "partition";
    row["epoch"] = epoch++;
    row["retained"] = sig_to_json(sig);
    out << row.dump() << "\n";
  }
  nlohmann::json events;
  events["type"] = "events";
  events["sl_start"] = tracker.sl_start_epoch();
  events["stable"] = tracker.stable_epoch();
  out << events.dump() << "\n";
  if (!out) throw IoError("failed writing partition log: " + path);
}

ReplayResult replay_stability_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open partition log: " + path);

  StabilityConfig cfg;
  int first_epoch = -1;
  bool have_meta = false, have_events = false;
  std::vector<Signature> history;
  ReplayResult result;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("partition log line " + std::to_string(lineno) + ": " +
                    e.what());
    }
    try {
      const std::string type = row.at("type").get<std::string>();
      if (type == "meta") {
        cfg.gap = row.at("gap").get<int>();
        cfg.window = row.at("window").get<int>();
        cfg.tau = row.at("tau").get<double>();
        cfg.epsilon = row.at("epsilon").get<double>();
        cfg.fixed_sl_start = row.at("fixed_sl_start").get<int>();
        first_epoch = row.at("first_epoch").get<int>();
        have_meta = true;
      } else if (type == "partition") {
        const int epoch = row.at("epoch").get<int>();
        if (!have_meta)
          throw IoError("partition log: partition row before meta");
        if (epoch != first_epoch + static_cast<int>(history.size()))
          throw IoError("partition log line " + std::to_string(lineno) +
                        ": epochs are not consecutive");
        history.push_back(sig_from_json(row.at("retained")));
      } else if (type == "events") {
        result.recorded_sl_start = row.at("sl_start").get<int>();
        result.recorded_stable = row.at("stable").get<int>();
        have_events = true;
      } else {
        throw IoError("partition log line " + std::to_string(lineno) +
                      ": unknown row type \"" + type + "\"");
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError("partition log line " + std::to_string(lineno) + ": " +
                    e.what());
    }
  }
  if (!have_meta) throw IoError("partition log: missing meta row");
  if (!have_events) throw IoError("partition log: missing events row");

  const StabilityTracker replayed =
      StabilityTracker::replay(cfg, history, first_epoch);
  result.epochs = static_cast<int>(history.size());
  result.sl_start_epoch = replayed.sl_start_epoch();
  result.stable_epoch = replayed.stable_epoch();
  result.match = result.sl_start_epoch == result.recorded_sl_start &&
                 result.stable_epoch == result.recorded_stable;
  return result;
}

void write_groupnorm_csv(const std::string& path,
                         const std::vector<GroupNormRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open norm log for writing: " + path);
  out << "epoch,set,count,mean_norm,min_norm,max_norm,bin0,bin1,bin2,bin3,"
         "bin4,bin5,bin6\n";
  for (const GroupNormRow& r : rows) {
    out << r.epoch << ',' << (r.prune_set ? "prune" : "keep") << ','
        << r.count << ',' << csv_double(r.mean_norm) << ','
        << csv_double(r.min_norm) << ',' << csv_double(r.max_norm);
    for (int b : r.bins) out << ',' << b;
    out << "\n";
  }
  if (!out) throw IoError("failed writing norm log: " + path);
}

void write_summary_json(const std::string& path, const RunConfig& cfg,
                        const RunRecord& record) {
  nlohmann::json j;
  j["config"] = config_to_json(cfg);
  j["epochs"] = record.rows.size();
  j["sl_start_epoch"] = record.sl_start_epoch;
  j["stable_epoch"] = record.stable_epoch;
  j["pruned"] = record.pruned;
  j["final_eval_accuracy"] = record.final_eval_accuracy;
  j["final_train_accuracy"] =
      record.rows.empty() ? 0.0 : record.rows.back().train_accuracy;
  j["baseline_macs"] = record.baseline_macs;
  j["final_macs"] = record.final_macs;
  j["flops_ratio"] = record.flops_ratio;
  j["baseline_params"] = record.baseline_params;
  j["final_params"] = record.final_params;
  j["params_ratio"] = record.params_ratio;
  if (record.diagnostic.empty())
    j["diagnostic"] = nullptr;
  else
    j["diagnostic"] = record.diagnostic;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open summary for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing summary: " + path);
}

std::string render_report(const std::string& out_dir) {
  nlohmann::json summary;
  {
    std::ifstream in(out_dir + "/summary.json");
    if (!in) throw IoError("cannot open " + out_dir + "/summary.json");
    try {
      in >> summary;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("corrupt summary.json: " + std::string(e.what()));
    }
  }
  const auto rows = read_metrics_csv(out_dir + "/metrics.csv");

  std::ostringstream out;
  auto field = [&](const char* key) -> std::string {
    if (!summary.contains(key)) return "?";
    const auto& v = summary.at(key);
    if (v.is_null()) return "-";
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  };
  out << "run summary\n";
  out << "  arch:            " << summary.value("/config/arch"_json_pointer,
                                                std::string("?"))
      << "\n";
  out << "  dataset:         "
      << summary.value("/config/dataset/kind"_json_pointer, std::string("?"))
      << "\n";
  out << "  epochs:          " << field("epochs") << "\n";
  out << "  sl_start epoch:  " << field("sl_start_epoch") << "\n";
  out << "  stable epoch:    " << field("stable_epoch") << "\n";
  out << "  pruned:          " << field("pruned") << "\n";
  out << "  MACs:            " << field("final_macs") << " / "
      << field("baseline_macs") << " (ratio " << field("flops_ratio")
      << ")\n";
  out << "  params:          " << field("final_params") << " / "
      << field("baseline_params") << " (ratio " << field("params_ratio")
      << ")\n";
  out << "  final eval acc:  " << field("final_eval_accuracy") << "\n";
  out << "  diagnostic:      " << field("diagnostic") << "\n";
  out << "\n";

  char buf[256];
  out << " epoch       lr    loss  train%   eval%   j_avg    lambda   ratio"
         "  event\n";
  for (const EpochRow& r : rows) {
    auto pct = [](double v) { return 100.0 * v; };
    std::snprintf(buf, sizeof(buf),
                  "%6d %8.5f %7.4f %7.2f %7.2f %7.4f %9.6f %7.4f  %s\n",
                  r.epoch, r.lr, r.train_loss, pct(r.train_accuracy),
                  pct(r.eval_accuracy), r.j_avg, r.lambda, r.temp_ratio,
                  event_name(r).c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace ocs
