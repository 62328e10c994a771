// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ocs/arch.hpp"
#include "ocs/checkpoint.hpp"
#include "ocs/config.hpp"
#include "ocs/group_verify.hpp"
#include "ocs/groups.hpp"
#include "ocs/report.hpp"
#include "ocs/trainer.hpp"

namespace {

/// Scalar kind byte of a checkpoint (0 = f32, 1 = f64) so resume picks the
/// precision the file was written with.
int checkpoint_kind(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ocs::IoError("cannot open checkpoint: " + path);
  char head[9] = {};
  in.read(head, 9);
  if (in.gcount() != 9 || std::string(head, 8) != "OCSCKPT1")
    throw ocs::IoError("not a checkpoint file: " + path);
  return head[8];
}

template <typename Scalar>
int run_train(ocs::RunState<Scalar> state, const std::string& out_dir,
              int checkpoint_every) {
  const ocs::DatasetHandle data = ocs::load_dataset(state.config);
  ocs::RunPaths paths;
  paths.out_dir = out_dir;
  paths.checkpoint_every = checkpoint_every;
  const ocs::RunRecord rec = ocs::run_one_cycle(state, data, paths);

  std::cout << "epochs:         " << rec.rows.size() << "\n"
            << "sl_start epoch: " << rec.sl_start_epoch << "\n"
            << "stable epoch:   " << rec.stable_epoch << "\n"
            << "MACs:           " << rec.final_macs << " / "
            << rec.baseline_macs << " (ratio " << rec.flops_ratio << ")\n"
            << "params:         " << rec.final_params << " / "
            << rec.baseline_params << " (ratio " << rec.params_ratio << ")\n"
            << "eval accuracy:  " << rec.final_eval_accuracy << "\n";
  if (!rec.diagnostic.empty())
    std::cout << "diagnostic:     " << rec.diagnostic << "\n";
  std::cout << "artifacts in:   " << out_dir << "\n";
  return 0;
}

int cmd_train_prune(const std::string& config_path, bool seed_given,
                    std::uint64_t seed, const std::string& out_dir,
                    const std::string& resume, int checkpoint_every,
                    const std::string& precision) {
  if (!resume.empty()) {
    if (!config_path.empty())
      throw ocs::Error(
          "--resume continues with the checkpointed config; drop --config");
    if (checkpoint_kind(resume) == 0)
      return run_train(ocs::load_checkpoint<float>(resume), out_dir,
                       checkpoint_every);
    return run_train(ocs::load_checkpoint<double>(resume), out_dir,
                     checkpoint_every);
  }
  if (config_path.empty())
    throw ocs::Error("train-prune needs --config or --resume");
  ocs::RunConfig cfg = ocs::load_config(config_path);
  if (seed_given) cfg.seed = seed;
  if (precision == "f64")
    return run_train(ocs::make_run_state<double>(cfg), out_dir,
                     checkpoint_every);
  return run_train(ocs::make_run_state<float>(cfg), out_dir,
                   checkpoint_every);
}

int cmd_verify_groups(const std::string& spec, std::uint64_t seed, int batch,
                      double tolerance, bool verbose) {
  const ocs::ModelGraph graph = ocs::load_arch(spec);
  const ocs::GroupSet groups = ocs::build_groups(graph);
  std::cout << ocs::groups_to_json(graph, groups).dump(2) << "\n";

  const auto results = ocs::verify_groups(graph, seed, batch, tolerance);
  int failures = 0;
  for (const auto& r : results) {
    if (!r.ok) ++failures;
    if (verbose || !r.ok)
      std::cout << "group " << r.group << " channel " << r.channel
                << " max|diff| = " << r.max_abs_diff << " "
                << (r.ok ? "PASS" : "FAIL") << "\n";
  }
  std::cout << (results.size() - failures) << "/" << results.size()
            << " channel removals verified (tolerance " << tolerance
            << ")\n";
  return failures == 0 ? 0 : 1;
}

int cmd_replay(const std::string& log_path) {
  const ocs::ReplayResult r = ocs::replay_stability_log(log_path);
  std::cout << "partitions:        " << r.epochs << "\n"
            << "replayed sl_start: " << r.sl_start_epoch << "\n"
            << "replayed stable:   " << r.stable_epoch << "\n"
            << "recorded sl_start: " << r.recorded_sl_start << "\n"
            << "recorded stable:   " << r.recorded_stable << "\n"
            << (r.match ? "MATCH" : "MISMATCH") << "\n";
  return r.match ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Train a small CNN and carve out a FLOPs-budgeted sub-network in one "
      "training cycle"};
  app.require_subcommand(1);

  // train-prune
  std::string config_path, out_dir = "out", resume, precision = "f32";
  std::uint64_t seed = 0;
  int checkpoint_every = 0;
  auto* train = app.add_subcommand(
      "train-prune", "Run the full cycle: train, stabilize, prune, finish");
  train->add_option("--config", config_path,
                    "Run configuration (JSON)");
  auto* seed_opt =
      train->add_option("--seed", seed, "Override the config seed");
  train->add_option("--out-dir", out_dir,
                    "Directory for logs, model and checkpoint");
  train->add_option("--resume", resume,
                    "Continue from a checkpoint instead of a config");
  train->add_option("--checkpoint-every", checkpoint_every,
                    "Also snapshot every N epochs");
  train->add_option("--precision", precision, "Model scalar type")
      ->check(CLI::IsMember({"f32", "f64"}));

  // verify-groups
  std::string spec;
  std::uint64_t vseed = 0;
  int vbatch = 4;
  double vtol = ocs::kVerifyTolerance;
  bool vverbose = false;
  auto* verify = app.add_subcommand(
      "verify-groups",
      "Print the channel-coupling groups of an architecture and check "
      "zero-vs-remove equivalence for every prunable channel");
  verify->add_option("--spec", spec, "Preset name or architecture JSON path")
      ->required();
  verify->add_option("--seed", vseed, "Randomization seed");
  verify->add_option("--batch", vbatch, "Probe batch size");
  verify->add_option("--tolerance", vtol, "Largest tolerated logit gap");
  verify->add_flag("--verbose", vverbose, "Print one line per channel");

  // replay-stability
  std::string log_path;
  auto* replay = app.add_subcommand(
      "replay-stability",
      "Recompute similarity events from a partition log and compare them "
      "with the recorded outcome");
  replay->add_option("log", log_path, "partitions.jsonl from a run directory")
      ->required();

  // report
  std::string report_dir;
  auto* report = app.add_subcommand(
      "report", "Render the metrics of a finished run as a table");
  report->add_option("dir", report_dir, "Run directory");
  report->add_option("--out-dir", report_dir, "Run directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return cmd_train_prune(config_path, seed_opt->count() > 0, seed,
                             out_dir, resume, checkpoint_every, precision);
    if (verify->parsed())
      return cmd_verify_groups(spec, vseed, vbatch, vtol, vverbose);
    if (replay->parsed()) return cmd_replay(log_path);
    if (report->parsed()) {
      if (report_dir.empty())
        throw ocs::Error("report needs a run directory");
      std::cout << ocs::render_report(report_dir);
      return 0;
    }
  } catch (const ocs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
