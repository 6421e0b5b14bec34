// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <memory>

#include "dmgnn/cli.hpp"

namespace {

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  for (char& c : s) {
    if (c == '_') c = '-';
  }
  return s;
}

/// Every config key becomes an option (boolean keys are flags, which also
/// accept --flag=false); values are type-checked when the RunConfig is
/// assembled.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON file of config keys")->check(CLI::ExistingFile);
    for (const auto& k : dmgnn::config_keys()) {
      std::string help = k.help;
      help += " (default " + k.default_value.dump() + ")";
      if (k.default_value.is_boolean()) {
        app->add_flag(flag_name(k.name), switches[k.name], help);
      } else {
        app->add_option(flag_name(k.name), values[k.name], help);
      }
    }
  }

  dmgnn::RunConfig build(const CLI::App* app) const {
    dmgnn::RunConfig rc;
    if (!config_file.empty()) rc.merge_file(config_file);
    for (const auto& k : dmgnn::config_keys()) {
      if (app->count(flag_name(k.name)) == 0) continue;
      if (k.default_value.is_boolean()) {
        rc.set(k.name, switches.at(k.name));
      } else {
        rc.set_from_string(k.name, values.at(k.name));
      }
    }
    return rc;
  }
};

}  // namespace

int main(int argc, char** argv) {
  using namespace dmgnn;
  CLI::App app{"Dual message-passing graph network for scene-graph question answering"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset and split it into train/test JSONL");
  auto* train = app.add_subcommand("train", "train on a JSONL dataset; writes checkpoint.bin and loss.csv");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a JSONL dataset");
  auto* explain = app.add_subcommand("explain", "print the top attention rows for one question");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of all gradients on the micro fixture");
  auto* dualize_cmd = app.add_subcommand("dualize", "print object and relation views of scene graphs");
  auto* metrics = app.add_subcommand("metrics", "R@K and mR@K of ranked triplet predictions");

  std::map<CLI::App*, std::unique_ptr<ConfigFlags>> flags;
  for (auto* sub : {synth, train, eval, explain, gradcheck}) {
    flags[sub] = std::make_unique<ConfigFlags>();
    flags[sub]->attach(sub);
  }

  bool audit = false;
  synth->add_flag("--audit", audit, "check every question against the brute-force answer enumerator");

  std::string checkpoint, data;
  bool force = false;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", data, "dataset (defaults to --test)");
  eval->add_flag("--force", force, "evaluate even if the model config hash differs");

  std::string graph_file, question;
  std::size_t k = 5;
  explain->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  explain->add_option("--graph", graph_file, "scene graph JSON")->required();
  explain->add_option("--question", question, "whitespace-separated question tokens")->required();
  explain->add_option("--k", k, "rows to print")->capture_default_str();
  explain->add_flag("--force", force, "run even if the model config hash differs");

  bool verify = false;
  dualize_cmd->add_option("graph", graph_file, "graph file (JSON or JSONL)")->required();
  dualize_cmd->add_flag("--verify", verify, "compare every relation view with brute-force enumeration");

  std::string pred_file, gt_file, ks = "20,50,100";
  metrics->add_option("--pred", pred_file, "predictions JSONL")->required();
  metrics->add_option("--gt", gt_file, "ground-truth JSONL")->required();
  metrics->add_option("--k", ks, "comma-separated K values")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kUsage;
  }

  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
  if (*dualize_cmd) return cli::cmd_dualize(graph_file, verify, out, err);
  if (*metrics) return cli::cmd_metrics(pred_file, gt_file, ks, out, err);

  for (auto& [sub, f] : flags) {
    if (!*sub) continue;
    RunConfig rc;
    const int code = cli::guarded(
        [&] {
          rc = f->build(sub);
          return cli::kOk;
        },
        err);
    if (code != cli::kOk) return code;
    if (sub == synth) return cli::cmd_synth(rc, audit, out, err);
    if (sub == train) return cli::cmd_train(rc, out, err);
    if (sub == eval) return cli::cmd_eval(rc, checkpoint, data, force, out, err);
    if (sub == explain) return cli::cmd_explain(rc, checkpoint, graph_file, question, k, force, out, err);
    if (sub == gradcheck) return cli::cmd_gradcheck(rc, out, err);
  }
  return cli::kUsage;
}
