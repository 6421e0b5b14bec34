// SPDX-License-Identifier: Apache-2.0
//
// Subcommand implementations behind tools/dmgnn. Each returns the process
// exit code: 0 success, 1 threshold or runtime failure, 2 usage or parse error.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dmgnn/checkpoint.hpp"
#include "dmgnn/config.hpp"
#include "dmgnn/fixtures.hpp"
#include "dmgnn/gradcheck.hpp"
#include "dmgnn/metrics.hpp"
#include "dmgnn/oracle/answer_enumerator.hpp"
#include "dmgnn/oracle/relation_view_oracle.hpp"
#include "dmgnn/synthetic.hpp"
#include "dmgnn/training.hpp"

namespace dmgnn::cli {

inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

/// Maps library exceptions to exit codes and prints the message.
template <class Fn>
int guarded(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

inline void echo_config(std::ostream& out, const RunConfig& rc) {
  out << "config-hash " << hex64(rc.hash()) << "\n";
  out << "config " << rc.values().dump() << "\n";
}

inline GenConfig gen_config(const RunConfig& rc) {
  GenConfig g;
  g.seed = rc.at("seed").get<std::uint64_t>();
  g.n_examples = rc.size_value("n_examples");
  g.object_vocab = rc.size_value("object_vocab");
  g.predicate_vocab = rc.size_value("predicate_vocab");
  g.attribute_vocab = rc.size_value("attribute_vocab");
  g.nodes = {rc.size_value("nodes_min"), rc.size_value("nodes_max")};
  g.edges = {rc.size_value("edges_min"), rc.size_value("edges_max")};
  g.attrs = {rc.size_value("attrs_min"), rc.size_value("attrs_max")};
  g.mix = {rc.real("mix_object"), rc.real("mix_relation"), rc.real("mix_attribute"), rc.real("mix_why")};
  return g;
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory " + dir + ": " + ec.message());
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

/// Checkpoint config, overridden by model keys set explicitly on the command
/// line or in a config file.
inline ModelConfig resolve_model_config(const Checkpoint& ck, const RunConfig& rc) {
  json j = model_config_json(ck.config);
  for (const auto& key : rc.explicit_keys()) {
    if (std::find(model_keys().begin(), model_keys().end(), key) != model_keys().end()) j[key] = rc.at(key);
  }
  return model_config_from_json(j);
}

inline bool check_hash(const Checkpoint& ck, const ModelConfig& effective, bool force, std::ostream& out,
                       std::ostream& err) {
  const std::uint64_t h = model_config_hash(effective);
  out << "model-config-hash " << hex64(h) << "\n";
  if (h == ck.config_hash) return true;
  if (force) {
    err << "warning: model config hash " << hex64(h) << " differs from checkpoint " << hex64(ck.config_hash)
        << "; continuing because of --force\n";
    return true;
  }
  err << "error: model config hash " << hex64(h) << " differs from checkpoint " << hex64(ck.config_hash)
      << " (pass --force to evaluate anyway)\n";
  return false;
}

inline std::string format_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// Generates, splits and writes <out>/train.jsonl and <out>/test.jsonl.
inline int cmd_synth(const RunConfig& rc, bool audit, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        echo_config(out, rc);
        const GenConfig gc = gen_config(rc);
        const std::vector<Example> data = generate(gc);
        Split s;
        if (!data.empty()) s = split(data, rc.real("split_ratio"), gc.seed);
        const std::string dir = rc.str("out");
        detail::ensure_dir(dir);
        for (const auto& [name, part] : {std::pair{"train", &s.train}, std::pair{"test", &s.test}}) {
          const std::string path = detail::join(dir, std::string(name) + ".jsonl");
          auto f = detail::open_out(path);
          write_dataset(f, *part,
                        std::string("synthetic ") + name + " split, " + std::to_string(part->size()) +
                            " examples, config-hash " + hex64(rc.hash()));
          if (!f) throw InputError("cannot write " + path);
          out << "wrote " << path << " (" << part->size() << " examples)\n";
        }
        if (!audit) return kOk;
        std::size_t unique = 0;
        for (const auto& ex : data) {
          const auto answers = oracle::enumerate_answers(ex.graph, ex.question);
          if (answers.size() == 1 && *answers.begin() == ex.answer) ++unique;
        }
        char buf[128];
        std::snprintf(buf, sizeof buf, "audit: %zu/%zu examples uniquely answerable (%.2f%%)\n", unique, data.size(),
                      data.empty() ? 100.0 : 100.0 * static_cast<double>(unique) / static_cast<double>(data.size()));
        out << buf;
        return unique == data.size() ? kOk : kFailure;
      },
      err);
}

/// Trains on rc["train"]; writes <out>/checkpoint.bin after every epoch and
/// <out>/loss.csv at the end. Evaluates rc["test"] when set.
inline int cmd_train(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        echo_config(out, rc);
        const ModelConfig mc = rc.model();
        const TrainConfig tc = rc.training();
        if (rc.str("train").empty()) throw ConfigError("train: no dataset given (--train)");
        const std::vector<Example> data = load_dataset(rc.str("train"));
        if (data.empty()) throw InputError(rc.str("train") + ": no examples");
        std::vector<std::string> answers;
        for (const auto& ex : data) answers.push_back(ex.answer);
        Model model(mc, AnswerSpace::from_answers(answers, mc.max_answers), Model::make_vocabulary(mc));
        out << "model-config-hash " << hex64(model_config_hash(mc)) << "\n";
        out << "examples " << data.size() << ", answer space " << model.answers().size() << ", parameters "
            << model.params().scalar_count() << "\n";

        const std::string dir = rc.str("out");
        detail::ensure_dir(dir);
        const std::string ckpt = detail::join(dir, "checkpoint.bin");
        TrainHooks hooks;
        hooks.warn = [&](const std::string& w) { err << "warning: " << w << "\n"; };
        hooks.on_epoch_end = [&](std::size_t, const Model& m) { save_checkpoint(ckpt, m, tc.adam, tc.optimizer); };
        const TrainResult result = train(model, data, tc, hooks);

        const std::string csv_path = detail::join(dir, "loss.csv");
        auto csv = detail::open_out(csv_path);
        csv << "epoch,batch,loss,lr\n";
        for (const auto& r : result.trace) {
          csv << r.epoch << "," << r.batch << "," << detail::format_g(r.loss) << "," << detail::format_g(r.lr) << "\n";
        }
        if (!csv) throw InputError("cannot write " + csv_path);
        auto cfg = detail::open_out(detail::join(dir, "config.json"));
        cfg << rc.values().dump(2) << "\n";

        if (result.skipped_examples > 0) {
          err << "warning: " << result.skipped_examples << " example visits had answers outside the answer space\n";
        }
        const double final_loss = result.trace.empty() ? 0.0 : result.trace.back().loss;
        const EvalReport train_report = evaluate(model, data);
        char buf[160];
        std::snprintf(buf, sizeof buf, "trained %zu epochs, %zu batches, final batch loss %.6f, train accuracy %.4f\n",
                      tc.epochs, result.trace.size(), final_loss, train_report.accuracy());
        out << buf << "wrote " << ckpt << "\nwrote " << csv_path << "\n";
        if (!rc.str("test").empty()) {
          const EvalReport test_report = evaluate(model, load_dataset(rc.str("test")));
          out << "held-out (" << rc.str("test") << ")\n" << format_report(test_report);
        }
        return kOk;
      },
      err);
}

inline int cmd_eval(const RunConfig& rc, const std::string& checkpoint, const std::string& dataset, bool force,
                    std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        echo_config(out, rc);
        const Checkpoint ck = load_checkpoint(checkpoint);
        const ModelConfig mc = detail::resolve_model_config(ck, rc);
        if (!detail::check_hash(ck, mc, force, out, err)) return kUsage;
        Model model = model_from_checkpoint(ck, mc);
        const std::string path = dataset.empty() ? rc.str("test") : dataset;
        if (path.empty()) throw ConfigError("eval: no dataset given (--data or --test)");
        const EvalReport report = evaluate(model, load_dataset(path));
        out << "dataset " << path << "\n" << format_report(report);
        return kOk;
      },
      err);
}

inline std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  return tokens;
}

/// Top-k attention rows for one (graph, question) pair.
inline int cmd_explain(const RunConfig& rc, const std::string& checkpoint, const std::string& graph_file,
                       const std::string& question, std::size_t k, bool force, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        echo_config(out, rc);
        if (k == 0) throw ConfigError("explain: k must be at least 1");
        const Checkpoint ck = load_checkpoint(checkpoint);
        const ModelConfig mc = detail::resolve_model_config(ck, rc);
        if (!detail::check_hash(ck, mc, force, out, err)) return kUsage;
        Model model = model_from_checkpoint(ck, mc);
        const SceneGraph sg = load_scene_graph(graph_file);
        const auto tokens = tokenize(question);
        if (tokens.empty()) throw InputError("explain: empty question");
        ad::Tape t;
        const ForwardResult f = model.forward(t, sg, tokens);
        std::vector<std::size_t> order(f.provenance.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return f.scores.data[a] > f.scores.data[b]; });
        char buf[160];
        std::snprintf(buf, sizeof buf, "predicted %s (p=%.6f)\n", model.answers().token(f.answer).c_str(),
                      f.probs.data[f.answer]);
        out << buf;
        std::snprintf(buf, sizeof buf, "%-5s %-10s %-10s %s\n", "rank", "score", "kind", "token");
        out << buf;
        for (std::size_t r = 0; r < order.size() && r < k; ++r) {
          const Provenance& p = f.provenance[order[r]];
          std::snprintf(buf, sizeof buf, "%-5zu %-10.6f %-10s %s\n", r + 1, f.scores.data[order[r]], to_string(p.kind),
                        p.token.c_str());
          out << buf;
        }
        return kOk;
      },
      err);
}

/// Finite-difference check of the full model on the micro fixture. Model keys
/// set explicitly in rc override the fixture's reduced widths.
inline int cmd_gradcheck(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        echo_config(out, rc);
        json j = model_config_json(fixtures::micro_config());
        for (const auto& key : rc.explicit_keys()) {
          if (j.contains(key)) j[key] = rc.at(key);
        }
        j["dropout"] = 0.0;
        const ModelConfig mc = model_config_from_json(j);
        out << "model-config-hash " << hex64(model_config_hash(mc)) << "\n";
        out << "model-config " << model_config_json(mc).dump() << "\n";
        Model model(mc, fixtures::micro_answers(), Model::make_vocabulary(mc));
        const Example ex{fixtures::micro_graph(), fixtures::micro_question(), "man", "object-query", std::nullopt};
        const GradCheckReport rep = finite_diff_check([&](ad::Tape& t, ModelParams&) { return *model.loss(t, ex); },
                                                      model.params(), {1e-3, true});
        char buf[160];
        for (const auto& [group, e] : rep.per_group) {
          std::snprintf(buf, sizeof buf, "  %-10s max rel err %.3e\n", group.c_str(), e);
          out << buf;
        }
        const bool pass = rep.max_rel_error <= 1e-4;
        std::snprintf(buf, sizeof buf, "max rel err %.3e at %s; %zu checked, %zu skipped at kinks; %s (threshold 1e-4)\n",
                      rep.max_rel_error, rep.worst_param.empty() ? "-" : rep.worst_param.c_str(), rep.checked,
                      rep.skipped, pass ? "PASS" : "FAIL");
        out << buf;
        return pass ? kOk : kFailure;
      },
      err);
}

inline int cmd_dualize(const std::string& graph_file, bool verify, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const std::vector<SceneGraph> graphs = load_scene_graphs(graph_file);
        std::size_t matched = 0;
        for (std::size_t i = 0; i < graphs.size(); ++i) {
          const DualPair pair = dualize(graphs[i]);
          if (graphs.size() > 1) out << "graph " << i << "\n";
          out << describe(pair.object_view) << describe(pair.relation_view);
          if (verify && oracle::relation_view_matches(graphs[i])) ++matched;
        }
        if (!verify) return kOk;
        out << "oracle: " << matched << "/" << graphs.size() << " graphs match brute-force enumeration\n";
        return matched == graphs.size() ? kOk : kFailure;
      },
      err);
}

inline std::vector<long long> parse_ks(const std::string& text) {
  std::vector<long long> ks;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      std::size_t used = 0;
      const long long k = std::stoll(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      ks.push_back(k);
    } catch (const std::logic_error&) {
      throw ConfigError("bad K list \"" + text + "\"");
    }
  }
  if (ks.empty()) throw ConfigError("empty K list");
  for (long long k : ks) {
    if (k <= 0) throw ConfigError("K must be at least 1, got " + std::to_string(k));
  }
  return ks;
}

inline int cmd_metrics(const std::string& pred_file, const std::string& gt_file, const std::string& ks_text,
                       std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const auto ks = parse_ks(ks_text);
        const auto pred = load_predictions(pred_file);
        const auto gt = load_ground_truth(gt_file);
        std::size_t triplets = 0;
        for (const auto& g : gt) triplets += g.triplets.size();
        out << gt.size() << " images, " << triplets << " ground-truth triplets\n";
        out << format_recall_table(pred, gt, ks);
        return kOk;
      },
      err);
}

}  // namespace dmgnn::cli
