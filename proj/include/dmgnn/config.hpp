// SPDX-License-Identifier: Apache-2.0
//
// Flat run configuration. Every key has a default and a fixed type; config
// files and command-line flags (--key-name for key_name) may only set known
// keys.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dmgnn/error.hpp"
#include "dmgnn/model.hpp"
#include "dmgnn/rng.hpp"
#include "dmgnn/scene_graph.hpp"
#include "dmgnn/training.hpp"

namespace dmgnn {

struct ConfigKey {
  const char* name;
  json default_value;
  const char* help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      // model
      {"seed", 7u, "master seed; init, embedding, shuffle, dropout and datagen streams derive from it"},
      {"d_emb", 50u, "word embedding width"},
      {"d_m", 50u, "positional-encoding model width (even, >= d_emb)"},
      {"d_q", 100u, "question GRU hidden width"},
      {"d_h", 50u, "encoder node state width (>= d_emb)"},
      {"d_mp", 50u, "message-passing GRU width per direction"},
      {"d_c", 100u, "propagator mixing width"},
      {"d_g", 50u, "graph embedding width"},
      {"fg_hidden", 50u, "hidden width of the graph-embedding MLP"},
      {"heads", 5u, "attention heads (must divide d_g + d_emb)"},
      {"answer_hidden", 100u, "hidden width of the answer MLP"},
      {"t_steps", 5u, "propagation steps"},
      {"max_answers", 2000u, "answer space size limit"},
      {"max_attributes", 16u, "attribute limit per node"},
      {"dropout", 0.2, "dropout on question-encoder inputs during training"},
      {"gates", "logistic", "update/reset gate nonlinearity: logistic | relu"},
      {"qenc", "gru", "question cell: gru | lstm"},
      {"wo_attr", false, "drop attribute rows from the feature map"},
      {"wo_rela", false, "drop edge rows from the feature map"},
      {"wo_qf", false, "answer MLP reads the reasoning vector only"},
      {"base_obj", false, "disable the relation encoder"},
      {"embeddings", "", "GLOVE-format embedding file; empty uses seeded vectors"},
      // training
      {"epochs", 10u, "training epochs"},
      {"batch_size", 16u, "mini-batch size"},
      {"lr", 1e-3, "base learning rate; the staged schedule scales from it"},
      {"optimizer", "adam", "adam | sgd"},
      {"adam_beta1", 0.9, "Adam first-moment decay"},
      {"adam_beta2", 0.999, "Adam second-moment decay"},
      {"adam_eps", 1e-8, "Adam denominator epsilon"},
      {"train", "", "training dataset (JSONL)"},
      {"test", "", "evaluation dataset (JSONL)"},
      {"out", "run", "output directory"},
      // data generation
      {"n_examples", 300u, "examples to generate"},
      {"split_ratio", 0.8, "train fraction"},
      {"object_vocab", 8u, "object name vocabulary size"},
      {"predicate_vocab", 5u, "predicate vocabulary size"},
      {"attribute_vocab", 6u, "attribute vocabulary size"},
      {"nodes_min", 3u, "minimum nodes per graph"},
      {"nodes_max", 5u, "maximum nodes per graph"},
      {"edges_min", 2u, "minimum edges per graph"},
      {"edges_max", 4u, "maximum edges per graph"},
      {"attrs_min", 0u, "minimum attributes per node"},
      {"attrs_max", 1u, "maximum attributes per node"},
      {"mix_object", 1.0, "weight of object-query questions"},
      {"mix_relation", 1.0, "weight of relation-query questions"},
      {"mix_attribute", 1.0, "weight of attribute-query questions"},
      {"mix_why", 1.0, "weight of why questions"},
  };
  return keys;
}

inline const ConfigKey* find_config_key(const std::string& name) {
  for (const auto& k : config_keys()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

/// The key list as a model-relevant subset; these determine the config hash.
inline const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys = {"seed",   "d_emb",        "d_m",          "d_q",     "d_h",    "d_mp",
                                                "d_c",    "d_g",          "fg_hidden",    "heads",   "answer_hidden",
                                                "t_steps", "max_answers", "max_attributes", "dropout", "gates",
                                                "qenc",   "wo_attr",      "wo_rela",      "wo_qf",   "base_obj",
                                                "embeddings"};
  return keys;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.name] = k.default_value;
  }

  /// Sets a known key, checking the value against the default's type.
  void set(const std::string& key, const json& value) {
    const ConfigKey* k = find_config_key(key);
    if (k == nullptr) throw ConfigError("unknown config key \"" + key + "\"");
    const json& d = k->default_value;
    bool ok = false;
    json stored = value;
    if (d.is_boolean()) {
      ok = value.is_boolean();
    } else if (d.is_number_unsigned()) {
      ok = value.is_number_unsigned() || (value.is_number_integer() && value.get<long long>() >= 0);
      if (ok) stored = value.get<std::uint64_t>();
    } else if (d.is_number_float()) {
      ok = value.is_number();
      if (ok) stored = value.get<double>();
    } else if (d.is_string()) {
      ok = value.is_string();
    }
    if (!ok) throw ConfigError("config key \"" + key + "\": expected " + type_name(d) + ", got " + value.dump());
    values_[key] = stored;
    explicit_.push_back(key);
  }

  /// Parses a command-line string according to the key's type.
  void set_from_string(const std::string& key, const std::string& text) {
    const ConfigKey* k = find_config_key(key);
    if (k == nullptr) throw ConfigError("unknown config key \"" + key + "\"");
    const json& d = k->default_value;
    if (d.is_string()) return set(key, text);
    if (d.is_boolean()) {
      if (text == "true" || text == "1") return set(key, true);
      if (text == "false" || text == "0") return set(key, false);
      throw ConfigError("config key \"" + key + "\": expected true or false, got \"" + text + "\"");
    }
    try {
      std::size_t used = 0;
      if (d.is_number_unsigned()) {
        if (text.empty() || text[0] == '-') throw std::invalid_argument(text);
        const unsigned long long v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return set(key, static_cast<std::uint64_t>(v));
      }
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return set(key, v);
    } catch (const std::logic_error&) {
      throw ConfigError("config key \"" + key + "\": expected " + type_name(d) + ", got \"" + text + "\"");
    }
  }

  void merge_json(const json& doc, const std::string& origin = "config") {
    if (!doc.is_object()) throw ConfigError(origin + ": expected a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      try {
        set(it.key(), it.value());
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
      }
    }
  }

  void merge_file(const std::string& path) {
    json doc;
    try {
      doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
      throw ConfigError(path + ": " + e.what());
    }
    merge_json(doc, path);
  }

  [[nodiscard]] const json& values() const { return values_; }
  [[nodiscard]] const json& at(const std::string& key) const {
    if (!values_.contains(key)) throw ConfigError("unknown config key \"" + key + "\"");
    return values_.at(key);
  }
  [[nodiscard]] std::size_t size_value(const std::string& key) const { return at(key).get<std::size_t>(); }
  [[nodiscard]] double real(const std::string& key) const { return at(key).get<double>(); }
  [[nodiscard]] bool flag(const std::string& key) const { return at(key).get<bool>(); }
  [[nodiscard]] std::string str(const std::string& key) const { return at(key).get<std::string>(); }
  [[nodiscard]] bool is_explicit(const std::string& key) const {
    return std::find(explicit_.begin(), explicit_.end(), key) != explicit_.end();
  }
  [[nodiscard]] const std::vector<std::string>& explicit_keys() const { return explicit_; }

  [[nodiscard]] ModelConfig model() const {
    ModelConfig c;
    c.seed = at("seed").get<std::uint64_t>();
    c.d_emb = size_value("d_emb");
    c.d_m = size_value("d_m");
    c.d_q = size_value("d_q");
    c.d_h = size_value("d_h");
    c.d_mp = size_value("d_mp");
    c.d_c = size_value("d_c");
    c.d_g = size_value("d_g");
    c.fg_hidden = size_value("fg_hidden");
    c.heads = size_value("heads");
    c.answer_hidden = size_value("answer_hidden");
    c.t_steps = size_value("t_steps");
    c.max_answers = size_value("max_answers");
    c.max_attributes = size_value("max_attributes");
    c.dropout = real("dropout");
    const std::string gates = str("gates");
    if (gates == "logistic") {
      c.gates = GateKind::Logistic;
    } else if (gates == "relu") {
      c.gates = GateKind::Relu;
    } else {
      throw ConfigError("gates must be logistic or relu, got \"" + gates + "\"");
    }
    const std::string qenc = str("qenc");
    if (qenc == "gru") {
      c.qenc = QuestionCell::Gru;
    } else if (qenc == "lstm") {
      c.qenc = QuestionCell::Lstm;
    } else {
      throw ConfigError("qenc must be gru or lstm, got \"" + qenc + "\"");
    }
    c.wo_attr = flag("wo_attr");
    c.wo_rela = flag("wo_rela");
    c.wo_qf = flag("wo_qf");
    c.base_obj = flag("base_obj");
    c.embeddings = str("embeddings");
    c.validate();
    return c;
  }

  [[nodiscard]] TrainConfig training() const {
    TrainConfig t;
    t.epochs = size_value("epochs");
    t.batch_size = size_value("batch_size");
    t.lr = real("lr");
    const std::string opt = str("optimizer");
    if (opt == "adam") {
      t.optimizer = OptimizerKind::Adam;
    } else if (opt == "sgd") {
      t.optimizer = OptimizerKind::Sgd;
    } else {
      throw ConfigError("optimizer must be adam or sgd, got \"" + opt + "\"");
    }
    t.adam = {real("adam_beta1"), real("adam_beta2"), real("adam_eps")};
    t.seed = at("seed").get<std::uint64_t>();
    t.dropout = real("dropout");
    t.validate();
    return t;
  }

  /// Hash of the canonical dump of every key.
  [[nodiscard]] std::uint64_t hash() const { return rng::fnv1a(values_.dump()); }

 private:
  static std::string type_name(const json& d) {
    if (d.is_boolean()) return "a boolean";
    if (d.is_number_unsigned()) return "a non-negative integer";
    if (d.is_number()) return "a number";
    return "a string";
  }

  json values_ = json::object();
  std::vector<std::string> explicit_;
};

/// Model keys as canonical JSON; stored in checkpoints.
inline json model_config_json(const ModelConfig& c) {
  return {{"seed", c.seed},
          {"d_emb", c.d_emb},
          {"d_m", c.d_m},
          {"d_q", c.d_q},
          {"d_h", c.d_h},
          {"d_mp", c.d_mp},
          {"d_c", c.d_c},
          {"d_g", c.d_g},
          {"fg_hidden", c.fg_hidden},
          {"heads", c.heads},
          {"answer_hidden", c.answer_hidden},
          {"t_steps", c.t_steps},
          {"max_answers", c.max_answers},
          {"max_attributes", c.max_attributes},
          {"dropout", c.dropout},
          {"gates", to_string(c.gates)},
          {"qenc", to_string(c.qenc)},
          {"wo_attr", c.wo_attr},
          {"wo_rela", c.wo_rela},
          {"wo_qf", c.wo_qf},
          {"base_obj", c.base_obj},
          {"embeddings", c.embeddings}};
}

inline ModelConfig model_config_from_json(const json& j) {
  RunConfig rc;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(model_keys().begin(), model_keys().end(), it.key()) == model_keys().end()) {
      throw ConfigError("model config: unexpected key \"" + it.key() + "\"");
    }
  }
  rc.merge_json(j, "model config");
  return rc.model();
}

inline std::uint64_t model_config_hash(const ModelConfig& c) { return rng::fnv1a(model_config_json(c).dump()); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace dmgnn
