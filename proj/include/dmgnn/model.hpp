// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dmgnn/autodiff.hpp"
#include "dmgnn/dataset.hpp"
#include "dmgnn/encoder.hpp"
#include "dmgnn/fusion.hpp"
#include "dmgnn/params.hpp"
#include "dmgnn/rng.hpp"
#include "dmgnn/scene_graph.hpp"
#include "dmgnn/text_encoder.hpp"

namespace dmgnn {

/// Architecture and ablation switches. Defaults are the full-size widths;
/// desk-scale runs shrink them through the run configuration.
struct ModelConfig {
  std::uint64_t seed = 7;
  std::size_t d_emb = 50;   // word embeddings
  std::size_t d_m = 50;     // positional-encoding model width
  std::size_t d_q = 100;    // question GRU hidden
  std::size_t d_h = 50;     // node hidden state
  std::size_t d_mp = 50;    // message-passing GRU hidden, per direction
  std::size_t d_c = 100;    // propagator mixing width
  std::size_t d_g = 50;     // graph embedding
  std::size_t fg_hidden = 50;
  std::size_t heads = 5;
  std::size_t answer_hidden = 100;
  std::size_t t_steps = 5;
  std::size_t max_answers = 2000;
  std::size_t max_attributes = 16;
  double dropout = 0.2;
  GateKind gates = GateKind::Logistic;
  QuestionCell qenc = QuestionCell::Gru;
  bool wo_attr = false;
  bool wo_rela = false;
  bool wo_qf = false;
  bool base_obj = false;  // relation encoder disabled, map built from object rows only
  std::string embeddings;  // GLOVE-format file; empty = seeded vectors

  [[nodiscard]] std::size_t d_f() const { return d_g + d_emb; }

  [[nodiscard]] EncoderSpec object_encoder() const {
    return {"obj_enc", d_emb, d_h, d_mp, d_c, d_g, fg_hidden, gates, std::nullopt};
  }
  [[nodiscard]] EncoderSpec relation_encoder() const {
    return {"rel_enc", d_emb, d_h, d_mp, d_c, d_g, fg_hidden, gates, std::nullopt};
  }
  [[nodiscard]] QuestionEncoderSpec question_encoder() const { return {"question", d_emb, d_m, d_q, qenc}; }
  [[nodiscard]] AttentionSpec attention() const { return {"attn", d_q, d_f(), heads}; }
  [[nodiscard]] PredictorSpec predictor(std::size_t classes) const {
    return {"answer", d_q, d_f(), answer_hidden, classes, !wo_qf};
  }
  [[nodiscard]] FusionFlags fusion_flags() const { return {wo_attr, wo_rela}; }

  void validate() const {
    object_encoder().validate();
    attention().validate();
    if (d_m % 2 != 0) throw ConfigError("d_m must be even");
    if (d_emb > d_m) throw ConfigError("d_emb must not exceed d_m");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  }
};

inline const char* to_string(GateKind g) { return g == GateKind::Logistic ? "logistic" : "relu"; }
inline const char* to_string(QuestionCell c) { return c == QuestionCell::Gru ? "gru" : "lstm"; }

/// Everything produced by one forward pass.
struct ForwardResult {
  ad::Var logits;
  Matrix probs;
  std::size_t answer = 0;
  Matrix scores;
  std::vector<Matrix> head_weights;
  std::vector<Provenance> provenance;
  ad::Var q;
  std::size_t fusion_rows = 0;
};

/// Parameters, vocabulary and answer space of one model instance.
class Model {
 public:
  Model(ModelConfig config, AnswerSpace space, Vocabulary vocab)
      : config_(std::move(config)), space_(std::move(space)), vocab_(std::move(vocab)) {
    config_.validate();
    if (space_.empty()) throw InputError("model: empty answer space");
    if (vocab_.dim() != config_.d_emb) throw ConfigError("vocabulary width differs from d_emb");
    const std::uint64_t seed = rng::substream(config_.seed, "init");
    config_.object_encoder().register_params(params_, seed);
    if (!config_.base_obj) config_.relation_encoder().register_params(params_, seed);
    config_.question_encoder().register_params(params_, seed);
    config_.attention().register_params(params_, seed);
    config_.predictor(space_.size()).register_params(params_, seed);
  }

  static Vocabulary make_vocabulary(const ModelConfig& c) {
    const std::uint64_t seed = rng::substream(c.seed, "embedding");
    if (c.embeddings.empty()) return Vocabulary(c.d_emb, seed);
    return Vocabulary::from_file(c.embeddings, c.d_emb, seed);
  }

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] const AnswerSpace& answers() const { return space_; }
  [[nodiscard]] const Vocabulary& vocab() const { return vocab_; }
  ModelParams& params() { return params_; }
  [[nodiscard]] const ModelParams& params() const { return params_; }

  /// dualize → encode both views → encode question → fusion map → attention → predictor.
  ForwardResult forward(ad::Tape& t, const SceneGraph& sg, const std::vector<std::string>& question,
                        const Dropout& dropout = {}) {
    sg.validate(config_.max_attributes);
    const DualPair pair = dualize(sg);
    const EncoderSpec obj = config_.object_encoder();
    const EncoderSpec rel = config_.relation_encoder();
    const DualEncoding enc =
        encode_dual(t, params_, obj, config_.base_obj ? nullptr : &rel, pair, vocab_, config_.t_steps);
    const QuestionEncoding qe = encode_question(t, params_, config_.question_encoder(), question, vocab_, dropout);
    const FusionMap fm = build_fusion_map(t, sg, enc.objects.G, enc.has_relations ? enc.relations.G : ad::Var{}, vocab_,
                                          config_.fusion_flags());
    AttentionResult att = attend(t, params_, config_.attention(), fm, qe.q);
    Prediction pred = predict(t, params_, config_.predictor(space_.size()), qe.q, att.r);
    ForwardResult out;
    out.logits = pred.logits;
    out.probs = std::move(pred.probs);
    out.answer = pred.answer;
    out.scores = std::move(att.scores);
    out.head_weights = std::move(att.weights);
    out.provenance = fm.provenance;
    out.q = qe.q;
    out.fusion_rows = fm.size();
    return out;
  }

  /// Cross-entropy against the gold answer, or nullopt when the answer is
  /// outside the answer space.
  std::optional<ad::Var> loss(ad::Tape& t, const Example& ex, const Dropout& dropout = {}) {
    const auto label = space_.index(ex.answer);
    if (!label) return std::nullopt;
    ForwardResult f = forward(t, ex.graph, ex.question, dropout);
    return ad::cross_entropy(f.logits, *label);
  }

 private:
  ModelConfig config_;
  AnswerSpace space_;
  Vocabulary vocab_;
  ModelParams params_;
};

}  // namespace dmgnn
