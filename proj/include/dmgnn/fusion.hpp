// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmgnn/autodiff.hpp"
#include "dmgnn/encoder.hpp"
#include "dmgnn/params.hpp"
#include "dmgnn/scene_graph.hpp"
#include "dmgnn/text_encoder.hpp"

namespace dmgnn {

enum class RowKind { Name, Attribute, Relation };

inline const char* to_string(RowKind k) {
  switch (k) {
    case RowKind::Name:
      return "name";
    case RowKind::Attribute:
      return "attribute";
    case RowKind::Relation:
      return "relation";
  }
  return "?";
}

/// Where a fusion row came from: node `id` (name or attribute `attr`) or edge `id`.
struct Provenance {
  RowKind kind = RowKind::Name;
  std::size_t id = 0;
  std::size_t attr = 0;
  std::string token;

  bool operator==(const Provenance&) const = default;
};

struct FusionFlags {
  bool without_attributes = false;
  bool without_relations = false;
};

/// The full-scale feature map: node rows [g_i, emb(name)], [g_i, emb(attr_l)]
/// for each attribute, then edge rows [g_j^E, emb(predicate)].
struct FusionMap {
  ad::Var rows;  // R × (d_g + d_emb)
  std::vector<Provenance> provenance;

  [[nodiscard]] std::size_t size() const { return provenance.size(); }
};

/// Row count the map must have for a graph under the given flags.
inline std::size_t expected_fusion_rows(const SceneGraph& sg, const FusionFlags& f, bool has_relations = true) {
  std::size_t r = sg.nodes.size();
  if (!f.without_attributes) r += sg.attribute_count();
  if (!f.without_relations && has_relations) r += sg.edges.size();
  return r;
}

/// g_edges may be invalid when the relation encoder is disabled.
inline FusionMap build_fusion_map(ad::Tape& t, const SceneGraph& sg, const ad::Var& g_nodes, const ad::Var& g_edges,
                                  const Vocabulary& vocab, const FusionFlags& flags) {
  using namespace ad;
  if (g_nodes.rows() != sg.nodes.size()) {
    throw DimensionError("build_fusion_map: " + std::to_string(g_nodes.rows()) + " node embeddings for " +
                         std::to_string(sg.nodes.size()) + " nodes");
  }
  const bool use_edges = g_edges.valid() && !flags.without_relations && !sg.edges.empty();
  if (use_edges && g_edges.rows() != sg.edges.size()) {
    throw DimensionError("build_fusion_map: " + std::to_string(g_edges.rows()) + " edge embeddings for " +
                         std::to_string(sg.edges.size()) + " edges");
  }
  if (use_edges && g_edges.cols() != g_nodes.cols()) throw DimensionError("build_fusion_map: node/edge embedding widths differ");

  FusionMap fm;
  std::vector<std::size_t> owner;
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < sg.nodes.size(); ++i) {
    owner.push_back(i);
    tokens.push_back(sg.nodes[i].name);
    fm.provenance.push_back({RowKind::Name, i, 0, sg.nodes[i].name});
    if (flags.without_attributes) continue;
    for (std::size_t l = 0; l < sg.nodes[i].attributes.size(); ++l) {
      owner.push_back(i);
      tokens.push_back(sg.nodes[i].attributes[l]);
      fm.provenance.push_back({RowKind::Attribute, i, l, sg.nodes[i].attributes[l]});
    }
  }
  std::vector<Var> blocks;
  if (!owner.empty()) {
    blocks.push_back(concat({gather_rows(g_nodes, owner), t.constant(vocab.embed(tokens, vocab.dim()))}, Axis::Cols));
  }
  if (use_edges) {
    std::vector<std::string> preds;
    for (std::size_t k = 0; k < sg.edges.size(); ++k) {
      preds.push_back(sg.edges[k].predicate);
      fm.provenance.push_back({RowKind::Relation, k, 0, sg.edges[k].predicate});
    }
    blocks.push_back(concat({g_edges, t.constant(vocab.embed(preds, vocab.dim()))}, Axis::Cols));
  }
  if (blocks.empty()) throw InputError("scene graph produced no fusion rows");
  fm.rows = blocks.size() == 1 ? blocks.front() : concat(blocks, Axis::Rows);
  return fm;
}

// ---------------------------------------------------------------------------
// Multi-head attention with the question as the single query.

struct AttentionSpec {
  std::string prefix = "attn";
  std::size_t d_q = 100;
  std::size_t d_f = 100;
  std::size_t heads = 5;

  [[nodiscard]] std::size_t head_dim() const { return d_f / heads; }
  [[nodiscard]] bool needs_projection() const { return d_q != d_f; }

  void validate() const {
    if (heads == 0 || d_f % heads != 0) {
      throw ConfigError("attention: " + std::to_string(heads) + " heads do not divide feature width " + std::to_string(d_f));
    }
  }

  void register_params(ModelParams& p, std::uint64_t seed) const {
    validate();
    if (needs_projection()) p.add_glorot(prefix + ".q_proj", d_q, d_f, seed);
    p.add_glorot(prefix + ".W_q", d_f, d_f, seed);
    p.add_glorot(prefix + ".W_k", d_f, d_f, seed);
    p.add_glorot(prefix + ".W_v", d_f, d_f, seed);
    p.add_glorot(prefix + ".W_o", d_f, d_f, seed);
    p.add_zeros(prefix + ".b_o", 1, d_f);
  }
};

struct AttentionResult {
  ad::Var r;                   // 1 × d_f reasoning vector
  ad::Var query;               // projected query, 1 × d_f
  Matrix scores;               // 1 × R, head-averaged weights
  std::vector<Matrix> weights; // per head, 1 × R
};

/// Scaled dot-product attention, one softmax over the R rows per head; the
/// head outputs are concatenated and passed through the output projection.
inline AttentionResult attend(ad::Tape& t, ModelParams& p, const AttentionSpec& s, const FusionMap& F, const ad::Var& q) {
  using namespace ad;
  s.validate();
  if (F.size() == 0) throw InputError("scene graph produced no fusion rows");
  if (q.rows() != 1 || q.cols() != s.d_q) throw DimensionError("attend: question must be 1x" + std::to_string(s.d_q));
  if (F.rows.cols() != s.d_f) throw DimensionError("attend: fusion rows have width " + std::to_string(F.rows.cols()));
  AttentionResult out;
  Var query = s.needs_projection() ? matmul(q, t.param(p.at(s.prefix + ".q_proj"))) : q;
  out.query = query;
  Var Q = matmul(query, t.param(p.at(s.prefix + ".W_q")));
  Var K = matmul(F.rows, t.param(p.at(s.prefix + ".W_k")));
  Var V = matmul(F.rows, t.param(p.at(s.prefix + ".W_v")));
  const std::size_t dh = s.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  out.scores = Matrix(1, F.size());
  for (std::size_t h = 0; h < s.heads; ++h) {
    Var qh = slice_cols(Q, h * dh, dh);
    Var kh = slice_cols(K, h * dh, dh);
    Var vh = slice_cols(V, h * dh, dh);
    Var a = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
    out.weights.push_back(a.value());
    linalg::axpy(1.0 / static_cast<double>(s.heads), a.value(), out.scores);
    heads.push_back(matmul(a, vh));
  }
  Var joined = heads.size() == 1 ? heads.front() : concat(heads, Axis::Cols);
  out.r = add_row(matmul(joined, t.param(p.at(s.prefix + ".W_o"))), t.param(p.at(s.prefix + ".b_o")));
  return out;
}

// ---------------------------------------------------------------------------
// Answer space and predictor

/// Candidate answers ordered by training frequency (descending), ties broken
/// lexicographically, truncated to a maximum size.
class AnswerSpace {
 public:
  AnswerSpace() = default;
  explicit AnswerSpace(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], i).second) throw InputError("answer space: duplicate token " + tokens_[i]);
    }
  }

  static AnswerSpace from_answers(const std::vector<std::string>& answers, std::size_t max_size = 2000) {
    std::map<std::string, std::size_t> freq;
    for (const auto& a : answers) ++freq[a];
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < ranked.size() && i < max_size; ++i) tokens.push_back(ranked[i].first);
    return AnswerSpace(std::move(tokens));
  }

  [[nodiscard]] std::size_t size() const { return tokens_.size(); }
  [[nodiscard]] bool empty() const { return tokens_.empty(); }
  [[nodiscard]] const std::vector<std::string>& tokens() const { return tokens_; }
  [[nodiscard]] const std::string& token(std::size_t i) const { return tokens_.at(i); }
  [[nodiscard]] std::optional<std::size_t> index(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> index_;
};

struct PredictorSpec {
  std::string prefix = "answer";
  std::size_t d_q = 100;
  std::size_t d_f = 100;
  std::size_t hidden = 100;
  std::size_t classes = 0;
  bool question_fusion = true;

  [[nodiscard]] std::size_t input_width() const { return question_fusion ? d_q + d_f : d_f; }

  void register_params(ModelParams& p, std::uint64_t seed) const {
    if (classes == 0) throw InputError("predictor: empty answer space");
    p.add_glorot(prefix + ".W1", input_width(), hidden, seed);
    p.add_zeros(prefix + ".b1", 1, hidden);
    p.add_glorot(prefix + ".W2", hidden, classes, seed);
    p.add_zeros(prefix + ".b2", 1, classes);
  }
};

/// Lowest index among the maxima.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

struct Prediction {
  ad::Var logits;  // 1 × classes
  Matrix probs;
  std::size_t answer = 0;
};

/// Two-layer MLP over [q, r] (or r alone without question fusion).
inline Prediction predict(ad::Tape& t, ModelParams& p, const PredictorSpec& s, const ad::Var& q, const ad::Var& r) {
  using namespace ad;
  if (s.classes == 0) throw InputError("predict: empty answer space");
  Var x = s.question_fusion ? concat({q, r}, Axis::Cols) : r;
  if (x.cols() != s.input_width()) throw DimensionError("predict: input width " + std::to_string(x.cols()));
  Var hidden = relu(add_row(matmul(x, t.param(p.at(s.prefix + ".W1"))), t.param(p.at(s.prefix + ".b1"))));
  Prediction out;
  out.logits = add_row(matmul(hidden, t.param(p.at(s.prefix + ".W2"))), t.param(p.at(s.prefix + ".b2")));
  out.probs = softmax_rows_value(out.logits.value());
  out.answer = argmax(out.probs.row(0));
  return out;
}

}  // namespace dmgnn
