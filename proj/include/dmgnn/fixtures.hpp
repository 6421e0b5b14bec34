// SPDX-License-Identifier: Apache-2.0
// Small graphs shared by the gradcheck command, tests and examples.
#pragma once

#include <string>
#include <vector>

#include "dmgnn/metrics.hpp"
#include "dmgnn/model.hpp"
#include "dmgnn/rng.hpp"
#include "dmgnn/scene_graph.hpp"

namespace dmgnn::fixtures {

/// man -(riding)-> horse, man -(wearing)-> hat
inline SceneGraph man_horse_hat() {
  SceneGraph sg;
  sg.nodes = {{"man", {"tall"}}, {"horse", {"brown"}}, {"hat", {}}};
  sg.edges = {{0, "riding", 1}, {0, "wearing", 2}};
  return sg;
}

/// 3 nodes, 2 edges, 2 attributes.
inline SceneGraph micro_graph() {
  SceneGraph sg;
  sg.nodes = {{"man", {"tall"}}, {"horse", {"brown"}}, {"hat", {}}};
  sg.edges = {{0, "riding", 1}, {2, "on", 0}};
  return sg;
}

inline std::vector<std::string> micro_question() { return {"what", "is", "riding", "the", "horse"}; }

/// Reduced widths for gradient checks. d_mp != d_h and d_q != d_f so both
/// projections are exercised.
inline ModelConfig micro_config() {
  ModelConfig c;
  c.seed = 11;
  c.d_emb = 6;
  c.d_m = 6;
  c.d_q = 8;
  c.d_h = 8;
  c.d_mp = 6;
  c.d_c = 10;
  c.d_g = 6;
  c.fg_hidden = 7;
  c.heads = 3;
  c.answer_hidden = 9;
  c.t_steps = 2;
  c.dropout = 0.0;
  return c;
}

inline AnswerSpace micro_answers() { return AnswerSpace({"man", "horse", "hat", "riding", "on", "tall", "brown"}); }

struct RandomGraphLimits {
  std::size_t max_nodes = 8;
  std::size_t max_edges = 12;
  std::size_t max_attributes = 3;
  bool allow_self_loops = true;
};

/// Uniform random graph over small token pools; edges need at least one node.
inline SceneGraph random_graph(rng::Generator& g, const RandomGraphLimits& lim = {}) {
  static const std::vector<std::string> names = {"man", "horse", "hat", "dog", "tree", "car", "cup", "table"};
  static const std::vector<std::string> preds = {"on", "near", "holding", "riding", "under"};
  static const std::vector<std::string> attrs = {"red", "tall", "wooden", "small", "old"};
  SceneGraph sg;
  const std::size_t n = g.index(lim.max_nodes + 1);
  for (std::size_t i = 0; i < n; ++i) {
    ObjectNode node{names[g.index(names.size())], {}};
    const std::size_t a = g.index(lim.max_attributes + 1);
    for (std::size_t l = 0; l < a; ++l) node.attributes.push_back(attrs[g.index(attrs.size())]);
    sg.nodes.push_back(std::move(node));
  }
  if (n == 0) return sg;
  const std::size_t e = g.index(lim.max_edges + 1);
  for (std::size_t k = 0; k < e; ++k) {
    std::size_t s = g.index(n);
    std::size_t o = g.index(n);
    if (!lim.allow_self_loops && n > 1) {
      while (o == s) o = g.index(n);
    }
    sg.edges.push_back({s, preds[g.index(preds.size())], o});
  }
  return sg;
}

struct RecallInstance {
  std::vector<ImagePredictions> predictions;
  std::vector<ImageTruth> truth;
};

/// Up to 4 images over at most 6 predicate classes and 20 ground-truth
/// triplets. Scores are quantised so ties occur; some images have no truth or
/// no predictions.
inline RecallInstance random_recall_instance(rng::Generator& g, std::size_t max_classes = 6,
                                             std::size_t max_triplets = 20) {
  static const std::vector<std::string> labels = {"man", "dog", "car", "tree"};
  const std::size_t classes = 1 + g.index(max_classes);
  auto triplet = [&]() {
    return Triplet{labels[g.index(labels.size())], "p" + std::to_string(g.index(classes)), labels[g.index(labels.size())]};
  };
  RecallInstance inst;
  const std::size_t images = 1 + g.index(4);
  std::size_t budget = 1 + g.index(max_triplets);
  for (std::size_t i = 0; i < images; ++i) {
    ImageTruth t{"img" + std::to_string(i), {}};
    const std::size_t n = i + 1 == images ? budget : g.index(budget + 1);
    for (std::size_t k = 0; k < n; ++k) t.triplets.push_back(triplet());
    budget -= n;
    ImagePredictions p{t.image_id, {}};
    const std::size_t m = g.index(25);
    for (std::size_t k = 0; k < m; ++k) {
      // Half the candidates copy a true triplet so that hits are common.
      const bool copy = !t.triplets.empty() && g.index(2) == 0;
      p.predictions.push_back({copy ? t.triplets[g.index(t.triplets.size())] : triplet(), static_cast<double>(g.index(8)) / 8.0});
    }
    inst.truth.push_back(std::move(t));
    if (g.index(5) != 0) inst.predictions.push_back(std::move(p));
  }
  return inst;
}

}  // namespace dmgnn::fixtures
