// SPDX-License-Identifier: Apache-2.0
//
// Seeded scene graphs with templated questions whose answers are unique.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "dmgnn/dataset.hpp"
#include "dmgnn/error.hpp"
#include "dmgnn/rng.hpp"

namespace dmgnn {

enum class Template { ObjectQuery, RelationQuery, AttributeQuery, Why };

inline constexpr std::array<Template, 4> kTemplates = {Template::ObjectQuery, Template::RelationQuery,
                                                       Template::AttributeQuery, Template::Why};

/// Also the qtype tag written to the dataset.
inline const char* to_string(Template t) {
  switch (t) {
    case Template::ObjectQuery:
      return "object-query";
    case Template::RelationQuery:
      return "relation-query";
    case Template::AttributeQuery:
      return "attribute-query";
    case Template::Why:
      return "why";
  }
  return "?";
}

struct Range {
  std::size_t min = 0;
  std::size_t max = 0;
};

struct GenConfig {
  std::uint64_t seed = 7;
  std::size_t n_examples = 300;
  std::size_t object_vocab = 8;
  std::size_t predicate_vocab = 5;
  std::size_t attribute_vocab = 6;
  Range nodes{3, 5};
  Range edges{2, 4};
  Range attrs{0, 1};
  std::array<double, 4> mix{1.0, 1.0, 1.0, 1.0};  // in kTemplates order
  std::size_t max_attempts = 10000;               // graph draws per example

  void validate() const {
    auto check_range = [](const Range& r, const char* name) {
      if (r.min > r.max) throw ConfigError(std::string(name) + " range has min > max");
    };
    check_range(nodes, "nodes");
    check_range(edges, "edges");
    check_range(attrs, "attrs");
    if (object_vocab == 0) throw ConfigError("object_vocab must be at least 1");
    if (edges.max > 0 && predicate_vocab == 0) throw ConfigError("predicate_vocab must be at least 1 when edges are drawn");
    if (attrs.min > attribute_vocab) throw ConfigError("attrs_min exceeds attribute_vocab (attributes are distinct per node)");
    if (edges.min > 0 && nodes.min < 2) throw ConfigError("edges_min > 0 needs nodes_min >= 2 (no self-loops)");
    bool any = false;
    for (std::size_t i = 0; i < mix.size(); ++i) {
      if (!(mix[i] >= 0.0) || !std::isfinite(mix[i])) throw ConfigError("qtype mix weights must be finite and non-negative");
      any = any || mix[i] > 0.0;
    }
    if (!any) throw ConfigError("qtype mix weights are all zero");
    const bool can_edge = edges.max > 0 && nodes.max >= 2;
    const bool can_attr = attrs.max > 0 && attribute_vocab > 0;
    for (std::size_t i = 0; i < kTemplates.size(); ++i) {
      if (mix[i] == 0.0) continue;
      const Template t = kTemplates[i];
      const bool ok = t == Template::AttributeQuery ? can_attr && nodes.max >= 1
                      : t == Template::Why          ? can_attr && can_edge
                                                    : can_edge;
      if (!ok) throw ConfigError(std::string("template ") + to_string(t) + " is unsatisfiable under the configured ranges");
    }
  }
};

/// Disjoint object, predicate and attribute vocabularies.
struct SyntheticVocab {
  std::vector<std::string> objects, predicates, attributes;

  static SyntheticVocab make(std::size_t n_obj, std::size_t n_pred, std::size_t n_attr) {
    static const std::vector<std::string> obj = {"man", "horse", "hat", "dog", "tree", "car", "cup", "table",
                                                 "woman", "boy", "girl", "cat", "bike", "shirt", "fence", "grass"};
    static const std::vector<std::string> pred = {"on", "riding", "wearing", "near", "holding",
                                                  "under", "behind", "eating", "carrying", "beside"};
    static const std::vector<std::string> attr = {"red", "tall", "brown", "wooden", "small", "old",
                                                  "green", "white", "large", "young", "dark", "metal"};
    auto take = [](const std::vector<std::string>& pool, std::size_t n, const std::string& stem) {
      std::vector<std::string> out;
      for (std::size_t i = 0; i < n; ++i) out.push_back(i < pool.size() ? pool[i] : stem + std::to_string(i));
      return out;
    };
    return {take(obj, n_obj, "object"), take(pred, n_pred, "relation"), take(attr, n_attr, "attr")};
  }
};

namespace detail {

struct Candidate {
  std::vector<std::string> question;
  std::string answer;
};

inline std::size_t draw_in(rng::Generator& g, const Range& r) { return r.min + g.index(r.max - r.min + 1); }

inline SceneGraph draw_graph(rng::Generator& g, const GenConfig& c, const SyntheticVocab& v) {
  SceneGraph sg;
  const std::size_t n = draw_in(g, c.nodes);
  std::vector<std::size_t> names(v.objects.size());
  for (std::size_t i = 0; i < names.size(); ++i) names[i] = i;
  const bool distinct = n <= names.size();
  if (distinct) g.shuffle(names.begin(), names.end());
  for (std::size_t i = 0; i < n; ++i) {
    ObjectNode node;
    node.name = v.objects[distinct ? names[i] : g.index(names.size())];
    const std::size_t a = draw_in(g, {c.attrs.min, std::min(c.attrs.max, v.attributes.size())});
    std::vector<std::size_t> attrs(v.attributes.size());
    for (std::size_t k = 0; k < attrs.size(); ++k) attrs[k] = k;
    g.shuffle(attrs.begin(), attrs.end());
    for (std::size_t k = 0; k < a; ++k) node.attributes.push_back(v.attributes[attrs[k]]);
    sg.nodes.push_back(std::move(node));
  }
  if (n < 2) return sg;
  const std::size_t e = draw_in(g, c.edges);
  for (std::size_t k = 0; k < e; ++k) {
    const std::size_t s = g.index(n);
    std::size_t o = g.index(n - 1);
    if (o >= s) ++o;
    sg.edges.push_back({s, v.predicates[g.index(v.predicates.size())], o});
  }
  return sg;
}

inline bool has_attr(const ObjectNode& n, const std::string& a) {
  return std::find(n.attributes.begin(), n.attributes.end(), a) != n.attributes.end();
}

/// Candidate questions of one template for a graph, each with the set of
/// answers the graph supports.
inline std::vector<std::pair<Candidate, std::set<std::string>>> candidates(const SceneGraph& sg, Template t) {
  std::vector<std::pair<Candidate, std::set<std::string>>> out;
  const auto& N = sg.nodes;
  switch (t) {
    case Template::ObjectQuery:
      for (const auto& e : sg.edges) {
        std::set<std::string> ans;
        for (const auto& f : sg.edges) {
          if (f.predicate == e.predicate && N[f.object].name == N[e.object].name) ans.insert(N[f.subject].name);
        }
        out.push_back({{{"what", "is", e.predicate, "the", N[e.object].name}, N[e.subject].name}, ans});
      }
      break;
    case Template::RelationQuery:
      for (const auto& e : sg.edges) {
        std::set<std::string> ans;
        for (const auto& f : sg.edges) {
          if (N[f.subject].name == N[e.subject].name && N[f.object].name == N[e.object].name) ans.insert(f.predicate);
        }
        out.push_back({{{"what", "relation", "from", N[e.subject].name, "to", N[e.object].name}, e.predicate}, ans});
      }
      break;
    case Template::AttributeQuery:
      for (const auto& n : N) {
        if (n.attributes.empty()) continue;
        std::set<std::string> ans;
        for (const auto& m : N) {
          if (m.name == n.name) ans.insert(m.attributes.begin(), m.attributes.end());
        }
        out.push_back({{{"what", "attribute", "has", "the", n.name}, n.attributes.front()}, ans});
      }
      break;
    case Template::Why:
      for (std::size_t i = 0; i < N.size(); ++i) {
        for (const auto& a : N[i].attributes) {
          std::set<std::string> ans;
          std::string first;
          for (const auto& e : sg.edges) {
            const auto& s = N[e.subject];
            const auto& o = N[e.object];
            if ((s.name == N[i].name && has_attr(s, a)) || (o.name == N[i].name && has_attr(o, a))) {
              ans.insert(e.predicate);
              if ((e.subject == i || e.object == i) && first.empty()) first = e.predicate;
            }
          }
          if (first.empty()) continue;
          out.push_back({{{"why", a, N[i].name}, first}, ans});
        }
      }
      break;
  }
  return out;
}

inline AnswerKind answer_kind_of(Template t) {
  switch (t) {
    case Template::ObjectQuery:
      return AnswerKind::Object;
    case Template::AttributeQuery:
      return AnswerKind::Attribute;
    default:
      return AnswerKind::Relation;
  }
}

}  // namespace detail

/// Deterministic in the config. Every emitted graph is distinct, and every
/// question has exactly one answer supported by its graph; ambiguous draws are
/// resampled.
inline std::vector<Example> generate(const GenConfig& c) {
  c.validate();
  const SyntheticVocab vocab = SyntheticVocab::make(c.object_vocab, c.predicate_vocab, c.attribute_vocab);
  rng::Generator g(rng::substream(c.seed, "datagen"));
  const double total_weight = c.mix[0] + c.mix[1] + c.mix[2] + c.mix[3];
  std::set<std::string> seen_graphs;
  std::vector<Example> out;
  for (std::size_t n = 0; n < c.n_examples; ++n) {
    double u = g.uniform(0.0, total_weight);
    std::size_t ti = kTemplates.size();
    for (std::size_t i = 0; i < kTemplates.size(); ++i) {
      if (c.mix[i] == 0.0) continue;
      ti = i;
      if (u < c.mix[i]) break;
      u -= c.mix[i];
    }
    const Template t = kTemplates[ti];
    bool done = false;
    for (std::size_t attempt = 0; attempt < c.max_attempts && !done; ++attempt) {
      SceneGraph sg = detail::draw_graph(g, c, vocab);
      auto cands = detail::candidates(sg, t);
      std::vector<std::size_t> unique;
      for (std::size_t i = 0; i < cands.size(); ++i) {
        if (cands[i].second.size() == 1) unique.push_back(i);
      }
      if (unique.empty()) continue;
      const std::string key = to_json(sg).dump();
      if (seen_graphs.contains(key)) continue;
      seen_graphs.insert(key);
      auto& pick = cands[unique[g.index(unique.size())]].first;
      out.push_back({std::move(sg), std::move(pick.question), std::move(pick.answer), to_string(t), detail::answer_kind_of(t)});
      done = true;
    }
    if (!done) {
      throw InputError(std::string("template ") + to_string(t) + ": no distinct graph with a uniquely answerable question after " +
                       std::to_string(c.max_attempts) + " draws (example " + std::to_string(n) + ")");
    }
  }
  return out;
}

struct Split {
  std::vector<Example> train;
  std::vector<Example> test;
};

/// Seeded shuffle, then the first round(ratio * n) examples train.
inline Split split(const std::vector<Example>& examples, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("split ratio must be in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(examples.size())));
  if (n_train == 0 || n_train >= examples.size()) {
    throw InputError("split: " + std::to_string(examples.size()) + " examples are too few for ratio " + std::to_string(ratio));
  }
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng::Generator g(rng::substream(seed, "split"));
  g.shuffle(order.begin(), order.end());
  Split s;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_train ? s.train : s.test).push_back(examples[order[i]]);
  return s;
}

}  // namespace dmgnn
