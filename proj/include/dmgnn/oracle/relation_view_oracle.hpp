// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference for the relation-significant view: every ordered pair
// of distinct edges crossed with every node id that is an endpoint of both.
#pragma once

#include <algorithm>
#include <tuple>
#include <vector>

#include "dmgnn/scene_graph.hpp"

namespace dmgnn::oracle {

/// (from relation node, to relation node, shared object id)
using RelationTuple = std::tuple<std::size_t, std::size_t, std::size_t>;

inline std::vector<RelationTuple> brute_force_relation_tuples(const SceneGraph& sg) {
  std::vector<RelationTuple> out;
  const std::size_t e = sg.edges.size();
  for (std::size_t a = 0; a < e; ++a) {
    for (std::size_t b = 0; b < e; ++b) {
      if (a == b) continue;
      for (std::size_t n = 0; n < sg.nodes.size(); ++n) {
        const bool in_a = sg.edges[a].subject == n || sg.edges[a].object == n;
        const bool in_b = sg.edges[b].subject == n || sg.edges[b].object == n;
        if (in_a && in_b) out.emplace_back(a, b, n);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Tuples read off a view's a_out lists, sorted; shared_node maps edge → object id.
inline std::vector<RelationTuple> view_tuples_from_out(const GraphView& v, const std::vector<std::size_t>& shared_node) {
  std::vector<RelationTuple> out;
  for (std::size_t i = 0; i < v.a_out.size(); ++i) {
    for (const Incidence& t : v.a_out[i]) out.emplace_back(i, t.neighbor, shared_node.at(t.edge));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<RelationTuple> view_tuples_from_in(const GraphView& v, const std::vector<std::size_t>& shared_node) {
  std::vector<RelationTuple> out;
  for (std::size_t i = 0; i < v.a_in.size(); ++i) {
    for (const Incidence& t : v.a_in[i]) out.emplace_back(t.neighbor, i, shared_node.at(t.edge));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// True when both adjacency directions of the relation view equal the brute-force set.
inline bool relation_view_matches(const SceneGraph& sg) {
  const DualPair p = dualize(sg);
  const auto expected = brute_force_relation_tuples(sg);
  return view_tuples_from_out(p.relation_view, p.relation_edge_to_node) == expected &&
         view_tuples_from_in(p.relation_view, p.relation_edge_to_node) == expected &&
         p.relation_view.node_count() == sg.edges.size();
}

}  // namespace dmgnn::oracle
