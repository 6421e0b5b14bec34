// SPDX-License-Identifier: Apache-2.0
//
// Test-only: reads a templated question back from its tokens and lists every
// token of the matching role that satisfies it, by existence search over the
// graph. Independent of the generator's candidate construction.
#pragma once

#include <set>
#include <string>
#include <vector>

#include "dmgnn/error.hpp"
#include "dmgnn/scene_graph.hpp"

namespace dmgnn::oracle {

inline std::set<std::string> enumerate_answers(const SceneGraph& sg, const std::vector<std::string>& q) {
  auto named = [&](std::size_t i, const std::string& name) { return sg.nodes[i].name == name; };
  auto carries = [&](std::size_t i, const std::string& a) {
    for (const auto& x : sg.nodes[i].attributes) {
      if (x == a) return true;
    }
    return false;
  };
  std::set<std::string> out;
  if (q.size() == 5 && q[0] == "what" && q[1] == "is" && q[3] == "the") {
    for (const auto& cand : sg.nodes) {
      for (const auto& e : sg.edges) {
        if (e.predicate == q[2] && named(e.subject, cand.name) && named(e.object, q[4])) out.insert(cand.name);
      }
    }
    return out;
  }
  if (q.size() == 6 && q[0] == "what" && q[1] == "relation" && q[2] == "from" && q[4] == "to") {
    for (const auto& cand : sg.edges) {
      for (const auto& e : sg.edges) {
        if (e.predicate == cand.predicate && named(e.subject, q[3]) && named(e.object, q[5])) out.insert(cand.predicate);
      }
    }
    return out;
  }
  if (q.size() == 5 && q[0] == "what" && q[1] == "attribute" && q[2] == "has" && q[3] == "the") {
    for (std::size_t i = 0; i < sg.nodes.size(); ++i) {
      if (!named(i, q[4])) continue;
      for (const auto& a : sg.nodes[i].attributes) out.insert(a);
    }
    return out;
  }
  if (q.size() == 3 && q[0] == "why") {
    for (const auto& e : sg.edges) {
      for (std::size_t end : {e.subject, e.object}) {
        if (named(end, q[2]) && carries(end, q[1])) out.insert(e.predicate);
      }
    }
    return out;
  }
  throw InputError("enumerate_answers: question does not match any template");
}

}  // namespace dmgnn::oracle
