// SPDX-License-Identifier: Apache-2.0
//
// Scene graphs and their two encodable forms.
//
// The object-significant view is the graph itself: objects are nodes and each
// predicate edge s -p-> o is one directed tuple. The relation-significant view
// turns every edge instance into a node and links two of them whenever they
// share an endpoint object; the shared object becomes the connecting edge.
#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dmgnn/error.hpp"
#include "json.hpp"

namespace dmgnn {

struct ObjectNode {
  std::string name;
  std::vector<std::string> attributes;

  bool operator==(const ObjectNode&) const = default;
};

struct PredicateEdge {
  std::size_t subject = 0;
  std::string predicate;
  std::size_t object = 0;

  bool operator==(const PredicateEdge&) const = default;
};

/// Objects with attributes plus directed predicate edges. Ids are positions.
struct SceneGraph {
  std::vector<ObjectNode> nodes;
  std::vector<PredicateEdge> edges;

  bool operator==(const SceneGraph&) const = default;

  [[nodiscard]] std::vector<std::size_t> self_loop_edges() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (edges[k].subject == edges[k].object) out.push_back(k);
    }
    return out;
  }

  [[nodiscard]] std::size_t attribute_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes) n += node.attributes.size();
    return n;
  }

  /// Throws InputError on dangling endpoints or more than max_attributes per node.
  void validate(std::size_t max_attributes = std::numeric_limits<std::size_t>::max()) const {
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (edges[k].subject >= nodes.size()) {
        throw InputError("edges[" + std::to_string(k) + "].subject: unknown node " + std::to_string(edges[k].subject));
      }
      if (edges[k].object >= nodes.size()) {
        throw InputError("edges[" + std::to_string(k) + "].object: unknown node " + std::to_string(edges[k].object));
      }
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].attributes.size() > max_attributes) {
        throw InputError("nodes[" + std::to_string(i) + "].attributes: " + std::to_string(nodes[i].attributes.size()) +
                         " attributes exceed the configured limit " + std::to_string(max_attributes));
      }
    }
  }
};

enum class ViewKind { ObjectSignificant, RelationSignificant };

inline const char* to_string(ViewKind k) {
  return k == ViewKind::ObjectSignificant ? "object-significant" : "relation-significant";
}

/// One adjacency entry: (edge index, neighbour node index).
struct Incidence {
  std::size_t edge = 0;
  std::size_t neighbor = 0;

  auto operator<=>(const Incidence&) const = default;
};

/// An encodable graph. Every edge index k is one directed tuple j -k-> i and
/// appears exactly once in a_in[i] and once in a_out[j].
struct GraphView {
  ViewKind origin = ViewKind::ObjectSignificant;
  std::vector<std::string> node_tokens;
  std::vector<std::string> edge_tokens;
  std::vector<std::vector<Incidence>> a_in;
  std::vector<std::vector<Incidence>> a_out;

  [[nodiscard]] std::size_t node_count() const { return node_tokens.size(); }
  [[nodiscard]] std::size_t edge_count() const { return edge_tokens.size(); }

  [[nodiscard]] std::size_t tuple_count() const {
    std::size_t n = 0;
    for (const auto& l : a_in) n += l.size();
    return n;
  }
};

inline GraphView build_object_view(const SceneGraph& sg) {
  GraphView v;
  v.origin = ViewKind::ObjectSignificant;
  v.a_in.resize(sg.nodes.size());
  v.a_out.resize(sg.nodes.size());
  for (const auto& n : sg.nodes) v.node_tokens.push_back(n.name);
  for (std::size_t k = 0; k < sg.edges.size(); ++k) {
    const PredicateEdge& e = sg.edges[k];
    v.edge_tokens.push_back(e.predicate);
    v.a_out[e.subject].push_back({k, e.object});
    v.a_in[e.object].push_back({k, e.subject});
  }
  return v;
}

namespace detail {

inline std::vector<std::size_t> endpoints(const PredicateEdge& e) {
  if (e.subject == e.object) return {e.subject};
  return {e.subject, e.object};
}

}  // namespace detail

/// Relation view plus, per relation-view edge, the shared original object.
struct RelationViewBuild {
  GraphView view;
  std::vector<std::size_t> shared_node;
};

inline RelationViewBuild build_relation_view_indexed(const SceneGraph& sg) {
  RelationViewBuild out;
  GraphView& v = out.view;
  v.origin = ViewKind::RelationSignificant;
  const std::size_t n = sg.edges.size();
  v.a_in.resize(n);
  v.a_out.resize(n);
  for (const auto& e : sg.edges) v.node_tokens.push_back(e.predicate);
  auto emit = [&](std::size_t from, std::size_t to, std::size_t via) {
    const std::size_t k = v.edge_tokens.size();
    v.edge_tokens.push_back(sg.nodes[via].name);
    out.shared_node.push_back(via);
    v.a_out[from].push_back({k, to});
    v.a_in[to].push_back({k, from});
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto ei = detail::endpoints(sg.edges[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto ej = detail::endpoints(sg.edges[j]);
      for (std::size_t node : ei) {
        if (std::find(ej.begin(), ej.end(), node) == ej.end()) continue;
        emit(i, j, node);
        emit(j, i, node);
      }
    }
  }
  return out;
}

inline GraphView build_relation_view(const SceneGraph& sg) { return build_relation_view_indexed(sg).view; }

/// Both views of one scene graph with the maps back to original ids.
struct DualPair {
  GraphView object_view;
  GraphView relation_view;
  /// relation_view node index → original edge id.
  std::vector<std::size_t> relation_node_to_edge;
  /// relation_view edge index → shared original node id.
  std::vector<std::size_t> relation_edge_to_node;
};

inline DualPair dualize(const SceneGraph& sg) {
  DualPair p;
  p.object_view = build_object_view(sg);
  RelationViewBuild rel = build_relation_view_indexed(sg);
  p.relation_view = std::move(rel.view);
  p.relation_edge_to_node = std::move(rel.shared_node);
  p.relation_node_to_edge.resize(sg.edges.size());
  for (std::size_t k = 0; k < sg.edges.size(); ++k) p.relation_node_to_edge[k] = k;
  return p;
}

// ---------------------------------------------------------------------------
// Structured-text I/O

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ParseError(path + ": unexpected field \"" + it.key() + "\"");
  }
}

inline std::string require_string(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) throw ParseError(path + "." + key + ": missing field");
  const json& v = obj.at(key);
  if (!v.is_string()) throw ParseError(path + "." + key + ": expected string");
  return v.get<std::string>();
}

inline long long require_int(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) throw ParseError(path + "." + key + ": missing field");
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ParseError(path + "." + key + ": expected integer");
  return v.get<long long>();
}

}  // namespace detail

/// Parses {"nodes":[{name, attributes}], "edges":[{subject, predicate, object}]}.
/// Nodes may carry an explicit integer "id"; edges then refer to those ids and
/// the result is re-densified in document order.
inline SceneGraph parse_scene_graph(const json& doc, const std::string& path = "graph") {
  if (!doc.is_object()) throw ParseError(path + ": expected object");
  detail::reject_unknown_keys(doc, {"nodes", "edges"}, path);
  if (!doc.contains("nodes") || !doc.at("nodes").is_array()) throw ParseError(path + ".nodes: expected array");
  SceneGraph sg;
  std::map<long long, std::size_t> id_map;
  const json& nodes = doc.at("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string p = "nodes[" + std::to_string(i) + "]";
    const json& n = nodes[i];
    if (!n.is_object()) throw ParseError(p + ": expected object");
    detail::reject_unknown_keys(n, {"id", "name", "attributes"}, p);
    long long id = static_cast<long long>(i);
    if (n.contains("id")) id = detail::require_int(n, "id", p);
    if (!id_map.emplace(id, i).second) throw ParseError(p + ".id: duplicate id " + std::to_string(id));
    ObjectNode node;
    node.name = detail::require_string(n, "name", p);
    if (n.contains("attributes")) {
      const json& attrs = n.at("attributes");
      if (!attrs.is_array()) throw ParseError(p + ".attributes: expected array");
      for (std::size_t a = 0; a < attrs.size(); ++a) {
        if (!attrs[a].is_string()) throw ParseError(p + ".attributes[" + std::to_string(a) + "]: expected string");
        node.attributes.push_back(attrs[a].get<std::string>());
      }
    }
    sg.nodes.push_back(std::move(node));
  }
  if (doc.contains("edges")) {
    const json& edges = doc.at("edges");
    if (!edges.is_array()) throw ParseError(path + ".edges: expected array");
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const std::string p = "edges[" + std::to_string(k) + "]";
      const json& e = edges[k];
      if (!e.is_object()) throw ParseError(p + ": expected object");
      detail::reject_unknown_keys(e, {"subject", "predicate", "object"}, p);
      auto resolve = [&](const char* key) {
        const long long ref = detail::require_int(e, key, p);
        auto it = id_map.find(ref);
        if (it == id_map.end()) throw ParseError(p + "." + key + ": unknown node " + std::to_string(ref));
        return it->second;
      };
      PredicateEdge edge;
      edge.subject = resolve("subject");
      edge.predicate = detail::require_string(e, "predicate", p);
      edge.object = resolve("object");
      sg.edges.push_back(std::move(edge));
    }
  }
  return sg;
}

inline SceneGraph parse_scene_graph_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("graph: ") + e.what());
  }
  return parse_scene_graph(doc);
}

/// Canonical form: positional ids, no "id" fields.
inline json to_json(const SceneGraph& sg) {
  json nodes = json::array();
  for (const auto& n : sg.nodes) nodes.push_back({{"name", n.name}, {"attributes", n.attributes}});
  json edges = json::array();
  for (const auto& e : sg.edges) edges.push_back({{"subject", e.subject}, {"predicate", e.predicate}, {"object", e.object}});
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SceneGraph load_scene_graph(const std::string& path) {
  try {
    return parse_scene_graph_text(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

/// Graph files may hold one JSON object, or one object per line.
inline std::vector<SceneGraph> load_scene_graphs(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<SceneGraph> out;
  try {
    out.push_back(parse_scene_graph(json::parse(text)));
    return out;
  } catch (const json::parse_error&) {
  }
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.rfind('#', 0) == 0) continue;
    try {
      out.push_back(parse_scene_graph(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Human-readable dump of a view (nodes, edges, adjacency lists, counts).
inline std::string describe(const GraphView& v) {
  std::ostringstream os;
  os << to_string(v.origin) << " view: " << v.node_count() << " nodes, " << v.edge_count() << " edges, "
     << v.tuple_count() << " directed tuples\n";
  for (std::size_t i = 0; i < v.node_count(); ++i) {
    os << "  node " << i << " \"" << v.node_tokens[i] << "\"\n    in :";
    for (const auto& t : v.a_in[i]) os << " (" << v.edge_tokens[t.edge] << "#" << t.edge << " <- " << t.neighbor << ")";
    os << "\n    out:";
    for (const auto& t : v.a_out[i]) os << " (" << v.edge_tokens[t.edge] << "#" << t.edge << " -> " << t.neighbor << ")";
    os << "\n";
  }
  return os.str();
}

}  // namespace dmgnn
