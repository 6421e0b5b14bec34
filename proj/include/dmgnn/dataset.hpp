// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dmgnn/error.hpp"
#include "dmgnn/scene_graph.hpp"

namespace dmgnn {

enum class AnswerKind { Object, Relation, Attribute };

inline const char* to_string(AnswerKind k) {
  switch (k) {
    case AnswerKind::Object:
      return "object";
    case AnswerKind::Relation:
      return "relation";
    case AnswerKind::Attribute:
      return "attribute";
  }
  return "?";
}

inline AnswerKind answer_kind_from_string(const std::string& s) {
  if (s == "object") return AnswerKind::Object;
  if (s == "relation") return AnswerKind::Relation;
  if (s == "attribute") return AnswerKind::Attribute;
  throw ParseError("unknown answer_kind \"" + s + "\"");
}

/// One question about one scene graph.
struct Example {
  SceneGraph graph;
  std::vector<std::string> question;
  std::string answer;
  std::string qtype;
  std::optional<AnswerKind> answer_kind;

  bool operator==(const Example&) const = default;
};

inline json to_json(const Example& ex) {
  json j = {{"graph", to_json(ex.graph)}, {"question", ex.question}, {"answer", ex.answer}, {"qtype", ex.qtype}};
  if (ex.answer_kind) j["answer_kind"] = to_string(*ex.answer_kind);
  return j;
}

/// Record: {graph: object | "path/to/graph.json", question: [tokens], answer, qtype[, answer_kind]}.
/// Relative graph paths resolve against base_dir.
inline Example parse_example(const json& j, const std::string& base_dir = "") {
  if (!j.is_object()) throw ParseError("record: expected object");
  detail::reject_unknown_keys(j, {"graph", "question", "answer", "qtype", "answer_kind"}, "record");
  Example ex;
  if (!j.contains("graph")) throw ParseError("record.graph: missing field");
  const json& g = j.at("graph");
  if (g.is_string()) {
    std::string path = g.get<std::string>();
    if (!base_dir.empty() && !path.empty() && path.front() != '/') path = base_dir + "/" + path;
    ex.graph = load_scene_graph(path);
  } else {
    ex.graph = parse_scene_graph(g, "record.graph");
  }
  if (!j.contains("question") || !j.at("question").is_array()) throw ParseError("record.question: expected array");
  for (const auto& tok : j.at("question")) {
    if (!tok.is_string()) throw ParseError("record.question: expected string tokens");
    ex.question.push_back(tok.get<std::string>());
  }
  ex.answer = detail::require_string(j, "answer", "record");
  ex.qtype = detail::require_string(j, "qtype", "record");
  if (j.contains("answer_kind")) ex.answer_kind = answer_kind_from_string(detail::require_string(j, "answer_kind", "record"));
  return ex;
}

/// JSONL reader; blank lines and lines starting with '#' are skipped.
inline std::vector<Example> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset " + path);
  const auto slash = path.find_last_of('/');
  const std::string base = slash == std::string::npos ? "" : path.substr(0, slash);
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.rfind('#', 0) == 0) continue;
    try {
      out.push_back(parse_example(json::parse(line), base));
    } catch (const json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_dataset(std::ostream& out, const std::vector<Example>& examples, const std::string& header) {
  if (!header.empty()) out << "# " << header << "\n";
  for (const auto& ex : examples) out << to_json(ex).dump() << "\n";
}

}  // namespace dmgnn
