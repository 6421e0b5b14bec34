// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "dmgnn/fixtures.hpp"
#include "dmgnn/oracle/relation_view_oracle.hpp"
#include "dmgnn/scene_graph.hpp"

using namespace dmgnn;

namespace {

std::string parse_error_of(const std::string& text) {
  try {
    (void)parse_scene_graph_text(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseSceneGraph, SingleNode) {
  const SceneGraph sg = parse_scene_graph_text(R"({"nodes":[{"name":"man"}],"edges":[]})");
  ASSERT_EQ(sg.nodes.size(), 1u);
  EXPECT_EQ(sg.nodes[0].name, "man");
  EXPECT_TRUE(sg.edges.empty());
}

TEST(ParseSceneGraph, UnknownNodeReference) {
  EXPECT_EQ(parse_error_of(R"({"nodes":[{"name":"a"},{"name":"b"}],"edges":[{"subject":0,"predicate":"on","object":5}]})"),
            "edges[0].object: unknown node 5");
}

TEST(ParseSceneGraph, ManHorseHat) {
  const SceneGraph sg = parse_scene_graph_text(R"({"nodes":[{"name":"man","attributes":["tall"]},
      {"name":"horse","attributes":["brown"]},{"name":"hat"}],
      "edges":[{"subject":0,"predicate":"riding","object":1},{"subject":0,"predicate":"wearing","object":2}]})");
  EXPECT_EQ(sg, fixtures::man_horse_hat());
}

TEST(ParseSceneGraph, ExplicitIdsAreRedensified) {
  const SceneGraph sg = parse_scene_graph_text(R"({"nodes":[{"id":10,"name":"a"},{"id":3,"name":"b"}],
      "edges":[{"subject":3,"predicate":"on","object":10}]})");
  ASSERT_EQ(sg.edges.size(), 1u);
  EXPECT_EQ(sg.edges[0].subject, 1u);
  EXPECT_EQ(sg.edges[0].object, 0u);
  EXPECT_EQ(parse_error_of(R"({"nodes":[{"id":1,"name":"a"},{"id":1,"name":"b"}]})"), "nodes[1].id: duplicate id 1");
}

TEST(ParseSceneGraph, MalformedFieldsCarryPath) {
  EXPECT_EQ(parse_error_of(R"({"nodes":[{"name":3}]})"), "nodes[0].name: expected string");
  EXPECT_EQ(parse_error_of(R"({"nodes":[{"name":"a","colour":"red"}]})"), "nodes[0]: unexpected field \"colour\"");
  EXPECT_EQ(parse_error_of(R"({"nodes":[{"name":"a","attributes":["x",1]}]})"), "nodes[0].attributes[1]: expected string");
  EXPECT_EQ(parse_error_of(R"({"nodes":[{"name":"a"}],"edges":[{"subject":0,"object":0}]})"),
            "edges[0].predicate: missing field");
  EXPECT_NE(parse_error_of("{not json"), "");
}

TEST(ParseSceneGraph, RoundTripIsIdentityOnCanonicalForm) {
  rng::Generator g(5);
  for (int i = 0; i < 200; ++i) {
    const SceneGraph sg = fixtures::random_graph(g);
    const json canon = to_json(sg);
    const SceneGraph back = parse_scene_graph_text(canon.dump());
    EXPECT_EQ(back, sg);
    EXPECT_EQ(to_json(back), canon);
  }
}

TEST(ParseSceneGraph, LoadsJsonlBatches) {
  const auto dir = std::filesystem::temp_directory_path() / "dmgnn_sg_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "batch.jsonl").string();
  {
    std::ofstream out(path);
    out << "# two graphs\n" << to_json(fixtures::man_horse_hat()).dump() << "\n\n" << R"({"nodes":[]})" << "\n";
  }
  const auto graphs = load_scene_graphs(path);
  ASSERT_EQ(graphs.size(), 2u);
  EXPECT_TRUE(graphs[1].nodes.empty());
  {
    std::ofstream out(path);
    out << R"({"nodes":[]})" << "\n" << R"({"nodes":[{"name":1}]})" << "\n";
  }
  try {
    (void)load_scene_graphs(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2: nodes[0].name"), std::string::npos) << e.what();
  }
  EXPECT_THROW((void)load_scene_graph((dir / "missing.json").string()), InputError);
}

TEST(Validate, AttributeLimitAndSelfLoops) {
  SceneGraph sg = fixtures::man_horse_hat();
  EXPECT_NO_THROW(sg.validate(1));
  sg.nodes[0].attributes.push_back("old");
  EXPECT_THROW(sg.validate(1), InputError);
  sg.edges.push_back({1, "near", 1});
  EXPECT_EQ(sg.self_loop_edges(), std::vector<std::size_t>{2});
  sg.edges.push_back({1, "near", 9});
  EXPECT_THROW(sg.validate(), InputError);
}

TEST(ObjectView, Examples) {
  const GraphView empty = build_object_view({});
  EXPECT_EQ(empty.node_count(), 0u);
  EXPECT_EQ(empty.tuple_count(), 0u);

  SceneGraph one;
  one.nodes = {{"man", {}}, {"horse", {}}};
  one.edges = {{0, "riding", 1}};
  const GraphView v = build_object_view(one);
  EXPECT_EQ(v.a_out[0], (std::vector<Incidence>{{0, 1}}));
  EXPECT_EQ(v.a_in[1], (std::vector<Incidence>{{0, 0}}));
  EXPECT_TRUE(v.a_in[0].empty());
  EXPECT_EQ(v.edge_tokens[0], "riding");

  SceneGraph loop;
  loop.nodes = {{"a", {}}};
  loop.edges = {{0, "near", 0}};
  const GraphView lv = build_object_view(loop);
  EXPECT_EQ(lv.a_in[0], (std::vector<Incidence>{{0, 0}}));
  EXPECT_EQ(lv.a_out[0], (std::vector<Incidence>{{0, 0}}));
}

TEST(RelationView, ManHorseHat) {
  const RelationViewBuild b = build_relation_view_indexed(fixtures::man_horse_hat());
  EXPECT_EQ(b.view.node_tokens, (std::vector<std::string>{"riding", "wearing"}));
  EXPECT_EQ(b.view.tuple_count(), 2u);
  EXPECT_EQ(b.view.edge_tokens, (std::vector<std::string>{"man", "man"}));
  EXPECT_EQ(b.view.a_out[0], (std::vector<Incidence>{{0, 1}}));
  EXPECT_EQ(b.view.a_out[1], (std::vector<Incidence>{{1, 0}}));
  EXPECT_EQ(b.shared_node, (std::vector<std::size_t>{0, 0}));
}

TEST(RelationView, SingleEdgeAndParallelEdges) {
  SceneGraph one;
  one.nodes = {{"a", {}}, {"b", {}}};
  one.edges = {{0, "on", 1}};
  EXPECT_EQ(build_relation_view(one).node_count(), 1u);
  EXPECT_EQ(build_relation_view(one).tuple_count(), 0u);

  // Two edges sharing both endpoints: one tuple per shared object per direction.
  one.edges.push_back({1, "under", 0});
  EXPECT_EQ(build_relation_view(one).tuple_count(), 4u);
}

TEST(Dualize, StarAndEmpty) {
  SceneGraph star;
  star.nodes = {{"hub", {}}, {"a", {}}, {"b", {}}, {"c", {}}};
  star.edges = {{0, "p", 1}, {0, "p", 2}, {0, "p", 3}};
  const DualPair p = dualize(star);
  EXPECT_EQ(p.relation_view.node_count(), 3u);
  EXPECT_EQ(p.relation_view.tuple_count(), 6u);
  EXPECT_EQ(p.relation_node_to_edge, (std::vector<std::size_t>{0, 1, 2}));

  const DualPair e = dualize({});
  EXPECT_EQ(e.object_view.node_count(), 0u);
  EXPECT_EQ(e.relation_view.node_count(), 0u);
  EXPECT_TRUE(e.relation_node_to_edge.empty());
  EXPECT_TRUE(e.relation_edge_to_node.empty());
}

TEST(Dualize, MirrorCountAndOracleProperties) {
  rng::Generator g(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const SceneGraph sg = fixtures::random_graph(g);
    const DualPair p = dualize(sg);
    EXPECT_EQ(p.relation_view.node_count(), p.object_view.edge_count());
    EXPECT_TRUE(oracle::relation_view_matches(sg)) << to_json(sg).dump();
    for (const GraphView* v : {&p.object_view, &p.relation_view}) {
      std::size_t out_total = 0;
      for (std::size_t i = 0; i < v->node_count(); ++i) {
        out_total += v->a_out[i].size();
        for (const Incidence& t : v->a_in[i]) {
          ASSERT_LT(t.neighbor, v->node_count());
          ASSERT_LT(t.edge, v->edge_count());
          const auto& mirror = v->a_out[t.neighbor];
          EXPECT_NE(std::find(mirror.begin(), mirror.end(), Incidence{t.edge, i}), mirror.end());
        }
      }
      EXPECT_EQ(out_total, v->tuple_count());
      EXPECT_EQ(v->tuple_count(), v->edge_count());
    }
  }
}

TEST(Describe, ListsCounts) {
  const std::string s = describe(build_relation_view(fixtures::man_horse_hat()));
  EXPECT_NE(s.find("relation-significant view: 2 nodes, 2 edges"), std::string::npos) << s;
}
