// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>

#include "dmgnn/fixtures.hpp"
#include "dmgnn/fusion.hpp"
#include "dmgnn/gradcheck.hpp"
#include "dmgnn/model.hpp"

using namespace dmgnn;
using namespace dmgnn::ad;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  rng::Generator g(seed);
  Matrix m(r, c);
  for (double& v : m.data) v = g.uniform(-1, 1);
  return m;
}

FusionMap map_for(Tape& t, const SceneGraph& sg, const Vocabulary& vocab, FusionFlags flags, std::size_t d_g = 3) {
  return build_fusion_map(t, sg, t.constant(random_matrix(sg.nodes.size(), d_g, 1)),
                          t.constant(random_matrix(sg.edges.size(), d_g, 2)), vocab, flags);
}

// Direct count, written independently of the builder.
std::size_t count_rows(const SceneGraph& sg, FusionFlags f) {
  std::size_t r = 0;
  for (const auto& n : sg.nodes) r += 1 + (f.without_attributes ? 0 : n.attributes.size());
  return r + (f.without_relations ? 0 : sg.edges.size());
}

}  // namespace

TEST(FusionMap, CountingExamples) {
  const Vocabulary vocab(4, 1);
  SceneGraph sg;
  for (const char* n : {"a", "b", "c", "d"}) sg.nodes.push_back({n, {"red"}});
  sg.edges = {{0, "on", 1}, {1, "on", 2}, {2, "on", 3}};
  Tape t;
  const FusionMap fm = map_for(t, sg, vocab, {});
  EXPECT_EQ(fm.size(), 11u);
  EXPECT_EQ(fm.rows.rows(), 11u);
  EXPECT_EQ(fm.rows.cols(), 3u + 4u);
  EXPECT_EQ(map_for(t, sg, vocab, {false, true}).size(), 8u);
  EXPECT_EQ(map_for(t, sg, vocab, {true, false}).size(), 7u);

  SceneGraph lone;
  lone.nodes = {{"cup", {}}};
  EXPECT_EQ(map_for(t, lone, vocab, {}).size(), 1u);
  EXPECT_THROW((void)map_for(t, SceneGraph{}, vocab, {}), InputError);
}

TEST(FusionMap, RowsAndProvenance) {
  const Vocabulary vocab(4, 1);
  const SceneGraph sg = fixtures::man_horse_hat();
  Tape t;
  Var gn = t.constant(random_matrix(3, 2, 5));
  Var ge = t.constant(random_matrix(2, 2, 6));
  const FusionMap fm = build_fusion_map(t, sg, gn, ge, vocab, {});
  const std::vector<Provenance> expected = {{RowKind::Name, 0, 0, "man"},      {RowKind::Attribute, 0, 0, "tall"},
                                            {RowKind::Name, 1, 0, "horse"},    {RowKind::Attribute, 1, 0, "brown"},
                                            {RowKind::Name, 2, 0, "hat"},      {RowKind::Relation, 0, 0, "riding"},
                                            {RowKind::Relation, 1, 0, "wearing"}};
  EXPECT_EQ(fm.provenance, expected);
  const Matrix& rows = fm.rows.value();
  // Attribute row of node 1 is [g_1, emb(brown)]; edge row 1 is [g_e1, emb(wearing)].
  EXPECT_EQ(rows(3, 0), gn.value()(1, 0));
  EXPECT_EQ(rows(3, 2), vocab.embedding("brown")[0]);
  EXPECT_EQ(rows(6, 1), ge.value()(1, 1));
  EXPECT_EQ(rows(6, 5), vocab.embedding("wearing")[3]);

  EXPECT_THROW((void)build_fusion_map(t, sg, t.constant(Matrix(2, 2)), ge, vocab, {}), DimensionError);
  EXPECT_THROW((void)build_fusion_map(t, sg, gn, t.constant(Matrix(3, 2)), vocab, {}), DimensionError);
}

TEST(FusionMap, RowCountFormulaOnRandomGraphs) {
  const Vocabulary vocab(2, 1);
  rng::Generator g(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const SceneGraph sg = fixtures::random_graph(g);
    if (sg.nodes.empty()) continue;
    const FusionFlags f{g.index(2) == 1, g.index(2) == 1};
    Tape t;
    const FusionMap fm = map_for(t, sg, vocab, f, 2);
    EXPECT_EQ(fm.size(), count_rows(sg, f));
    EXPECT_EQ(fm.size(), expected_fusion_rows(sg, f));
    EXPECT_EQ(fm.rows.rows(), fm.size());
  }
}

class AttentionTest : public ::testing::Test {
 protected:
  AttentionSpec spec{"attn", 5, 6, 3};
  ModelParams params;
  void SetUp() override { spec.register_params(params, 4); }
  FusionMap random_map(Tape& t, std::size_t r, std::uint64_t seed) {
    FusionMap fm;
    fm.rows = t.constant(random_matrix(r, 6, seed));
    for (std::size_t i = 0; i < r; ++i) fm.provenance.push_back({RowKind::Name, i, 0, "x"});
    return fm;
  }
};

TEST_F(AttentionTest, SingleRowScoresOne) {
  Tape t;
  const AttentionResult a = attend(t, params, spec, random_map(t, 1, 1), t.constant(random_matrix(1, 5, 2)));
  EXPECT_EQ(a.scores, Matrix::row_vector({1.0}));
}

TEST_F(AttentionTest, ZeroQueryGivesUniformScores) {
  Tape t;
  const AttentionResult a = attend(t, params, spec, random_map(t, 4, 1), t.constant(Matrix(1, 5)));
  for (const Matrix& w : a.weights) {
    for (double v : w.data) EXPECT_DOUBLE_EQ(v, 0.25);
  }
}

TEST_F(AttentionTest, DistributionsSumToOne) {
  rng::Generator g(3);
  for (int trial = 0; trial < 200; ++trial) {
    Tape t;
    const std::size_t r = 1 + g.index(30);
    const AttentionResult a = attend(t, params, spec, random_map(t, r, 100 + trial), t.constant(random_matrix(1, 5, trial)));
    ASSERT_EQ(a.weights.size(), 3u);
    for (const Matrix& w : a.weights) {
      EXPECT_NEAR(std::accumulate(w.data.begin(), w.data.end(), 0.0), 1.0, 1e-12);
      for (double v : w.data) EXPECT_GE(v, 0.0);
    }
    EXPECT_NEAR(std::accumulate(a.scores.data.begin(), a.scores.data.end(), 0.0), 1.0, 1e-12);
  }
}

TEST_F(AttentionTest, RowPermutationEquivariance) {
  Tape t;
  const FusionMap fm = random_map(t, 5, 9);
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  FusionMap pm;
  pm.rows = gather_rows(fm.rows, perm);
  for (std::size_t i : perm) pm.provenance.push_back(fm.provenance[i]);
  Var q = t.constant(random_matrix(1, 5, 10));
  const AttentionResult a = attend(t, params, spec, fm, q);
  const AttentionResult b = attend(t, params, spec, pm, q);
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_NEAR(b.scores.data[i], a.scores.data[perm[i]], 1e-15);
  EXPECT_LE(linalg::max_abs_diff(a.r.value(), b.r.value()), 1e-12);
}

TEST_F(AttentionTest, Errors) {
  Tape t;
  EXPECT_THROW((void)attend(t, params, spec, FusionMap{}, t.constant(Matrix(1, 5))), InputError);
  EXPECT_THROW((void)attend(t, params, spec, random_map(t, 2, 1), t.constant(Matrix(1, 4))), DimensionError);
  ModelParams p;
  EXPECT_THROW((AttentionSpec{"a", 5, 7, 3}.register_params(p, 1)), ConfigError);
}

TEST(AnswerSpace, FrequencyThenLexicographic) {
  const AnswerSpace s = AnswerSpace::from_answers({"b", "a", "c", "b", "a", "d", "b"});
  EXPECT_EQ(s.tokens(), (std::vector<std::string>{"b", "a", "c", "d"}));
  EXPECT_EQ(AnswerSpace::from_answers({"b", "a", "c", "b", "a", "d", "b"}, 2).tokens(),
            (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(s.index("c"), 2u);
  EXPECT_FALSE(s.index("zz").has_value());
  EXPECT_THROW(AnswerSpace({"x", "x"}), InputError);
}

TEST(Predictor, SingleClassAndShiftInvariance) {
  const PredictorSpec one{"answer", 2, 3, 4, 1, true};
  ModelParams p;
  one.register_params(p, 1);
  Tape t;
  const Prediction pr = predict(t, p, one, t.constant(random_matrix(1, 2, 1)), t.constant(random_matrix(1, 3, 2)));
  EXPECT_EQ(pr.probs, Matrix::row_vector({1.0}));
  EXPECT_EQ(pr.answer, 0u);

  EXPECT_EQ(argmax(std::vector<double>{1.0, 3.0, 3.0, 2.0}), 1u);
  rng::Generator g(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(8);
    for (double& x : v) x = std::round(g.uniform(-3, 3));
    std::vector<double> shifted = v;
    for (double& x : shifted) x += 0.25;
    EXPECT_EQ(argmax(v), argmax(shifted));
    EXPECT_EQ(argmax(v), argmax(softmax_rows_value(Matrix::row_vector(v)).row(0)));
  }
  ModelParams none;
  EXPECT_THROW((PredictorSpec{"answer", 2, 3, 4, 0, true}.register_params(none, 1)), InputError);
}

TEST(Predictor, QuestionFusionChangesInputWidth) {
  const PredictorSpec qf{"answer", 2, 3, 4, 5, true};
  const PredictorSpec no_qf{"answer", 2, 3, 4, 5, false};
  ModelParams a, b;
  qf.register_params(a, 1);
  no_qf.register_params(b, 1);
  EXPECT_EQ(a.at("answer.W1").value.rows, 5u);
  EXPECT_EQ(b.at("answer.W1").value.rows, 3u);
  Tape t;
  EXPECT_EQ(predict(t, b, no_qf, t.constant(Matrix(1, 2)), t.constant(random_matrix(1, 3, 3))).probs.cols, 5u);
}

class ModelTest : public ::testing::Test {
 protected:
  static Model make(ModelConfig c) {
    Vocabulary v = Model::make_vocabulary(c);
    return Model(c, fixtures::micro_answers(), std::move(v));
  }
};

TEST_F(ModelTest, ForwardIsDeterministic) {
  Model m1 = make(fixtures::micro_config());
  Model m2 = make(fixtures::micro_config());
  Tape t1, t2;
  const ForwardResult a = m1.forward(t1, fixtures::micro_graph(), fixtures::micro_question());
  const ForwardResult b = m2.forward(t2, fixtures::micro_graph(), fixtures::micro_question());
  EXPECT_EQ(a.probs, b.probs);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.fusion_rows, 7u);
}

TEST_F(ModelTest, EdgelessGraphIgnoresRelationFlag) {
  ModelConfig c = fixtures::micro_config();
  SceneGraph sg = fixtures::micro_graph();
  sg.edges.clear();
  Model plain = make(c);
  c.wo_rela = true;
  Model ablated = make(c);
  Tape t;
  EXPECT_EQ(plain.forward(t, sg, fixtures::micro_question()).probs, ablated.forward(t, sg, fixtures::micro_question()).probs);
}

TEST_F(ModelTest, AblationsChangeStructure) {
  const ModelConfig base = fixtures::micro_config();
  Tape t;
  ModelConfig c = base;
  c.wo_attr = true;
  EXPECT_EQ(make(c).forward(t, fixtures::micro_graph(), fixtures::micro_question()).fusion_rows, 5u);
  c = base;
  c.wo_rela = true;
  EXPECT_EQ(make(c).forward(t, fixtures::micro_graph(), fixtures::micro_question()).fusion_rows, 5u);
  c = base;
  c.wo_qf = true;
  EXPECT_EQ(make(c).params().at("answer.W1").value.rows, base.d_f());
  c = base;
  c.base_obj = true;
  Model bo = make(c);
  EXPECT_FALSE(bo.params().contains("rel_enc.W"));
  EXPECT_EQ(bo.forward(t, fixtures::micro_graph(), fixtures::micro_question()).fusion_rows, 5u);
}

TEST_F(ModelTest, EndToEndGradcheck) {
  for (GateKind gates : {GateKind::Logistic, GateKind::Relu}) {
    ModelConfig c = fixtures::micro_config();
    c.gates = gates;
    Model m = make(c);
    Example ex{fixtures::micro_graph(), fixtures::micro_question(), "man", "object-query", std::nullopt};
    const auto rep = finite_diff_check(
        [&](Tape& t, ModelParams&) { return *m.loss(t, ex); }, m.params(), {1e-3, true});
    EXPECT_LE(rep.max_rel_error, 1e-4) << rep.worst_param;
    EXPECT_GT(rep.checked, 0.95 * static_cast<double>(m.params().scalar_count()));
  }
}

TEST_F(ModelTest, OutOfSpaceAnswerHasNoLoss) {
  Model m = make(fixtures::micro_config());
  Tape t;
  Example ex{fixtures::micro_graph(), fixtures::micro_question(), "zebra", "object-query", std::nullopt};
  EXPECT_FALSE(m.loss(t, ex).has_value());
}
