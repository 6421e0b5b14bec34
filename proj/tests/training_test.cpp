// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstring>

#include "dmgnn/fixtures.hpp"
#include "dmgnn/training.hpp"

using namespace dmgnn;

namespace {

Model make_model(ModelConfig c = fixtures::micro_config(), AnswerSpace space = fixtures::micro_answers()) {
  Vocabulary v = Model::make_vocabulary(c);
  return Model(std::move(c), std::move(space), std::move(v));
}

std::vector<Example> micro_examples() {
  std::vector<Example> out;
  out.push_back({fixtures::man_horse_hat(), {"what", "is", "riding", "the", "horse"}, "man", "what", AnswerKind::Object});
  out.push_back({fixtures::man_horse_hat(), {"what", "relation", "from", "man", "to", "hat"}, "wearing", "what",
                 AnswerKind::Relation});
  out.push_back({fixtures::micro_graph(), {"what", "attribute", "has", "the", "horse"}, "brown", "what",
                 AnswerKind::Attribute});
  out.push_back({fixtures::micro_graph(), {"why", "tall", "man"}, "riding", "why", AnswerKind::Relation});
  return out;
}

bool bitwise_equal(const ModelParams& a, const ModelParams& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Matrix& x = a[i].value;
    const Matrix& y = b[i].value;
    if (x.rows != y.rows || x.cols != y.cols) return false;
    if (std::memcmp(x.data.data(), y.data.data(), x.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace

TEST(LrSchedule, StatedStageValues) {
  EXPECT_EQ(lr_schedule(0, 100), 1e-3);
  EXPECT_EQ(lr_schedule(35, 100), 2e-4);
  EXPECT_EQ(lr_schedule(65, 100), 4e-5);
  EXPECT_EQ(lr_schedule(85, 100), 8e-6);
}

TEST(LrSchedule, BoundariesAndScaling) {
  EXPECT_EQ(lr_schedule(29, 100), 1e-3);
  EXPECT_EQ(lr_schedule(30, 100), 2e-4);
  EXPECT_EQ(lr_schedule(60, 100), 4e-5);
  EXPECT_EQ(lr_schedule(80, 100), 8e-6);
  EXPECT_EQ(lr_schedule(99, 100), 8e-6);
  EXPECT_EQ(lr_schedule(0, 1), 1e-3);
  EXPECT_DOUBLE_EQ(lr_schedule(35, 100, 1e-2), 2e-3);
  EXPECT_THROW(lr_schedule(100, 100), InputError);
  EXPECT_THROW(lr_schedule(0, 0), InputError);
}

TEST(LrSchedule, NonIncreasing) {
  for (std::size_t total : {1u, 2u, 3u, 7u, 10u, 15u, 100u, 333u}) {
    for (std::size_t e = 1; e < total; ++e) EXPECT_LE(lr_schedule(e, total), lr_schedule(e - 1, total)) << total;
  }
}

TEST(Optimizer, AdamFirstStepIsLearningRate) {
  ModelParams p;
  p.add("w", Matrix(1, 3, {0.5, -1.0, 2.0}));
  p[0].grad = Matrix(1, 3, {0.3, -7.0, 1e-3});
  Optimizer opt(OptimizerKind::Adam);
  opt.step(p, 0.01);
  EXPECT_NEAR(p[0].value.data[0], 0.5 - 0.01, 1e-9);
  EXPECT_NEAR(p[0].value.data[1], -1.0 + 0.01, 1e-9);
  EXPECT_NEAR(p[0].value.data[2], 2.0 - 0.01, 1e-7);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Optimizer, SgdIsExact) {
  ModelParams p;
  p.add("w", Matrix(2, 1, {0.25, -3.0}));
  p[0].grad = Matrix(2, 1, {0.5, 4.0});
  Optimizer opt(OptimizerKind::Sgd);
  opt.step(p, 0.125);
  EXPECT_EQ(p[0].value.data[0], 0.25 - 0.125 * 0.5);
  EXPECT_EQ(p[0].value.data[1], -3.0 - 0.125 * 4.0);
}

TEST(Optimizer, ZeroGradient) {
  ModelParams p;
  p.add("w", Matrix(1, 2, {0.7, -0.2}));
  const Matrix before = p[0].value;
  Optimizer sgd(OptimizerKind::Sgd);
  sgd.step(p, 0.1);
  EXPECT_EQ(p[0].value, before);
  Optimizer adam(OptimizerKind::Adam);
  adam.step(p, 0.1);
  EXPECT_EQ(p[0].value, before);
}

TEST(Optimizer, NonFiniteGradientNamesParameter) {
  ModelParams p;
  p.add("first", Matrix(1, 1, {1.0}));
  p.add("second.W", Matrix(1, 2, {1.0, 2.0}));
  p[0].grad = Matrix(1, 1, {0.5});
  p[1].grad = Matrix(1, 2, {0.0, std::nan("")});
  Optimizer opt;
  try {
    opt.step(p, 0.1);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("second.W"), std::string::npos);
  }
  EXPECT_EQ(p[0].value.data[0], 1.0);  // nothing applied
  EXPECT_EQ(opt.steps(), 0u);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  Model m = make_model();
  const ModelParams init = m.params();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.lr = 0.0;
  cfg.optimizer = OptimizerKind::Sgd;
  const auto ex = micro_examples();
  const TrainResult r = train(m, {ex[0]}, cfg);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_GT(r.trace[0].loss, 0.0);
  EXPECT_EQ(r.trace[0].lr, 0.0);
  EXPECT_TRUE(bitwise_equal(init, m.params()));

  cfg.optimizer = OptimizerKind::Adam;
  train(m, {ex[0]}, cfg);
  EXPECT_TRUE(bitwise_equal(init, m.params()));
}

TEST(Train, BatchLossIsMeanOfExampleLosses) {
  Model m = make_model();
  const auto ex = micro_examples();
  std::vector<const Example*> batch = {&ex[0], &ex[2], &ex[3]};
  ad::Tape t;
  const double mean = batch_loss(t, m, batch, nullptr).scalar();
  double sum = 0.0;
  for (const Example* e : batch) {
    ad::Tape t1;
    sum += m.loss(t1, *e)->scalar();
  }
  EXPECT_NEAR(mean, sum / 3.0, 1e-12);
}

TEST(Train, UnrepresentableBatchSkippedWithWarning) {
  Model m = make_model();
  Example ex = micro_examples()[0];
  ex.answer = "zebra";
  TrainConfig cfg;
  cfg.epochs = 2;
  std::vector<std::string> warnings;
  TrainHooks hooks;
  hooks.warn = [&](const std::string& w) { warnings.push_back(w); };
  const ModelParams init = m.params();
  const TrainResult r = train(m, {ex}, cfg, hooks);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.skipped_batches, 2u);
  EXPECT_EQ(r.skipped_examples, 2u);
  EXPECT_EQ(warnings.size(), 2u);
  EXPECT_TRUE(bitwise_equal(init, m.params()));
}

TEST(Train, Deterministic) {
  const auto ex = micro_examples();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 3;
  cfg.dropout = 0.2;
  cfg.lr = 1e-2;
  Model a = make_model(), b = make_model();
  const TrainResult ra = train(a, ex, cfg), rb = train(b, ex, cfg);
  ASSERT_EQ(ra.trace.size(), 6u);
  ASSERT_EQ(ra.trace.size(), rb.trace.size());
  for (std::size_t i = 0; i < ra.trace.size(); ++i) {
    EXPECT_EQ(std::memcmp(&ra.trace[i].loss, &rb.trace[i].loss, sizeof(double)), 0);
  }
  EXPECT_TRUE(bitwise_equal(a.params(), b.params()));
}

TEST(Train, EpochHookAndLossDecrease) {
  const auto ex = micro_examples();
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 4;
  cfg.lr = 2e-2;
  Model m = make_model();
  std::size_t calls = 0;
  TrainHooks hooks;
  hooks.on_epoch_end = [&](std::size_t epoch, const Model&) { EXPECT_EQ(epoch, calls++); };
  const TrainResult r = train(m, ex, cfg, hooks);
  EXPECT_EQ(calls, 30u);
  EXPECT_LT(r.trace.back().loss, r.trace.front().loss);
}

TEST(Train, RejectsBadConfig) {
  Model m = make_model();
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(train(m, micro_examples(), cfg), ConfigError);
  cfg = {};
  cfg.epochs = 0;
  EXPECT_THROW(train(m, micro_examples(), cfg), ConfigError);
  EXPECT_THROW(train(m, {}, TrainConfig{}), InputError);
}

TEST(Evaluate, ForcedCorrectSingleAnswer) {
  Model m = make_model(fixtures::micro_config(), AnswerSpace({"man"}));
  const auto ex = micro_examples()[0];
  const EvalReport r = evaluate(m, {ex, ex, ex});
  EXPECT_EQ(r.accuracy(), 1.0);
  EXPECT_EQ(r.errors.total(), 0u);
  EXPECT_EQ(r.mean_loss, 0.0);
}

TEST(Evaluate, RelationGoldError) {
  Model m = make_model(fixtures::micro_config(), AnswerSpace({"man"}));
  const auto ex = micro_examples()[1];  // gold "wearing", always predicts "man"
  const EvalReport r = evaluate(m, {ex});
  EXPECT_EQ(r.correct, 0u);
  EXPECT_EQ(r.errors, (ErrorBreakdown{0, 1, 0, 0}));
  EXPECT_EQ(r.unrepresentable, 1u);
}

TEST(Evaluate, ClassifyGoldPriority) {
  SceneGraph sg;
  sg.nodes = {{"red", {"red", "big"}}, {"on", {"on"}}};
  sg.edges = {{0, "on", 1}};
  EXPECT_EQ(classify_gold(sg, "red"), "object");
  EXPECT_EQ(classify_gold(sg, "on"), "object");
  EXPECT_EQ(classify_gold(sg, "big"), "attribute");
  EXPECT_EQ(classify_gold(sg, "zebra"), "other");
  sg.nodes[1].name = "cup";
  EXPECT_EQ(classify_gold(sg, "on"), "relation");
}

TEST(Evaluate, BreakdownPartitionsErrors) {
  Model m = make_model();
  auto ex = micro_examples();
  ex.push_back({fixtures::micro_graph(), {"what", "is", "this"}, "zebra", "what", std::nullopt});
  std::vector<std::string> preds;
  const EvalReport r = evaluate(m, ex, &preds);
  EXPECT_EQ(preds.size(), ex.size());
  EXPECT_EQ(r.total, ex.size());
  EXPECT_EQ(r.errors.total(), r.total - r.correct);
  std::size_t per_total = 0;
  for (const auto& [k, s] : r.per_qtype) per_total += s.total;
  EXPECT_EQ(per_total, r.total);
  EXPECT_EQ(r.per_qtype.at("why").total, 1u);
  EXPECT_EQ(r.unrepresentable, 2u);  // "wearing" and "zebra"
}

TEST(Evaluate, ReportFormats) {
  Model m = make_model();
  const EvalReport r = evaluate(m, micro_examples());
  const json j = to_json(r);
  EXPECT_EQ(j.at("total"), 4);
  EXPECT_TRUE(j.at("per_qtype").contains("why"));
  const std::string text = format_report(r);
  EXPECT_NE(text.find("Overall"), std::string::npos);
  EXPECT_NE(text.find("errors: object"), std::string::npos);
  EXPECT_EQ(evaluate(m, micro_examples()), r);
}

TEST(StableSumTest, CompensatesCancellation) {
  StableSum s;
  s.add(1.0);
  s.add(1e100);
  s.add(1.0);
  s.add(-1e100);
  EXPECT_EQ(s.value(), 2.0);
}
