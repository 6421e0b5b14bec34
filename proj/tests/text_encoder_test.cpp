// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dmgnn/gradcheck.hpp"
#include "dmgnn/text_encoder.hpp"

using namespace dmgnn;
using namespace dmgnn::ad;

namespace {

void zero_all(ModelParams& p) {
  for (std::size_t i = 0; i < p.size(); ++i) p[i].value.fill(0.0);
}

std::string glove_rows(std::size_t rows, std::size_t dim) {
  std::ostringstream os;
  for (std::size_t r = 0; r < rows; ++r) {
    os << "tok" << r;
    for (std::size_t c = 0; c < dim; ++c) os << " " << 0.01 * static_cast<double>(r * dim + c);
    os << "\n";
  }
  return os.str();
}

}  // namespace

TEST(Vocabulary, LoadsGloveRows) {
  std::istringstream in(glove_rows(2, 50));
  const Vocabulary v = Vocabulary::from_stream(in, 50, 1);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.index("<unk>"), 0u);
  EXPECT_EQ(v.index("tok1"), 2u);
  EXPECT_DOUBLE_EQ(v.embedding("tok1")[0], 0.5);
  for (double x : v.table().data) EXPECT_TRUE(std::isfinite(x));
}

TEST(Vocabulary, WrongRowWidthNamesLine) {
  std::string text = glove_rows(6, 50);
  text += "bad";
  for (int i = 0; i < 49; ++i) text += " 0.5";
  text += "\n";
  std::istringstream in(text);
  try {
    (void)Vocabulary::from_stream(in, 50, 1);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(std::string(e.what()), "line 7: expected 50 values, got 49");
  }
  std::istringstream bad_number("tok 0.1 zz\n");
  EXPECT_THROW((void)Vocabulary::from_stream(bad_number, 2, 1), ParseError);
}

TEST(Vocabulary, HashedVectorsAreSeededAndStable) {
  const Vocabulary a(16, 42), b(16, 42), c(16, 43);
  EXPECT_EQ(a.embedding("zebra"), b.embedding("zebra"));
  EXPECT_NE(a.embedding("zebra"), c.embedding("zebra"));
  EXPECT_NE(a.embedding("zebra"), a.embedding("zebras"));
  for (double x : a.embedding("zebra")) {
    EXPECT_GE(x, -1.0);
    EXPECT_LT(x, 1.0);
  }
  const Vocabulary s1 = Vocabulary::seeded({"a", "b"}, 8, 3), s2 = Vocabulary::seeded({"a", "b"}, 8, 3);
  EXPECT_EQ(s1.table(), s2.table());
}

TEST(Vocabulary, EmbedZeroPads) {
  const Vocabulary v(4, 1);
  const Matrix m = v.embed({"x", "y"}, 6);
  ASSERT_EQ(m.cols, 6u);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_EQ(m(r, 4), 0.0);
    EXPECT_EQ(m(r, 5), 0.0);
    EXPECT_NE(m(r, 0), 0.0);
  }
  EXPECT_THROW((void)v.embed({"x"}, 3), DimensionError);
}

TEST(PositionalEncoding, Examples) {
  const Matrix pe = positional_encoding(12, 50);
  for (std::size_t i = 0; i < 25; ++i) {
    EXPECT_EQ(pe(0, 2 * i), 0.0);
    EXPECT_EQ(pe(0, 2 * i + 1), 1.0);
  }
  EXPECT_NEAR(pe(1, 0), 0.841471, 1e-6);
  for (std::size_t pos = 0; pos < 12; ++pos) EXPECT_DOUBLE_EQ(pe(pos, 0), std::sin(static_cast<double>(pos)));
  for (double v : pe.data) {
    EXPECT_LE(v, 1.0);
    EXPECT_GE(v, -1.0);
  }
  EXPECT_THROW((void)positional_encoding(3, 7), InputError);
}

TEST(PositionalEncoding, FrequencyDecreasesAcrossDims) {
  // Phase advanced by one position in pair i equals the pair frequency.
  const std::size_t d = 50;
  const Matrix pe = positional_encoding(2, d);
  double prev = 2.0;
  for (std::size_t i = 0; i < d / 2; ++i) {
    const double freq = std::atan2(pe(1, 2 * i), pe(1, 2 * i + 1));
    EXPECT_LT(freq, prev);
    prev = freq;
  }
  const double slowest = 2.0 * M_PI / prev;
  EXPECT_NEAR(slowest, 2.0 * M_PI * std::pow(10000.0, (d - 2.0) / d), 1e-6 * slowest);
}

TEST(GruCell, ZeroParamClosedForms) {
  const GruSpec s{"g", 3, 4};
  ModelParams p;
  s.register_params(p, 1);
  zero_all(p);
  Tape t;
  Var x = t.constant(Matrix::row_vector({1.0, -2.0, 0.5}));
  Var h = t.constant(Matrix::row_vector({0.2, -0.4, 1.0, 3.0}));
  const Matrix out = gru_cell(t, p, s, x, h).value();
  EXPECT_EQ(out, Matrix::row_vector({0.1, -0.2, 0.5, 1.5}));
  EXPECT_EQ(gru_cell(t, p, s, t.constant(Matrix(1, 3)), t.constant(Matrix(1, 4))).value(), Matrix(1, 4));
  EXPECT_THROW((void)gru_cell(t, p, s, t.constant(Matrix(1, 2)), h), DimensionError);
}

TEST(GruCell, ThreeChainedCellsGradcheck) {
  const GruSpec s{"g", 3, 4};
  ModelParams p;
  s.register_params(p, 9);
  p.add_glorot("x", 3, 3, 10);
  p.at("g.b").value.fill(0.1);
  const auto rep = finite_diff_check(
      [&](Tape& t, ModelParams& mp) {
        Var xs = t.param(mp.at("x"));
        Var h = t.constant(Matrix::row_vector({0.3, -0.1, 0.2, 0.5}));
        for (std::size_t i = 0; i < 3; ++i) h = gru_cell(t, mp, s, gather_rows(xs, {i}), h);
        return cross_entropy(h, 1);
      },
      p);
  EXPECT_LE(rep.max_rel_error, 1e-4) << rep.worst_param;
  EXPECT_EQ(rep.checked, p.scalar_count());
}

TEST(LstmCell, Gradcheck) {
  const LstmSpec s{"l", 3, 4};
  ModelParams p;
  s.register_params(p, 4);
  const auto rep = finite_diff_check(
      [&](Tape& t, ModelParams& mp) {
        LstmState st{t.constant(Matrix(1, 4)), t.constant(Matrix(1, 4))};
        for (double v : {0.5, -1.0}) st = lstm_cell(t, mp, s, t.constant(Matrix(1, 3, v)), st);
        return cross_entropy(st.h, 2);
      },
      p);
  EXPECT_LE(rep.max_rel_error, 1e-4) << rep.worst_param;
}

class QuestionEncoderTest : public ::testing::Test {
 protected:
  QuestionEncoderSpec spec{"question", 6, 8, 5, QuestionCell::Gru};
  Vocabulary vocab{6, 17};
  ModelParams params;
  void SetUp() override { spec.register_params(params, 23); }
};

TEST_F(QuestionEncoderTest, ZeroParamsGiveZeroVector) {
  zero_all(params);
  Tape t;
  EXPECT_EQ(encode_question(t, params, spec, {"what"}, vocab).q.value(), Matrix(1, 5));
}

TEST_F(QuestionEncoderTest, EvalModeIsPure) {
  Tape t1, t2;
  const auto a = encode_question(t1, params, spec, {"what", "is", "on", "the", "table"}, vocab);
  const auto b = encode_question(t2, params, spec, {"what", "is", "on", "the", "table"}, vocab);
  EXPECT_EQ(a.q.value(), b.q.value());
  EXPECT_EQ(a.token_states.rows(), 5u);
}

TEST_F(QuestionEncoderTest, TokenOrderMatters) {
  Tape t;
  const Matrix a = encode_question(t, params, spec, {"red", "cup", "near"}, vocab).q.value();
  const Matrix b = encode_question(t, params, spec, {"cup", "red", "near"}, vocab).q.value();
  EXPECT_GT(linalg::max_abs_diff(a, b), 0.0);
}

TEST_F(QuestionEncoderTest, EmptyQuestionRejected) {
  Tape t;
  EXPECT_THROW((void)encode_question(t, params, spec, {}, vocab), InputError);
}

TEST_F(QuestionEncoderTest, DropoutOnlyInTrainingAndSeeded) {
  Tape t;
  const std::vector<std::string> q = {"what", "is", "red"};
  const Matrix eval = encode_question(t, params, spec, q, vocab).q.value();
  const Matrix off = encode_question(t, params, spec, q, vocab, Dropout{false, 0.5, 3}).q.value();
  EXPECT_EQ(eval, off);
  const Matrix on1 = encode_question(t, params, spec, q, vocab, Dropout{true, 0.5, 3}).q.value();
  const Matrix on2 = encode_question(t, params, spec, q, vocab, Dropout{true, 0.5, 3}).q.value();
  const Matrix on3 = encode_question(t, params, spec, q, vocab, Dropout{true, 0.5, 4}).q.value();
  EXPECT_EQ(on1, on2);
  EXPECT_NE(on1, eval);
  EXPECT_NE(on1, on3);
}

TEST(Dropout, InvertedMaskKeepsExpectation) {
  const Dropout d{true, 0.2, 99};
  const Matrix m = d.mask(100, 100, 0);
  double total = 0;
  for (double v : m.data) {
    EXPECT_TRUE(v == 0.0 || v == 1.25);
    total += v;
  }
  EXPECT_NEAR(total / 10000.0, 1.0, 0.03);
}

TEST(QuestionEncoderLstm, RunsAndGradchecks) {
  const QuestionEncoderSpec spec{"question", 4, 4, 3, QuestionCell::Lstm};
  const Vocabulary vocab(4, 2);
  ModelParams p;
  spec.register_params(p, 5);
  EXPECT_TRUE(p.contains("question.lstm.w_x"));
  const auto rep = finite_diff_check(
      [&](Tape& t, ModelParams& mp) { return cross_entropy(encode_question(t, mp, spec, {"a", "b"}, vocab).q, 0); }, p);
  EXPECT_LE(rep.max_rel_error, 1e-4);
}
