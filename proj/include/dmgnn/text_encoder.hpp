// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dmgnn/autodiff.hpp"
#include "dmgnn/error.hpp"
#include "dmgnn/params.hpp"
#include "dmgnn/rng.hpp"

namespace dmgnn {

/// Token → embedding table. Index 0 is <unk>; tokens missing from the table
/// resolve to a vector seeded by a hash of the token, so lookups never fail
/// and stay deterministic.
class Vocabulary {
 public:
  static constexpr const char* kUnknown = "<unk>";

  Vocabulary() : Vocabulary(50, 0) {}
  Vocabulary(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed), table_(1, dim) { index_.emplace(kUnknown, 0); }

  /// Table whose rows are the seeded vectors of the given tokens.
  static Vocabulary seeded(const std::vector<std::string>& tokens, std::size_t dim, std::uint64_t seed) {
    Vocabulary v(dim, seed);
    for (const auto& t : tokens) {
      if (v.index_.contains(t)) continue;
      v.append(t, v.hashed_vector(t));
    }
    return v;
  }

  /// GLOVE text format: "token v1 ... v_dim" per line.
  static Vocabulary from_stream(std::istream& in, std::size_t dim, std::uint64_t seed) {
    Vocabulary v(dim, seed);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      std::istringstream ss(line);
      std::string token;
      ss >> token;
      std::vector<double> values;
      std::string field;
      while (ss >> field) {
        try {
          std::size_t used = 0;
          values.push_back(std::stod(field, &used));
          if (used != field.size()) throw std::invalid_argument(field);
        } catch (const std::exception&) {
          throw ParseError("line " + std::to_string(lineno) + ": bad number \"" + field + "\"");
        }
      }
      if (values.size() != dim) {
        throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(dim) + " values, got " +
                         std::to_string(values.size()));
      }
      if (v.index_.contains(token)) throw ParseError("line " + std::to_string(lineno) + ": duplicate token " + token);
      v.append(token, values);
    }
    return v;
  }

  static Vocabulary from_file(const std::string& path, std::size_t dim, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open embedding file " + path);
    try {
      return from_stream(in, dim, seed);
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what());
    }
  }

  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return table_.rows; }
  [[nodiscard]] const Matrix& table() const { return table_; }
  [[nodiscard]] bool contains(const std::string& token) const { return index_.contains(token); }

  [[nodiscard]] std::size_t index(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? 0 : it->second;
  }

  [[nodiscard]] std::vector<double> embedding(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end() || it->second == 0) return hashed_vector(token);
    auto row = table_.row(it->second);
    return {row.begin(), row.end()};
  }

  /// Rows of the given tokens, zero-padded on the right to `width` columns.
  [[nodiscard]] Matrix embed(const std::vector<std::string>& tokens, std::size_t width) const {
    if (width < dim_) throw DimensionError("embedding width " + std::to_string(dim_) + " exceeds target " + std::to_string(width));
    Matrix m(tokens.size(), width);
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      const auto e = embedding(tokens[r]);
      std::copy(e.begin(), e.end(), m.row(r).begin());
    }
    return m;
  }

  [[nodiscard]] std::vector<double> hashed_vector(const std::string& token) const {
    rng::Generator gen(rng::substream(seed_, "emb:" + token));
    std::vector<double> v(dim_);
    for (double& x : v) x = gen.uniform(-1.0, 1.0);
    return v;
  }

 private:
  void append(const std::string& token, const std::vector<double>& values) {
    index_.emplace(token, table_.rows);
    table_.data.insert(table_.data.end(), values.begin(), values.end());
    ++table_.rows;
  }

  std::size_t dim_;
  std::uint64_t seed_;
  Matrix table_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Sinusoidal positional encoding: even dims sin, odd dims cos, with
/// frequency 1/10000^(2i/d_model) for the dimension pair i.
inline Matrix positional_encoding(std::size_t seq_len, std::size_t d_model) {
  if (d_model % 2 != 0) throw InputError("positional_encoding: model dimension must be even, got " + std::to_string(d_model));
  Matrix pe(seq_len, d_model);
  for (std::size_t pos = 0; pos < seq_len; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(d_model));
      pe(pos, 2 * i) = std::sin(angle);
      pe(pos, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

// ---------------------------------------------------------------------------
// Recurrent cells. Parameters live in ModelParams under "<prefix>.<name>".

struct GruSpec {
  std::string prefix;
  std::size_t d_x = 0;
  std::size_t d_h = 0;

  void register_params(ModelParams& p, std::uint64_t seed) const {
    p.add_glorot(prefix + ".w_x", d_x, 3 * d_h, seed);
    p.add_glorot(prefix + ".u_zr", d_h, 2 * d_h, seed);
    p.add_glorot(prefix + ".u_h", d_h, d_h, seed);
    p.add_zeros(prefix + ".b", 1, 3 * d_h);
  }
};

/// z = σ(xW_z + hU_z + b_z), r = σ(xW_r + hU_r + b_r),
/// h̃ = tanh(xW_h + (r⊙h)U_h + b_h), h' = (1−z)⊙h + z⊙h̃.
/// Gate weights are stored fused column-wise in [z | r | h] order. Rows of x
/// and h are independent sequences.
inline ad::Var gru_cell(ad::Tape& t, ModelParams& p, const GruSpec& s, const ad::Var& x, const ad::Var& h) {
  if (x.cols() != s.d_x || h.cols() != s.d_h || x.rows() != h.rows()) {
    throw DimensionError("gru_cell(" + s.prefix + "): x " + x.value().shape_str() + ", h " + h.value().shape_str() +
                         ", expected widths " + std::to_string(s.d_x) + "/" + std::to_string(s.d_h));
  }
  using namespace ad;
  const std::size_t d = s.d_h;
  Var xw = add_row(matmul(x, t.param(p.at(s.prefix + ".w_x"))), t.param(p.at(s.prefix + ".b")));
  Var hu = matmul(h, t.param(p.at(s.prefix + ".u_zr")));
  Var z = logistic(add(slice_cols(xw, 0, d), slice_cols(hu, 0, d)));
  Var r = logistic(add(slice_cols(xw, d, d), slice_cols(hu, d, d)));
  Var cand = tanh(add(slice_cols(xw, 2 * d, d), matmul(hadamard(r, h), t.param(p.at(s.prefix + ".u_h")))));
  return add(hadamard(one_minus(z), h), hadamard(z, cand));
}

struct LstmSpec {
  std::string prefix;
  std::size_t d_x = 0;
  std::size_t d_h = 0;

  void register_params(ModelParams& p, std::uint64_t seed) const {
    p.add_glorot(prefix + ".w_x", d_x, 4 * d_h, seed);
    p.add_glorot(prefix + ".u", d_h, 4 * d_h, seed);
    p.add_zeros(prefix + ".b", 1, 4 * d_h);
  }
};

struct LstmState {
  ad::Var h;
  ad::Var c;
};

/// Gates stored fused as [i | f | g | o].
inline LstmState lstm_cell(ad::Tape& t, ModelParams& p, const LstmSpec& s, const ad::Var& x, const LstmState& st) {
  if (x.cols() != s.d_x || st.h.cols() != s.d_h) throw DimensionError("lstm_cell(" + s.prefix + "): width mismatch");
  using namespace ad;
  const std::size_t d = s.d_h;
  Var a = add_row(add(matmul(x, t.param(p.at(s.prefix + ".w_x"))), matmul(st.h, t.param(p.at(s.prefix + ".u")))),
                  t.param(p.at(s.prefix + ".b")));
  Var i = logistic(slice_cols(a, 0, d));
  Var f = logistic(slice_cols(a, d, d));
  Var g = tanh(slice_cols(a, 2 * d, d));
  Var o = logistic(slice_cols(a, 3 * d, d));
  Var c = add(hadamard(f, st.c), hadamard(i, g));
  return {hadamard(o, tanh(c)), c};
}

// ---------------------------------------------------------------------------
// Question encoder

enum class QuestionCell { Gru, Lstm };

struct QuestionEncoderSpec {
  std::string prefix = "question";
  std::size_t d_emb = 50;
  std::size_t d_model = 50;
  std::size_t d_q = 100;
  QuestionCell cell = QuestionCell::Gru;

  [[nodiscard]] GruSpec gru() const { return {prefix + ".gru", d_model, d_q}; }
  [[nodiscard]] LstmSpec lstm() const { return {prefix + ".lstm", d_model, d_q}; }

  void register_params(ModelParams& p, std::uint64_t seed) const {
    if (cell == QuestionCell::Gru) {
      gru().register_params(p, seed);
    } else {
      lstm().register_params(p, seed);
    }
  }
};

/// Inverted dropout driven by a counter-based generator: the mask depends only
/// on (key, element index), never on call order.
struct Dropout {
  bool training = false;
  double rate = 0.0;
  std::uint64_t key = 0;

  [[nodiscard]] bool active() const { return training && rate > 0.0; }

  [[nodiscard]] Matrix mask(std::size_t rows, std::size_t cols, std::uint64_t stream) const {
    Matrix m(rows, cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    const std::uint64_t k = rng::splitmix64(key ^ rng::splitmix64(stream));
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = rng::counter_uniform(k, i) >= rate ? keep_scale : 0.0;
    return m;
  }
};

struct QuestionEncoding {
  ad::Var q;             // 1×d_q, final hidden state
  ad::Var token_states;  // T×d_q
};

/// Embeds tokens (zero-padded to d_model), adds the positional encoding and
/// runs the recurrent cell left to right from a zero state.
inline QuestionEncoding encode_question(ad::Tape& t, ModelParams& p, const QuestionEncoderSpec& s,
                                        const std::vector<std::string>& tokens, const Vocabulary& vocab,
                                        const Dropout& dropout = {}) {
  using namespace ad;
  if (tokens.empty()) throw InputError("encode_question: empty question");
  if (s.d_emb > s.d_model) throw DimensionError("encode_question: d_emb exceeds model dimension");
  Matrix inputs = vocab.embed(tokens, s.d_model);
  const Matrix pe = positional_encoding(tokens.size(), s.d_model);
  linalg::axpy(1.0, pe, inputs);
  if (dropout.active()) {
    const Matrix m = dropout.mask(inputs.rows, inputs.cols, 0);
    for (std::size_t i = 0; i < inputs.data.size(); ++i) inputs.data[i] *= m.data[i];
  }
  Var h = t.constant(Matrix(1, s.d_q));
  Var c = t.constant(Matrix(1, s.d_q));
  std::vector<Var> states;
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    Var x = t.constant(Matrix::row_vector(inputs.row(pos)));
    if (s.cell == QuestionCell::Gru) {
      h = gru_cell(t, p, s.gru(), x, h);
    } else {
      LstmState st = lstm_cell(t, p, s.lstm(), x, {h, c});
      h = st.h;
      c = st.c;
    }
    states.push_back(h);
  }
  return {h, concat(states, Axis::Rows)};
}

}  // namespace dmgnn
