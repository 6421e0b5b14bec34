// SPDX-License-Identifier: Apache-2.0
//
// Message-passing gated graph encoder.
//
// Every directed tuple (edge k, neighbour j) of node i is summarised by a
// bidirectional GRU that reads the two-step sequence [emb(e_k), h_j] starting
// from h_i; the two directions' final states are summed, and the per-tuple
// results are summed per node into the incident gain (a_in) and the output
// gain (a_out). A GRU-style propagator then updates all node states
// synchronously for T steps, and a two-layer MLP over [h_i^T, emb(n_i)]
// followed by ReLU yields the per-node graph embedding.
//
// All tuples of a view are processed as one batch: row p of every matrix in
// mp_gain belongs to tuple p.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dmgnn/autodiff.hpp"
#include "dmgnn/params.hpp"
#include "dmgnn/scene_graph.hpp"
#include "dmgnn/text_encoder.hpp"

namespace dmgnn {

enum class GateKind { Logistic, Relu };

enum class Adjacency { In, Out };

struct EncoderSpec {
  std::string prefix = "obj_enc";
  std::size_t d_emb = 50;
  std::size_t d_h = 50;
  std::size_t d_mp = 50;
  std::size_t d_c = 100;
  std::size_t d_g = 50;
  std::size_t fg_hidden = 50;
  GateKind gates = GateKind::Logistic;
  /// Test hook: pin the update gate z to a constant.
  std::optional<double> forced_update_gate;

  // The two sequence elements occupy disjoint slots of one d_emb + d_h input.
  [[nodiscard]] std::size_t mp_input() const { return d_emb + d_h; }
  [[nodiscard]] GruSpec mp_forward() const { return {prefix + ".mp_fw", mp_input(), d_mp}; }
  [[nodiscard]] GruSpec mp_backward() const { return {prefix + ".mp_bw", mp_input(), d_mp}; }
  [[nodiscard]] bool needs_projection() const { return d_h != d_mp; }

  void validate() const {
    if (d_emb > d_h) {
      throw ConfigError(prefix + ": embedding width " + std::to_string(d_emb) + " exceeds hidden width " +
                        std::to_string(d_h) + " (initial states are zero-padded embeddings)");
    }
  }

  void register_params(ModelParams& p, std::uint64_t seed) const {
    validate();
    mp_forward().register_params(p, seed);
    mp_backward().register_params(p, seed);
    if (needs_projection()) p.add_glorot(prefix + ".mp_proj", d_h, d_mp, seed);
    p.add_glorot(prefix + ".W", d_h + 2 * d_mp, d_c, seed);
    p.add_zeros(prefix + ".b", 1, d_c);
    p.add_glorot(prefix + ".U_z", d_c, d_h, seed);
    p.add_glorot(prefix + ".U_r", d_c, d_h, seed);
    p.add_glorot(prefix + ".U_1", 2 * d_mp, d_h, seed);
    p.add_glorot(prefix + ".U_2", d_h, d_h, seed);
    p.add_glorot(prefix + ".fg.W1", d_h + d_emb, fg_hidden, seed);
    p.add_zeros(prefix + ".fg.b1", 1, fg_hidden);
    p.add_glorot(prefix + ".fg.W2", fg_hidden, d_g, seed);
    p.add_zeros(prefix + ".fg.b2", 1, d_g);
  }
};

/// Embedded payloads of one view, looked up once per graph.
struct ViewInputs {
  const GraphView* view = nullptr;
  Matrix node_emb;  // N × d_emb
  Matrix edge_emb;  // |edges| × d_emb

  static ViewInputs embed(const GraphView& v, const Vocabulary& vocab) {
    return {&v, vocab.embed(v.node_tokens, vocab.dim()), vocab.embed(v.edge_tokens, vocab.dim())};
  }
};

/// Summed message-passing gain of every node over one adjacency direction.
/// H is N × d_h; the result is N × d_mp (zero rows for empty adjacency).
inline ad::Var mp_gain(ad::Tape& t, ModelParams& p, const EncoderSpec& s, const ViewInputs& in, const ad::Var& H,
                       Adjacency which) {
  using namespace ad;
  const GraphView& v = *in.view;
  const auto& adj = which == Adjacency::In ? v.a_in : v.a_out;
  const std::size_t n = v.node_count();
  std::size_t tuples = 0;
  for (const auto& l : adj) tuples += l.size();
  if (tuples == 0) return t.constant(Matrix(n, s.d_mp));

  std::vector<std::size_t> target, neighbor;
  Matrix edge_slot(tuples, s.mp_input());
  std::size_t row = 0;
  for (std::size_t i = 0; i < adj.size(); ++i) {
    for (const Incidence& inc : adj[i]) {
      target.push_back(i);
      neighbor.push_back(inc.neighbor);
      auto src = in.edge_emb.row(inc.edge);
      std::copy(src.begin(), src.end(), edge_slot.row(row).begin());
      ++row;
    }
  }
  Var x_edge = t.constant(std::move(edge_slot));
  Var x_node = concat({t.constant(Matrix(tuples, s.d_emb)), gather_rows(H, neighbor)}, Axis::Cols);
  Var init_src = s.needs_projection() ? matmul(H, t.param(p.at(s.prefix + ".mp_proj"))) : H;
  Var init = gather_rows(init_src, target);

  const GruSpec fw = s.mp_forward();
  const GruSpec bw = s.mp_backward();
  Var f = gru_cell(t, p, fw, x_edge, init);
  f = gru_cell(t, p, fw, x_node, f);
  Var b = gru_cell(t, p, bw, x_node, init);
  b = gru_cell(t, p, bw, x_edge, b);
  return scatter_add_rows(add(f, b), std::move(target), n);
}

/// One synchronous update H^{t-1} → H^t.
inline ad::Var propagate_step(ad::Tape& t, ModelParams& p, const EncoderSpec& s, const ViewInputs& in, const ad::Var& H) {
  using namespace ad;
  auto gate = [&](const Var& x) { return s.gates == GateKind::Logistic ? logistic(x) : relu(x); };
  Var k = concat({mp_gain(t, p, s, in, H, Adjacency::In), mp_gain(t, p, s, in, H, Adjacency::Out)}, Axis::Cols);
  Var c = add_row(matmul(concat({H, k}, Axis::Cols), t.param(p.at(s.prefix + ".W"))), t.param(p.at(s.prefix + ".b")));
  Var z = s.forced_update_gate ? t.constant(Matrix(H.rows(), s.d_h, *s.forced_update_gate))
                               : gate(matmul(c, t.param(p.at(s.prefix + ".U_z"))));
  Var r = gate(matmul(c, t.param(p.at(s.prefix + ".U_r"))));
  Var cand = tanh(add(matmul(k, t.param(p.at(s.prefix + ".U_1"))),
                      matmul(hadamard(r, H), t.param(p.at(s.prefix + ".U_2")))));
  return add(hadamard(one_minus(z), H), hadamard(z, cand));
}

struct Encoding {
  ad::Var H;  // N × d_h after T steps
  ad::Var G;  // N × d_g
};

inline ad::Var initial_states(ad::Tape& t, const EncoderSpec& s, const ViewInputs& in) {
  Matrix h0(in.node_emb.rows, s.d_h);
  for (std::size_t r = 0; r < h0.rows; ++r) {
    std::copy(in.node_emb.row(r).begin(), in.node_emb.row(r).end(), h0.row(r).begin());
  }
  return t.constant(std::move(h0));
}

/// g_i = relu(MLP([h_i^T, emb(n_i)])) after T propagation steps.
inline Encoding encode(ad::Tape& t, ModelParams& p, const EncoderSpec& s, const ViewInputs& in, std::size_t steps) {
  using namespace ad;
  s.validate();
  const std::size_t n = in.view->node_count();
  if (n == 0) return {t.constant(Matrix(0, s.d_h)), t.constant(Matrix(0, s.d_g))};
  Var H = initial_states(t, s, in);
  for (std::size_t step = 0; step < steps; ++step) H = propagate_step(t, p, s, in, H);
  Var x = concat({H, t.constant(in.node_emb)}, Axis::Cols);
  Var hidden = tanh(add_row(matmul(x, t.param(p.at(s.prefix + ".fg.W1"))), t.param(p.at(s.prefix + ".fg.b1"))));
  Var g = relu(add_row(matmul(hidden, t.param(p.at(s.prefix + ".fg.W2"))), t.param(p.at(s.prefix + ".fg.b2"))));
  return {H, g};
}

struct DualEncoding {
  Encoding objects;    // rows follow object_view nodes
  Encoding relations;  // rows follow original edge ids
  bool has_relations = true;
};

/// Runs the object encoder and, unless disabled, the relation encoder.
inline DualEncoding encode_dual(ad::Tape& t, ModelParams& p, const EncoderSpec& obj, const EncoderSpec* rel,
                                const DualPair& pair, const Vocabulary& vocab, std::size_t steps) {
  DualEncoding out;
  const ViewInputs obj_in = ViewInputs::embed(pair.object_view, vocab);
  out.objects = encode(t, p, obj, obj_in, steps);
  if (rel == nullptr) {
    out.has_relations = false;
    return out;
  }
  const ViewInputs rel_in = ViewInputs::embed(pair.relation_view, vocab);
  out.relations = encode(t, p, *rel, rel_in, steps);
  for (std::size_t k = 0; k < pair.relation_node_to_edge.size(); ++k) {
    if (pair.relation_node_to_edge[k] != k) throw InputError("encode_dual: relation view is not in edge order");
  }
  return out;
}

}  // namespace dmgnn
