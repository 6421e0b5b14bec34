// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "dmgnn/dataset.hpp"
#include "dmgnn/model.hpp"
#include "dmgnn/rng.hpp"

namespace dmgnn {

// ---------------------------------------------------------------------------
// Learning-rate schedule

inline constexpr double kScheduleStages[] = {1e-3, 2e-4, 4e-5, 8e-6};

/// Piecewise constant in the completed fraction epoch/total: [0, 0.3), [0.3, 0.6),
/// [0.6, 0.8), [0.8, 1). The stage values are scaled when base_lr ≠ 1e-3.
inline double lr_schedule(std::size_t epoch, std::size_t total_epochs, double base_lr = 1e-3) {
  if (total_epochs == 0 || epoch >= total_epochs) {
    throw InputError("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total_epochs) + ")");
  }
  // Integer comparisons avoid rounding at the boundaries.
  const std::size_t stage = 10 * epoch < 3 * total_epochs   ? 0
                            : 10 * epoch < 6 * total_epochs ? 1
                            : 10 * epoch < 8 * total_epochs ? 2
                                                            : 3;
  if (base_lr == kScheduleStages[0]) return kScheduleStages[stage];
  return base_lr * (kScheduleStages[stage] / kScheduleStages[0]);
}

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { Adam, Sgd };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators mirror the parameter shapes; the step counter is shared.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind = OptimizerKind::Adam, AdamHyper hyper = {}) : kind_(kind), hyper_(hyper) {}

  [[nodiscard]] OptimizerKind kind() const { return kind_; }
  [[nodiscard]] const AdamHyper& hyper() const { return hyper_; }
  [[nodiscard]] std::uint64_t steps() const { return step_; }

  /// Applies one update from the accumulated gradients. Throws NumericError
  /// naming the parameter when any gradient is NaN or infinite; nothing is
  /// updated in that case.
  void step(ModelParams& params, double lr) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (!params[p].grad.all_finite()) throw NumericError("non-finite gradient in parameter " + params.name(p));
    }
    if (kind_ == OptimizerKind::Adam && m_.size() != params.size()) {
      m_.clear();
      v_.clear();
      for (std::size_t p = 0; p < params.size(); ++p) {
        m_.emplace_back(params[p].rows(), params[p].cols());
        v_.emplace_back(params[p].rows(), params[p].cols());
      }
    }
    ++step_;
    if (kind_ == OptimizerKind::Sgd) {
      for (std::size_t p = 0; p < params.size(); ++p) linalg::axpy(-lr, params[p].grad, params[p].value);
      return;
    }
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(hyper_.beta1, t);
    const double c2 = 1.0 - std::pow(hyper_.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
      Tensor& w = params[p];
      Matrix& m = m_[p];
      Matrix& v = v_[p];
      for (std::size_t i = 0; i < w.value.size(); ++i) {
        const double g = w.grad.data[i];
        m.data[i] = hyper_.beta1 * m.data[i] + (1.0 - hyper_.beta1) * g;
        v.data[i] = hyper_.beta2 * v.data[i] + (1.0 - hyper_.beta2) * g * g;
        const double mhat = m.data[i] / c1;
        const double vhat = v.data[i] / c2;
        w.value.data[i] -= lr * mhat / (std::sqrt(vhat) + hyper_.eps);
      }
    }
  }

 private:
  OptimizerKind kind_;
  AdamHyper hyper_;
  std::uint64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  AdamHyper adam;
  std::uint64_t seed = 7;
  double dropout = 0.0;

  void validate() const {
    if (epochs == 0) throw ConfigError("epochs must be at least 1");
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a finite non-negative number");
  }
};

struct LossRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> trace;
  std::size_t skipped_examples = 0;  // answers outside the answer space
  std::size_t skipped_batches = 0;
};

/// Mean cross-entropy over the representable examples of a batch, or an
/// invalid Var when none is representable.
inline ad::Var batch_loss(ad::Tape& t, Model& model, const std::vector<const Example*>& batch,
                          const std::function<Dropout(std::size_t)>& dropout_for, std::size_t* skipped = nullptr) {
  std::vector<ad::Var> losses;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto l = model.loss(t, *batch[i], dropout_for ? dropout_for(i) : Dropout{});
    if (l) {
      losses.push_back(*l);
    } else if (skipped != nullptr) {
      ++*skipped;
    }
  }
  if (losses.empty()) return {};
  ad::Var total = losses.front();
  for (std::size_t i = 1; i < losses.size(); ++i) total = ad::add(total, losses[i]);
  return ad::scale(total, 1.0 / static_cast<double>(losses.size()));
}

struct TrainHooks {
  std::function<void(std::size_t epoch, const Model&)> on_epoch_end;
  std::function<void(const std::string&)> warn;
};

/// Seeded shuffle per epoch, mean-reduced mini-batches, scheduled learning
/// rate. The model is updated in place; everything is deterministic in
/// (model initialisation, dataset, config).
inline TrainResult train(Model& model, const std::vector<Example>& data, const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  cfg.validate();
  if (data.empty()) throw InputError("train: empty dataset");
  TrainResult result;
  Optimizer opt(cfg.optimizer, cfg.adam);
  std::vector<std::size_t> order(data.size());
  std::uint64_t example_counter = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    rng::Generator shuffle(rng::substream(cfg.seed, "shuffle", epoch));
    shuffle.shuffle(order.begin(), order.end());
    const double lr = lr_schedule(epoch, cfg.epochs, cfg.lr);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      std::vector<const Example*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) batch.push_back(&data[order[i]]);
      const std::uint64_t first = example_counter;
      example_counter += batch.size();
      auto dropout_for = [&](std::size_t i) {
        return Dropout{cfg.dropout > 0.0, cfg.dropout, rng::substream(cfg.seed, "dropout", first + i)};
      };
      ad::Tape tape;
      ad::Var loss = batch_loss(tape, model, batch, dropout_for, &result.skipped_examples);
      if (!loss.valid()) {
        ++result.skipped_batches;
        if (hooks.warn) {
          hooks.warn("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) +
                     ": no answer in the answer space, batch skipped");
        }
        continue;
      }
      model.params().zero_grads();
      tape.backward(loss);
      opt.step(model.params(), lr);
      result.trace.push_back({epoch, batch_index, loss.scalar(), lr});
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, model);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Compensated (Neumaier) summation.
class StableSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct ErrorBreakdown {
  std::size_t object = 0;
  std::size_t relation = 0;
  std::size_t attribute = 0;
  std::size_t other = 0;

  [[nodiscard]] std::size_t total() const { return object + relation + attribute + other; }
  bool operator==(const ErrorBreakdown&) const = default;
};

/// Role of the gold answer in the graph, object > relation > attribute.
inline std::string classify_gold(const SceneGraph& sg, const std::string& gold) {
  for (const auto& n : sg.nodes) {
    if (n.name == gold) return "object";
  }
  for (const auto& e : sg.edges) {
    if (e.predicate == gold) return "relation";
  }
  for (const auto& n : sg.nodes) {
    for (const auto& a : n.attributes) {
      if (a == gold) return "attribute";
    }
  }
  return "other";
}

struct QtypeStats {
  std::size_t total = 0;
  std::size_t correct = 0;
  [[nodiscard]] double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
  bool operator==(const QtypeStats&) const = default;
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::map<std::string, QtypeStats> per_qtype;
  ErrorBreakdown errors;
  double mean_loss = 0.0;         // over examples whose answer is in the space
  std::size_t unrepresentable = 0;  // gold answers outside the answer space

  [[nodiscard]] double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
  bool operator==(const EvalReport&) const = default;
};

inline EvalReport evaluate(Model& model, const std::vector<Example>& data, std::vector<std::string>* predictions = nullptr) {
  EvalReport r;
  StableSum loss_sum;
  std::size_t loss_count = 0;
  for (const Example& ex : data) {
    ad::Tape t;
    ForwardResult f = model.forward(t, ex.graph, ex.question);
    const std::string& predicted = model.answers().token(f.answer);
    if (predictions != nullptr) predictions->push_back(predicted);
    const bool ok = predicted == ex.answer;
    ++r.total;
    QtypeStats& q = r.per_qtype[ex.qtype];
    ++q.total;
    if (ok) {
      ++r.correct;
      ++q.correct;
    } else {
      const std::string kind = classify_gold(ex.graph, ex.answer);
      if (kind == "object") ++r.errors.object;
      else if (kind == "relation") ++r.errors.relation;
      else if (kind == "attribute") ++r.errors.attribute;
      else ++r.errors.other;
    }
    if (auto label = model.answers().index(ex.answer)) {
      loss_sum.add(ad::cross_entropy(f.logits, *label).scalar());
      ++loss_count;
    } else {
      ++r.unrepresentable;
    }
  }
  r.mean_loss = loss_count == 0 ? 0.0 : loss_sum.value() / static_cast<double>(loss_count);
  return r;
}

inline json to_json(const EvalReport& r) {
  json per = json::object();
  for (const auto& [k, s] : r.per_qtype) per[k] = {{"total", s.total}, {"correct", s.correct}, {"accuracy", s.accuracy()}};
  return {{"total", r.total},
          {"correct", r.correct},
          {"accuracy", r.accuracy()},
          {"per_qtype", per},
          {"error_breakdown",
           {{"object", r.errors.object},
            {"relation", r.errors.relation},
            {"attribute", r.errors.attribute},
            {"other", r.errors.other}}},
          {"mean_loss", r.mean_loss},
          {"unrepresentable", r.unrepresentable}};
}

/// Question types as columns followed by Overall, then the error breakdown.
inline std::string format_report(const EvalReport& r) {
  char buf[64];
  std::string head, row;
  auto cell = [&](const std::string& name, double acc) {
    std::snprintf(buf, sizeof buf, "%16s", name.c_str());
    head += buf;
    std::snprintf(buf, sizeof buf, "%15.2f%%", 100.0 * acc);
    row += buf;
  };
  for (const auto& [k, s] : r.per_qtype) cell(k, s.accuracy());
  cell("Overall", r.accuracy());
  std::string out = head + "\n" + row + "\n";
  std::snprintf(buf, sizeof buf, "%zu / %zu correct", r.correct, r.total);
  out += std::string(buf) + "\n";
  out += "errors: object " + std::to_string(r.errors.object) + ", relation " + std::to_string(r.errors.relation) +
         ", attribute " + std::to_string(r.errors.attribute) + ", other " + std::to_string(r.errors.other) + "\n";
  std::snprintf(buf, sizeof buf, "mean loss %.6f", r.mean_loss);
  out += buf;
  if (r.unrepresentable > 0) out += " (" + std::to_string(r.unrepresentable) + " answers outside the answer space)";
  return out + "\n";
}

}  // namespace dmgnn
