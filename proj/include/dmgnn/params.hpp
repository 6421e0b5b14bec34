// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dmgnn/error.hpp"
#include "dmgnn/rng.hpp"
#include "dmgnn/tensor.hpp"

namespace dmgnn {

/// Every trainable matrix of a model, addressable by name and enumerable in
/// registration order. Tensor addresses are stable for the lifetime of the
/// container, so tapes may bind to them.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(const ModelParams& other) { *this = other; }
  ModelParams& operator=(const ModelParams& other) {
    if (this == &other) return *this;
    names_.clear();
    tensors_.clear();
    index_.clear();
    for (std::size_t i = 0; i < other.size(); ++i) add(other.names_[i], other.tensors_[i].value);
    return *this;
  }
  ModelParams(ModelParams&&) = default;
  ModelParams& operator=(ModelParams&&) = default;

  Tensor& add(const std::string& name, Matrix value) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
    names_.push_back(name);
    index_.emplace(name, tensors_.size());
    tensors_.emplace_back(std::move(value));
    return tensors_.back();
  }

  /// Glorot-uniform initialisation seeded by (seed, name), so values do not
  /// depend on registration order.
  Tensor& add_glorot(const std::string& name, std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    rng::Generator gen(rng::substream(seed, "init:" + name));
    for (double& v : m.data) v = gen.uniform(-a, a);
    return add(name, std::move(m));
  }

  Tensor& add_zeros(const std::string& name, std::size_t rows, std::size_t cols) { return add(name, Matrix(rows, cols)); }

  [[nodiscard]] bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

  Tensor& at(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
    return tensors_[it->second];
  }
  [[nodiscard]] const Tensor& at(std::string_view name) const { return const_cast<ModelParams*>(this)->at(name); }

  [[nodiscard]] std::size_t size() const { return tensors_.size(); }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  [[nodiscard]] const std::string& name(std::size_t i) const { return names_[i]; }

  [[nodiscard]] std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors_) n += t.value.size();
    return n;
  }

  void zero_grads() {
    for (Tensor& t : tensors_) t.zero_grad();
  }

  /// Bitwise equality of names, shapes and values.
  [[nodiscard]] bool values_equal(const ModelParams& o) const {
    if (size() != o.size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (names_[i] != o.names_[i] || !(tensors_[i].value == o.tensors_[i].value)) return false;
    }
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::deque<Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace dmgnn
