// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint layout, all integers little-endian:
//
//   8 bytes   magic "DMGNNCKP"
//   u32       format version (1)
//   u64       model config hash (fnv1a of the canonical model-config JSON)
//   u32       metadata length, then that many bytes of JSON:
//             {"model": {...}, "answers": [...], "optimizer": {...}}
//   u32       tensor count, then per tensor:
//             u32 name length, name bytes, u64 rows, u64 cols,
//             rows*cols IEEE-754 doubles in row-major order
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "dmgnn/config.hpp"
#include "dmgnn/model.hpp"
#include "dmgnn/training.hpp"

namespace dmgnn {

inline constexpr char kCheckpointMagic[8] = {'D', 'M', 'G', 'N', 'N', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string origin) : bytes_(bytes), origin_(std::move(origin)) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(origin_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated checkpoint");
  }
  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace detail

struct Checkpoint {
  ModelConfig config;
  AnswerSpace answers;
  ModelParams params;
  std::uint64_t config_hash = 0;
  json metadata;
};

inline std::string serialize_checkpoint(const Model& model, const AdamHyper& adam = {},
                                        OptimizerKind kind = OptimizerKind::Adam) {
  const json meta = {{"model", model_config_json(model.config())},
                     {"answers", model.answers().tokens()},
                     {"optimizer", {{"kind", to_string(kind)}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}}};
  const std::string meta_text = meta.dump();
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, model_config_hash(model.config()));
  detail::put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  out += meta_text;
  const ModelParams& p = model.params();
  detail::put_u32(out, static_cast<std::uint32_t>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::string& name = p.name(i);
    const Matrix& m = p[i].value;
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u64(out, m.rows);
    detail::put_u64(out, m.cols);
    for (double x : m.data) detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& bytes, const std::string& origin = "checkpoint") {
  detail::ByteReader r(bytes, origin);
  if (r.take(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) r.fail("bad magic");
  const auto version = r.uint(4);
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.config_hash = r.uint(8);
  const std::size_t meta_len = r.uint(4);
  try {
    ck.metadata = json::parse(r.take(meta_len));
    ck.config = model_config_from_json(ck.metadata.at("model"));
    ck.answers = AnswerSpace(ck.metadata.at("answers").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw ParseError(origin + ": bad metadata: " + e.what());
  } catch (const Error& e) {
    throw ParseError(origin + ": bad metadata: " + e.what());
  }
  if (model_config_hash(ck.config) != ck.config_hash) r.fail("config hash does not match stored model config");
  const std::size_t count = r.uint(4);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = r.take(r.uint(4));
    const std::size_t rows = r.uint(8);
    const std::size_t cols = r.uint(8);
    if (cols != 0 && rows > (bytes.size() / 8) / cols) r.fail("tensor " + name + " larger than file");
    Matrix m(rows, cols);
    for (double& x : m.data) x = std::bit_cast<double>(r.uint(8));
    ck.params.add(name, std::move(m));
  }
  if (!r.done()) r.fail("trailing bytes");
  return ck;
}

/// Writes through a temporary file and renames, so a crash never leaves a
/// half-written checkpoint under the final name.
inline void save_checkpoint(const std::string& path, const Model& model, const AdamHyper& adam = {},
                            OptimizerKind kind = OptimizerKind::Adam) {
  const std::string bytes = serialize_checkpoint(model, adam, kind);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write checkpoint " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("cannot write checkpoint " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

inline Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_text_file(path), path); }

/// Rebuilds a model for `config` and copies the stored tensors into it. The
/// stored tensor set must match the model's parameters exactly.
inline Model model_from_checkpoint(const Checkpoint& ck, const ModelConfig& config) {
  Model m(config, ck.answers, Model::make_vocabulary(config));
  ModelParams& p = m.params();
  if (p.size() != ck.params.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(ck.params.size()) + " tensors, model expects " +
                      std::to_string(p.size()));
  }
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    const std::string& name = ck.params.name(i);
    if (!p.contains(name)) throw ConfigError("checkpoint tensor " + name + " is not a model parameter");
    Tensor& dst = p.at(name);
    const Matrix& src = ck.params[i].value;
    if (dst.rows() != src.rows || dst.cols() != src.cols) {
      throw DimensionError("checkpoint tensor " + name + " has shape " + src.shape_str() + ", model expects " +
                           dst.value.shape_str());
    }
    dst.value = src;
  }
  return m;
}

inline Model model_from_checkpoint(const Checkpoint& ck) { return model_from_checkpoint(ck, ck.config); }

}  // namespace dmgnn
