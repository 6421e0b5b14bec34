// SPDX-License-Identifier: Apache-2.0
//
// Relationship retrieval: Recall@K and mean Recall@K over predicate classes.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dmgnn/error.hpp"
#include "dmgnn/scene_graph.hpp"

namespace dmgnn {

/// (subject, predicate, object) labels.
using Triplet = std::array<std::string, 3>;

struct ScoredTriplet {
  Triplet triplet;
  double score = 0.0;
};

struct ImagePredictions {
  std::string image_id;
  std::vector<ScoredTriplet> predictions;
};

struct ImageTruth {
  std::string image_id;
  std::vector<Triplet> triplets;
};

struct MeanRecall {
  double mrk = 0.0;
  std::map<std::string, double> per_predicate;
};

namespace detail {

/// Top-K triplets, ordered by descending score with ties kept in input order.
inline std::set<Triplet> top_k(const std::vector<ScoredTriplet>& preds, std::size_t k) {
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  std::set<Triplet> out;
  for (std::size_t i = 0; i < order.size() && i < k; ++i) out.insert(preds[order[i]].triplet);
  return out;
}

inline void check_k(long long k) {
  if (k <= 0) throw InputError("K must be at least 1, got " + std::to_string(k));
}

struct Prepared {
  std::vector<std::set<Triplet>> gt;  // deduplicated, gt-file order
  std::vector<std::set<Triplet>> top;
};

inline Prepared prepare(const std::vector<ImagePredictions>& pred, const std::vector<ImageTruth>& gt, std::size_t k) {
  std::map<std::string, const ImagePredictions*> by_id;
  for (const auto& p : pred) {
    if (!by_id.emplace(p.image_id, &p).second) throw InputError("duplicate prediction record for image " + p.image_id);
  }
  Prepared out;
  std::set<std::string> seen;
  std::size_t total = 0;
  for (const auto& g : gt) {
    if (!seen.insert(g.image_id).second) throw InputError("duplicate ground-truth record for image " + g.image_id);
    out.gt.emplace_back(g.triplets.begin(), g.triplets.end());
    total += g.triplets.size();
    auto it = by_id.find(g.image_id);
    out.top.push_back(it == by_id.end() ? std::set<Triplet>{} : top_k(it->second->predictions, k));
  }
  if (total == 0) throw InputError("no ground-truth triplets");
  return out;
}

/// Mean over images with at least one relevant triplet of hits / relevant,
/// where relevance is restricted to `predicate` when given.
inline double recall_over_images(const Prepared& p, const std::string* predicate) {
  double sum = 0.0;
  std::size_t images = 0;
  for (std::size_t i = 0; i < p.gt.size(); ++i) {
    std::size_t relevant = 0, hits = 0;
    for (const Triplet& t : p.gt[i]) {
      if (predicate != nullptr && t[1] != *predicate) continue;
      ++relevant;
      if (p.top[i].contains(t)) ++hits;
    }
    if (relevant == 0) continue;
    sum += static_cast<double>(hits) / static_cast<double>(relevant);
    ++images;
  }
  return images == 0 ? 0.0 : sum / static_cast<double>(images);
}

}  // namespace detail

inline double recall_at_k(const std::vector<ImagePredictions>& pred, const std::vector<ImageTruth>& gt, long long k) {
  detail::check_k(k);
  return detail::recall_over_images(detail::prepare(pred, gt, static_cast<std::size_t>(k)), nullptr);
}

/// Per-class recall over the predicate classes present in the ground truth,
/// averaged without weighting. The candidate list is always the full ranking.
inline MeanRecall mean_recall_at_k(const std::vector<ImagePredictions>& pred, const std::vector<ImageTruth>& gt, long long k) {
  detail::check_k(k);
  const detail::Prepared p = detail::prepare(pred, gt, static_cast<std::size_t>(k));
  std::set<std::string> classes;
  for (const auto& g : p.gt) {
    for (const Triplet& t : g) classes.insert(t[1]);
  }
  MeanRecall out;
  double sum = 0.0;
  for (const std::string& c : classes) {
    const double r = detail::recall_over_images(p, &c);
    out.per_predicate[c] = r;
    sum += r;
  }
  out.mrk = sum / static_cast<double>(classes.size());
  return out;
}

// ---------------------------------------------------------------------------
// Files

namespace detail {

inline std::string image_id_of(const json& j, const std::string& where) {
  if (!j.contains("image_id")) throw ParseError(where + ": missing field \"image_id\"");
  const json& id = j.at("image_id");
  if (id.is_string()) return id.get<std::string>();
  if (id.is_number_integer()) return id.dump();
  throw ParseError(where + ".image_id: expected string or integer");
}

inline Triplet triplet_of(const json& j, const std::string& where) {
  Triplet t;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j.at(i).is_string()) throw ParseError(where + "[" + std::to_string(i) + "]: expected string label");
    t[i] = j.at(i).get<std::string>();
  }
  return t;
}

template <class Fn>
void for_each_record(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.rfind('#', 0) == 0) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": expected object");
    fn(j, where);
  }
}

}  // namespace detail

/// JSONL, one image per line: {"image_id", "predictions": [[subj, pred, obj, score], ...]}.
inline std::vector<ImagePredictions> load_predictions(const std::string& path) {
  std::vector<ImagePredictions> out;
  detail::for_each_record(path, [&](const json& j, const std::string& where) {
    detail::reject_unknown_keys(j, {"image_id", "predictions"}, where);
    ImagePredictions ip;
    ip.image_id = detail::image_id_of(j, where);
    if (!j.contains("predictions") || !j.at("predictions").is_array()) throw ParseError(where + ".predictions: expected array");
    std::size_t n = 0;
    for (const json& row : j.at("predictions")) {
      const std::string at = where + ".predictions[" + std::to_string(n++) + "]";
      if (!row.is_array() || row.size() != 4) throw ParseError(at + ": expected [subject, predicate, object, score]");
      if (!row.at(3).is_number()) throw ParseError(at + "[3]: expected numeric score");
      const double score = row.at(3).get<double>();
      if (!std::isfinite(score)) throw ParseError(at + "[3]: score is not finite");
      ip.predictions.push_back({detail::triplet_of(row, at), score});
    }
    out.push_back(std::move(ip));
  });
  return out;
}

/// JSONL, one image per line: {"image_id", "triplets": [[subj, pred, obj], ...]}.
inline std::vector<ImageTruth> load_ground_truth(const std::string& path) {
  std::vector<ImageTruth> out;
  detail::for_each_record(path, [&](const json& j, const std::string& where) {
    detail::reject_unknown_keys(j, {"image_id", "triplets"}, where);
    ImageTruth it;
    it.image_id = detail::image_id_of(j, where);
    if (!j.contains("triplets") || !j.at("triplets").is_array()) throw ParseError(where + ".triplets: expected array");
    std::size_t n = 0;
    for (const json& row : j.at("triplets")) {
      const std::string at = where + ".triplets[" + std::to_string(n++) + "]";
      if (!row.is_array() || row.size() != 3) throw ParseError(at + ": expected [subject, predicate, object]");
      it.triplets.push_back(detail::triplet_of(row, at));
    }
    out.push_back(std::move(it));
  });
  return out;
}

/// R@K and mR@K columns for each K, in percent.
inline std::string format_recall_table(const std::vector<ImagePredictions>& pred, const std::vector<ImageTruth>& gt,
                                       const std::vector<long long>& ks) {
  std::string head = "        ", r_row = "R@K     ", mr_row = "mR@K    ";
  char buf[32];
  for (long long k : ks) {
    std::snprintf(buf, sizeof buf, "%10s", ("@" + std::to_string(k)).c_str());
    head += buf;
    std::snprintf(buf, sizeof buf, "%10.2f", 100.0 * recall_at_k(pred, gt, k));
    r_row += buf;
    std::snprintf(buf, sizeof buf, "%10.2f", 100.0 * mean_recall_at_k(pred, gt, k).mrk);
    mr_row += buf;
  }
  return head + "\n" + r_row + "\n" + mr_row + "\n";
}

}  // namespace dmgnn
