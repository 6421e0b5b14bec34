// SPDX-License-Identifier: Apache-2.0
//
// Test-only brute-force recall. Shares no code with metrics.hpp: ranking is
// repeated selection of the highest unused score (lowest index on ties) and
// matching is a linear scan.
#pragma once

#include <string>
#include <vector>

#include "dmgnn/metrics.hpp"

namespace dmgnn::oracle {

inline std::vector<Triplet> brute_top_k(const std::vector<ScoredTriplet>& preds, std::size_t k) {
  std::vector<bool> used(preds.size(), false);
  std::vector<Triplet> out;
  while (out.size() < k) {
    std::size_t best = preds.size();
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (used[i]) continue;
      if (best == preds.size() || preds[i].score > preds[best].score) best = i;
    }
    if (best == preds.size()) break;
    used[best] = true;
    out.push_back(preds[best].triplet);
  }
  return out;
}

/// Recall for one predicate class ("" means every class).
inline double brute_class_recall(const std::vector<ImagePredictions>& pred, const std::vector<ImageTruth>& gt,
                                 std::size_t k, const std::string& cls) {
  double sum = 0.0;
  std::size_t images = 0;
  for (const ImageTruth& g : gt) {
    std::vector<Triplet> unique;
    for (const Triplet& t : g.triplets) {
      if (!cls.empty() && t[1] != cls) continue;
      bool dup = false;
      for (const Triplet& u : unique) dup = dup || u == t;
      if (!dup) unique.push_back(t);
    }
    if (unique.empty()) continue;
    std::vector<ScoredTriplet> candidates;
    for (const ImagePredictions& p : pred) {
      if (p.image_id == g.image_id) candidates = p.predictions;
    }
    const std::vector<Triplet> top = brute_top_k(candidates, k);
    std::size_t hits = 0;
    for (const Triplet& t : unique) {
      bool found = false;
      for (const Triplet& c : top) found = found || c == t;
      if (found) ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(unique.size());
    ++images;
  }
  return images == 0 ? 0.0 : sum / static_cast<double>(images);
}

inline double brute_recall(const std::vector<ImagePredictions>& pred, const std::vector<ImageTruth>& gt, std::size_t k) {
  return brute_class_recall(pred, gt, k, "");
}

/// Classes visited in lexicographic order so the floating-point sum matches.
inline double brute_mean_recall(const std::vector<ImagePredictions>& pred, const std::vector<ImageTruth>& gt, std::size_t k) {
  std::vector<std::string> classes;
  for (const ImageTruth& g : gt) {
    for (const Triplet& t : g.triplets) {
      bool seen = false;
      for (const auto& c : classes) seen = seen || c == t[1];
      if (!seen) classes.push_back(t[1]);
    }
  }
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (std::size_t j = i + 1; j < classes.size(); ++j) {
      if (classes[j] < classes[i]) std::swap(classes[i], classes[j]);
    }
  }
  double sum = 0.0;
  for (const auto& c : classes) sum += brute_class_recall(pred, gt, k, c);
  return sum / static_cast<double>(classes.size());
}

}  // namespace dmgnn::oracle
