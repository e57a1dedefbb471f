#pragma once

// Cross-corpus similarity series between a reference and comparison concepts.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "textessence/error.hpp"
#include "textessence/ingest.hpp"
#include "textessence/stability.hpp"

namespace textessence {

inline constexpr std::size_t kMaxComparisons = 8;

struct SimilarityStat {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and population standard deviation of the per-replicate cosines.
template <ReplicateVectors Vectors>
SimilarityStat pairwise_similarity(const Vectors& vectors, const ConceptId& a, const ConceptId& b) {
  for (const auto* id : {&a, &b}) {
    if (!vectors.present(*id)) throw Error(ErrorCode::ConceptAbsent, "concept '" + *id + "' is not present");
  }
  if (a == b) return {1.0, 0.0};
  std::vector<double> sims(vectors.replicate_count());
  for (std::size_t r = 0; r < sims.size(); ++r) sims[r] = cosine(vectors.vector(r, a), vectors.vector(r, b));
  const auto stats = detail::mean_std(sims);
  return {stats.mean, stats.std};
}

struct SimilarityPoint {
  std::string corpus_id;
  bool present = false;  // both concepts in the corpus; mean/std meaningless otherwise
  double mean = 0.0;
  double std = 0.0;
  bool ref_high_conf = false;
  bool cmp_high_conf = false;

  friend bool operator==(const SimilarityPoint&, const SimilarityPoint&) = default;
};

struct SimilaritySeries {
  ConceptId reference;
  ConceptId comparison;
  std::vector<SimilarityPoint> points;  // one per corpus, by order_index
};

template <ReplicateVectors Vectors>
struct SeriesCorpus {
  std::string corpus_id;
  int order_index = 0;
  const Vectors* vectors = nullptr;
  const ConceptSet* high_confidence = nullptr;
};

/// One series per comparison concept. Values are computed for every corpus
/// where both concepts are present, whatever their confidence; the flags let
/// the client decide what to omit.
template <ReplicateVectors Vectors>
std::vector<SimilaritySeries> similarity_series(std::span<const SeriesCorpus<Vectors>> corpora,
                                                const ConceptId& reference,
                                                std::span<const ConceptId> comparisons) {
  if (comparisons.empty()) throw Error(ErrorCode::InvalidArgument, "at least one comparison concept is required");
  if (comparisons.size() > kMaxComparisons) {
    throw Error(ErrorCode::TooManyComparisons, std::to_string(comparisons.size()) + " comparison concepts; at most " +
                                                   std::to_string(kMaxComparisons) + " allowed");
  }
  const auto selectable = [&](const ConceptId& id) {
    return std::any_of(corpora.begin(), corpora.end(),
                       [&](const auto& c) { return c.high_confidence->contains(id); });
  };
  if (!selectable(reference)) {
    throw Error(ErrorCode::NotSelectable, "concept '" + reference + "' is not high-confidence in any corpus");
  }
  for (const auto& id : comparisons) {
    if (!selectable(id)) throw Error(ErrorCode::NotSelectable, "concept '" + id + "' is not high-confidence in any corpus");
  }

  std::vector<const SeriesCorpus<Vectors>*> ordered;
  for (const auto& c : corpora) ordered.push_back(&c);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    return a->order_index != b->order_index ? a->order_index < b->order_index : a->corpus_id < b->corpus_id;
  });

  std::vector<SimilaritySeries> out;
  out.reserve(comparisons.size());
  for (const auto& cmp : comparisons) {
    SimilaritySeries series{reference, cmp, {}};
    for (const auto* corpus : ordered) {
      SimilarityPoint point;
      point.corpus_id = corpus->corpus_id;
      point.ref_high_conf = corpus->high_confidence->contains(reference);
      point.cmp_high_conf = corpus->high_confidence->contains(cmp);
      point.present = corpus->vectors->present(reference) && corpus->vectors->present(cmp);
      if (point.present) {
        const auto stat = pairwise_similarity(*corpus->vectors, reference, cmp);
        point.mean = stat.mean;
        point.std = stat.std;
      }
      series.points.push_back(std::move(point));
    }
    out.push_back(std::move(series));
  }
  return out;
}

/// Convenience form over freshly computed replicate sets and confidence
/// reports (paired by position).
inline std::vector<SimilaritySeries> similarity_series(std::span<const ReplicateSet> sets,
                                                       std::span<const ConfidenceReport> confidence,
                                                       const ConceptId& reference,
                                                       std::span<const ConceptId> comparisons) {
  if (sets.size() != confidence.size()) {
    throw Error(ErrorCode::InvalidArgument, "one confidence report per corpus is required");
  }
  std::vector<SeriesCorpus<ReplicateSet>> corpora;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    corpora.push_back({sets[i].corpus_id(), sets[i].order_index(), &sets[i], &confidence[i].high_confidence});
  }
  return similarity_series<ReplicateSet>(corpora, reference, comparisons);
}

}  // namespace textessence
