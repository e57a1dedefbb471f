#pragma once

// Nearest neighborhoods, embedding confidence (EC@k) and aggregate neighbors.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "textessence/detail/parallel.hpp"
#include "textessence/error.hpp"
#include "textessence/ingest.hpp"

namespace textessence {

/// Anything that can hand out per-replicate vectors for a corpus: the full
/// ReplicateSet during computation, or the stored vectors of a snapshot.
template <class T>
concept ReplicateVectors = requires(const T& t, std::size_t r, const ConceptId& id) {
  { t.replicate_count() } -> std::convertible_to<std::size_t>;
  { t.present(id) } -> std::convertible_to<bool>;
  { t.vector(r, id) } -> std::convertible_to<std::span<const float>>;
};

/// Sorted, duplicate-free set of concept ids.
class ConceptSet {
 public:
  ConceptSet() = default;
  explicit ConceptSet(std::vector<ConceptId> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }
  ConceptSet(std::initializer_list<ConceptId> ids) : ConceptSet(std::vector<ConceptId>(ids)) {}

  bool contains(const ConceptId& id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  auto begin() const noexcept { return ids_.begin(); }
  auto end() const noexcept { return ids_.end(); }
  std::span<const ConceptId> items() const noexcept { return ids_; }

  friend bool operator==(const ConceptSet&, const ConceptSet&) = default;

 private:
  std::vector<ConceptId> ids_;
};

namespace detail {

inline double dot(std::span<const float> u, std::span<const float> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return acc;
}

inline double norm(std::span<const float> u) { return std::sqrt(dot(u, u)); }

// Same arithmetic as cosine(), with the norms supplied by the caller.
inline double cosine_with_norms(std::span<const float> u, std::span<const float> v, double norm_u,
                                double norm_v) {
  return std::clamp(dot(u, v) / (norm_u * norm_v), -1.0, 1.0);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Population standard deviation. Identical inputs give exactly that value
// and a zero deviation.
inline MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) return {};
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) return {xs.front(), 0.0};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

}  // namespace detail

/// Cosine similarity clamped to [-1, 1].
inline double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::InvalidArgument, "cosine of vectors with different lengths");
  const double nu = detail::norm(u);
  if (nu == 0.0) throw Error(ErrorCode::ZeroVector, "cosine with a zero vector");
  if (u.data() == v.data()) return 1.0;
  const double nv = detail::norm(v);
  if (nv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine with a zero vector");
  return detail::cosine_with_norms(u, v, nu, nv);
}

struct Neighbor {
  ConceptId id;
  double score = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Ranking order for neighbors: higher score first, ties by ascending id.
inline bool ranks_before(double score_a, const ConceptId& a, double score_b, const ConceptId& b) {
  if (score_a != score_b) return score_a > score_b;
  return a < b;
}

struct NeighborList {
  ConceptId target;
  std::size_t k = 0;
  std::vector<Neighbor> entries;
};

/// Top-k of `candidates` (minus the concept itself) by cosine similarity
/// within one replicate.
inline NeighborList knn(const EmbeddingReplicate& replicate, const ConceptId& concept_id, std::size_t k,
                        std::span<const ConceptId> candidates) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const auto target = replicate.vector(concept_id);
  const double target_norm = detail::norm(target);

  NeighborList out{concept_id, k, {}};
  out.entries.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (c == concept_id) continue;
    const auto v = replicate.vector(c);
    out.entries.push_back({c, detail::cosine_with_norms(target, v, target_norm, detail::norm(v))});
  }
  const auto cmp = [](const Neighbor& a, const Neighbor& b) { return ranks_before(a.score, a.id, b.score, b.id); };
  const std::size_t keep = std::min(k, out.entries.size());
  std::partial_sort(out.entries.begin(), out.entries.begin() + static_cast<std::ptrdiff_t>(keep), out.entries.end(),
                    cmp);
  out.entries.resize(keep);
  return out;
}

struct ConfidenceRecord {
  std::string corpus_id;
  ConceptId concept_id;
  double ec = 0.0;
  std::size_t k = 0;
  bool high_confidence = false;

  friend bool operator==(const ConfidenceRecord&, const ConfidenceRecord&) = default;
};

struct ConfidenceReport {
  std::vector<ConfidenceRecord> records;  // one per shared-vocabulary concept, ascending id
  ConceptSet high_confidence;
};

struct AggregateNeighbor {
  ConceptId id;
  double mean_sim = 0.0;
  double std_sim = 0.0;

  friend bool operator==(const AggregateNeighbor&, const AggregateNeighbor&) = default;
};

struct NeighborTable {
  std::string corpus_id;
  ConceptId concept_id;
  std::size_t n = 0;
  std::vector<AggregateNeighbor> rows;

  friend bool operator==(const NeighborTable&, const NeighborTable&) = default;
};

/// Cached view of a ReplicateSet restricted to its shared vocabulary.
/// Positions index the sorted shared vocabulary, so ascending position is
/// ascending id.
class SimilarityIndex {
 public:
  explicit SimilarityIndex(const ReplicateSet& set) : set_(&set), vocab_(set.shared_vocabulary()) {
    const std::size_t m = set.replicate_count();
    rows_.resize(m);
    norms_.resize(m);
    for (std::size_t r = 0; r < m; ++r) {
      const auto& rep = set.replicates()[r];
      rows_[r].reserve(vocab_.size());
      norms_[r].reserve(vocab_.size());
      for (const auto& id : vocab_) {
        const float* p = rep.find(id);
        rows_[r].push_back(p);
        norms_[r].push_back(detail::norm({p, set.dim()}));
      }
    }
  }

  const ReplicateSet& set() const noexcept { return *set_; }
  std::span<const ConceptId> vocabulary() const noexcept { return vocab_; }

  std::optional<std::size_t> position(const ConceptId& id) const {
    const auto it = std::lower_bound(vocab_.begin(), vocab_.end(), id);
    if (it == vocab_.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - vocab_.begin());
  }

  std::size_t require(const ConceptId& id) const {
    const auto pos = position(id);
    if (!pos) {
      throw Error(ErrorCode::ConceptAbsent,
                  "concept '" + id + "' is not in the shared vocabulary of corpus '" + set_->corpus_id() + "'");
    }
    return *pos;
  }

  double cosine(std::size_t replicate, std::size_t a, std::size_t b) const {
    if (a == b) return 1.0;
    const std::size_t d = set_->dim();
    return detail::cosine_with_norms({rows_[replicate][a], d}, {rows_[replicate][b], d}, norms_[replicate][a],
                                     norms_[replicate][b]);
  }

  /// Positions of the k nearest shared-vocabulary neighbors, best first.
  std::vector<std::size_t> top_k(std::size_t replicate, std::size_t pos, std::size_t k) const {
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(vocab_.size());
    for (std::size_t j = 0; j < vocab_.size(); ++j) {
      if (j != pos) scored.emplace_back(cosine(replicate, pos, j), j);
    }
    const std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                      [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    std::vector<std::size_t> out(keep);
    for (std::size_t i = 0; i < keep; ++i) out[i] = scored[i].second;
    return out;
  }

  /// EC@k for the concept at `pos`, normalised to [0, 1].
  double confidence(std::size_t pos, std::size_t k) const {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    const std::size_t m = set_->replicate_count();
    // With a vocabulary smaller than k + 1 every list holds all V - 1 others.
    const std::size_t k_eff = std::min(k, vocab_.size() - 1);
    if (k_eff == 0) return 0.0;

    std::vector<std::vector<std::size_t>> neighborhoods(m);
    for (std::size_t r = 0; r < m; ++r) {
      neighborhoods[r] = top_k(r, pos, k);
      std::sort(neighborhoods[r].begin(), neighborhoods[r].end());
    }
    std::size_t overlap = 0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        const auto& a = neighborhoods[i];
        const auto& b = neighborhoods[j];
        std::size_t common = 0;
        for (std::size_t x = 0, y = 0; x < a.size() && y < b.size();) {
          if (a[x] < b[y]) {
            ++x;
          } else if (b[y] < a[x]) {
            ++y;
          } else {
            ++common, ++x, ++y;
          }
        }
        overlap += 2 * common;  // |A∩B| counted for (i,j) and (j,i)
      }
    }
    return static_cast<double>(overlap) / static_cast<double>(m * (m - 1) * k_eff);
  }

  NeighborTable aggregate(std::size_t pos, std::size_t n, const ConceptSet& pool) const {
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "n must be at least 1");
    const std::size_t m = set_->replicate_count();
    NeighborTable table{set_->corpus_id(), vocab_[pos], n, {}};
    table.rows.reserve(pool.size());
    std::vector<double> sims(m);
    for (const auto& id : pool) {
      const std::size_t other = require(id);
      if (other == pos) continue;
      for (std::size_t r = 0; r < m; ++r) sims[r] = cosine(r, pos, other);
      const auto stats = detail::mean_std(sims);
      table.rows.push_back({id, stats.mean, stats.std});
    }
    const auto cmp = [](const AggregateNeighbor& a, const AggregateNeighbor& b) {
      return ranks_before(a.mean_sim, a.id, b.mean_sim, b.id);
    };
    const std::size_t keep = std::min(n, table.rows.size());
    std::partial_sort(table.rows.begin(), table.rows.begin() + static_cast<std::ptrdiff_t>(keep), table.rows.end(), cmp);
    table.rows.resize(keep);
    return table;
  }

 private:
  const ReplicateSet* set_;
  std::span<const ConceptId> vocab_;
  std::vector<std::vector<const float*>> rows_;
  std::vector<std::vector<double>> norms_;
};

/// EC@k: mean pairwise overlap of the concept's k-nearest neighborhoods
/// across all ordered replicate pairs, divided by k. Neighborhoods are taken
/// over the shared vocabulary.
inline double embedding_confidence(const ReplicateSet& set, const ConceptId& concept_id, std::size_t k) {
  const SimilarityIndex index(set);
  return index.confidence(index.require(concept_id), k);
}

inline void validate_threshold(double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in [0, 1], got " + std::to_string(threshold));
  }
}

/// Scores every shared-vocabulary concept; a concept is high-confidence when
/// EC@k >= threshold.
inline ConfidenceReport high_confidence_set(const SimilarityIndex& index, std::size_t k, double threshold) {
  validate_threshold(threshold);
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const auto vocab = index.vocabulary();
  ConfidenceReport report;
  report.records.resize(vocab.size());
  detail::parallel_for(vocab.size(), [&](std::size_t i) {
    const double ec = index.confidence(i, k);
    report.records[i] = {index.set().corpus_id(), vocab[i], ec, k, ec >= threshold};
  });
  std::vector<ConceptId> high;
  for (const auto& rec : report.records) {
    if (rec.high_confidence) high.push_back(rec.concept_id);
  }
  report.high_confidence = ConceptSet(std::move(high));
  return report;
}

inline ConfidenceReport high_confidence_set(const ReplicateSet& set, std::size_t k, double threshold) {
  return high_confidence_set(SimilarityIndex(set), k, threshold);
}

/// Top-n members of `high_confidence` (excluding the concept) by cosine
/// similarity averaged over replicates. The concept itself need not be
/// high-confidence. An empty pool yields an empty table.
inline NeighborTable aggregate_neighbors(const ReplicateSet& set, const ConceptId& concept_id, std::size_t n,
                                         const ConceptSet& high_confidence) {
  const SimilarityIndex index(set);
  return index.aggregate(index.require(concept_id), n, high_confidence);
}

}  // namespace textessence
