#pragma once

// Workspace handling and the ingest -> compute -> snapshot pipeline.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <json.hpp>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "textessence/error.hpp"
#include "textessence/ingest.hpp"
#include "textessence/projection.hpp"
#include "textessence/snapshot.hpp"
#include "textessence/stability.hpp"

namespace textessence {

struct WorkspaceCorpus {
  std::string id;
  std::string label;
  int order_index = 0;
  std::vector<std::string> embeddings;  // absolute paths, replicate order
  std::string terminology;              // absolute path or empty

  friend bool operator==(const WorkspaceCorpus&, const WorkspaceCorpus&) = default;
};

/// A workspace is a directory holding workspace.json, which lists the
/// registered corpora and their input files.
struct Workspace {
  std::vector<WorkspaceCorpus> corpora;

  friend bool operator==(const Workspace&, const Workspace&) = default;
};

inline constexpr const char* kWorkspaceFile = "workspace.json";

inline Workspace load_workspace(const std::filesystem::path& dir) {
  const auto path = dir / kWorkspaceFile;
  Workspace ws;
  if (!std::filesystem::exists(path)) return ws;
  std::ifstream in(path);
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& c : j.at("corpora")) {
      ws.corpora.push_back({c.at("id").get<std::string>(), c.at("label").get<std::string>(),
                            c.at("order_index").get<int>(), c.at("embeddings").get<std::vector<std::string>>(),
                            c.value("terminology", std::string())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConsistencyViolation, path.string() + ": " + e.what());
  }
  return ws;
}

inline void save_workspace(const std::filesystem::path& dir, const Workspace& ws) {
  std::filesystem::create_directories(dir);
  nlohmann::json corpora = nlohmann::json::array();
  for (const auto& c : ws.corpora) {
    corpora.push_back({{"id", c.id},
                       {"label", c.label},
                       {"order_index", c.order_index},
                       {"embeddings", c.embeddings},
                       {"terminology", c.terminology}});
  }
  const auto path = dir / kWorkspaceFile;
  const auto tmp = dir / (std::string(kWorkspaceFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << nlohmann::json{{"format_version", 1}, {"corpora", corpora}}.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct IngestOutcome {
  bool replaced = false;
  VocabularyReport vocabulary;
  std::vector<TerminologyIssue> terminology_issues;
};

/// Validates the corpus inputs and registers them in the workspace,
/// replacing any corpus with the same id.
inline IngestOutcome ingest_corpus(const std::filesystem::path& workspace_dir, WorkspaceCorpus corpus) {
  if (!is_valid_corpus_id(corpus.id)) {
    throw Error(ErrorCode::InvalidArgument, "corpus id '" + corpus.id + "' may only contain letters, digits, '-', '_' and '.'");
  }
  std::vector<std::filesystem::path> paths;
  for (auto& p : corpus.embeddings) {
    p = std::filesystem::absolute(p).lexically_normal().string();
    paths.emplace_back(p);
  }
  IngestOutcome outcome;
  const auto set = load_replicate_set(paths, corpus.id, corpus.label, corpus.order_index);
  outcome.vocabulary = set.report();
  if (!corpus.terminology.empty()) {
    corpus.terminology = std::filesystem::absolute(corpus.terminology).lexically_normal().string();
    outcome.terminology_issues = parse_terminology(std::filesystem::path(corpus.terminology)).issues;
  }

  auto ws = load_workspace(workspace_dir);
  const auto it = std::find_if(ws.corpora.begin(), ws.corpora.end(), [&](const auto& c) { return c.id == corpus.id; });
  if (it != ws.corpora.end()) {
    *it = std::move(corpus);
    outcome.replaced = true;
  } else {
    ws.corpora.push_back(std::move(corpus));
  }
  save_workspace(workspace_dir, ws);
  return outcome;
}

struct ComputeOptions {
  std::size_t k = 5;
  double threshold = 0.5;
  std::size_t n_neighbors = 10;
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  std::uint64_t seed = 42;
  std::string created;  // manifest timestamp

  void validate() const {
    validate_threshold(threshold);
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    if (n_neighbors == 0) throw Error(ErrorCode::InvalidArgument, "n_neighbors must be at least 1");
    if (!(perplexity > 0.0)) throw Error(ErrorCode::InvalidArgument, "perplexity must be positive");
    if (iterations == 0) throw Error(ErrorCode::InvalidArgument, "iterations must be positive");
  }
};

struct CorpusSummary {
  std::string id;
  std::string label;
  std::size_t m = 0;
  std::size_t vocab_size = 0;
  std::size_t high_conf_count = 0;
};

struct ComputeResult {
  Snapshot snapshot;
  std::vector<CorpusSummary> summaries;
  std::vector<std::string> warnings;
  std::vector<ConfidenceReport> confidence;  // parallel to snapshot.corpora
};

namespace detail {

// Fallback for corpora with fewer than 4 high-confidence concepts: points
// evenly spaced on the unit circle in id order.
inline ProjectionFrame circle_layout(const std::string& corpus_id, const ConceptSet& ids, std::uint64_t seed,
                                     double perplexity) {
  ProjectionFrame frame;
  frame.corpus_id = corpus_id;
  frame.seed = seed;
  frame.perplexity = perplexity;
  std::size_t i = 0;
  for (const auto& id : ids) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i++) / static_cast<double>(ids.size());
    frame.points[id] = {std::cos(angle), std::sin(angle)};
  }
  return frame;
}

}  // namespace detail

/// Runs confidence scoring, aggregate neighbors, projection and chain
/// alignment over the given corpora and assembles a validated snapshot.
inline ComputeResult compute_snapshot(std::vector<const ReplicateSet*> sets, const ConceptCatalog& terminology,
                                      const ComputeOptions& options) {
  options.validate();
  std::stable_sort(sets.begin(), sets.end(), [](const ReplicateSet* a, const ReplicateSet* b) {
    return a->order_index() != b->order_index() ? a->order_index() < b->order_index() : a->corpus_id() < b->corpus_id();
  });
  std::set<std::string> seen;
  for (const auto* set : sets) {
    if (!is_valid_corpus_id(set->corpus_id())) {
      throw Error(ErrorCode::InvalidArgument, "invalid corpus id '" + set->corpus_id() + "'");
    }
    if (!seen.insert(set->corpus_id()).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate corpus id '" + set->corpus_id() + "'");
    }
  }

  ComputeResult result;
  auto& snap = result.snapshot;
  snap.created = options.created;

  std::vector<SimilarityIndex> indexes;
  indexes.reserve(sets.size());
  for (const auto* set : sets) {
    indexes.emplace_back(*set);
    result.confidence.push_back(high_confidence_set(indexes.back(), options.k, options.threshold));
  }

  std::vector<ConceptId> selectable_ids;
  for (const auto& report : result.confidence) {
    selectable_ids.insert(selectable_ids.end(), report.high_confidence.begin(), report.high_confidence.end());
  }
  const ConceptSet selectable(std::move(selectable_ids));

  for (const auto* set : sets) {
    for (const auto& id : set->shared_vocabulary()) {
      if (snap.concepts.contains(id)) continue;
      const auto it = terminology.find(id);
      snap.concepts.emplace(id, it != terminology.end() ? it->second : synthesize_metadata(id));
    }
  }

  std::vector<ProjectionFrame> frames;
  for (std::size_t ci = 0; ci < sets.size(); ++ci) {
    const auto& set = *sets[ci];
    const auto& index = indexes[ci];
    const auto& report = result.confidence[ci];
    CorpusPayload payload;
    payload.confidence = report.records;

    std::vector<ConceptId> targets;
    for (const auto& id : selectable) {
      if (set.present(id)) targets.push_back(id);
    }
    std::vector<NeighborTable> tables(targets.size());
    detail::parallel_for(targets.size(), [&](std::size_t i) {
      tables[i] = index.aggregate(index.require(targets[i]), options.n_neighbors, report.high_confidence);
    });
    for (auto& t : tables) {
      auto key = t.concept_id;
      payload.neighbors.emplace(std::move(key), std::move(t));
    }

    const auto& hc = report.high_confidence;
    if (hc.size() < 4) {
      result.warnings.push_back("corpus '" + set.corpus_id() + "' has " + std::to_string(hc.size()) +
                                " high-confidence concept(s); too few for t-SNE, using a circular layout");
      frames.push_back(detail::circle_layout(set.corpus_id(), hc, options.seed, options.perplexity));
    } else {
      std::map<ConceptId, std::vector<double>> means;
      for (const auto& id : hc) {
        std::vector<double> mean(set.dim(), 0.0);
        for (std::size_t r = 0; r < set.replicate_count(); ++r) {
          const auto v = set.vector(r, id);
          for (std::size_t j = 0; j < v.size(); ++j) mean[j] += v[j];
        }
        for (auto& x : mean) x /= static_cast<double>(set.replicate_count());
        means.emplace(id, std::move(mean));
      }
      TsneOptions topt;
      topt.perplexity = options.perplexity;
      topt.iterations = options.iterations;
      topt.seed = options.seed;
      auto projected = tsne_project(means, topt, set.corpus_id());
      for (auto& w : projected.warnings) result.warnings.push_back("corpus '" + set.corpus_id() + "': " + w);
      frames.push_back(std::move(projected.frame));
    }

    payload.vectors = StoredVectors::from(set, selectable);
    auto& d = payload.descriptor;
    d.id = set.corpus_id();
    d.label = set.label();
    d.order_index = set.order_index();
    d.vocab_size = report.records.size();
    d.high_conf_count = hc.size();
    d.m = set.replicate_count();
    d.dim = set.dim();
    d.k = options.k;
    d.threshold = options.threshold;
    d.n_neighbors = options.n_neighbors;
    d.perplexity = options.perplexity;
    d.iterations = options.iterations;
    d.seed = options.seed;
    result.summaries.push_back({d.id, d.label, d.m, d.vocab_size, d.high_conf_count});
    snap.corpora.push_back(std::move(payload));
  }

  if (!frames.empty()) {
    auto chain = align_chain(std::move(frames));
    for (auto& w : chain.warnings) result.warnings.push_back(w);
    for (std::size_t ci = 0; ci < chain.frames.size(); ++ci) snap.corpora[ci].projection = std::move(chain.frames[ci]);
  }

  quantize(snap);
  validate_snapshot(snap);
  return result;
}

/// Loads every registered corpus and its terminology, then computes.
inline ComputeResult compute_workspace(const Workspace& ws, const ComputeOptions& options) {
  if (ws.corpora.empty()) throw Error(ErrorCode::InvalidArgument, "the workspace has no ingested corpora");
  options.validate();
  std::vector<ReplicateSet> sets;
  ConceptCatalog terminology;
  std::vector<std::string> seen_terminology;
  for (const auto& c : ws.corpora) {
    std::vector<std::filesystem::path> paths(c.embeddings.begin(), c.embeddings.end());
    try {
      sets.push_back(load_replicate_set(paths, c.id, c.label, c.order_index));
    } catch (const Error& e) {
      throw Error(e.code(), "corpus '" + c.id + "' (ingest): " + e.detail());
    }
    if (!c.terminology.empty() &&
        std::find(seen_terminology.begin(), seen_terminology.end(), c.terminology) == seen_terminology.end()) {
      seen_terminology.push_back(c.terminology);
      for (const auto& [id, meta] : parse_terminology(std::filesystem::path(c.terminology)).entries) {
        merge_metadata(terminology, meta);
      }
    }
  }
  std::vector<const ReplicateSet*> ptrs;
  for (const auto& s : sets) ptrs.push_back(&s);
  return compute_snapshot(std::move(ptrs), terminology, options);
}

}  // namespace textessence
