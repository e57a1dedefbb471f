#pragma once

// Synthetic multi-corpus embedding fixtures with planted structure.
//
// Every corpus holds `clusters` groups of `per_cluster` concepts around
// random unit centers. Each replicate adds independent Gaussian noise to
// the per-concept base vectors. Two planted concepts model corpus drift:
//   X-SHIFT  sits in cluster A before the shift corpus and in cluster B from it on;
//   X-DRIFT  moves along the chord from a cluster-B point towards the
//            reference concept A-000, so its true cosine to A-000 rises
//            strictly from corpus to corpus.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "textessence/detail/random.hpp"
#include "textessence/error.hpp"
#include "textessence/ingest.hpp"

namespace textessence {

struct DriftSpec {
  std::optional<std::size_t> shift_at;  // first corpus where X-SHIFT sits in cluster B
  bool pair = false;

  /// Comma-separated items: "shift@<corpus index>", "pair", or "none".
  static DriftSpec parse(std::string_view text) {
    DriftSpec spec;
    if (text == "none" || text.empty()) return spec;
    for (auto item : detail::split_on(text, ',')) {
      item = detail::trim(item);
      if (item == "pair") {
        spec.pair = true;
      } else if (item.starts_with("shift@")) {
        const auto at = detail::parse_number<std::size_t>(item.substr(6));
        if (!at) throw Error(ErrorCode::InvalidArgument, "invalid drift item '" + std::string(item) + "'");
        spec.shift_at = *at;
      } else {
        throw Error(ErrorCode::InvalidArgument,
                    "invalid drift item '" + std::string(item) + "' (expected shift@<n>, pair or none)");
      }
    }
    return spec;
  }
};

struct FixtureOptions {
  std::size_t corpora = 3;
  std::size_t clusters = 2;
  std::size_t per_cluster = 50;
  std::size_t dim = 20;
  std::size_t m = 5;
  double noise = 0.05;   // per-coordinate replicate noise
  double spread = 0.2;   // per-coordinate within-cluster spread of base vectors
  std::string drift = "shift@1,pair";
  std::uint64_t seed = 42;
};

struct FixtureCorpus {
  std::string id;
  std::string label;
  int order_index = 0;
  std::vector<EmbeddingReplicate> replicates;
};

struct Fixture {
  std::vector<FixtureCorpus> corpora;
  ConceptCatalog terminology;
  std::map<ConceptId, std::size_t> cluster_of;  // regular concepts only

  std::optional<ConceptId> shift_concept;
  std::size_t shift_at = 0;
  std::optional<ConceptId> pair_reference;
  std::optional<ConceptId> pair_comparison;
  std::vector<double> pair_true_cosine;  // per corpus, noise-free
};

inline std::string fixture_concept_id(std::size_t cluster, std::size_t index) {
  std::string id(1, static_cast<char>('A' + cluster));
  std::string num = std::to_string(index);
  while (num.size() < 3) num.insert(num.begin(), '0');
  return id + "-" + num;
}

inline Fixture generate_fixture(const FixtureOptions& opt) {
  if (opt.corpora == 0 || opt.clusters == 0 || opt.per_cluster == 0 || opt.dim == 0) {
    throw Error(ErrorCode::InvalidArgument, "fixture sizes must be positive");
  }
  if (opt.clusters > 26) throw Error(ErrorCode::InvalidArgument, "at most 26 clusters are supported");
  if (opt.m < 2) throw Error(ErrorCode::InvalidArgument, "fixtures need at least 2 replicates per corpus");
  if (!(opt.noise >= 0.0) || !(opt.spread >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise and spread must be >= 0");
  const auto drift = DriftSpec::parse(opt.drift);
  if ((drift.shift_at || drift.pair) && opt.clusters < 2) {
    throw Error(ErrorCode::InvalidArgument, "planted drift needs at least 2 clusters");
  }
  if (drift.shift_at && *drift.shift_at >= opt.corpora) {
    throw Error(ErrorCode::InvalidArgument, "shift corpus index " + std::to_string(*drift.shift_at) +
                                                " is outside the " + std::to_string(opt.corpora) + " corpora");
  }

  detail::Rng rng(opt.seed);
  const std::size_t d = opt.dim;
  auto gaussian = [&](double scale) {
    std::vector<double> v(d);
    for (auto& x : v) x = scale * rng.normal();
    return v;
  };
  auto add = [](std::vector<double> a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
  };

  std::vector<std::vector<double>> centers;
  for (std::size_t c = 0; c < opt.clusters; ++c) {
    auto v = gaussian(1.0);
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (auto& x : v) x /= n;
    centers.push_back(std::move(v));
  }

  Fixture fx;
  // Base vectors per concept; planted concepts get one base per corpus.
  std::map<ConceptId, std::vector<std::vector<double>>> bases;
  for (std::size_t c = 0; c < opt.clusters; ++c) {
    for (std::size_t i = 0; i < opt.per_cluster; ++i) {
      const auto id = fixture_concept_id(c, i);
      bases[id] = std::vector<std::vector<double>>(opt.corpora, add(centers[c], gaussian(opt.spread)));
      fx.cluster_of[id] = c;
      ConceptMetadata meta;
      meta.id = id;
      meta.preferred_term = "Concept " + id;
      meta.synonyms = {std::string(1, static_cast<char>('a' + c)) + id.substr(2)};
      meta.semantic_group = std::string("Group ") + static_cast<char>('A' + c);
      meta.definitions = {std::string("Synthetic member of cluster ") + static_cast<char>('A' + c) + "."};
      fx.terminology[id] = std::move(meta);
    }
  }
  fx.terminology["A-000"].preferred_term = "Reference concept";

  if (drift.shift_at) {
    const ConceptId id = "X-SHIFT";
    const auto in_a = add(centers[0], gaussian(opt.spread));
    const auto in_b = add(centers[1], gaussian(opt.spread));
    std::vector<std::vector<double>> per_corpus;
    for (std::size_t t = 0; t < opt.corpora; ++t) per_corpus.push_back(t < *drift.shift_at ? in_a : in_b);
    bases[id] = std::move(per_corpus);
    fx.shift_concept = id;
    fx.shift_at = *drift.shift_at;
    fx.terminology[id] = {id, "Shifting concept", {"cluster switcher"}, "Planted",
                          {"Moves from cluster A to cluster B at corpus " + std::to_string(*drift.shift_at) + "."}};
  }

  if (drift.pair) {
    const ConceptId ref = "A-000";
    const ConceptId id = "X-DRIFT";
    const auto& target = bases[ref].front();
    const auto start = add(centers[1], gaussian(opt.spread));
    std::vector<std::vector<double>> per_corpus;
    for (std::size_t t = 0; t < opt.corpora; ++t) {
      const double alpha =
          opt.corpora == 1 ? 0.5 : 0.1 + 0.7 * static_cast<double>(t) / static_cast<double>(opt.corpora - 1);
      std::vector<double> v(d);
      for (std::size_t j = 0; j < d; ++j) v[j] = (1.0 - alpha) * start[j] + alpha * target[j];
      double dot = 0.0, nv = 0.0, nt = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        dot += v[j] * target[j];
        nv += v[j] * v[j];
        nt += target[j] * target[j];
      }
      fx.pair_true_cosine.push_back(dot / std::sqrt(nv * nt));
      per_corpus.push_back(std::move(v));
    }
    for (std::size_t t = 1; t < fx.pair_true_cosine.size(); ++t) {
      if (!(fx.pair_true_cosine[t] > fx.pair_true_cosine[t - 1])) {
        throw Error(ErrorCode::Internal, "planted pair trajectory is not strictly increasing");
      }
    }
    bases[id] = std::move(per_corpus);
    fx.pair_reference = ref;
    fx.pair_comparison = id;
    fx.terminology[id] = {id, "Drifting concept", {"converging partner"}, "Planted",
                          {"Moves steadily towards the reference concept."}};
  }

  std::vector<float> row(d);
  for (std::size_t t = 0; t < opt.corpora; ++t) {
    FixtureCorpus corpus;
    corpus.id = "corpus" + std::to_string(t + 1);
    corpus.label = "Corpus " + std::to_string(t + 1);
    corpus.order_index = static_cast<int>(t);
    for (std::size_t r = 0; r < opt.m; ++r) {
      EmbeddingReplicate rep(d);
      rep.corpus_id = corpus.id;
      rep.replicate_index = r;
      for (const auto& [id, per_corpus] : bases) {
        const auto& base = per_corpus[t];
        // Serialised with 6 significant digits; round here so the in-memory
        // fixture equals what a reader parses back.
        for (std::size_t j = 0; j < d; ++j) {
          const double v = base[j] + opt.noise * rng.normal();
          char buf[32];
          const auto res = std::to_chars(buf, buf + sizeof buf, static_cast<float>(v), std::chars_format::general, 6);
          row[j] = *detail::parse_number<float>(std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)));
        }
        rep.add(id, row);
      }
      corpus.replicates.push_back(std::move(rep));
    }
    fx.corpora.push_back(std::move(corpus));
  }
  return fx;
}

inline ReplicateSet to_replicate_set(const FixtureCorpus& corpus) {
  return ReplicateSet(corpus.id, corpus.label, corpus.order_index, corpus.replicates);
}

inline std::string fixture_replicate_filename(std::size_t r) {
  std::string num = std::to_string(r);
  while (num.size() < 2) num.insert(num.begin(), '0');
  return "replicate_" + num + ".vec";
}

/// Writes <out>/<corpus>/replicate_NN.vec, <out>/terminology.tsv and a
/// ground-truth description in <out>/fixture.json.
inline void write_fixture(const Fixture& fx, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  fs::create_directories(out);
  auto open = [](const fs::path& p) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + p.string());
    return f;
  };
  nlohmann::json corpora = nlohmann::json::array();
  for (const auto& c : fx.corpora) {
    fs::create_directories(out / c.id);
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t r = 0; r < c.replicates.size(); ++r) {
      const auto name = fixture_replicate_filename(r);
      auto f = open(out / c.id / name);
      serialize_embedding(c.replicates[r], f);
      files.push_back(c.id + "/" + name);
    }
    corpora.push_back({{"id", c.id}, {"label", c.label}, {"order_index", c.order_index}, {"embeddings", files}});
  }

  {
    auto f = open(out / "terminology.tsv");
    for (const auto& [id, m] : fx.terminology) {
      std::string syn;
      for (std::size_t i = 0; i < m.synonyms.size(); ++i) syn += (i ? "|" : "") + m.synonyms[i];
      f << id << '\t' << m.preferred_term << '\t' << syn << '\t' << m.semantic_group << '\t'
        << (m.definitions.empty() ? "" : m.definitions.front()) << '\n';
    }
  }

  nlohmann::json truth;
  truth["corpora"] = corpora;
  truth["terminology"] = "terminology.tsv";
  truth["clusters"] = fx.cluster_of;
  truth["planted"] = nlohmann::json::object();
  if (fx.shift_concept) truth["planted"]["shift"] = {{"concept", *fx.shift_concept}, {"shift_at", fx.shift_at}};
  if (fx.pair_reference) {
    truth["planted"]["pair"] = {{"reference", *fx.pair_reference},
                                {"comparison", *fx.pair_comparison},
                                {"true_cosine", fx.pair_true_cosine}};
  }
  auto f = open(out / "fixture.json");
  f << truth.dump(2) << '\n';
}

}  // namespace textessence
