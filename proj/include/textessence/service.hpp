#pragma once

// Read-only JSON API over a loaded snapshot.
//
//   GET /api/corpora
//   GET /api/corpora/{id}/projection
//   GET /api/concepts/search?q=<text>
//   GET /api/concepts/{id}
//   GET /api/similarity?ref=<id>&cmp=<id>[&cmp=<id>...]
//
// Errors are {"code": ..., "message": ...} with the matching HTTP status.

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <json.hpp>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "textessence/error.hpp"
#include "textessence/similarity.hpp"
#include "textessence/snapshot.hpp"

namespace textessence {

inline constexpr std::size_t kMaxSearchResults = 50;

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

using QueryParams = std::multimap<std::string, std::string>;

namespace detail {

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

inline std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

inline ApiResponse error_response(int status, std::string_view code, std::string message) {
  return {status, {{"code", code}, {"message", std::move(message)}}};
}

}  // namespace detail

class ApiService {
 public:
  /// A null snapshot makes every route answer 503.
  explicit ApiService(std::shared_ptr<const Snapshot> snapshot) : snapshot_(std::move(snapshot)) {
    if (!snapshot_) return;
    selectable_ = snapshot_->selectable();
    for (const auto& c : snapshot_->corpora) {
      corpus_index_.emplace(c.descriptor.id, high_conf_.size());
      high_conf_.push_back(c.high_confidence());
    }
    for (const auto& id : selectable_) {
      const auto& meta = metadata(id);
      SearchEntry entry{id, {detail::ascii_lower(meta.preferred_term)}};
      for (const auto& s : meta.synonyms) entry.terms.push_back(detail::ascii_lower(s));
      search_index_.push_back(std::move(entry));
    }
  }

  const Snapshot* snapshot() const noexcept { return snapshot_.get(); }

  /// Routes a decoded request path. Query parameters may repeat.
  ApiResponse handle(std::string_view path, const QueryParams& query) const {
    if (!snapshot_) return detail::error_response(503, "NoSnapshot", "no snapshot is loaded");
    constexpr std::string_view corpora_prefix = "/api/corpora";
    constexpr std::string_view concepts_prefix = "/api/concepts/";
    if (path == corpora_prefix) return corpora();
    if (path.starts_with("/api/corpora/") && path.ends_with("/projection")) {
      const auto id = path.substr(corpora_prefix.size() + 1,
                                  path.size() - corpora_prefix.size() - 1 - std::string_view("/projection").size());
      if (!id.empty() && id.find('/') == std::string_view::npos) return projection(std::string(id));
    }
    if (path == "/api/concepts/search") {
      const auto it = query.find("q");
      return search(it == query.end() ? std::string() : it->second);
    }
    if (path.starts_with(concepts_prefix) && path.size() > concepts_prefix.size()) {
      return concept_detail(std::string(path.substr(concepts_prefix.size())));
    }
    if (path == "/api/similarity") {
      const auto ref = query.find("ref");
      std::vector<ConceptId> cmps;
      for (auto [it, end] = query.equal_range("cmp"); it != end; ++it) cmps.push_back(it->second);
      if (ref == query.end() || ref->second.empty()) {
        return detail::error_response(400, "MissingParameter", "the 'ref' parameter is required");
      }
      return similarity(ref->second, cmps);
    }
    return detail::error_response(404, "NotFound", "no route for " + std::string(path));
  }

  ApiResponse corpora() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : snapshot_->corpora) {
      const auto& d = c.descriptor;
      out.push_back({{"id", d.id},
                     {"label", d.label},
                     {"order_index", d.order_index},
                     {"vocab_size", d.vocab_size},
                     {"high_conf_count", d.high_conf_count},
                     {"m", d.m},
                     {"dim", d.dim},
                     {"k", d.k},
                     {"threshold", d.threshold},
                     {"n_neighbors", d.n_neighbors},
                     {"tsne", {{"perplexity", d.perplexity}, {"iterations", d.iterations}, {"seed", d.seed}}}});
    }
    return {200, out};
  }

  ApiResponse projection(const std::string& corpus_id) const {
    const auto* c = find_corpus(corpus_id);
    if (!c) return detail::error_response(404, "UnknownCorpus", "no corpus '" + corpus_id + "'");
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [id, p] : c->projection.points) {
      const auto& meta = metadata(id);
      points.push_back({{"id", id}, {"term", meta.preferred_term}, {"group", meta.semantic_group}, {"x", p.x}, {"y", p.y}});
    }
    return {200, {{"corpus_id", corpus_id}, {"aligned", c->projection.aligned}, {"points", points}}};
  }

  /// Case-insensitive substring search over preferred terms and synonyms of
  /// selectable concepts, ranked exact < prefix < substring, then by the
  /// length of the best-matching term, then by id.
  ApiResponse search(const std::string& q) const {
    if (detail::utf8_length(q) < 2) {
      return detail::error_response(400, "QueryTooShort", "search queries need at least 2 characters");
    }
    const std::string needle = detail::ascii_lower(q);
    struct Hit {
      int kind;
      std::size_t length;
      const SearchEntry* entry;
      std::size_t term;
    };
    std::vector<Hit> hits;
    for (const auto& e : search_index_) {
      std::optional<Hit> best;
      for (std::size_t t = 0; t < e.terms.size(); ++t) {
        const auto& term = e.terms[t];
        const auto pos = term.find(needle);
        if (pos == std::string::npos) continue;
        const int kind = term.size() == needle.size() ? 0 : (pos == 0 ? 1 : 2);
        const Hit h{kind, term.size(), &e, t};
        if (!best || std::tie(h.kind, h.length) < std::tie(best->kind, best->length)) best = h;
      }
      if (best) hits.push_back(*best);
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
      return std::tie(a.kind, a.length, a.entry->id) < std::tie(b.kind, b.length, b.entry->id);
    });
    if (hits.size() > kMaxSearchResults) hits.resize(kMaxSearchResults);

    static constexpr std::string_view kinds[] = {"exact", "prefix", "substring"};
    nlohmann::json results = nlohmann::json::array();
    for (const auto& h : hits) {
      const auto& meta = metadata(h.entry->id);
      const std::string& matched = h.term == 0 ? meta.preferred_term : meta.synonyms[h.term - 1];
      results.push_back({{"id", h.entry->id},
                         {"preferred_term", meta.preferred_term},
                         {"semantic_group", meta.semantic_group},
                         {"matched_term", matched},
                         {"match", kinds[h.kind]}});
    }
    return {200, {{"query", q}, {"results", results}}};
  }

  ApiResponse concept_detail(const ConceptId& id) const {
    if (auto err = check_selectable(id)) return *err;
    const auto& meta = metadata(id);
    nlohmann::json blocks = nlohmann::json::array();
    for (std::size_t ci = 0; ci < snapshot_->corpora.size(); ++ci) {
      const auto& c = snapshot_->corpora[ci];
      const auto* rec = c.confidence_of(id);
      const bool present = rec != nullptr;
      const bool high = present && rec->high_confidence;
      nlohmann::json neighbors = nlohmann::json::array();
      if (present) {
        if (const auto it = c.neighbors.find(id); it != c.neighbors.end()) {
          for (const auto& row : it->second.rows) {
            neighbors.push_back({{"id", row.id},
                                 {"preferred_term", metadata(row.id).preferred_term},
                                 {"mean_sim", row.mean_sim},
                                 {"std_sim", row.std_sim}});
          }
        }
      }
      blocks.push_back({{"corpus_id", c.descriptor.id},
                        {"label", c.descriptor.label},
                        {"order_index", c.descriptor.order_index},
                        {"present", present},
                        {"ec", present ? nlohmann::json(rec->ec) : nlohmann::json(nullptr)},
                        {"high_confidence", high},
                        {"warning", present && !high},
                        {"neighbors", neighbors}});
    }
    return {200,
            {{"concept", {{"id", meta.id},
                          {"preferred_term", meta.preferred_term},
                          {"synonyms", meta.synonyms},
                          {"semantic_group", meta.semantic_group},
                          {"definitions", meta.definitions}}},
             {"corpora", blocks}}};
  }

  ApiResponse similarity(const ConceptId& ref, const std::vector<ConceptId>& cmps) const {
    if (cmps.empty()) return detail::error_response(400, "MissingParameter", "at least one 'cmp' parameter is required");
    if (cmps.size() > kMaxComparisons) {
      return detail::error_response(400, "TooManyComparisons",
                                    std::to_string(cmps.size()) + " comparisons requested; at most " +
                                        std::to_string(kMaxComparisons) + " allowed");
    }
    if (auto err = check_selectable(ref)) return *err;
    for (const auto& c : cmps) {
      if (auto err = check_selectable(c)) return *err;
    }
    std::vector<SeriesCorpus<StoredVectors>> corpora;
    for (std::size_t ci = 0; ci < snapshot_->corpora.size(); ++ci) {
      const auto& c = snapshot_->corpora[ci];
      corpora.push_back({c.descriptor.id, c.descriptor.order_index, &c.vectors, &high_conf_[ci]});
    }
    const auto series = similarity_series<StoredVectors>(corpora, ref, cmps);
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : series) {
      nlohmann::json points = nlohmann::json::array();
      for (const auto& p : s.points) {
        points.push_back({{"corpus_id", p.corpus_id},
                          {"present", p.present},
                          {"mean", p.present ? nlohmann::json(p.mean) : nlohmann::json(nullptr)},
                          {"std", p.present ? nlohmann::json(p.std) : nlohmann::json(nullptr)},
                          {"ref_high_conf", p.ref_high_conf},
                          {"cmp_high_conf", p.cmp_high_conf}});
      }
      out.push_back({{"reference", s.reference}, {"comparison", s.comparison}, {"points", points}});
    }
    return {200, out};
  }

 private:
  struct SearchEntry {
    ConceptId id;
    std::vector<std::string> terms;  // lowercased; [0] is the preferred term
  };

  const CorpusPayload* find_corpus(const std::string& id) const {
    const auto it = corpus_index_.find(id);
    return it == corpus_index_.end() ? nullptr : &snapshot_->corpora[it->second];
  }

  const ConceptMetadata& metadata(const ConceptId& id) const {
    // validate_snapshot guarantees every referenced concept has metadata
    return snapshot_->concepts.at(id);
  }

  std::optional<ApiResponse> check_selectable(const ConceptId& id) const {
    if (!snapshot_->concepts.contains(id)) {
      return detail::error_response(404, "UnknownConcept", "no concept '" + id + "'");
    }
    if (!selectable_.contains(id)) {
      return detail::error_response(409, "NotSelectable",
                                    "concept '" + id + "' is not high-confidence in any corpus");
    }
    return std::nullopt;
  }

  std::shared_ptr<const Snapshot> snapshot_;
  ConceptSet selectable_;
  std::vector<ConceptSet> high_conf_;
  std::map<std::string, std::size_t> corpus_index_;
  std::vector<SearchEntry> search_index_;
};

struct ServiceOptions {
  /// Origins granted cross-origin access. "*" allows any origin.
  std::vector<std::string> allowed_origins = {"http://localhost:5173", "http://127.0.0.1:5173",
                                              "http://localhost:4173", "http://127.0.0.1:4173",
                                              "http://localhost:3000", "http://127.0.0.1:3000"};
};

/// Registers the API routes on an httplib server.
inline void mount(httplib::Server& server, std::shared_ptr<const ApiService> api, ServiceOptions options = {}) {
  auto handler = [api, options = std::move(options)](const httplib::Request& req, httplib::Response& res) {
    QueryParams query(req.params.begin(), req.params.end());
    ApiResponse out;
    try {
      out = api->handle(req.path, query);
    } catch (const std::exception& e) {
      out = detail::error_response(500, "Internal", e.what());
    }
    if (req.has_header("Origin")) {
      const auto origin = req.get_header_value("Origin");
      const auto& allowed = options.allowed_origins;
      if (std::find(allowed.begin(), allowed.end(), "*") != allowed.end() ||
          std::find(allowed.begin(), allowed.end(), origin) != allowed.end()) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Vary", "Origin");
      }
    }
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json; charset=utf-8");
  };
  server.Get(R"(/api/.*)", handler);
}

}  // namespace textessence
