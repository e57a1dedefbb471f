#pragma once

// Embedding replicate files (word2vec text layout) and terminology metadata.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "textessence/detail/parallel.hpp"
#include "textessence/error.hpp"

namespace textessence {

/// Concept identifiers are compared byte-for-byte; std::string ordering is
/// unsigned byte order, which is the tie-break order used throughout.
using ConceptId = std::string;

inline bool is_valid_concept_id(std::string_view id) noexcept {
  if (id.empty()) return false;
  return std::none_of(id.begin(), id.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  });
}

namespace detail {

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

inline std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(sep, start);
    if (end == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

template <class T>
std::optional<T> parse_number(std::string_view text) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return value;
}

}  // namespace detail

/// One embedding matrix: the output of a single training run on one corpus.
class EmbeddingReplicate {
 public:
  EmbeddingReplicate() = default;
  explicit EmbeddingReplicate(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
  }

  std::string corpus_id;
  std::size_t replicate_index = 0;

  /// Appends a vector. Rejects duplicates, wrong lengths, non-finite values
  /// and all-zero vectors (cosine similarity is undefined for those).
  void add(const ConceptId& id, std::span<const float> values) {
    if (!is_valid_concept_id(id)) {
      throw Error(ErrorCode::InvalidArgument, "invalid concept id '" + id + "'");
    }
    if (values.size() != dim_) {
      throw Error(ErrorCode::DimensionMismatch, "token '" + id + "' has " +
                                                    std::to_string(values.size()) +
                                                    " components, expected " + std::to_string(dim_));
    }
    if (index_.contains(id)) throw Error(ErrorCode::DuplicateToken, "duplicate token '" + id + "'");
    bool nonzero = false;
    for (float v : values) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteValue, "token '" + id + "' has a non-finite component");
      }
      nonzero = nonzero || v != 0.0f;
    }
    if (!nonzero) throw Error(ErrorCode::ZeroVector, "token '" + id + "' has an all-zero vector");

    index_.emplace(id, tokens_.size());
    tokens_.push_back(id);
    data_.insert(data_.end(), values.begin(), values.end());
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(const ConceptId& id) const { return index_.contains(id); }

  /// Tokens in file order.
  std::span<const ConceptId> tokens() const noexcept { return tokens_; }

  const float* find(const ConceptId& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : data_.data() + it->second * dim_;
  }

  std::span<const float> vector(const ConceptId& id) const {
    const float* p = find(id);
    if (p == nullptr) throw Error(ErrorCode::ConceptAbsent, "concept '" + id + "' not in replicate");
    return {p, dim_};
  }

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  friend bool operator==(const EmbeddingReplicate& a, const EmbeddingReplicate& b) {
    return a.corpus_id == b.corpus_id && a.replicate_index == b.replicate_index &&
           a.dim_ == b.dim_ && a.tokens_ == b.tokens_ && a.data_ == b.data_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<ConceptId> tokens_;
  std::vector<float> data_;
  std::unordered_map<ConceptId, std::size_t> index_;
};

/// Parses word2vec text format: a "<count> <dim>" header followed by count
/// lines of "<token> <v1> ... <vdim>". Error messages carry the line number.
inline EmbeddingReplicate parse_embedding_file(std::istream& in,
                                               std::optional<std::size_t> expected_dim = {},
                                               std::string_view source_name = "<stream>") {
  const std::string where = std::string(source_name);
  auto at_line = [&](std::size_t line_no) { return where + ":" + std::to_string(line_no) + ": "; };

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::HeaderMalformed, at_line(1) + "missing header line");
  }
  detail::strip_cr(line);
  const auto header = detail::split_whitespace(line);
  std::optional<std::size_t> count;
  std::optional<std::size_t> dim;
  if (header.size() == 2) {
    count = detail::parse_number<std::size_t>(header[0]);
    dim = detail::parse_number<std::size_t>(header[1]);
  }
  if (!count || !dim || *dim == 0) {
    throw Error(ErrorCode::HeaderMalformed, at_line(1) + "expected '<count> <dim>', got '" + line + "'");
  }
  if (expected_dim && *expected_dim != *dim) {
    throw Error(ErrorCode::DimensionMismatch, at_line(1) + "header dim " + std::to_string(*dim) +
                                                  " differs from expected " +
                                                  std::to_string(*expected_dim));
  }

  EmbeddingReplicate replicate(*dim);
  std::vector<float> values(*dim);
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    const auto fields = detail::split_whitespace(line);
    if (fields.empty()) continue;
    if (replicate.size() == *count) {
      throw Error(ErrorCode::CountMismatch,
                  at_line(line_no) + "more vectors than the header count " + std::to_string(*count));
    }
    if (fields.size() != *dim + 1) {
      throw Error(ErrorCode::DimensionMismatch, at_line(line_no) + "expected " +
                                                    std::to_string(*dim) + " components, got " +
                                                    std::to_string(fields.size() - 1));
    }
    for (std::size_t j = 0; j < *dim; ++j) {
      const auto v = detail::parse_number<float>(fields[j + 1]);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorCode::NonFiniteValue, at_line(line_no) + "component " + std::to_string(j + 1) +
                                                   " ('" + std::string(fields[j + 1]) +
                                                   "') is not a finite number");
      }
      values[j] = *v;
    }
    try {
      replicate.add(ConceptId(fields[0]), values);
    } catch (const Error& e) {
      throw Error(e.code(), at_line(line_no) + e.detail());
    }
  }
  if (replicate.size() != *count) {
    throw Error(ErrorCode::CountMismatch, where + ": header declares " + std::to_string(*count) +
                                              " vectors, found " + std::to_string(replicate.size()));
  }
  return replicate;
}

inline EmbeddingReplicate parse_embedding_file(const std::filesystem::path& path,
                                               std::optional<std::size_t> expected_dim = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open embedding file " + path.string());
  return parse_embedding_file(in, expected_dim, path.string());
}

/// Writes word2vec text with 6 significant digits per component.
inline void serialize_embedding(const EmbeddingReplicate& replicate, std::ostream& out) {
  out << replicate.size() << ' ' << replicate.dim() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < replicate.size(); ++i) {
    out << replicate.tokens()[i];
    for (float v : replicate.row(i)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

struct VocabularyReport {
  std::vector<std::size_t> replicate_sizes;
  std::size_t shared_size = 0;
};

/// All replicates trained on one corpus. Downstream computations use the
/// shared vocabulary, i.e. the concepts present in every replicate.
class ReplicateSet {
 public:
  ReplicateSet(std::string corpus_id, std::string label, int order_index,
               std::vector<EmbeddingReplicate> replicates)
      : corpus_id_(std::move(corpus_id)),
        label_(std::move(label)),
        order_index_(order_index),
        replicates_(std::move(replicates)) {
    if (replicates_.size() < 2) {
      throw Error(ErrorCode::TooFewReplicates,
                  "corpus '" + corpus_id_ + "' has " + std::to_string(replicates_.size()) +
                      " replicate(s); at least 2 are required");
    }
    const std::size_t dim = replicates_.front().dim();
    for (std::size_t i = 0; i < replicates_.size(); ++i) {
      auto& r = replicates_[i];
      if (r.dim() != dim) {
        throw Error(ErrorCode::DimMismatchAcrossReplicates,
                    "corpus '" + corpus_id_ + "': replicate " + std::to_string(i) + " has dim " +
                        std::to_string(r.dim()) + ", replicate 0 has dim " + std::to_string(dim));
      }
      r.corpus_id = corpus_id_;
      r.replicate_index = i;
      report_.replicate_sizes.push_back(r.size());
    }

    const auto& first = replicates_.front();
    for (const auto& token : first.tokens()) {
      const bool everywhere = std::all_of(replicates_.begin() + 1, replicates_.end(),
                                          [&](const EmbeddingReplicate& r) { return r.contains(token); });
      if (everywhere) shared_.push_back(token);
    }
    std::sort(shared_.begin(), shared_.end());
    report_.shared_size = shared_.size();
    if (shared_.empty()) {
      throw Error(ErrorCode::EmptySharedVocabulary,
                  "corpus '" + corpus_id_ + "': replicates share no vocabulary");
    }
  }

  const std::string& corpus_id() const noexcept { return corpus_id_; }
  const std::string& label() const noexcept { return label_; }
  int order_index() const noexcept { return order_index_; }
  std::span<const EmbeddingReplicate> replicates() const noexcept { return replicates_; }
  std::size_t replicate_count() const noexcept { return replicates_.size(); }
  std::size_t dim() const noexcept { return replicates_.front().dim(); }
  const VocabularyReport& report() const noexcept { return report_; }

  /// Concepts present in every replicate, in ascending byte order.
  std::span<const ConceptId> shared_vocabulary() const noexcept { return shared_; }

  bool present(const ConceptId& id) const {
    return std::binary_search(shared_.begin(), shared_.end(), id);
  }

  std::span<const float> vector(std::size_t replicate, const ConceptId& id) const {
    return replicates_.at(replicate).vector(id);
  }

 private:
  std::string corpus_id_;
  std::string label_;
  int order_index_ = 0;
  std::vector<EmbeddingReplicate> replicates_;
  std::vector<ConceptId> shared_;
  VocabularyReport report_;
};

/// Loads one replicate per path; replicate_index i corresponds to paths[i].
inline ReplicateSet load_replicate_set(std::span<const std::filesystem::path> paths, std::string corpus_id,
                                       std::string label, int order_index) {
  if (paths.size() < 2) {
    throw Error(ErrorCode::TooFewReplicates, "corpus '" + corpus_id + "' needs at least 2 embedding files, got " +
                                                 std::to_string(paths.size()));
  }
  std::vector<EmbeddingReplicate> replicates(paths.size());
  detail::parallel_for(paths.size(), [&](std::size_t i) { replicates[i] = parse_embedding_file(paths[i]); });
  return ReplicateSet(std::move(corpus_id), std::move(label), order_index, std::move(replicates));
}

struct ConceptMetadata {
  ConceptId id;
  std::string preferred_term;
  std::vector<std::string> synonyms;
  std::string semantic_group = "Unknown";
  std::vector<std::string> definitions;

  friend bool operator==(const ConceptMetadata&, const ConceptMetadata&) = default;
};

/// Metadata for a concept that has embeddings but no terminology entry.
inline ConceptMetadata synthesize_metadata(const ConceptId& id) {
  ConceptMetadata m;
  m.id = id;
  m.preferred_term = id;
  return m;
}

using ConceptCatalog = std::map<ConceptId, ConceptMetadata>;

/// Folds `entry` into `catalog`: the first preferred term and non-default
/// group win, synonyms and definitions are unioned in first-seen order.
inline void merge_metadata(ConceptCatalog& catalog, const ConceptMetadata& entry) {
  auto [it, inserted] = catalog.try_emplace(entry.id, entry);
  if (inserted) return;
  auto& existing = it->second;
  if (existing.semantic_group == "Unknown" && entry.semantic_group != "Unknown") {
    existing.semantic_group = entry.semantic_group;
  }
  for (const auto& s : entry.synonyms) {
    if (std::find(existing.synonyms.begin(), existing.synonyms.end(), s) == existing.synonyms.end()) {
      existing.synonyms.push_back(s);
    }
  }
  for (const auto& d : entry.definitions) {
    if (std::find(existing.definitions.begin(), existing.definitions.end(), d) == existing.definitions.end()) {
      existing.definitions.push_back(d);
    }
  }
}

struct TerminologyIssue {
  std::size_t line = 0;
  std::string message;
};

struct Terminology {
  ConceptCatalog entries;
  std::vector<TerminologyIssue> issues;  // skipped rows
  std::size_t rows = 0;                  // non-blank rows seen
};

/// Parses a 5-column TSV: concept_id, preferred_term, synonyms (|-separated),
/// semantic_group, definition. Malformed rows are skipped and reported; if
/// more than half of the rows are malformed the whole file is rejected.
inline Terminology parse_terminology(std::istream& in, std::string_view source_name = "<stream>") {
  Terminology result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    ++result.rows;

    const auto cols = detail::split_on(line, '\t');
    if (cols.size() != 5) {
      result.issues.push_back({line_no, "expected 5 tab-separated columns, got " + std::to_string(cols.size())});
      continue;
    }
    const auto id = detail::trim(cols[0]);
    const auto term = detail::trim(cols[1]);
    if (!is_valid_concept_id(id)) {
      result.issues.push_back({line_no, "invalid concept id '" + std::string(cols[0]) + "'"});
      continue;
    }
    if (term.empty()) {
      result.issues.push_back({line_no, "empty preferred term"});
      continue;
    }

    ConceptMetadata entry;
    entry.id = ConceptId(id);
    entry.preferred_term = std::string(term);
    for (auto syn : detail::split_on(cols[2], '|')) {
      syn = detail::trim(syn);
      if (syn.empty()) continue;
      if (std::find(entry.synonyms.begin(), entry.synonyms.end(), syn) == entry.synonyms.end()) {
        entry.synonyms.emplace_back(syn);
      }
    }
    if (const auto group = detail::trim(cols[3]); !group.empty()) entry.semantic_group = std::string(group);
    if (const auto def = detail::trim(cols[4]); !def.empty()) entry.definitions.emplace_back(def);
    merge_metadata(result.entries, entry);
  }

  if (result.rows > 0 && result.issues.size() * 2 > result.rows) {
    throw Error(ErrorCode::TerminologyMalformed,
                std::string(source_name) + ": " + std::to_string(result.issues.size()) + " of " +
                    std::to_string(result.rows) + " rows are malformed (first at line " +
                    std::to_string(result.issues.front().line) + ": " + result.issues.front().message + ")");
  }
  return result;
}

inline Terminology parse_terminology(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open terminology file " + path.string());
  return parse_terminology(in, path.string());
}

}  // namespace textessence
