#pragma once

// On-disk snapshot of everything the service needs: a JSON manifest with
// per-file SHA-256 digests, concept metadata, and one directory per corpus.
//
//   manifest.json
//   concepts.json
//   corpora/<id>/confidence.json
//   corpora/<id>/neighbors.json
//   corpora/<id>/projection.json
//   corpora/<id>/vectors.idx.json
//   corpora/<id>/vectors.f32        little-endian binary32, replicate-major
//
// Reals are stored as binary32. Snapshots built with quantize() round-trip
// exactly.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <json.hpp>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "textessence/error.hpp"
#include "textessence/ingest.hpp"
#include "textessence/projection.hpp"
#include "textessence/stability.hpp"

namespace textessence {

inline constexpr int kSnapshotFormatVersion = 1;

/// JSON flavour used for snapshot files: sorted keys, binary32 reals printed
/// in shortest round-trip form.
using SnapshotJson =
    nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t, std::uint64_t, float>;

struct CorpusDescriptor {
  std::string id;
  std::string label;
  int order_index = 0;
  std::size_t vocab_size = 0;
  std::size_t high_conf_count = 0;
  std::size_t m = 0;
  std::size_t dim = 0;
  std::size_t k = 0;
  double threshold = 0.0;
  std::size_t n_neighbors = 0;
  double perplexity = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const CorpusDescriptor&, const CorpusDescriptor&) = default;
};

/// Per-replicate vectors kept for selectable concepts, laid out
/// replicate-major: data[(r * count + c) * dim + j].
class StoredVectors {
 public:
  StoredVectors() = default;
  StoredVectors(std::size_t m, std::size_t dim, std::vector<ConceptId> concepts, std::vector<float> data)
      : m_(m), dim_(dim), concepts_(std::move(concepts)), data_(std::move(data)) {
    if (!std::is_sorted(concepts_.begin(), concepts_.end()) ||
        std::adjacent_find(concepts_.begin(), concepts_.end()) != concepts_.end()) {
      throw Error(ErrorCode::ConsistencyViolation, "stored vector concepts must be sorted and unique");
    }
    if (data_.size() != m_ * concepts_.size() * dim_) {
      throw Error(ErrorCode::ConsistencyViolation, "stored vector block has the wrong size");
    }
  }

  /// Copies the vectors of `keep` ∩ shared vocabulary out of a replicate set.
  static StoredVectors from(const ReplicateSet& set, const ConceptSet& keep) {
    std::vector<ConceptId> ids;
    for (const auto& id : keep) {
      if (set.present(id)) ids.push_back(id);
    }
    std::vector<float> data;
    data.reserve(set.replicate_count() * ids.size() * set.dim());
    for (std::size_t r = 0; r < set.replicate_count(); ++r) {
      for (const auto& id : ids) {
        const auto v = set.vector(r, id);
        data.insert(data.end(), v.begin(), v.end());
      }
    }
    return {set.replicate_count(), set.dim(), std::move(ids), std::move(data)};
  }

  std::size_t replicate_count() const noexcept { return m_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const ConceptId> concepts() const noexcept { return concepts_; }
  std::span<const float> data() const noexcept { return data_; }

  std::optional<std::size_t> position(const ConceptId& id) const {
    const auto it = std::lower_bound(concepts_.begin(), concepts_.end(), id);
    if (it == concepts_.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - concepts_.begin());
  }

  bool present(const ConceptId& id) const { return position(id).has_value(); }

  std::span<const float> vector(std::size_t replicate, const ConceptId& id) const {
    const auto pos = position(id);
    if (!pos) throw Error(ErrorCode::ConceptAbsent, "no stored vectors for '" + id + "'");
    if (replicate >= m_) throw Error(ErrorCode::InvalidArgument, "replicate index out of range");
    return {data_.data() + (replicate * concepts_.size() + *pos) * dim_, dim_};
  }

  friend bool operator==(const StoredVectors&, const StoredVectors&) = default;

 private:
  std::size_t m_ = 0;
  std::size_t dim_ = 0;
  std::vector<ConceptId> concepts_;
  std::vector<float> data_;
};

struct CorpusPayload {
  CorpusDescriptor descriptor;
  std::vector<ConfidenceRecord> confidence;  // ascending concept id
  std::map<ConceptId, NeighborTable> neighbors;
  ProjectionFrame projection;
  StoredVectors vectors;

  const ConfidenceRecord* confidence_of(const ConceptId& id) const {
    const auto it = std::lower_bound(confidence.begin(), confidence.end(), id,
                                     [](const ConfidenceRecord& r, const ConceptId& x) { return r.concept_id < x; });
    return it != confidence.end() && it->concept_id == id ? &*it : nullptr;
  }

  ConceptSet high_confidence() const {
    std::vector<ConceptId> ids;
    for (const auto& r : confidence) {
      if (r.high_confidence) ids.push_back(r.concept_id);
    }
    return ConceptSet(std::move(ids));
  }

  friend bool operator==(const CorpusPayload&, const CorpusPayload&) = default;
};

struct Snapshot {
  int format_version = kSnapshotFormatVersion;
  std::string created;  // informational timestamp, excluded from payload digests
  ConceptCatalog concepts;
  std::vector<CorpusPayload> corpora;  // ascending order_index

  /// Concepts high-confidence in at least one corpus.
  ConceptSet selectable() const {
    std::vector<ConceptId> ids;
    for (const auto& c : corpora) {
      for (const auto& r : c.confidence) {
        if (r.high_confidence) ids.push_back(r.concept_id);
      }
    }
    return ConceptSet(std::move(ids));
  }

  friend bool operator==(const Snapshot& a, const Snapshot& b) {
    return a.format_version == b.format_version && a.concepts == b.concepts && a.corpora == b.corpora;
  }
};

// The volatile keeps GCC 11 at -O3 from vectorising the float round trip and
// then folding it away.
inline double to_binary32(double v) {
  volatile float f = static_cast<float>(v);
  return f;
}

/// Rounds every stored real to binary32 so the in-memory snapshot equals
/// what read_snapshot() returns.
inline void quantize(Snapshot& snapshot) {
  for (auto& c : snapshot.corpora) {
    c.descriptor.threshold = to_binary32(c.descriptor.threshold);
    c.descriptor.perplexity = to_binary32(c.descriptor.perplexity);
    for (auto& r : c.confidence) r.ec = to_binary32(r.ec);
    for (auto& [id, table] : c.neighbors) {
      for (auto& row : table.rows) {
        row.mean_sim = to_binary32(row.mean_sim);
        row.std_sim = to_binary32(row.std_sim);
      }
    }
    c.projection.perplexity = to_binary32(c.projection.perplexity);
    c.projection.kl_final = to_binary32(c.projection.kl_final);
    for (auto& [id, p] : c.projection.points) p = {to_binary32(p.x), to_binary32(p.y)};
  }
}

inline bool is_valid_corpus_id(std::string_view id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-' ||
           ch == '_' || ch == '.';
  });
}

/// Checks every cross-reference invariant; throws ConsistencyViolation.
inline void validate_snapshot(const Snapshot& s) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConsistencyViolation, msg); };
  auto require_known = [&](const ConceptId& id, const std::string& where) {
    if (!s.concepts.contains(id)) fail("concept '" + id + "' referenced in " + where + " has no metadata");
  };
  for (const auto& [id, meta] : s.concepts) {
    if (id != meta.id) fail("concept metadata key '" + id + "' does not match its id '" + meta.id + "'");
    if (meta.preferred_term.empty()) fail("concept '" + id + "' has an empty preferred term");
  }

  const ConceptSet selectable = s.selectable();
  std::set<std::string> ids;
  for (std::size_t ci = 0; ci < s.corpora.size(); ++ci) {
    const auto& c = s.corpora[ci];
    const auto& d = c.descriptor;
    const std::string where = "corpus '" + d.id + "'";
    if (!is_valid_corpus_id(d.id)) fail("invalid corpus id '" + d.id + "'");
    if (!ids.insert(d.id).second) fail("duplicate corpus id '" + d.id + "'");
    if (ci > 0 && s.corpora[ci - 1].descriptor.order_index > d.order_index) fail("corpora not ordered by order_index");
    if (!std::is_sorted(c.confidence.begin(), c.confidence.end(),
                        [](const auto& a, const auto& b) { return a.concept_id < b.concept_id; })) {
      fail(where + ": confidence records not sorted");
    }
    if (d.vocab_size != c.confidence.size()) fail(where + ": vocab_size does not match confidence records");

    std::vector<ConceptId> high;
    for (const auto& r : c.confidence) {
      require_known(r.concept_id, where + " confidence");
      if (r.corpus_id != d.id) fail(where + ": confidence record for another corpus");
      if (r.ec < 0.0 || r.ec > 1.0) fail(where + ": EC outside [0, 1] for '" + r.concept_id + "'");
      if (r.high_confidence != (r.ec >= d.threshold)) {
        fail(where + ": high_confidence flag disagrees with threshold for '" + r.concept_id + "'");
      }
      if (r.high_confidence) high.push_back(r.concept_id);
    }
    if (d.high_conf_count != high.size()) fail(where + ": high_conf_count does not match confidence records");
    const ConceptSet high_set(std::move(high));

    for (const auto& [id, table] : c.neighbors) {
      require_known(id, where + " neighbors");
      if (table.concept_id != id || table.corpus_id != d.id) fail(where + ": neighbor table key mismatch");
      if (!c.confidence_of(id)) fail(where + ": neighbor table for '" + id + "' outside the vocabulary");
      for (const auto& row : table.rows) {
        require_known(row.id, where + " neighbors of '" + id + "'");
        if (!high_set.contains(row.id)) fail(where + ": neighbor '" + row.id + "' is not high-confidence");
      }
    }

    if (c.projection.corpus_id != d.id) fail(where + ": projection corpus id mismatch");
    if (c.projection.points.size() != high_set.size()) fail(where + ": projection does not cover the high-confidence set");
    for (const auto& [id, p] : c.projection.points) {
      require_known(id, where + " projection");
      if (!high_set.contains(id)) fail(where + ": projected concept '" + id + "' is not high-confidence");
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) fail(where + ": non-finite projection coordinate");
    }

    if (c.vectors.replicate_count() != d.m || (c.vectors.dim() != d.dim && !c.vectors.concepts().empty())) {
      fail(where + ": stored vector shape does not match descriptor");
    }
    std::vector<ConceptId> expected;
    for (const auto& r : c.confidence) {
      if (selectable.contains(r.concept_id)) expected.push_back(r.concept_id);
    }
    if (!std::equal(expected.begin(), expected.end(), c.vectors.concepts().begin(), c.vectors.concepts().end())) {
      fail(where + ": stored vectors must cover exactly the selectable concepts in its vocabulary");
    }
  }
}

namespace detail {

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Internal, "SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
}

inline std::string encode_f32_le(std::span<const float> values) {
  std::string out(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
  return out;
}

inline std::vector<float> decode_f32_le(std::string_view bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

inline std::string dump(const SnapshotJson& j) { return j.dump(1) + "\n"; }

inline SnapshotJson to_json(const CorpusDescriptor& d) {
  SnapshotJson j;
  j["id"] = d.id;
  j["label"] = d.label;
  j["order_index"] = d.order_index;
  j["vocab_size"] = d.vocab_size;
  j["high_conf_count"] = d.high_conf_count;
  j["m"] = d.m;
  j["dim"] = d.dim;
  j["k"] = d.k;
  j["threshold"] = static_cast<float>(d.threshold);
  j["n_neighbors"] = d.n_neighbors;
  j["tsne"] = {{"perplexity", static_cast<float>(d.perplexity)}, {"iterations", d.iterations}, {"seed", d.seed}};
  return j;
}

inline CorpusDescriptor descriptor_from_json(const SnapshotJson& j) {
  CorpusDescriptor d;
  d.id = j.at("id").get<std::string>();
  d.label = j.at("label").get<std::string>();
  d.order_index = j.at("order_index").get<int>();
  d.vocab_size = j.at("vocab_size").get<std::size_t>();
  d.high_conf_count = j.at("high_conf_count").get<std::size_t>();
  d.m = j.at("m").get<std::size_t>();
  d.dim = j.at("dim").get<std::size_t>();
  d.k = j.at("k").get<std::size_t>();
  d.threshold = j.at("threshold").get<float>();
  d.n_neighbors = j.at("n_neighbors").get<std::size_t>();
  d.perplexity = j.at("tsne").at("perplexity").get<float>();
  d.iterations = j.at("tsne").at("iterations").get<std::size_t>();
  d.seed = j.at("tsne").at("seed").get<std::uint64_t>();
  return d;
}

inline SnapshotJson concepts_to_json(const ConceptCatalog& catalog) {
  SnapshotJson arr = SnapshotJson::array();
  for (const auto& [id, m] : catalog) {
    arr.push_back({{"id", m.id},
                   {"preferred_term", m.preferred_term},
                   {"synonyms", m.synonyms},
                   {"semantic_group", m.semantic_group},
                   {"definitions", m.definitions}});
  }
  return {{"concepts", arr}};
}

inline ConceptCatalog concepts_from_json(const SnapshotJson& j) {
  ConceptCatalog catalog;
  for (const auto& e : j.at("concepts")) {
    ConceptMetadata m;
    m.id = e.at("id").get<std::string>();
    m.preferred_term = e.at("preferred_term").get<std::string>();
    m.synonyms = e.at("synonyms").get<std::vector<std::string>>();
    m.semantic_group = e.at("semantic_group").get<std::string>();
    m.definitions = e.at("definitions").get<std::vector<std::string>>();
    const auto id = m.id;
    catalog.emplace(id, std::move(m));
  }
  return catalog;
}

struct CorpusFiles {
  std::string confidence;
  std::string neighbors;
  std::string projection;
  std::string vectors_index;
  std::string vectors;
};

inline CorpusFiles encode_corpus(const CorpusPayload& c) {
  CorpusFiles f;
  SnapshotJson records = SnapshotJson::array();
  for (const auto& r : c.confidence) {
    records.push_back({{"concept", r.concept_id}, {"ec", static_cast<float>(r.ec)}, {"high_confidence", r.high_confidence}});
  }
  f.confidence = dump({{"corpus_id", c.descriptor.id},
                       {"k", c.descriptor.k},
                       {"threshold", static_cast<float>(c.descriptor.threshold)},
                       {"records", records}});

  SnapshotJson tables = SnapshotJson::object();
  for (const auto& [id, t] : c.neighbors) {
    SnapshotJson rows = SnapshotJson::array();
    for (const auto& row : t.rows) {
      rows.push_back({{"id", row.id}, {"mean_sim", static_cast<float>(row.mean_sim)}, {"std_sim", static_cast<float>(row.std_sim)}});
    }
    tables[id] = {{"n", t.n}, {"rows", rows}};
  }
  f.neighbors = dump({{"corpus_id", c.descriptor.id}, {"tables", tables}});

  SnapshotJson points = SnapshotJson::object();
  for (const auto& [id, p] : c.projection.points) {
    points[id] = {{"x", static_cast<float>(p.x)}, {"y", static_cast<float>(p.y)}};
  }
  f.projection = dump({{"corpus_id", c.projection.corpus_id},
                       {"aligned", c.projection.aligned},
                       {"seed", c.projection.seed},
                       {"perplexity", static_cast<float>(c.projection.perplexity)},
                       {"kl_final", static_cast<float>(c.projection.kl_final)},
                       {"points", points}});

  const auto& v = c.vectors;
  const std::size_t count = v.concepts().size();
  SnapshotJson offsets = SnapshotJson::object();
  for (std::size_t i = 0; i < count; ++i) {
    SnapshotJson per = SnapshotJson::array();
    for (std::size_t r = 0; r < v.replicate_count(); ++r) per.push_back((r * count + i) * v.dim());
    offsets[v.concepts()[i]] = per;
  }
  f.vectors_index = dump({{"m", v.replicate_count()},
                          {"dim", v.dim()},
                          {"count", count},
                          {"layout", "replicate-major float32 little-endian; offsets in floats"},
                          {"offsets", offsets}});
  f.vectors = encode_f32_le(v.data());
  return f;
}

inline SnapshotJson parse_json(std::string_view bytes, const std::string& name) {
  try {
    return SnapshotJson::parse(bytes);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConsistencyViolation, name + ": invalid JSON: " + e.what());
  }
}

}  // namespace detail

/// Validates, then writes the snapshot atomically (temporary sibling
/// directory renamed into place). Returns the SHA-256 of manifest.json.
inline std::string write_snapshot(const std::filesystem::path& root, const Snapshot& snapshot) {
  namespace fs = std::filesystem;
  validate_snapshot(snapshot);

  std::map<std::string, std::string> files;  // relative path -> bytes
  files["concepts.json"] = detail::dump(detail::concepts_to_json(snapshot.concepts));
  for (const auto& c : snapshot.corpora) {
    const std::string dir = "corpora/" + c.descriptor.id + "/";
    auto encoded = detail::encode_corpus(c);
    files[dir + "confidence.json"] = std::move(encoded.confidence);
    files[dir + "neighbors.json"] = std::move(encoded.neighbors);
    files[dir + "projection.json"] = std::move(encoded.projection);
    files[dir + "vectors.idx.json"] = std::move(encoded.vectors_index);
    files[dir + "vectors.f32"] = std::move(encoded.vectors);
  }

  SnapshotJson manifest;
  manifest["format_version"] = snapshot.format_version;
  manifest["created"] = snapshot.created;
  manifest["corpora"] = SnapshotJson::array();
  for (const auto& c : snapshot.corpora) manifest["corpora"].push_back(detail::to_json(c.descriptor));
  manifest["files"] = SnapshotJson::object();
  for (const auto& [name, bytes] : files) manifest["files"][name] = detail::sha256_hex(bytes);
  const std::string manifest_bytes = detail::dump(manifest);

  std::error_code ec;
  const fs::path target = fs::absolute(root);
  if (fs::exists(target) && !fs::is_directory(target)) {
    throw Error(ErrorCode::IoFailure, target.string() + " exists and is not a directory");
  }
  fs::create_directories(target.parent_path(), ec);
  std::random_device rd;
  const std::string suffix = std::to_string(rd()) + std::to_string(rd());
  const fs::path staging = target.parent_path() / (target.filename().string() + ".tmp-" + suffix);
  try {
    fs::create_directories(staging);
    for (const auto& [name, bytes] : files) {
      const fs::path p = staging / name;
      fs::create_directories(p.parent_path());
      detail::write_file(p, bytes);
    }
    detail::write_file(staging / "manifest.json", manifest_bytes);

    if (fs::exists(target)) {
      const fs::path old = target.parent_path() / (target.filename().string() + ".old-" + suffix);
      fs::rename(target, old);
      fs::rename(staging, target);
      fs::remove_all(old, ec);
    } else {
      fs::rename(staging, target);
    }
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging, ec);
    throw Error(ErrorCode::IoFailure, e.what());
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
  return detail::sha256_hex(manifest_bytes);
}

/// Loads and fully validates a snapshot, verifying every file digest.
inline Snapshot read_snapshot(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::is_directory(root)) throw Error(ErrorCode::MissingFile, "snapshot directory " + root.string() + " not found");
  if (!fs::exists(manifest_path)) throw Error(ErrorCode::MissingFile, "missing manifest.json in " + root.string());
  const auto manifest = detail::parse_json(detail::read_file(manifest_path), "manifest.json");

  Snapshot s;
  try {
    s.format_version = manifest.at("format_version").get<int>();
    if (s.format_version < 1 || s.format_version > kSnapshotFormatVersion) {
      throw Error(ErrorCode::UnsupportedVersion, "snapshot format_version " + std::to_string(s.format_version) +
                                                     " is not supported (max " +
                                                     std::to_string(kSnapshotFormatVersion) + ")");
    }
    s.created = manifest.value("created", std::string());

    std::map<std::string, std::string> files;
    for (const auto& [name, digest] : manifest.at("files").items()) {
      const fs::path p = root / name;
      if (!fs::exists(p)) throw Error(ErrorCode::MissingFile, "snapshot file " + name + " is missing");
      auto bytes = detail::read_file(p);
      if (detail::sha256_hex(bytes) != digest.get<std::string>()) {
        throw Error(ErrorCode::DigestMismatch, "digest mismatch for " + name);
      }
      files.emplace(name, std::move(bytes));
    }
    auto file = [&](const std::string& name) -> const std::string& {
      const auto it = files.find(name);
      if (it == files.end()) throw Error(ErrorCode::MissingFile, "manifest does not list " + name);
      return it->second;
    };

    s.concepts = detail::concepts_from_json(detail::parse_json(file("concepts.json"), "concepts.json"));
    for (const auto& dj : manifest.at("corpora")) {
      CorpusPayload c;
      c.descriptor = detail::descriptor_from_json(dj);
      const auto& d = c.descriptor;
      if (!is_valid_corpus_id(d.id)) throw Error(ErrorCode::ConsistencyViolation, "invalid corpus id '" + d.id + "'");
      const std::string dir = "corpora/" + d.id + "/";

      const auto conf = detail::parse_json(file(dir + "confidence.json"), dir + "confidence.json");
      for (const auto& r : conf.at("records")) {
        c.confidence.push_back({d.id, r.at("concept").get<std::string>(), r.at("ec").get<float>(), d.k,
                                r.at("high_confidence").get<bool>()});
      }

      const auto nb = detail::parse_json(file(dir + "neighbors.json"), dir + "neighbors.json");
      for (const auto& [id, t] : nb.at("tables").items()) {
        NeighborTable table{d.id, id, t.at("n").get<std::size_t>(), {}};
        for (const auto& row : t.at("rows")) {
          table.rows.push_back({row.at("id").get<std::string>(), row.at("mean_sim").get<float>(),
                                row.at("std_sim").get<float>()});
        }
        c.neighbors.emplace(id, std::move(table));
      }

      const auto pj = detail::parse_json(file(dir + "projection.json"), dir + "projection.json");
      c.projection.corpus_id = pj.at("corpus_id").get<std::string>();
      c.projection.aligned = pj.at("aligned").get<bool>();
      c.projection.seed = pj.at("seed").get<std::uint64_t>();
      c.projection.perplexity = pj.at("perplexity").get<float>();
      c.projection.kl_final = pj.at("kl_final").get<float>();
      for (const auto& [id, p] : pj.at("points").items()) {
        c.projection.points[id] = {p.at("x").get<float>(), p.at("y").get<float>()};
      }

      const auto idx = detail::parse_json(file(dir + "vectors.idx.json"), dir + "vectors.idx.json");
      const auto m = idx.at("m").get<std::size_t>();
      const auto dim = idx.at("dim").get<std::size_t>();
      const auto count = idx.at("count").get<std::size_t>();
      std::vector<ConceptId> ids;
      for (const auto& [id, offs] : idx.at("offsets").items()) ids.push_back(id);
      const auto& raw = file(dir + "vectors.f32");
      if (ids.size() != count || raw.size() != m * count * dim * 4) {
        throw Error(ErrorCode::ConsistencyViolation, dir + "vectors.f32 does not match its index");
      }
      for (std::size_t i = 0; i < count; ++i) {
        const auto& offs = idx.at("offsets").at(ids[i]);
        if (offs.size() != m) throw Error(ErrorCode::ConsistencyViolation, dir + "vectors.idx.json: bad offsets");
        for (std::size_t r = 0; r < m; ++r) {
          if (offs[r].get<std::size_t>() != (r * count + i) * dim) {
            throw Error(ErrorCode::ConsistencyViolation, dir + "vectors.idx.json: unexpected offset for " + ids[i]);
          }
        }
      }
      c.vectors = StoredVectors(m, dim, std::move(ids), detail::decode_f32_le(raw));
      s.corpora.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConsistencyViolation, std::string("malformed snapshot: ") + e.what());
  }
  validate_snapshot(s);
  return s;
}

}  // namespace textessence
