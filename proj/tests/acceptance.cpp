// Acceptance suite. Runs each primary criterion against the library (and, for
// the service criterion, the real command-line binary) and prints one
// PASS/FAIL line per criterion. Exit status is nonzero if any criterion fails.

#include "textessence/detail/random.hpp"
#include "textessence/fixture.hpp"
#include "textessence/pipeline.hpp"
#include "textessence/service.hpp"
#include "textessence/similarity.hpp"
#include "textessence/snapshot.hpp"

#include <httplib.h>
#include <json.hpp>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "support/json_schema.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

namespace te = textessence;
using testing_support::read_text;
using testing_support::TempDir;
using testing_support::write_text;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "failed: " << what << "; ";
    pass = pass && ok;
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double mean_ec(const te::ReplicateSet& set, std::size_t k) {
  const te::SimilarityIndex index(set);
  const auto report = te::high_confidence_set(index, k, 0.5);
  double sum = 0.0;
  for (const auto& r : report.records) sum += r.ec;
  return sum / static_cast<double>(report.records.size());
}

// Fixture computed once with default options and shared by criteria 4, 5 and 8.
struct DefaultRun {
  te::Fixture fixture;
  std::vector<te::ReplicateSet> sets;
  te::ComputeResult result;
};

const DefaultRun& default_run() {
  static const DefaultRun run = [] {
    DefaultRun r;
    r.fixture = te::generate_fixture(te::FixtureOptions{});
    for (const auto& c : r.fixture.corpora) r.sets.push_back(te::to_replicate_set(c));
    std::vector<const te::ReplicateSet*> ptrs;
    for (const auto& s : r.sets) ptrs.push_back(&s);
    te::ComputeOptions opt;
    opt.created = "2024-01-01T00:00:00Z";
    r.result = te::compute_snapshot(ptrs, r.fixture.terminology, opt);
    return r;
  }();
  return run;
}

void ec_oracle_equivalence(Outcome& out) {
  const auto start = Clock::now();
  te::detail::Rng rng(20240101);
  std::size_t sets = 0, checks = 0, mismatches = 0;
  for (; sets < 200; ++sets) {
    const auto set = oracle::random_replicate_set(rng, 30, 8, 5);
    const std::size_t k = 1 + rng.below(4);
    for (const auto& id : set.shared_vocabulary()) {
      ++checks;
      if (te::embedding_confidence(set, id, k) != oracle::embedding_confidence(set, id, k)) ++mismatches;
    }
  }
  const double elapsed = seconds_since(start);
  out.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
  out.require(elapsed < 10.0, "runtime " + fmt(elapsed) + " s");
  out.detail << sets << " sets, " << checks << " concepts, " << mismatches << " mismatches, " << fmt(elapsed, 3) << " s";
}

void ec_bounds_and_identity(Outcome& out) {
  te::detail::Rng rng(7);
  std::vector<te::EmbeddingReplicate> same;
  te::EmbeddingReplicate base(8);
  for (std::size_t i = 0; i < 40; ++i) {
    std::vector<float> row(8);
    for (auto& x : row) x = static_cast<float>(rng.normal());
    base.add(oracle::id_for(i), row);
  }
  for (int r = 0; r < 4; ++r) same.push_back(base);
  const te::ReplicateSet identical("same", "same", 0, same);
  bool all_one = true;
  for (const auto& id : identical.shared_vocabulary()) all_one = all_one && te::embedding_confidence(identical, id, 5) == 1.0;
  out.require(all_one, "identical replicates must give EC@5 = 1.0");

  const double baseline = 5.0 / 100.0;
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    te::detail::Rng r(seed);
    std::vector<te::EmbeddingReplicate> reps;
    for (int m = 0; m < 5; ++m) {
      te::EmbeddingReplicate rep(16);
      for (std::size_t i = 0; i < 101; ++i) {
        std::vector<float> row(16);
        double n = 0.0;
        for (auto& x : row) {
          x = static_cast<float>(r.normal());
          n += static_cast<double>(x) * x;
        }
        for (auto& x : row) x = static_cast<float>(x / std::sqrt(n));
        rep.add(oracle::id_for(i), row);
      }
      reps.push_back(std::move(rep));
    }
    const double ec = mean_ec(te::ReplicateSet("random", "random", 0, std::move(reps)), 5);
    lo = std::min(lo, ec);
    hi = std::max(hi, ec);
  }
  out.require(lo >= baseline / 3.0 && hi <= baseline * 3.0, "random mean EC@5 outside [k/(V-1)/3, 3k/(V-1)]");
  out.detail << "identical EC@5 = 1.0: " << (all_one ? "yes" : "no") << "; random mean EC@5 over 10 seeds in ["
             << fmt(lo) << ", " << fmt(hi) << "], baseline " << baseline;
}

void noise_monotonicity(Outcome& out) {
  const auto start = Clock::now();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    double ec[2];
    int i = 0;
    for (double noise : {0.01, 0.3}) {
      te::FixtureOptions opt;
      opt.corpora = 1;
      opt.drift = "none";
      opt.noise = noise;
      opt.seed = seed;
      const auto fx = te::generate_fixture(opt);
      ec[i++] = mean_ec(te::to_replicate_set(fx.corpora[0]), 5);
    }
    out.require(ec[0] > ec[1], "seed " + std::to_string(seed));
    out.detail << "seed " << seed << ": " << fmt(ec[0]) << " > " << fmt(ec[1]) << "; ";
  }
  const double elapsed = seconds_since(start);
  out.require(elapsed < 30.0, "runtime " + fmt(elapsed) + " s");
  out.detail << fmt(elapsed, 3) << " s";
}

void aggregate_neighbor_recovery(Outcome& out) {
  const auto& run = default_run();
  const auto& snap = run.result.snapshot;
  const auto& fx = run.fixture;
  const std::size_t expected_cluster[] = {0, 1};
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& c = snap.corpora[t];
    const auto it = c.neighbors.find(*fx.shift_concept);
    if (it == c.neighbors.end()) {
      out.require(false, "no neighbor table for " + *fx.shift_concept + " in " + c.descriptor.id);
      continue;
    }
    std::size_t hits = 0;
    for (const auto& row : it->second.rows) {
      const auto cl = fx.cluster_of.find(row.id);
      hits += cl != fx.cluster_of.end() && cl->second == expected_cluster[t];
    }
    const double share = static_cast<double>(hits) / 10.0;
    out.require(it->second.rows.size() == 10 && share >= 0.8, c.descriptor.id + " share " + fmt(share));
    out.detail << c.descriptor.id << ": " << hits << "/10 in cluster " << static_cast<char>('A' + expected_cluster[t])
               << "; ";
  }
  out.detail << "k=" << snap.corpora[0].descriptor.k << ", threshold " << snap.corpora[0].descriptor.threshold;
}

void similarity_series_check(Outcome& out) {
  const auto& run = default_run();
  const auto& fx = run.fixture;
  const auto ref = *fx.pair_reference;
  const std::vector<te::ConceptId> cmp{*fx.pair_comparison};
  const auto series = te::similarity_series(run.sets, run.result.confidence, ref, cmp);
  const auto& points = series.at(0).points;
  out.require(points.size() == 3, "three points");
  double worst = 0.0;
  for (std::size_t t = 0; t < points.size(); ++t) {
    out.require(points[t].present, "pair present in " + points[t].corpus_id);
    const auto [mean, std] = oracle::replicate_similarity(run.sets[t], ref, cmp[0]);
    worst = std::max({worst, std::abs(points[t].mean - mean), std::abs(points[t].std - std)});
    if (t > 0) out.require(points[t].mean > points[t - 1].mean, "strictly increasing means");
    out.detail << fmt(points[t].mean, 6) << (t + 1 < points.size() ? " < " : "; ");
  }
  out.require(worst <= 1e-6, "brute-force deviation " + fmt(worst));

  const auto self = te::similarity_series(run.sets, run.result.confidence, ref, std::vector<te::ConceptId>{ref});
  bool exact = true;
  for (const auto& p : self.at(0).points) exact = exact && p.mean == 1.0 && p.std == 0.0;
  for (const auto& set : run.sets) {
    const auto v = set.vector(0, ref);
    const std::vector<float> copy(v.begin(), v.end());
    const double c = te::cosine(v, copy);
    exact = exact && te::pairwise_similarity(set, ref, ref).mean == 1.0 && c <= 1.0;
  }
  out.require(exact, "sim(a,a) must be exactly 1.0");
  out.detail << "max deviation from brute force " << fmt(worst, 3) << "; sim(a,a) = 1.0: " << (exact ? "yes" : "no");
}

void procrustes_check(Outcome& out) {
  te::detail::Rng rng(99);
  double worst_coord = 0.0, worst_orth = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    te::ProjectionFrame source;
    for (int i = 0; i < 20; ++i) source.points["p" + std::to_string(i)] = {rng.normal() * 5.0, rng.normal() * 5.0};
    const double angle = rng.uniform() * 2.0 * std::numbers::pi;
    const double scale = 0.2 + rng.uniform() * 5.0;
    const te::Point2 shift{rng.normal() * 10.0, rng.normal() * 10.0};
    te::ProjectionFrame target = source;
    for (auto& [id, p] : target.points) {
      p = {scale * (std::cos(angle) * p.x - std::sin(angle) * p.y) + shift.x,
           scale * (std::sin(angle) * p.x + std::cos(angle) * p.y) + shift.y};
    }
    const auto r = te::procrustes_align(source, target);
    for (const auto& [id, p] : r.frame.points) {
      worst_coord = std::max({worst_coord, std::abs(p.x - target.points.at(id).x), std::abs(p.y - target.points.at(id).y)});
    }
    const auto& m = r.transform.rotation;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        worst_orth = std::max(worst_orth, std::abs(m[0][i] * m[0][j] + m[1][i] * m[1][j] - (i == j ? 1.0 : 0.0)));
      }
    }
  }
  out.require(worst_coord <= 1e-6, "coordinate error " + fmt(worst_coord));
  out.require(worst_orth < 1e-9, "orthogonality residual " + fmt(worst_orth));

  std::size_t increased = 0;
  for (int trial = 0; trial < 100; ++trial) {
    te::ProjectionFrame a, b;
    const std::size_t n = 3 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      a.points["p" + std::to_string(i)] = {rng.normal() * 5.0, rng.normal() * 5.0};
      b.points["p" + std::to_string(i)] = {rng.normal() * 5.0, rng.normal() * 5.0};
    }
    const auto r = te::procrustes_align(a, b);
    increased += r.transform.disparity_after > r.transform.disparity_before;
  }
  out.require(increased == 0, std::to_string(increased) + " pairs with disparity_after > disparity_before");
  out.detail << "max coordinate error " << fmt(worst_coord, 3) << ", orthogonality residual " << fmt(worst_orth, 3)
             << ", " << increased << "/100 random pairs got worse";
}

void tsne_check(Outcome& out) {
  te::FixtureOptions fopt;
  fopt.corpora = 1;
  fopt.drift = "none";
  const auto fx = te::generate_fixture(fopt);
  const auto set = te::to_replicate_set(fx.corpora[0]);
  std::map<te::ConceptId, std::vector<double>> means;
  for (const auto& id : set.shared_vocabulary()) {
    std::vector<double> mean(set.dim(), 0.0);
    for (std::size_t r = 0; r < set.replicate_count(); ++r) {
      for (std::size_t j = 0; j < set.dim(); ++j) mean[j] += set.vector(r, id)[j];
    }
    means[id] = mean;
  }
  auto start = Clock::now();
  const auto a = te::tsne_project(means, te::TsneOptions{}, "c1");
  const double elapsed = seconds_since(start);
  const auto b = te::tsne_project(means, te::TsneOptions{}, "c1");

  // Share of each point's 10 nearest 2-D neighbors that carry its cluster label.
  std::vector<std::pair<te::ConceptId, te::Point2>> pts(a.frame.points.begin(), a.frame.points.end());
  double worst = 1.0, total = 0.0;
  for (const auto& [id, p] : pts) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (pts[j].first != id) d.emplace_back(std::hypot(pts[j].second.x - p.x, pts[j].second.y - p.y), j);
    }
    std::sort(d.begin(), d.end());
    std::size_t same = 0;
    for (std::size_t i = 0; i < 10; ++i) same += fx.cluster_of.at(pts[d[i].second].first) == fx.cluster_of.at(id);
    worst = std::min(worst, same / 10.0);
    total += same / 10.0;
  }
  out.require(pts.size() == 100, "100 points");
  out.require(worst >= 0.95, "worst per-point purity " + fmt(worst));
  out.require(a.frame.kl_final <= a.kl_after_exaggeration, "KL increased after exaggeration");
  out.require(a.frame == b.frame, "runs differ");
  out.require(elapsed < 60.0, "runtime " + fmt(elapsed) + " s");
  out.detail << "purity min " << fmt(worst) << " mean " << fmt(total / static_cast<double>(pts.size())) << ", KL "
             << fmt(a.kl_after_exaggeration) << " -> " << fmt(a.frame.kl_final) << ", identical reruns: "
             << (a.frame == b.frame ? "yes" : "no") << ", " << fmt(elapsed, 3) << " s at n=100";
}

std::optional<std::string> compare_snapshots(const te::Snapshot& a, const te::Snapshot& b, double tol) {
  auto near = [&](double x, double y) { return std::abs(x - y) <= tol; };
  if (a.format_version != b.format_version) return "format_version";
  if (a.created != b.created) return "created";
  if (a.concepts != b.concepts) return "concepts";
  if (a.corpora.size() != b.corpora.size()) return "corpus count";
  for (std::size_t i = 0; i < a.corpora.size(); ++i) {
    const auto& x = a.corpora[i];
    const auto& y = b.corpora[i];
    const auto& dx = x.descriptor;
    const auto& dy = y.descriptor;
    const std::string where = dx.id + ": ";
    if (dx.id != dy.id || dx.label != dy.label || dx.order_index != dy.order_index || dx.vocab_size != dy.vocab_size ||
        dx.high_conf_count != dy.high_conf_count || dx.m != dy.m || dx.dim != dy.dim || dx.k != dy.k ||
        dx.n_neighbors != dy.n_neighbors || !near(dx.threshold, dy.threshold) || !near(dx.perplexity, dy.perplexity)) {
      return where + "descriptor";
    }
    if (x.confidence.size() != y.confidence.size()) return where + "confidence size";
    for (std::size_t r = 0; r < x.confidence.size(); ++r) {
      const auto& p = x.confidence[r];
      const auto& q = y.confidence[r];
      if (p.concept_id != q.concept_id || p.high_confidence != q.high_confidence || !near(p.ec, q.ec)) {
        return where + "confidence " + p.concept_id;
      }
    }
    if (x.neighbors.size() != y.neighbors.size()) return where + "neighbor table count";
    for (const auto& [id, t] : x.neighbors) {
      const auto it = y.neighbors.find(id);
      if (it == y.neighbors.end() || it->second.rows.size() != t.rows.size()) return where + "neighbors " + id;
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& p = t.rows[r];
        const auto& q = it->second.rows[r];
        if (p.id != q.id || !near(p.mean_sim, q.mean_sim) || !near(p.std_sim, q.std_sim)) return where + "neighbors " + id;
      }
    }
    if (x.projection.aligned != y.projection.aligned || x.projection.seed != y.projection.seed ||
        x.projection.points.size() != y.projection.points.size() || !near(x.projection.kl_final, y.projection.kl_final)) {
      return where + "projection";
    }
    for (const auto& [id, p] : x.projection.points) {
      const auto it = y.projection.points.find(id);
      if (it == y.projection.points.end() || !near(p.x, it->second.x) || !near(p.y, it->second.y)) {
        return where + "projection point " + id;
      }
    }
    const auto& vx = x.vectors;
    const auto& vy = y.vectors;
    if (vx.replicate_count() != vy.replicate_count() || vx.dim() != vy.dim() ||
        !std::equal(vx.concepts().begin(), vx.concepts().end(), vy.concepts().begin(), vy.concepts().end()) ||
        vx.data().size() != vy.data().size()) {
      return where + "vector index";
    }
    for (std::size_t j = 0; j < vx.data().size(); ++j) {
      if (!near(vx.data()[j], vy.data()[j])) return where + "vector data";
    }
  }
  return std::nullopt;
}

void snapshot_round_trip(Outcome& out) {
  const auto& snap = default_run().result.snapshot;
  TempDir dir;
  const auto root = dir / "snap";
  te::write_snapshot(root, snap);
  const auto back = te::read_snapshot(root);
  const auto diff = compare_snapshots(snap, back, 1e-6);
  out.require(!diff, "round-trip difference in " + diff.value_or(""));

  te::detail::Rng rng(5);
  const auto manifest = nlohmann::json::parse(read_text(root / "manifest.json"));
  std::size_t attempts = 0, detected = 0;
  for (const auto& [name, sha] : manifest["files"].items()) {
    const auto path = root / name;
    const auto original = read_text(path);
    for (int trial = 0; trial < 8; ++trial) {
      auto tampered = original;
      const std::size_t pos = rng.below(tampered.size());
      tampered[pos] = static_cast<char>(tampered[pos] ^ static_cast<char>(1 + rng.below(255)));
      write_text(path, tampered);
      ++attempts;
      try {
        te::read_snapshot(root);
      } catch (const te::Error& e) {
        detected += e.code() == te::ErrorCode::DigestMismatch && std::string(e.what()).find(name) != std::string::npos;
      }
    }
    write_text(path, original);
  }
  out.require(detected == attempts, std::to_string(attempts - detected) + " tampers undetected");
  out.detail << "round-trip " << (diff ? "differs" : "equal within 1e-6") << ", " << detected << "/" << attempts
             << " single-byte corruptions detected across " << manifest["files"].size() << " files";
}

struct Server {
  pid_t pid = -1;
  int port = -1;
  ~Server() {
    if (pid > 0) {
      kill(pid, SIGTERM);
      int status = 0;
      waitpid(pid, &status, 0);
    }
  }
};

int cli(const std::string& args) {
  const std::string cmd = std::string("'") + TEXTESSENCE_CLI + "' " + args + " > /dev/null";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

void service_contract(Outcome& out) {
  const auto start = Clock::now();
  TempDir dir;
  const auto q = [](const std::filesystem::path& p) { return "'" + p.string() + "'"; };
  out.require(cli("fixture --out " + q(dir / "fx")) == 0, "fixture command");
  for (int t = 1; t <= 3; ++t) {
    const auto id = "corpus" + std::to_string(t);
    std::string args = "ingest --workspace " + q(dir / "ws") + " --corpus " + id + " --order " + std::to_string(t - 1) +
                       " --terminology " + q(dir / "fx" / "terminology.tsv") + " --embeddings";
    for (std::size_t r = 0; r < 5; ++r) args += " " + q(dir / "fx" / id / te::fixture_replicate_filename(r));
    out.require(cli(args) == 0, "ingest " + id);
  }
  out.require(cli("compute --workspace " + q(dir / "ws") + " --out " + q(dir / "snap")) == 0, "compute command");
  if (!out.pass) return;

  int fds[2];
  if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
  Server server;
  server.pid = fork();
  if (server.pid == 0) {
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    const auto snap = (dir / "snap").string();
    execl(TEXTESSENCE_CLI, TEXTESSENCE_CLI, "serve", "--snapshot", snap.c_str(), "--port", "0", "--host", "127.0.0.1",
          static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  std::string line;
  char ch;
  while (read(fds[0], &ch, 1) == 1 && ch != '\n') line += ch;
  close(fds[0]);
  const auto colon = line.rfind(':');
  out.require(colon != std::string::npos, "serve did not report a port");
  if (!out.pass) return;
  httplib::Client client("127.0.0.1", std::stoi(line.substr(colon + 1)));

  const auto snapshot = te::read_snapshot(dir / "snap");
  const auto selectable = snapshot.selectable();
  std::size_t schema_checks = 0;
  auto get = [&](const std::string& path, int status, const std::string& schema_name) {
    const auto res = client.Get(path);
    if (!res) {
      out.require(false, "no response for " + path);
      return nlohmann::json();
    }
    out.require(res->status == status, path + " returned " + std::to_string(res->status));
    const auto body = nlohmann::json::parse(res->body);
    const auto err = schema::check(body, schema_name);
    out.require(err.empty(), path + ": " + err);
    ++schema_checks;
    return body;
  };

  const auto corpora = get("/api/corpora", 200, "corpora");
  out.require(corpora.size() == 3, "three corpora listed");
  for (const auto& c : snapshot.corpora) get("/api/corpora/" + c.descriptor.id + "/projection", 200, "projection");
  get("/api/concepts/search?q=concept", 200, "search");
  for (const auto& id : selectable) get("/api/concepts/" + id, 200, "concept");
  get("/api/similarity?ref=A-000&cmp=X-DRIFT&cmp=A-001", 200, "similarity");

  get("/api/corpora/nowhere/projection", 404, "error");
  get("/api/concepts/NO-SUCH", 404, "error");
  std::size_t unselectable = 0;
  std::size_t search_violations = 0;
  for (const auto& [id, meta] : snapshot.concepts) {
    const bool ok = selectable.contains(id);
    if (!ok) {
      ++unselectable;
      get("/api/concepts/" + id, 409, "error");
      get("/api/similarity?ref=" + id + "&cmp=A-000", 409, "error");
    }
    // every fixture concept has a unique synonym such as "a000"
    const auto& needle = meta.synonyms.empty() ? meta.preferred_term : meta.synonyms.front();
    const auto body = get("/api/concepts/search?q=" + httplib::detail::encode_query_param(needle), 200, "search");
    bool found = false;
    for (const auto& r : body["results"]) {
      found = found || r["id"] == id;
      search_violations += !selectable.contains(r["id"].get<std::string>());
    }
    search_violations += found != ok;
  }
  out.require(unselectable > 0, "fixture snapshot has no non-selectable concept to probe");
  out.require(search_violations == 0, std::to_string(search_violations) + " search selectability violations");
  const double elapsed = seconds_since(start);
  out.require(elapsed < 120.0, "pipeline runtime " + fmt(elapsed) + " s");
  out.detail << schema_checks << " schema-checked responses, " << unselectable << " non-selectable concepts probed (409), "
             << "search selectability violations " << search_violations << ", fixture->compute->serve->query "
             << fmt(elapsed, 3) << " s";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"EC@k oracle equivalence", ec_oracle_equivalence},
      {"EC bounds and identity", ec_bounds_and_identity},
      {"Noise monotonicity", noise_monotonicity},
      {"Aggregate-neighbor recovery", aggregate_neighbor_recovery},
      {"Similarity series", similarity_series_check},
      {"Procrustes", procrustes_check},
      {"t-SNE sanity", tsne_check},
      {"Snapshot round-trip", snapshot_round_trip},
      {"Service contract", service_contract},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    const auto start = Clock::now();
    try {
      criteria[i].second(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    failures += !out.pass;
    std::cout << (out.pass ? "[PASS] " : "[FAIL] ") << i + 1 << ". " << criteria[i].first << " (" << out.detail.str()
              << ") [" << fmt(seconds_since(start), 3) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
