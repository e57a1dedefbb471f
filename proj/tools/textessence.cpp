// textessence: ingest embedding replicates, compute a snapshot, serve it,
// or generate a synthetic fixture.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "textessence/fixture.hpp"
#include "textessence/pipeline.hpp"
#include "textessence/service.hpp"
#include "textessence/snapshot.hpp"

namespace te = textessence;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void print_summary(const std::vector<te::CorpusSummary>& rows) {
  std::printf("%-16s %-24s %4s %10s %10s\n", "corpus", "label", "m", "entities", "hi-conf");
  for (const auto& r : rows) {
    std::printf("%-16s %-24s %4zu %10zu %10zu\n", r.id.c_str(), r.label.c_str(), r.m, r.vocab_size, r.high_conf_count);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Comparative corpus analysis with replicated embeddings"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Register a corpus (embedding replicates + terminology) in a workspace");
  std::string ws_dir = "workspace";
  te::WorkspaceCorpus corpus;
  ingest->add_option("--workspace", ws_dir, "Workspace directory")->capture_default_str();
  ingest->add_option("--corpus", corpus.id, "Corpus id")->required();
  ingest->add_option("--label", corpus.label, "Display label (defaults to the id)");
  ingest->add_option("--order", corpus.order_index, "Order index (diachronic or categorical position)")->required();
  ingest->add_option("--embeddings", corpus.embeddings, "Replicate files in word2vec text format")
      ->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--terminology", corpus.terminology, "Terminology TSV")->check(CLI::ExistingFile);

  // compute
  auto* compute = app.add_subcommand("compute", "Compute confidence, neighbors and projections into a snapshot");
  std::string out_dir;
  te::ComputeOptions copt;
  compute->add_option("--workspace", ws_dir, "Workspace directory")->capture_default_str();
  compute->add_option("--out", out_dir, "Snapshot directory (default <workspace>/snapshot)");
  compute->add_option("--k", copt.k, "Neighborhood size for EC@k")->capture_default_str()->check(CLI::PositiveNumber);
  compute->add_option("--threshold", copt.threshold, "High-confidence threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  compute->add_option("--n-neighbors,--n_neighbors", copt.n_neighbors, "Aggregate neighbors kept per concept")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  compute->add_option("--perplexity", copt.perplexity, "t-SNE perplexity")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  compute->add_option("--iterations", copt.iterations, "t-SNE iterations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  compute->add_option("--seed", copt.seed, "t-SNE seed")->capture_default_str();
  compute->add_option("--created", copt.created, "Manifest timestamp (default: now, UTC)");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve a snapshot over the HTTP JSON API");
  std::string snapshot_dir;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::vector<std::string> origins;
  serve->add_option("--snapshot", snapshot_dir, "Snapshot directory")->envname("TE_SNAPSHOT")->required();
  serve->add_option("--port", port, "Port (0 picks a free one)")->envname("TE_PORT")->capture_default_str()->check(
      CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--allow-origin", origins, "Extra origin allowed for cross-origin requests ('*' for any)");

  // fixture
  auto* fixture = app.add_subcommand("fixture", "Generate a synthetic multi-corpus fixture with planted drift");
  std::string fixture_out;
  te::FixtureOptions fopt;
  fixture->add_option("--out", fixture_out, "Output directory")->required();
  fixture->add_option("--corpora", fopt.corpora)->capture_default_str()->check(CLI::PositiveNumber);
  fixture->add_option("--clusters", fopt.clusters)->capture_default_str()->check(CLI::Range(1, 26));
  fixture->add_option("--per-cluster,--per_cluster", fopt.per_cluster)->capture_default_str()->check(CLI::PositiveNumber);
  fixture->add_option("--dim", fopt.dim)->capture_default_str()->check(CLI::PositiveNumber);
  fixture->add_option("--m", fopt.m, "Replicates per corpus")->capture_default_str()->check(CLI::Range(2, 1000));
  fixture->add_option("--noise", fopt.noise, "Per-coordinate replicate noise")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  fixture->add_option("--drift", fopt.drift, "shift@<corpus>,pair or none")->capture_default_str();
  fixture->add_option("--seed", fopt.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*ingest) {
      if (corpus.label.empty()) corpus.label = corpus.id;
      const auto id = corpus.id;
      const auto outcome = te::ingest_corpus(ws_dir, corpus);
      if (outcome.replaced) std::cout << "notice: replaced existing corpus '" << id << "'\n";
      for (const auto& issue : outcome.terminology_issues) {
        std::cerr << "warning: terminology line " << issue.line << ": " << issue.message << '\n';
      }
      std::cout << "registered corpus '" << id << "' with m=" << outcome.vocabulary.replicate_sizes.size()
                << " replicates, shared vocabulary " << outcome.vocabulary.shared_size << '\n';
      return 0;
    }

    if (*compute) {
      if (copt.created.empty()) copt.created = utc_timestamp();
      if (out_dir.empty()) out_dir = (std::filesystem::path(ws_dir) / "snapshot").string();
      const auto ws = te::load_workspace(ws_dir);
      const auto result = te::compute_workspace(ws, copt);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      const auto digest = te::write_snapshot(out_dir, result.snapshot);
      print_summary(result.summaries);
      std::cout << "snapshot written to " << out_dir << " (manifest sha256 " << digest << ")\n";
      return 0;
    }

    if (*serve) {
      std::shared_ptr<const te::Snapshot> snapshot;
      try {
        snapshot = std::make_shared<const te::Snapshot>(te::read_snapshot(snapshot_dir));
      } catch (const te::Error& e) {
        std::cerr << "error: cannot load snapshot " << snapshot_dir << ": " << e.what() << '\n';
        return kExitData;
      }
      te::ServiceOptions sopt;
      sopt.allowed_origins.insert(sopt.allowed_origins.end(), origins.begin(), origins.end());
      httplib::Server server;
      te::mount(server, std::make_shared<const te::ApiService>(snapshot), sopt);
      int bound = port;
      if (port == 0) {
        bound = server.bind_to_any_port(host);
      } else if (!server.bind_to_port(host, port)) {
        bound = -1;
      }
      if (bound < 0) {
        std::cerr << "error: cannot bind " << host << ":" << port << '\n';
        return kExitInternal;
      }
      std::cout << "serving " << snapshot_dir << " on http://" << host << ":" << bound << std::endl;
      return server.listen_after_bind() ? 0 : kExitInternal;
    }

    if (*fixture) {
      const auto fx = te::generate_fixture(fopt);
      te::write_fixture(fx, fixture_out);
      std::cout << "fixture with " << fx.corpora.size() << " corpora x " << fopt.m << " replicates written to "
                << fixture_out << '\n';
      return 0;
    }
  } catch (const te::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.code() == te::ErrorCode::InvalidArgument) return kExitUsage;
    return te::is_data_error(e.code()) ? kExitData : kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
