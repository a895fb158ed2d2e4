// mirage: command-line front end over libmirage.
//
//   mirage ingest --catalog P --out DIR [--limit N]
//   mirage query  --store DIR --text T [--k K] [--json]
//   mirage dual   --store DIR --text T --subtract S --add A [--json]
//   mirage eval   --pairs FILE --strategy max_accuracy|mean_midpoint
//   mirage serve  --config FILE
//
// --mock selects the deterministic in-process backends. Exit codes: 0 success,
// 1 usage error, 2 runtime error.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mirage/mirage.h"

namespace {

using json = nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { mirage_string_free(ptr); }
  std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

int report_failure(mirage_status status) {
  std::cerr << "error: " << mirage_status_name(status) << ": " << mirage_last_error();
  const std::string stage = mirage_last_error_stage();
  if (!stage.empty()) std::cerr << " (stage " << stage << ")";
  std::cerr << "\n";
  return kExitRuntime;
}

struct CommonOptions {
  std::string config_path;
  bool mock = false;
};

// Config file (--config, else $MIRAGE_CONFIG) with command-line overrides.
std::optional<json> load_config(const CommonOptions& common, int& exit_code) {
  std::string path = common.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("MIRAGE_CONFIG")) path = env;
  }
  json config = json::object();
  if (!path.empty()) {
    OwnedString text;
    if (auto st = mirage_config_load(path.c_str(), &text.ptr); st != MIRAGE_OK) {
      exit_code = report_failure(st);
      return std::nullopt;
    }
    config = json::parse(text.str());
  }
  if (common.mock) config["backend"]["mode"] = "mock";
  return config;
}

json backend_of(const json& config) {
  return config.contains("backend") ? config["backend"] : json::object();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MIRAGE multimodal retrieval engine"};
  app.require_subcommand(1);
  CommonOptions common;
  app.add_option("--config", common.config_path, "JSON config file (default: $MIRAGE_CONFIG)");
  app.add_flag("--mock", common.mock, "Use the deterministic mock backends");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Build a store from a catalog");
  std::string catalog, out_dir, on_missing = "skip";
  std::optional<std::size_t> limit;
  std::size_t batch_size = 32, parallelism = 1;
  ingest->add_option("--catalog", catalog, "Catalog CSV or JSONL")->required();
  ingest->add_option("--out", out_dir, "Output store directory")->required();
  ingest->add_option("--limit", limit, "Keep only the first N records");
  ingest->add_option("--batch-size", batch_size, "Records per encoder call")->check(CLI::PositiveNumber);
  ingest->add_option("--parallelism", parallelism, "Batches embedded concurrently")->check(CLI::PositiveNumber);
  ingest->add_option("--on-missing-image", on_missing, "skip or fail")
      ->check(CLI::IsMember({"skip", "fail"}));

  // query
  auto* query = app.add_subcommand("query", "Two-stage retrieval for one query");
  std::string store_dir, text;
  std::size_t k = 0;
  bool as_json = false, omit_timings = false;
  query->add_option("--store", store_dir, "Store directory");
  query->add_option("--text", text, "Query text")->required();
  query->add_option("--k", k, "Stage-1 hits (default from config, else 5)")->check(CLI::PositiveNumber);
  query->add_flag("--json", as_json, "Print the result as JSON");
  query->add_flag("--omit-timings", omit_timings, "Leave stage timings out of JSON output");

  // dual
  auto* dual = app.add_subcommand("dual", "Dual search with latent arithmetic");
  std::string subtract, add;
  dual->add_option("--store", store_dir, "Store directory");
  dual->add_option("--text", text, "Query text")->required();
  dual->add_option("--subtract", subtract, "Concept to remove")->required();
  dual->add_option("--add", add, "Concept to introduce")->required();
  dual->add_option("--k", k, "Context hits for the revised description")->check(CLI::PositiveNumber);
  dual->add_flag("--json", as_json, "Print the result as JSON");
  dual->add_flag("--omit-timings", omit_timings, "Leave stage timings out of JSON output");

  // eval
  auto* eval = app.add_subcommand("eval", "Semantic-consistency evaluation over labeled pairs");
  std::vector<std::string> pair_files;
  std::string strategy = "max_accuracy", std_mode = "population", report_path = "report.json";
  eval->add_option("--pairs", pair_files, "Pair JSONL file(s)")->required();
  eval->add_option("--strategy", strategy, "max_accuracy or mean_midpoint")
      ->check(CLI::IsMember({"max_accuracy", "mean_midpoint"}));
  eval->add_option("--std", std_mode, "population or sample")
      ->check(CLI::IsMember({"population", "sample"}));
  eval->add_option("--report", report_path, "Where to write report.json");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::string host;
  std::optional<int> port;
  serve->add_option("--store", store_dir, "Store directory");
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port")->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  int exit_code = 0;
  auto config = load_config(common, exit_code);
  if (!config) return exit_code;

  if (*ingest) {
    json options = {{"catalog", catalog},
                    {"out", out_dir},
                    {"batch_size", batch_size},
                    {"parallelism", parallelism},
                    {"on_missing_image", on_missing},
                    {"backend", backend_of(*config)}};
    if (limit) options["limit"] = *limit;
    OwnedString report;
    const auto st = mirage_ingest(options.dump().c_str(), &report.ptr);
    if (st != MIRAGE_OK) {
      if (report.ptr) std::cerr << report.str();
      return report_failure(st);
    }
    std::cout << report.str();
    return 0;
  }

  if (*eval) {
    json options = {{"pairs", pair_files},
                    {"strategy", strategy},
                    {"std", std_mode},
                    {"backend", backend_of(*config)}};
    OwnedString report, table;
    const auto st = mirage_evaluate(options.dump().c_str(), &report.ptr, &table.ptr);
    if (st != MIRAGE_OK) return report_failure(st);
    std::cout << table.str();
    std::ofstream out(report_path);
    if (!out || !(out << report.str())) {
      std::cerr << "error: cannot write " << report_path << "\n";
      return kExitRuntime;
    }
    return 0;
  }

  if (!store_dir.empty()) (*config)["store"] = store_dir;
  if (!config->contains("store")) {
    std::cerr << "error: no store given (use --store or a config file)\n";
    return kExitUsage;
  }

  if (*serve) {
    if (!host.empty()) (*config)["host"] = host;
    if (port) (*config)["port"] = *port;

    // Block the shutdown signals before any server thread exists, then wait
    // for them synchronously.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    mirage_server* server = nullptr;
    if (auto st = mirage_server_start(config->dump().c_str(), &server); st != MIRAGE_OK) {
      return report_failure(st);
    }
    std::cerr << "listening on " << config->value("host", std::string("127.0.0.1")) << ":"
              << mirage_server_port(server) << "\n";
    int sig = 0;
    sigwait(&signals, &sig);
    std::cerr << "shutting down\n";
    mirage_server_stop(server);
    return 0;
  }

  mirage_engine* engine = nullptr;
  if (auto st = mirage_engine_open(config->dump().c_str(), &engine); st != MIRAGE_OK) {
    return report_failure(st);
  }
  const int flags = (as_json ? MIRAGE_FORMAT_JSON : MIRAGE_FORMAT_TEXT) |
                    (omit_timings ? MIRAGE_OMIT_TIMINGS : 0);
  OwnedString out;
  mirage_status st;
  if (*query) {
    st = mirage_engine_query(engine, text.c_str(), k, flags, &out.ptr);
  } else {
    st = mirage_engine_dual(engine, text.c_str(), subtract.c_str(), add.c_str(), k, flags, &out.ptr);
  }
  mirage_engine_close(engine);
  if (st != MIRAGE_OK) return report_failure(st);
  std::cout << out.str();
  return 0;
}
