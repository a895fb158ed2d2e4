#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "mirage/error.hpp"
#include "mirage/ingestion.hpp"
#include "mirage/service.hpp"
#include "test_support.hpp"

using namespace mirage;
using nlohmann::json;
using test_support::TempDir;
namespace fs = std::filesystem;

namespace {

// A mock-backed service over the 25-entry fixture, running on a free port.
class RunningService {
 public:
  explicit RunningService(const fs::path& store_dir, std::vector<std::string> cors = {},
                          std::optional<BackendConfig> backend = std::nullopt) {
    ServiceConfig config;
    config.store_dir = store_dir;
    config.port = 0;
    config.cors_origins = std::move(cors);
    if (backend) config.backend = *backend;
    service_ = std::make_unique<Service>(Engine::open(config), config);
    service_->bind();
    thread_ = std::thread([this] { service_->listen(); });
    service_->wait_until_ready();
  }
  ~RunningService() {
    service_->stop();
    thread_.join();
  }

  httplib::Client client() const { return httplib::Client("127.0.0.1", service_->port()); }

 private:
  std::unique_ptr<Service> service_;
  std::thread thread_;
};

fs::path build_fixture_store(const TempDir& dir) {
  MockBackends mock;
  ingest_catalog(test_support::fixture_dir() / "catalog25" / "catalog.csv", dir / "store", mock, {});
  return dir / "store";
}

json post(httplib::Client& client, const std::string& path, const json& body, int expected_status) {
  auto res = client.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == expected_status);
  CHECK(res->get_header_value("Content-Type") == "application/json");
  return json::parse(res->body);
}

}  // namespace

TEST_CASE("http_status_for") {
  CHECK(http_status_for(ErrorCode::kInvalidArgument) == 400);
  CHECK(http_status_for(ErrorCode::kMissingTerms) == 400);
  CHECK(http_status_for(ErrorCode::kNotFound) == 404);
  CHECK(http_status_for(ErrorCode::kEmptyStore) == 409);
  CHECK(http_status_for(ErrorCode::kDegenerateQuery) == 422);
  CHECK(http_status_for(ErrorCode::kBackendError) == 502);
  CHECK(http_status_for(ErrorCode::kBackendUnreachable) == 503);
  CHECK(http_status_for(ErrorCode::kIoError) == 500);
}

TEST_CASE("service: health, entries and images") {
  TempDir dir;
  auto store_dir = build_fixture_store(dir);
  RunningService svc(store_dir);
  auto client = svc.client();

  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto h = json::parse(health->body);
  CHECK(h["status"] == "ok");
  CHECK(h["entries"] == 25);
  CHECK(h["backend_mode"] == "mock");

  auto entry = client.Get("/api/entries/roco-0002");
  REQUIRE(entry);
  CHECK(entry->status == 200);
  auto e = json::parse(entry->body);
  CHECK(e["id"] == "roco-0002");
  CHECK(e["modality"] == "X-ray");
  CHECK(e["image_url"] == "/api/images/roco-0002");

  auto missing = client.Get("/api/entries/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["code"] == "NotFound");

  auto image = client.Get("/api/images/roco-0002");
  REQUIRE(image);
  CHECK(image->status == 200);
  CHECK(image->get_header_value("Content-Type") == "image/png");
  const auto original =
      read_file_bytes(test_support::fixture_dir() / "catalog25" / "images" / "roco-0002.png");
  CHECK(Bytes(image->body.begin(), image->body.end()) == original);
  CHECK(client.Get("/api/images/" + std::string(64, 'a'))->status == 404);
}

TEST_CASE("service: query endpoint") {
  TempDir dir;
  auto store_dir = build_fixture_store(dir);
  RunningService svc(store_dir);
  auto client = svc.client();

  auto body = post(client, "/api/query", {{"text", "neonatal chest x-ray RDS"}, {"k", 3}}, 200);
  CHECK(body["query_text"] == "neonatal chest x-ray RDS");
  REQUIRE(body["stage1_hits"].size() == 3);
  CHECK(body["stage1_hits"][0]["rank"] == 1);
  CHECK(body["final_hit"]["image_url"].get<std::string>().rfind("/api/images/", 0) == 0);
  CHECK(body["timings_ms"].contains("enrich"));

  // Similarities carry at most six decimals.
  const double sim = body["stage1_hits"][0]["similarity"];
  CHECK(std::abs(sim * 1e6 - std::round(sim * 1e6)) < 1e-6);

  // Synthetic image served back byte-identical to the blob on disk.
  const std::string ref = body["synthetic_image_ref"];
  auto image = client.Get(body["synthetic_image_url"].get<std::string>());
  REQUIRE(image);
  CHECK(image->status == 200);
  CHECK(Bytes(image->body.begin(), image->body.end()) ==
        read_file_bytes(store_dir / store_files::kBlobDir / ref));
  CHECK(sha256_hex(Bytes(image->body.begin(), image->body.end())) == ref);

  // Serialize -> parse -> serialize is stable.
  auto reparsed = json::parse(body.dump());
  CHECK(reparsed.dump() == body.dump());

  // Default k applies when omitted.
  auto defaulted = post(client, "/api/query", {{"text", "mammogram"}}, 200);
  CHECK(defaulted["k"] == kDefaultK);
}

TEST_CASE("service: request validation") {
  TempDir dir;
  auto store_dir = build_fixture_store(dir);
  RunningService svc(store_dir);
  auto client = svc.client();

  CHECK(post(client, "/api/query", {{"text", ""}}, 400)["error"].is_string());
  post(client, "/api/query", {{"k", 3}}, 400);
  post(client, "/api/query", {{"text", "x"}, {"k", 0}}, 400);
  post(client, "/api/query", {{"text", "x"}, {"k", "three"}}, 400);
  post(client, "/api/query", json::array({1, 2}), 400);
  auto raw = client.Post("/api/query", "{not json", "application/json");
  REQUIRE(raw);
  CHECK(raw->status == 400);
  post(client, "/api/dual", {{"text", "x"}, {"subtract", "a"}}, 400);
  post(client, "/api/dual", {{"text", "x"}, {"subtract", "a"}, {"add", " "}}, 400);
  auto tokenless = post(client, "/api/query", {{"text", "?!"}}, 400);
  CHECK(tokenless["code"] == "EmptyText");
  CHECK(tokenless["stage"] == "encode_query");
}

TEST_CASE("service: dual endpoint and cancellation through the stack") {
  TempDir dir;
  auto store_dir = build_fixture_store(dir);
  RunningService svc(store_dir);
  auto client = svc.client();

  for (const char* term : {"RDS", "malignant", "chest"}) {
    auto body = post(client, "/api/dual",
                     {{"text", "neonatal chest x-ray RDS"}, {"subtract", term}, {"add", term}}, 200);
    CHECK(body["original"]["hit"]["entry_id"] == body["modified"]["hit"]["entry_id"]);
    CHECK(body["original"]["hit"]["similarity"] == body["modified"]["hit"]["similarity"]);
    CHECK(body["modified_similarity_to_original"] == 1.0);
  }

  auto flipped = post(client, "/api/dual",
                      {{"text", "neonatal chest x-ray RDS"},
                       {"subtract", "RDS"},
                       {"add", "meconium aspiration syndrome MAS"}},
                      200);
  CHECK(flipped["original"]["prompt_used"] == "neonatal chest x-ray RDS");
  CHECK(flipped["modified"]["prompt_used"] == "neonatal chest x-ray meconium aspiration syndrome MAS");
  CHECK(flipped["revised_description"].is_string());
}

TEST_CASE("service: empty store and degenerate query") {
  TempDir dir;
  VectorStore(kMockDim).save_dir(dir / "empty");
  RunningService svc(dir / "empty");
  auto client = svc.client();
  auto body = post(client, "/api/query", {{"text", "chest"}}, 409);
  CHECK(body["code"] == "EmptyStore");
  post(client, "/api/dual", {{"text", "chest"}, {"subtract", "a"}, {"add", "b"}}, 409);
}

TEST_CASE("service: degenerate dual query is 422") {
  TempDir dir;
  auto store_dir = build_fixture_store(dir);
  RunningService svc(store_dir);
  auto client = svc.client();
  // Build q = t1 t2 u1 u2, a = t3 t4 v1 v2 with v_i in u_i's bucket at the
  // opposite sign, s = t1 t2 t3 t4. Then q - s + a cancels exactly.
  struct Word {
    std::string text;
    std::size_t bucket;
    double sign;
  };
  std::vector<Word> words;
  for (int i = 0; words.size() < 400; ++i) {
    const std::string w = "w" + std::to_string(i);
    const auto e = mock_embed(w);
    for (std::size_t b = 0; b < kMockDim; ++b) {
      if (e[b] != 0.0) words.push_back({w, b, e[b]});
    }
  }
  std::vector<Word> picked;
  auto bucket_free = [&](std::size_t b) {
    for (const auto& p : picked) {
      if (p.bucket == b) return false;
    }
    return true;
  };
  for (const auto& w : words) {
    if (picked.size() == 6) break;
    if (bucket_free(w.bucket)) picked.push_back(w);
  }
  REQUIRE(picked.size() == 6);
  auto opposite = [&](const Word& u) {
    for (const auto& w : words) {
      if (w.bucket == u.bucket && w.sign == -u.sign) return w.text;
    }
    return std::string();
  };
  const std::string v1 = opposite(picked[4]);
  const std::string v2 = opposite(picked[5]);
  REQUIRE_FALSE(v1.empty());
  REQUIRE_FALSE(v2.empty());
  const std::string q = picked[0].text + " " + picked[1].text + " " + picked[4].text + " " + picked[5].text;
  const std::string s = picked[0].text + " " + picked[1].text + " " + picked[2].text + " " + picked[3].text;
  const std::string a = picked[2].text + " " + picked[3].text + " " + v1 + " " + v2;

  auto body = post(client, "/api/dual", {{"text", q}, {"subtract", s}, {"add", a}}, 422);
  CHECK(body["code"] == "DegenerateQuery");
  CHECK(body["stage"] == "stage1");
}

TEST_CASE("service: backend down in remote mode is 503 at encode_query") {
  TempDir dir;
  auto store_dir = build_fixture_store(dir);
  int dead_port = 0;
  {
    httplib::Server probe;
    dead_port = probe.bind_to_any_port("127.0.0.1");
  }
  BackendConfig remote;
  remote.mode = BackendMode::kRemote;
  remote.encoder_url = remote.enricher_url = remote.synthesizer_url =
      "http://127.0.0.1:" + std::to_string(dead_port);
  remote.dim = kMockDim;
  remote.timeout_seconds = 1.0;
  remote.retries = 0;
  RunningService svc(store_dir, {}, remote);
  auto client = svc.client();
  auto body = post(client, "/api/query", {{"text", "chest"}}, 503);
  CHECK(body["code"] == "BackendUnreachable");
  CHECK(body["stage"] == "encode_query");
}

TEST_CASE("service: CORS headers only for allowed origins") {
  TempDir dir;
  auto store_dir = build_fixture_store(dir);
  RunningService svc(store_dir, {"http://localhost:5173"});
  auto client = svc.client();

  auto allowed = client.Get("/health", {{"Origin", "http://localhost:5173"}});
  REQUIRE(allowed);
  CHECK(allowed->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");

  auto other = client.Get("/health", {{"Origin", "http://evil.example"}});
  REQUIRE(other);
  CHECK_FALSE(other->has_header("Access-Control-Allow-Origin"));

  auto none = client.Get("/health");
  REQUIRE(none);
  CHECK_FALSE(none->has_header("Access-Control-Allow-Origin"));

  auto preflight = client.Options("/api/query", {{"Origin", "http://localhost:5173"},
                                                 {"Access-Control-Request-Method", "POST"}});
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
  CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
}

TEST_CASE("service: concurrent requests leave the store files untouched") {
  TempDir dir;
  auto store_dir = build_fixture_store(dir);
  std::vector<Bytes> before;
  for (const char* f : {store_files::kCaptionVec, store_files::kImageVec, store_files::kMeta}) {
    before.push_back(read_file_bytes(store_dir / f));
  }
  {
    RunningService svc(store_dir);
    std::vector<std::thread> threads;
    std::atomic<int> failures{0};
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        auto client = svc.client();
        for (int i = 0; i < 5; ++i) {
          const json body = {{"text", "query " + std::to_string(t) + " mammogram mass"},
                             {"subtract", "mass"},
                             {"add", "calcification"}};
          auto res = client.Post(i % 2 ? "/api/dual" : "/api/query", body.dump(), "application/json");
          if (!res || res->status != 200) ++failures;
        }
      });
    }
    for (auto& th : threads) th.join();
    CHECK(failures == 0);
  }
  std::size_t i = 0;
  for (const char* f : {store_files::kCaptionVec, store_files::kImageVec, store_files::kMeta}) {
    CHECK(read_file_bytes(store_dir / f) == before[i++]);
  }
}
