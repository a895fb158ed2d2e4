#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "mirage/backends.hpp"
#include "mirage/error.hpp"
#include "stub_server.hpp"

using namespace mirage;
using nlohmann::json;
using test_support::StubServer;

namespace {

// Straight transcription of the mock encoder rule, kept separate from the
// library so the two can be compared.
std::vector<double> reference_mock(const std::vector<std::string>& tokens) {
  std::vector<double> acc(64, 0.0);
  for (const auto& t : tokens) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    acc[h % 64] += (h >> 63) ? -1.0 : 1.0;
  }
  double n = 0.0;
  for (double x : acc) n += x * x;
  n = std::sqrt(n);
  for (double& x : acc) x /= n;
  return acc;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

BackendConfig remote_config(const std::string& url, std::size_t dim) {
  BackendConfig c;
  c.mode = BackendMode::kRemote;
  c.encoder_url = url;
  c.enricher_url = url;
  c.synthesizer_url = url;
  c.dim = dim;
  c.timeout_seconds = 5.0;
  c.retries = 0;
  return c;
}

}  // namespace

TEST_CASE("mock_embed: tokenization") {
  CHECK(mock_tokens("Chest X-ray, AP view") ==
        std::vector<std::string>{"chest", "x", "ray", "ap", "view"});
  CHECK(mock_tokens("  --  ").empty());
}

TEST_CASE("mock_embed: frozen vector for \"chest x-ray\"") {
  auto e = mock_embed("chest x-ray");
  const double v = 1.0 / std::sqrt(3.0);
  for (std::size_t i = 0; i < 64; ++i) {
    if (i == 7 || i == 22 || i == 31) {
      CHECK(e[i] == doctest::Approx(-v).epsilon(1e-15));
    } else {
      CHECK(e[i] == 0.0);
    }
  }
  auto ref = reference_mock({"chest", "x", "ray"});
  for (std::size_t i = 0; i < 64; ++i) CHECK(e[i] == ref[i]);
}

TEST_CASE("mock_embed: case and order invariance, similarity structure") {
  CHECK(mock_embed("CT") == mock_embed("ct"));
  CHECK(mock_embed("a b") == mock_embed("b a"));
  const double near = cosine(mock_embed("chest x-ray"), mock_embed("chest x-ray scan"));
  const double far = cosine(mock_embed("chest x-ray"), mock_embed("knee mri"));
  CHECK(near == doctest::Approx(3.0 / (std::sqrt(3.0) * 2.0)).epsilon(1e-12));
  CHECK(far == 0.0);
  CHECK(near > far);
}

TEST_CASE("mock_embed: agrees with the reference on varied text") {
  for (const char* text : {"Neonatal RDS", "mass in left breast, spiculated margins",
                           "ünïcode tokens stay whole", "T2-weighted MRI 3.0T", "a"}) {
    auto ref = reference_mock(mock_tokens(text));
    auto e = mock_embed(text);
    for (std::size_t i = 0; i < 64; ++i) CHECK(e[i] == doctest::Approx(ref[i]).epsilon(1e-15));
  }
}

TEST_CASE("mock_embed: blobs") {
  const Bytes a = {0xde, 0xad, 0xbe, 0xef, 0x01};
  const Bytes b = {0xde, 0xad, 0xbe, 0xef, 0x02};
  CHECK(mock_tokens(std::span<const std::uint8_t>(a)) == std::vector<std::string>{"deadbeef", "01"});
  CHECK(mock_embed(std::span<const std::uint8_t>(a)) == mock_embed(std::span<const std::uint8_t>(a)));
  CHECK_FALSE(mock_embed(std::span<const std::uint8_t>(a)) == mock_embed(std::span<const std::uint8_t>(b)));
  MockBackends mock;
  CHECK(code_of([&] { mock.encode_image({Bytes{}}); }) == ErrorCode::kEmptyBlob);
}

TEST_CASE("mock backends: encode_text batch and errors") {
  MockBackends mock;
  auto out = mock.encode_text(std::vector<std::string>{"ct", "ct", "mri"});
  REQUIRE(out.size() == 3);
  CHECK(out[0] == out[1]);
  CHECK(out[0] == mock_embed("ct"));
  CHECK(out[2].dim() == 64);
  CHECK(code_of([&] { mock.encode_text(std::vector<std::string>{"ct", "  "}); }) == ErrorCode::kEmptyText);
  CHECK(code_of([&] { mock.encode_text(std::vector<std::string>{"--"}); }) == ErrorCode::kEmptyText);
}

TEST_CASE("mock backends: enrichment") {
  MockBackends mock;
  CHECK(mock.enrich_caption({"RDS", {"cap1", "cap2"}}) == "Enriched: RDS | context: cap1; cap2");
  CHECK(code_of([&] { mock.enrich_caption({"RDS", {}}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("mock backends: synthesized PNG") {
  MockBackends mock;
  auto a = mock.synthesize_image("neonatal chest x-ray");
  auto b = mock.synthesize_image("neonatal chest x-ray");
  auto c = mock.synthesize_image("knee mri");
  CHECK(a.media_type == "image/png");
  CHECK(a.bytes == b.bytes);
  CHECK(a.bytes != c.bytes);
  const Bytes sig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  REQUIRE(a.bytes.size() > 33);
  CHECK(std::equal(sig.begin(), sig.end(), a.bytes.begin()));
  // IHDR width and height, big-endian.
  CHECK(a.bytes[16 + 3] == 64);
  CHECK(a.bytes[20 + 3] == 64);
  CHECK(sniff_media_type(a.bytes) == "image/png");
}

TEST_CASE("enrichment prompt template") {
  EnrichmentRequest req{"RDS", {"cap1", "cap2"}};
  CHECK(render_enrich_prompt(kDefaultEnrichTemplate, req) ==
        "Context captions:\n- cap1\n- cap2\nUsing the context, write one concise medical "
        "description of: RDS");
}

TEST_CASE("backend config validation and URL parsing") {
  BackendConfig mock;
  CHECK_NOTHROW(mock.validate());
  auto bad = remote_config("not a url", 4);
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::kInvalidArgument);
  auto p = parse_url("http://localhost:9000/v1/");
  CHECK(p.scheme_host_port == "http://localhost:9000");
  CHECK(p.base_path == "/v1");
  CHECK(parse_url("https://example.org").base_path.empty());
}

TEST_CASE("remote backends against a stub server") {
  StubServer stub;
  std::atomic<int> calls{0};
  json last_enrich;
  std::mutex mu;
  stub.server().Post("/encode/text", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    auto body = json::parse(req.body);
    json emb = json::array();
    for (std::size_t i = 0; i < body["texts"].size(); ++i) {
      emb.push_back(i % 2 == 0 ? json::array({1.0, 0.0, 0.0}) : json::array({0.0, 0.6, 0.8}));
    }
    res.set_content(json{{"dim", 3}, {"embeddings", emb}}.dump(), "application/json");
  });
  stub.server().Post("/encode/image", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    CHECK(body["images_b64"][0] == "AQID");
    res.set_content(R"({"dim":3,"embeddings":[[0,0,1.0005]]})", "application/json");
  });
  stub.server().Post("/enrich", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    last_enrich = json::parse(req.body);
    res.set_content(R"({"caption":"text X"})", "application/json");
  });
  stub.server().Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"image_b64":"iVBORw0KGgo=","media_type":"image/png"})", "application/json");
  });
  stub.start();

  auto backends = make_backends(remote_config(stub.url(), 3));
  CHECK(backends->mode() == BackendMode::kRemote);

  auto vecs = backends->encode_text(std::vector<std::string>{"a", "b", "c"});
  REQUIRE(vecs.size() == 3);
  CHECK(std::vector<double>(vecs[0].values().begin(), vecs[0].values().end()) ==
        std::vector<double>{1.0, 0.0, 0.0});
  CHECK(vecs[1][1] == doctest::Approx(0.6));
  CHECK(vecs[1][2] == doctest::Approx(0.8));
  CHECK(vecs[2] == vecs[0]);

  // Slightly off-unit vectors are renormalized.
  auto img = backends->encode_image({Bytes{1, 2, 3}});
  CHECK(img[0][2] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(backends->enrich_caption({"RDS", {"cap1", "cap2"}}) == "text X");
  {
    std::lock_guard lock(mu);
    CHECK(last_enrich["query"] == "RDS");
    CHECK(last_enrich["context"] == json::array({"cap1", "cap2"}));
    CHECK(last_enrich["prompt"].get<std::string>().find("- cap1\n- cap2") != std::string::npos);
  }

  auto image = backends->synthesize_image("anything");
  CHECK(image.bytes == Bytes{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'});
  CHECK(image.media_type == "image/png");
}

TEST_CASE("remote backends: error responses") {
  StubServer stub;
  stub.server().Post("/encode/text", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    const std::string t = body["texts"][0];
    if (t == "wrongdim") {
      res.set_content(R"({"dim":2,"embeddings":[[1,0]]})", "application/json");
    } else if (t == "notunit") {
      res.set_content(R"({"dim":3,"embeddings":[[2,0,0]]})", "application/json");
    } else if (t == "garbage") {
      res.set_content("not json", "text/plain");
    } else {
      res.status = 400;
      res.set_content(R"({"error":"model exploded"})", "application/json");
    }
  });
  stub.server().Post("/enrich", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"caption":"   "})", "application/json");
  });
  stub.start();
  auto backends = make_backends(remote_config(stub.url(), 3));

  try {
    backends->encode_text("boom");
    FAIL("expected BackendError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBackendError);
    CHECK(std::string(e.what()).find("model exploded") != std::string::npos);
  }
  CHECK(code_of([&] { backends->encode_text("wrongdim"); }) == ErrorCode::kDimensionMismatch);
  CHECK(code_of([&] { backends->encode_text("notunit"); }) == ErrorCode::kBackendError);
  CHECK(code_of([&] { backends->encode_text("garbage"); }) == ErrorCode::kBackendError);
  CHECK(code_of([&] { backends->enrich_caption({"q", {"c"}}); }) == ErrorCode::kEmptyResponse);
}

TEST_CASE("remote backends: retry on 5xx") {
  StubServer stub;
  std::atomic<int> calls{0};
  stub.server().Post("/enrich", [&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 503;
      res.set_content(R"({"error":"warming up"})", "application/json");
      return;
    }
    res.set_content(R"({"caption":"ok"})", "application/json");
  });
  stub.start();
  auto config = remote_config(stub.url(), 3);
  config.retries = 1;
  auto backends = make_backends(config);
  CHECK(backends->enrich_caption({"q", {"c"}}) == "ok");
  CHECK(calls == 2);
}

TEST_CASE("remote backends: unreachable and timeout") {
  SUBCASE("nothing listening") {
    StubServer probe;
    probe.start();
    const std::string url = probe.url();
    probe.stop();
    auto backends = make_backends(remote_config(url, 3));
    CHECK(code_of([&] { backends->encode_text("x"); }) == ErrorCode::kBackendUnreachable);
  }
  SUBCASE("slow server is cut off near the timeout") {
    StubServer stub;
    stub.server().Post("/encode/text", [&](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2500));
      res.set_content(R"({"dim":3,"embeddings":[[1,0,0]]})", "application/json");
    });
    stub.start();
    auto config = remote_config(stub.url(), 3);
    config.timeout_seconds = 0.5;
    config.retries = 1;
    auto backends = make_backends(config);
    const auto start = std::chrono::steady_clock::now();
    CHECK(code_of([&] { backends->encode_text("x"); }) == ErrorCode::kBackendUnreachable);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < config.timeout_seconds + 1.0);
  }
}
