#include "mirage/backends.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <regex>

#include "httplib.h"
#include "json.hpp"
#include "mirage/error.hpp"
#include "mirage/query_algebra.hpp"

namespace mirage {

using json = nlohmann::json;

std::string_view to_string(BackendMode mode) noexcept {
  return mode == BackendMode::kMock ? "mock" : "remote";
}

ParsedUrl parse_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[A-Za-z0-9.\-]+|https?://\[[0-9A-Fa-f:.]+\])(:[0-9]{1,5})?(/[^?#\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) {
    throw Error(ErrorCode::kInvalidArgument, "malformed URL '" + url + "'");
  }
  if (m[2].matched) {
    const int port = std::stoi(m[2].str().substr(1));
    if (port < 1 || port > 65535) throw Error(ErrorCode::kInvalidArgument, "bad port in '" + url + "'");
  }
  ParsedUrl out{m[1].str() + m[2].str(), m[3].str()};
  while (!out.base_path.empty() && out.base_path.back() == '/') out.base_path.pop_back();
  return out;
}

void BackendConfig::validate() const {
  if (!(timeout_seconds > 0.0) || !std::isfinite(timeout_seconds)) {
    throw Error(ErrorCode::kInvalidArgument, "backend timeout must be positive");
  }
  if (retries < 0) throw Error(ErrorCode::kInvalidArgument, "retries must be >= 0");
  if (mode == BackendMode::kRemote) {
    parse_url(encoder_url);
    parse_url(enricher_url);
    parse_url(synthesizer_url);
    if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "remote embedding dimension must be positive");
  }
}

std::string render_enrich_prompt(const std::string& tmpl, const EnrichmentRequest& req) {
  std::string context;
  for (std::size_t i = 0; i < req.context_captions.size(); ++i) {
    if (i) context += '\n';
    context += "- " + req.context_captions[i];
  }
  std::string out = tmpl;
  auto replace_all = [&out](std::string_view key, const std::string& value) {
    for (std::size_t pos = out.find(key); pos != std::string::npos;
         pos = out.find(key, pos + value.size())) {
      out.replace(pos, key.size(), value);
    }
  };
  replace_all("{context}", context);
  replace_all("{query}", req.query);
  return out;
}

// --- validated entry points ------------------------------------------------

std::vector<Embedding> Backends::finish(std::vector<std::vector<double>> raw,
                                        std::size_t expected) const {
  if (raw.size() != expected) {
    throw Error(ErrorCode::kBackendError, "encoder returned " + std::to_string(raw.size()) +
                                              " embeddings for " + std::to_string(expected) +
                                              " inputs");
  }
  std::vector<Embedding> out;
  out.reserve(raw.size());
  for (auto& v : raw) {
    if (v.size() != dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "encoder returned dimension " +
                                                     std::to_string(v.size()) + ", expected " +
                                                     std::to_string(dim()));
    }
    const double n = l2_norm(v);
    if (!std::isfinite(n)) throw Error(ErrorCode::kBackendError, "encoder returned non-finite values");
    if (std::abs(n - 1.0) > 1e-3) {
      throw Error(ErrorCode::kBackendError,
                  "encoder returned a vector with norm " + std::to_string(n) + " (expected unit)");
    }
    out.push_back(normalize(v));
  }
  return out;
}

std::vector<Embedding> Backends::encode_text(const std::vector<std::string>& texts) const {
  if (texts.empty()) throw Error(ErrorCode::kInvalidArgument, "encode_text needs at least one text");
  for (const auto& t : texts) {
    if (trim(t).empty()) throw Error(ErrorCode::kEmptyText, "cannot encode empty text");
  }
  return finish(do_encode_text(texts), texts.size());
}

std::vector<Embedding> Backends::encode_image(const std::vector<Bytes>& images) const {
  if (images.empty()) throw Error(ErrorCode::kInvalidArgument, "encode_image needs at least one image");
  for (const auto& b : images) {
    if (b.empty()) throw Error(ErrorCode::kEmptyBlob, "cannot encode an empty image blob");
  }
  return finish(do_encode_image(images), images.size());
}

std::string Backends::enrich_caption(const EnrichmentRequest& req) const {
  if (trim(req.query).empty()) throw Error(ErrorCode::kInvalidArgument, "enrichment query is empty");
  if (req.context_captions.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "enrichment needs at least one context caption");
  }
  std::string caption = do_enrich(req);
  if (trim(caption).empty()) throw Error(ErrorCode::kEmptyResponse, "enricher returned no text");
  return caption;
}

GeneratedImage Backends::synthesize_image(const std::string& prompt) const {
  if (trim(prompt).empty()) throw Error(ErrorCode::kInvalidArgument, "synthesis prompt is empty");
  GeneratedImage image = do_synthesize(prompt);
  if (image.bytes.empty()) throw Error(ErrorCode::kEmptyResponse, "synthesizer returned no image");
  if (image.media_type.empty()) image.media_type = sniff_media_type(image.bytes);
  return image;
}

std::unique_ptr<Backends> make_backends(const BackendConfig& config) {
  config.validate();
  if (config.mode == BackendMode::kMock) return std::make_unique<MockBackends>();
  return std::make_unique<RemoteBackends>(config);
}

// --- mock ----------------------------------------------------------------

std::vector<std::string> mock_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x80) {
      current.push_back(c);
    } else if (std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> mock_tokens(std::span<const std::uint8_t> blob) {
  if (blob.empty()) throw Error(ErrorCode::kEmptyBlob, "cannot embed an empty blob");
  std::vector<std::string> tokens;
  tokens.reserve((blob.size() + 3) / 4);
  for (std::size_t i = 0; i < blob.size(); i += 4) {
    tokens.push_back(hex_lower(blob.subspan(i, std::min<std::size_t>(4, blob.size() - i))));
  }
  return tokens;
}

Embedding mock_embed_tokens(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyText, "no tokens to embed");
  std::array<std::int64_t, kMockDim> acc{};
  for (const auto& t : tokens) {
    const std::uint64_t h = fnv1a64(t);
    acc[h % kMockDim] += (h >> 63) ? -1 : 1;
  }
  std::vector<double> v(acc.begin(), acc.end());
  return normalize(v);
}

Embedding mock_embed(std::string_view text) { return mock_embed_tokens(mock_tokens(text)); }

Embedding mock_embed(std::span<const std::uint8_t> blob) {
  return mock_embed_tokens(mock_tokens(blob));
}

GeneratedImage mock_synthesize(const std::string& prompt) {
  const Embedding e = mock_embed(prompt);
  constexpr std::uint32_t kSide = 64;
  auto level = [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp((v + 1.0) * 127.5, 0.0, 255.0)));
  };
  Bytes rgb;
  rgb.reserve(kSide * kSide * 3);
  for (std::uint32_t y = 0; y < kSide; ++y) {
    for (std::uint32_t x = 0; x < kSide; ++x) {
      rgb.push_back(level(e[x % kMockDim]));
      rgb.push_back(level(e[y % kMockDim]));
      rgb.push_back(level(e[(x + y) % kMockDim]));
    }
  }
  return {encode_png_rgb(kSide, kSide, rgb), "image/png"};
}

std::string mock_enrich(const EnrichmentRequest& req) {
  std::string out = "Enriched: " + req.query + " | context: ";
  for (std::size_t i = 0; i < req.context_captions.size(); ++i) {
    if (i) out += "; ";
    out += req.context_captions[i];
  }
  return out;
}

std::vector<std::vector<double>> MockBackends::do_encode_text(
    const std::vector<std::string>& texts) const {
  std::vector<std::vector<double>> out;
  for (const auto& t : texts) {
    auto e = mock_embed(t);
    out.emplace_back(e.values().begin(), e.values().end());
  }
  return out;
}

std::vector<std::vector<double>> MockBackends::do_encode_image(
    const std::vector<Bytes>& images) const {
  std::vector<std::vector<double>> out;
  for (const auto& b : images) {
    auto e = mock_embed(std::span<const std::uint8_t>(b));
    out.emplace_back(e.values().begin(), e.values().end());
  }
  return out;
}

std::string MockBackends::do_enrich(const EnrichmentRequest& req) const { return mock_enrich(req); }

GeneratedImage MockBackends::do_synthesize(const std::string& prompt) const {
  return mock_synthesize(prompt);
}

// --- remote --------------------------------------------------------------

RemoteBackends::RemoteBackends(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
}

namespace {

std::string error_message_from(const std::string& body) {
  try {
    auto j = json::parse(body);
    if (j.is_object() && j.contains("error") && j["error"].is_string()) {
      return j["error"].get<std::string>();
    }
  } catch (const json::exception&) {
  }
  return body.substr(0, 200);
}

void set_timeouts(httplib::Client& client, std::chrono::microseconds budget) {
  const auto sec = static_cast<time_t>(budget.count() / 1'000'000);
  const auto usec = static_cast<time_t>(budget.count() % 1'000'000);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
}

}  // namespace

std::string RemoteBackends::post_json(const std::string& base_url, const std::string& path,
                                      const std::string& body) const {
  using clock = std::chrono::steady_clock;
  const ParsedUrl url = parse_url(base_url);
  const auto deadline =
      clock::now() + std::chrono::microseconds(
                         static_cast<std::int64_t>(config_.timeout_seconds * 1'000'000.0));
  const std::string full_path = url.base_path + path;

  std::string last_failure;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    const auto remaining =
        std::chrono::duration_cast<std::chrono::microseconds>(deadline - clock::now());
    if (remaining.count() <= 0) break;

    httplib::Client client(url.scheme_host_port);
    set_timeouts(client, remaining);
    auto res = client.Post(full_path, body, "application/json");
    if (!res) {
      last_failure = base_url + full_path + ": " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    const std::string message = error_message_from(res->body);
    if (res->status >= 500 && attempt < config_.retries) {
      last_failure = "HTTP " + std::to_string(res->status) + ": " + message;
      continue;
    }
    throw Error(ErrorCode::kBackendError,
                base_url + full_path + " returned HTTP " + std::to_string(res->status) + ": " +
                    message);
  }
  if (last_failure.rfind("HTTP ", 0) == 0) {
    throw Error(ErrorCode::kBackendError, base_url + full_path + " returned " + last_failure);
  }
  throw Error(ErrorCode::kBackendUnreachable,
              last_failure.empty() ? base_url + full_path + ": timed out" : last_failure);
}

std::vector<std::vector<double>> RemoteBackends::parse_embeddings(const std::string& body,
                                                                  std::size_t expected) const {
  try {
    auto j = json::parse(body);
    const auto dim = j.at("dim").get<std::size_t>();
    if (dim != config_.dim) {
      throw Error(ErrorCode::kDimensionMismatch, "encoder reports dimension " + std::to_string(dim) +
                                                     ", expected " + std::to_string(config_.dim));
    }
    auto out = j.at("embeddings").get<std::vector<std::vector<double>>>();
    if (out.size() != expected) {
      throw Error(ErrorCode::kBackendError, "encoder returned " + std::to_string(out.size()) +
                                                " embeddings for " + std::to_string(expected) +
                                                " inputs");
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBackendError, std::string("malformed encoder response: ") + e.what());
  }
}

std::vector<std::vector<double>> RemoteBackends::do_encode_text(
    const std::vector<std::string>& texts) const {
  json body = {{"texts", texts}};
  return parse_embeddings(post_json(config_.encoder_url, "/encode/text", body.dump()),
                          texts.size());
}

std::vector<std::vector<double>> RemoteBackends::do_encode_image(
    const std::vector<Bytes>& images) const {
  json encoded = json::array();
  for (const auto& b : images) encoded.push_back(base64_encode(b));
  json body = {{"images_b64", std::move(encoded)}};
  return parse_embeddings(post_json(config_.encoder_url, "/encode/image", body.dump()),
                          images.size());
}

std::string RemoteBackends::do_enrich(const EnrichmentRequest& req) const {
  json body = {{"query", req.query},
               {"context", req.context_captions},
               {"prompt", render_enrich_prompt(config_.enrich_template, req)}};
  const std::string response = post_json(config_.enricher_url, "/enrich", body.dump());
  try {
    return json::parse(response).at("caption").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBackendError, std::string("malformed enricher response: ") + e.what());
  }
}

GeneratedImage RemoteBackends::do_synthesize(const std::string& prompt) const {
  json body = {{"prompt", prompt}};
  const std::string response = post_json(config_.synthesizer_url, "/generate", body.dump());
  try {
    auto j = json::parse(response);
    GeneratedImage image;
    image.bytes = base64_decode(j.at("image_b64").get<std::string>());
    image.media_type = j.value("media_type", std::string());
    return image;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBackendError, std::string("malformed synthesizer response: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kBackendError, std::string("bad image payload: ") + e.what());
  }
}

}  // namespace mirage
