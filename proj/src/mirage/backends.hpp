#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mirage/codec.hpp"
#include "mirage/embedding.hpp"

namespace mirage {

inline constexpr std::size_t kMockDim = 64;

enum class BackendMode { kMock, kRemote };

std::string_view to_string(BackendMode mode) noexcept;

inline constexpr const char* kDefaultEnrichTemplate =
    "Context captions:\n{context}\nUsing the context, write one concise medical description of: "
    "{query}";

struct BackendConfig {
  BackendMode mode = BackendMode::kMock;
  std::string encoder_url;
  std::string enricher_url;
  std::string synthesizer_url;
  double timeout_seconds = 120.0;
  int retries = 1;
  // Embedding dimension the remote encoder must return.
  std::size_t dim = 768;
  // {context} expands to one "- caption" line per context caption.
  std::string enrich_template = kDefaultEnrichTemplate;

  // Throws InvalidArgument (malformed URLs in remote mode, bad timeout).
  void validate() const;
};

struct EnrichmentRequest {
  std::string query;
  std::vector<std::string> context_captions;
};

struct GeneratedImage {
  Bytes bytes;
  std::string media_type;
};

std::string render_enrich_prompt(const std::string& tmpl, const EnrichmentRequest& req);

// Uniform access to the encoder, caption enricher and image synthesizer.
//
// The public calls validate inputs and outputs; implementations only
// provide the transport. All calls are safe to issue concurrently.
class Backends {
 public:
  virtual ~Backends() = default;

  virtual BackendMode mode() const noexcept = 0;
  virtual std::size_t dim() const noexcept = 0;

  // Throws EmptyText, BackendUnreachable, BackendError, DimensionMismatch.
  std::vector<Embedding> encode_text(const std::vector<std::string>& texts) const;
  // Throws EmptyBlob, BackendUnreachable, BackendError, DimensionMismatch.
  std::vector<Embedding> encode_image(const std::vector<Bytes>& images) const;
  // Throws InvalidArgument, BackendUnreachable, BackendError, EmptyResponse.
  std::string enrich_caption(const EnrichmentRequest& req) const;
  // Throws InvalidArgument, BackendUnreachable, BackendError, EmptyResponse.
  GeneratedImage synthesize_image(const std::string& prompt) const;

  Embedding encode_text(const std::string& text) const {
    return std::move(encode_text(std::vector<std::string>{text}).front());
  }

 protected:
  // Raw vectors, one per input, before unit-norm validation.
  virtual std::vector<std::vector<double>> do_encode_text(
      const std::vector<std::string>& texts) const = 0;
  virtual std::vector<std::vector<double>> do_encode_image(
      const std::vector<Bytes>& images) const = 0;
  virtual std::string do_enrich(const EnrichmentRequest& req) const = 0;
  virtual GeneratedImage do_synthesize(const std::string& prompt) const = 0;

 private:
  std::vector<Embedding> finish(std::vector<std::vector<double>> raw, std::size_t expected) const;
};

std::unique_ptr<Backends> make_backends(const BackendConfig& config);

// Deterministic token-hash encoder.
//
// Text is lowercased (ASCII) and split on non-alphanumeric ASCII characters;
// bytes >= 0x80 are kept inside tokens. Each token's FNV-1a 64-bit hash adds
// +1 (top bit clear) or -1 (top bit set) at index hash % 64; the accumulator is
// then L2-normalized. Throws EmptyText when there are no tokens.
std::vector<std::string> mock_tokens(std::string_view text);
// Byte blobs use consecutive 4-byte chunks rendered as lowercase hex as tokens.
// Throws EmptyBlob for an empty blob.
std::vector<std::string> mock_tokens(std::span<const std::uint8_t> blob);
Embedding mock_embed_tokens(const std::vector<std::string>& tokens);
Embedding mock_embed(std::string_view text);
Embedding mock_embed(std::span<const std::uint8_t> blob);

// 64x64 PNG whose pixels are a function of mock_embed(prompt).
GeneratedImage mock_synthesize(const std::string& prompt);

std::string mock_enrich(const EnrichmentRequest& req);

class MockBackends final : public Backends {
 public:
  BackendMode mode() const noexcept override { return BackendMode::kMock; }
  std::size_t dim() const noexcept override { return kMockDim; }

 protected:
  std::vector<std::vector<double>> do_encode_text(
      const std::vector<std::string>& texts) const override;
  std::vector<std::vector<double>> do_encode_image(const std::vector<Bytes>& images) const override;
  std::string do_enrich(const EnrichmentRequest& req) const override;
  GeneratedImage do_synthesize(const std::string& prompt) const override;
};

// JSON-over-HTTP client for the remote inference services.
//
//   POST {encoder}/encode/text    {"texts":[...]}        -> {"dim":D,"embeddings":[[...]]}
//   POST {encoder}/encode/image   {"images_b64":[...]}   -> same shape
//   POST {enricher}/enrich        {"query","context","prompt"} -> {"caption":...}
//   POST {synthesizer}/generate   {"prompt":...}         -> {"image_b64","media_type"}
class RemoteBackends final : public Backends {
 public:
  explicit RemoteBackends(BackendConfig config);

  BackendMode mode() const noexcept override { return BackendMode::kRemote; }
  std::size_t dim() const noexcept override { return config_.dim; }

 protected:
  std::vector<std::vector<double>> do_encode_text(
      const std::vector<std::string>& texts) const override;
  std::vector<std::vector<double>> do_encode_image(const std::vector<Bytes>& images) const override;
  std::string do_enrich(const EnrichmentRequest& req) const override;
  GeneratedImage do_synthesize(const std::string& prompt) const override;

 private:
  std::string post_json(const std::string& base_url, const std::string& path,
                        const std::string& body) const;
  std::vector<std::vector<double>> parse_embeddings(const std::string& body,
                                                    std::size_t expected) const;

  BackendConfig config_;
};

// Split of "http://host:port/base" into "http://host:port" and "/base".
struct ParsedUrl {
  std::string scheme_host_port;
  std::string base_path;
};
// Throws InvalidArgument.
ParsedUrl parse_url(const std::string& url);

}  // namespace mirage
