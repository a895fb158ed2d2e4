#include "mirage/service.hpp"

#include <algorithm>

#include "httplib.h"
#include "mirage/error.hpp"
#include "mirage/query_algebra.hpp"
#include "mirage/result_json.hpp"

namespace mirage {

using json = nlohmann::json;

int http_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidK:
    case ErrorCode::kMissingTerms:
    case ErrorCode::kEmptyText:
    case ErrorCode::kParseError:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kEmptyStore:
      return 409;
    case ErrorCode::kDegenerateQuery:
      return 422;
    case ErrorCode::kBackendError:
    case ErrorCode::kEmptyResponse:
    case ErrorCode::kDimensionMismatch:
      return 502;
    case ErrorCode::kBackendUnreachable:
      return 503;
    default:
      return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const ojson& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message,
                std::string_view code = {}, const std::string& stage = {}) {
  ojson body;
  body["error"] = message;
  if (!code.empty()) body["code"] = std::string(code);
  if (!stage.empty()) body["stage"] = stage;
  send_json(res, status, body);
}

void send_error(httplib::Response& res, const Error& e) {
  send_error(res, http_status_for(e.code()), e.what(), to_string(e.code()), e.stage());
}

// Parses the body as a JSON object; on failure answers 400 and returns nullopt.
std::optional<json> body_object(const httplib::Request& req, httplib::Response& res) {
  try {
    auto j = json::parse(req.body);
    if (j.is_object()) return j;
  } catch (const json::exception&) {
  }
  send_error(res, 400, "request body must be a JSON object", "InvalidArgument");
  return std::nullopt;
}

// Required non-empty string field; answers 400 when absent.
std::optional<std::string> text_field(const json& j, const char* name, httplib::Response& res) {
  if (!j.contains(name) || !j[name].is_string() || trim(j[name].get<std::string>()).empty()) {
    send_error(res, 400, std::string("field '") + name + "' must be a non-empty string",
               "InvalidArgument");
    return std::nullopt;
  }
  return j[name].get<std::string>();
}

std::optional<std::size_t> k_field(const json& j, std::size_t fallback, httplib::Response& res) {
  if (!j.contains("k") || j["k"].is_null()) return fallback;
  if (!j["k"].is_number_integer() || j["k"].get<long long>() < 1) {
    send_error(res, 400, "field 'k' must be a positive integer", "InvalidK");
    return std::nullopt;
  }
  return static_cast<std::size_t>(j["k"].get<long long>());
}

}  // namespace

Service::Service(std::shared_ptr<const Engine> engine, ServiceConfig config)
    : engine_(std::move(engine)),
      config_(std::move(config)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

Service::~Service() { stop(); }

void Service::install_routes() {
  auto& s = *server_;
  const auto origins = config_.cors_origins;

  s.set_post_routing_handler([origins](const httplib::Request& req, httplib::Response& res) {
    const std::string origin = req.get_header_value("Origin");
    if (origin.empty()) return;
    const bool wildcard = std::find(origins.begin(), origins.end(), "*") != origins.end();
    if (wildcard || std::find(origins.begin(), origins.end(), origin) != origins.end()) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    }
  });

  s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  s.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    ojson body;
    body["status"] = "ok";
    body["entries"] = engine_->store().size();
    body["backend_mode"] = std::string(to_string(engine_->backends().mode()));
    send_json(res, 200, body);
  });

  s.Get(R"(/api/entries/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto row = engine_->store().row_of(req.matches[1]);
    if (!row) return send_error(res, 404, "unknown entry id", "NotFound");
    send_json(res, 200, entry_to_json(engine_->store().meta(*row)));
  });

  s.Get(R"(/api/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      Blob blob = engine_->image_for(req.matches[1]);
      res.status = 200;
      res.set_content(std::string(blob.bytes.begin(), blob.bytes.end()), blob.media_type);
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  s.Post("/api/query", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = body_object(req, res);
    if (!body) return;
    auto text = text_field(*body, "text", res);
    if (!text) return;
    auto k = k_field(*body, engine_->default_k(), res);
    if (!k) return;
    try {
      ConceptQuery q{*text, std::nullopt, std::nullopt, *k};
      auto result = engine_->pipeline().single_query(q);
      send_json(res, 200, result_to_json(result, engine_->store(), true));
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  s.Post("/api/dual", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = body_object(req, res);
    if (!body) return;
    auto text = text_field(*body, "text", res);
    if (!text) return;
    auto subtract = text_field(*body, "subtract", res);
    if (!subtract) return;
    auto add = text_field(*body, "add", res);
    if (!add) return;
    auto k = k_field(*body, engine_->default_k(), res);
    if (!k) return;
    try {
      ConceptQuery q{*text, *subtract, *add, *k};
      auto result = engine_->pipeline().dual_query(q);
      send_json(res, 200, dual_to_json(result, engine_->store(), true));
    } catch (const Error& e) {
      send_error(res, e);
    }
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, 500, e.what(), "Internal");
    } catch (...) {
      send_error(res, 500, "unknown error", "Internal");
    }
  });
}

int Service::bind() {
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
  } else {
    port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (port_ <= 0) {
    throw Error(ErrorCode::kIoError,
                "cannot listen on " + config_.host + ":" + std::to_string(config_.port));
  }
  return port_;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void Service::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace mirage
