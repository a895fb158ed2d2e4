#pragma once

#include <memory>
#include <string>

#include "mirage/config.hpp"
#include "mirage/error.hpp"

namespace httplib {
class Server;
}

namespace mirage {

// HTTP status used for an error code on the query endpoints.
int http_status_for(ErrorCode code) noexcept;

// HTTP front end over an Engine.
//
//   POST /api/query           {"text", "k"?}
//   POST /api/dual            {"text", "subtract", "add", "k"?}
//   GET  /health
//   GET  /api/entries/{id}
//   GET  /api/images/{blob_or_entry_id}
//
// The store is only ever read. CORS headers are sent for configured origins.
class Service {
 public:
  Service(std::shared_ptr<const Engine> engine, ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds config.host:config.port (port 0 picks a free port). Returns the port.
  // Throws IoError if binding fails.
  int bind();
  // Serves until stop(); in-flight requests are completed before returning.
  void listen();
  void stop();
  void wait_until_ready() const;
  int port() const noexcept { return port_; }

 private:
  void install_routes();

  std::shared_ptr<const Engine> engine_;
  ServiceConfig config_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;
};

}  // namespace mirage
