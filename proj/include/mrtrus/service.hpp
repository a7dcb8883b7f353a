#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <shared_mutex>
#include <string>
#include <string_view>

#include "mrtrus/config.hpp"
#include "mrtrus/pipeline.hpp"

namespace mrtrus {

struct ServiceRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ServiceResponse {
  int status = 200;
  std::string content_type = "text/plain";
  std::string body;
};

/// In-memory review sessions. Every route of the HTTP facade maps onto one
/// member function; `handle` does the routing and error-to-status mapping
/// (422 for domain errors, 404 unknown session or slice, 409 when another
/// mutation of the same session is in flight).
class FusionService {
 public:
  explicit FusionService(std::filesystem::path data_dir, PipelineConfig defaults = {});
  ~FusionService();
  FusionService(const FusionService&) = delete;
  FusionService& operator=(const FusionService&) = delete;

  /// Body is SESSION v1 text; relative paths resolve against the data dir.
  std::string create_session(std::string_view session_text);
  std::string composite(const std::string& id, int slice, std::optional<CrossPosition> cross, RegistrationMode mode);
  std::string overlay(const std::string& id, int slice, RegistrationMode mode);
  /// Empty body deletes the slice. Returns key: value text.
  std::string put_contour(const std::string& id, int slice, std::string_view body, bool reregister);
  std::string metrics(const std::string& id);
  std::string dvh(const std::string& id, double pitch, std::string_view bins);
  std::string journal(const std::string& id);

  ServiceResponse handle(const ServiceRequest& request);

  /// Blocks mutations of a session while the returned lock is held.
  std::unique_lock<std::mutex> hold_mutation_lock(const std::string& id);

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;

  std::filesystem::path data_dir_;
  PipelineConfig defaults_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// Thrown by FusionService for 404 and 409 outcomes.
struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Conflict : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// HTTP/1.1 server around a FusionService.
class HttpServer {
 public:
  explicit HttpServer(FusionService& service);
  ~HttpServer();
  /// Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mrtrus
