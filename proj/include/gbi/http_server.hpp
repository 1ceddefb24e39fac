#pragma once

#include <memory>
#include <string>

#include "gbi/service.hpp"

namespace gbi {

/// JSON-over-HTTP front end for a RecommendationService.
///
///   POST /sessions                   -> 201 {id}
///   POST /sessions/{id}/queries      {pattern} -> 200 query response
///   POST /sessions/{id}/feedback     {ranks: [..]} -> 200 {ok}
///   GET  /sessions/{id}              -> session view
///   GET  /ontology                   -> ontology summary
///   GET  /feedback                   -> exported log, counters and metrics
///   GET  /healthz                    -> {status, models_loaded}
///
/// Errors are {error, message, locus?}: 400 validation/parse, 404 unknown
/// session, 503 models not loaded.
class HttpServer {
 public:
  explicit HttpServer(RecommendationService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); returns false if the socket failed.
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gbi
