#include "gbi/http_server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "gbi/json_io.hpp"

namespace gbi {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message,
                const json& locus = nullptr) {
  json body = {{"error", kind}, {"message", message}};
  if (!locus.is_null()) body["locus"] = locus;
  send_json(res, status, body);
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ParseError("body", e.what());
  }
}

template <class F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const UnavailableError& e) {
      send_error(res, 503, "unavailable", e.what());
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, "validation", e.what(), e.offenders());
    } catch (const ParseError& e) {
      send_error(res, 400, "parse", e.what(), e.locus());
    } catch (const ConfigError& e) {
      send_error(res, 400, "config", e.what());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  RecommendationService& service;
  httplib::Server server;

  explicit Impl(RecommendationService& s) : service(s) { routes(); }

  void routes() {
    server.Get("/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
      const bool ready = service.ready();
      send_json(res, ready ? 200 : 503, {{"status", ready ? "ok" : "loading"}, {"models_loaded", ready}});
    }));

    server.Post("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 201, {{"id", service.create_session()}});
    }));

    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, session_view_to_json(service.get_session(req.matches[1])));
    }));

    server.Post(R"(/sessions/([^/]+)/queries)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      if (!body.is_object() || !body.contains("pattern")) throw ParseError("pattern", "missing field");
      const BiPattern p = pattern_from_json(body.at("pattern"), "pattern");
      send_json(res, 200, query_response_to_json(service.submit_query(req.matches[1], p)));
    }));

    server.Post(R"(/sessions/([^/]+)/feedback)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      std::vector<int> ranks;
      try {
        ranks = body.at("ranks").get<std::vector<int>>();
      } catch (const json::exception& e) {
        throw ParseError("ranks", e.what());
      }
      service.submit_feedback(req.matches[1], ranks);
      send_json(res, 200, {{"ok", true}});
    }));

    server.Get("/ontology", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, service.ontology_summary());
    }));

    server.Get("/feedback", guarded([this](const httplib::Request&, httplib::Response& res) {
      const FeedbackLog log = service.export_feedback();
      const FeedbackCounters c = service.counters();
      json body = {{"log", feedback_to_json(log)},
                   {"counters",
                    {{"answered", c.answered},
                     {"with_selection", c.with_selection},
                     {"reciprocal_rank_sum", c.reciprocal_rank_sum},
                     {"votes_by_rank", c.votes_by_rank}}}};
      body["precision_at_3"] = log.empty() ? json(nullptr) : json(precision_at_3(log));
      body["mrr"] = log.empty() ? json(nullptr) : json(mrr(log));
      send_json(res, 200, body);
    }));

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, "http", httplib::status_message(res.status));
    });
  }
};

HttpServer::HttpServer(RecommendationService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }
void HttpServer::stop() { impl_->server.stop(); }
void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace gbi
