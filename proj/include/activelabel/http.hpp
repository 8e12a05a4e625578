#pragma once

// JSON over HTTP for the annotation service. Errors are returned as
// {"error": code, "detail": message}.

#include <charconv>
#include <memory>
#include <sstream>
#include <string>

#include "activelabel/error.hpp"
#include "activelabel/service.hpp"

// Keep below Eigen: <resolv.h> defines a `_res` macro.
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace activelabel {

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::NoRoundsYet: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::Busy:
    case ErrorCode::EmptyPool:
    case ErrorCode::PoolExhausted: return 409;
    case ErrorCode::TaxonomyError: return 422;
    case ErrorCode::IoError:
    case ErrorCode::NumericError: return 500;
    default: return 400;
  }
}

inline nlohmann::json counts_to_json(const PoolCounts& c) {
  return {{"labeled", c.labeled}, {"unlabeled", c.unlabeled}, {"validation", c.validation}, {"leased", c.leased}};
}

namespace detail {

inline void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, ErrorCode code, const std::string& detail) {
  send_json(res, {{"error", std::string(to_string(code))}, {"detail", detail}}, http_status(code));
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, ErrorCode::FormatError, e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorCode::IoError, e.what());
    }
  };
}

inline std::size_t query_size(const httplib::Request& req, const char* name, std::size_t fallback) {
  if (!req.has_param(name)) return fallback;
  const auto text = req.get_param_value(name);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value == 0)
    throw Error(ErrorCode::ConfigError, std::string("query parameter '") + name + "' must be a positive integer");
  return value;
}

}  // namespace detail

/// Registers every endpoint on `server`. `service` must outlive it.
inline void mount_routes(httplib::Server& server, Service& service) {
  using detail::guarded;
  using detail::send_json;

  server.Post("/corpus", guarded([&](const httplib::Request& req, httplib::Response& res) {
                std::istringstream in(req.body);
                send_json(res, {{"counts", counts_to_json(service.ingest(in))}});
              }));

  server.Get("/tasks", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const auto n = detail::query_size(req, "n", 10);
               const auto annotator = req.has_param("annotator") ? req.get_param_value("annotator") : "";
               const auto queue = service.queue_next(n, annotator);
               nlohmann::json tasks = nlohmann::json::array();
               for (const auto& t : queue.tasks) tasks.push_back(task_to_json(t));
               send_json(res, {{"ranked", queue.ranked}, {"tasks", tasks}});
             }));

  server.Post(R"(/tasks/([^/]+)/labels)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const auto body = nlohmann::json::parse(req.body);
                detail::reject_unknown_keys(body, {"aspects", "sentiment", "annotator"}, "label submission");
                LabelSubmission s;
                s.id = req.matches[1];
                s.aspects = body.value("aspects", std::vector<std::string>{});
                s.sentiment = body.value("sentiment", std::vector<std::string>{});
                s.annotator = body.value("annotator", std::string{});
                const auto labeled = service.submit_labels(s);
                send_json(res, {{"id", s.id}, {"labeled", labeled}});
              }));

  server.Post("/train", guarded([&](const httplib::Request&, httplib::Response& res) {
                const auto job = service.trigger_retrain();
                send_json(res, {{"job", job}, {"state", "running"}}, 202);
              }));

  server.Get("/train/status", guarded([&](const httplib::Request&, httplib::Response& res) {
               const auto s = service.train_status();
               nlohmann::json body{{"state", std::string(to_string(s.state))}, {"job", s.job}, {"rounds", s.rounds}};
               if (!s.error.empty()) body["error"] = s.error;
               send_json(res, body);
             }));

  server.Get("/metrics", guarded([&](const httplib::Request&, httplib::Response& res) {
               const auto m = service.get_metrics();
               nlohmann::json eval = nlohmann::json::object();
               for (const auto& [task, report] : m.eval) eval[std::string(to_string(task))] = report;
               send_json(res, {{"round", m.round}, {"eval", eval}, {"counts", counts_to_json(m.counts)}});
             }));

  server.Get("/curve", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const auto format = req.has_param("format") ? req.get_param_value("format") : "json";
               if (format == "csv") {
                 res.set_content(service.curve_csv(), "text/csv");
                 return;
               }
               if (format != "json") throw Error(ErrorCode::ConfigError, "format must be json or csv");
               const auto curve = service.get_curve();
               nlohmann::json points = nlohmann::json::array();
               for (const auto& p : curve.points) {
                 nlohmann::json eval = nlohmann::json::object();
                 for (const auto& [task, report] : p.eval) eval[std::string(to_string(task))] = report;
                 points.push_back({{"round", p.round}, {"labeled_count", p.labeled_count}, {"eval", eval}});
               }
               send_json(res, {{"setting", curve.setting}, {"seed", *curve.seed}, {"points", points}});
             }));

  server.Get("/taxonomy", guarded([&](const httplib::Request&, httplib::Response& res) {
               send_json(res, nlohmann::json(service.taxonomy()));
             }));

  server.Get("/counts", guarded([&](const httplib::Request&, httplib::Response& res) {
               send_json(res, counts_to_json(service.counts()));
             }));
}

}  // namespace activelabel
