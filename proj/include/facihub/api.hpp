#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>

#include <json.hpp>

#include "facihub/engine.hpp"
#include "facihub/error.hpp"

namespace facihub {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::map<std::string, std::string> headers;  // lower-case names
};

struct ApiResponse {
  int status = 200;
  Json body;
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::argument: return 400;
    case ErrorCode::config: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::validation: return 422;
    case ErrorCode::degenerate: return 422;
    case ErrorCode::sample_size: return 422;
    case ErrorCode::analysis: return 422;
    case ErrorCode::role_violation: return 502;
    case ErrorCode::generation: return 502;
    case ErrorCode::unparseable_output: return 502;
    case ErrorCode::integrity: return 500;
    case ErrorCode::io: return 500;
  }
  return 500;
}

inline Json error_body(const std::string& code, const std::string& message, const std::vector<FieldError>& fields = {}) {
  Json f = Json::array();
  for (const auto& e : fields) f.push_back({{"field", e.field}, {"message", e.message}});
  return {{"error", {{"code", code}, {"message", message}, {"fields", f}}}};
}

inline Json to_json(const stats::GoalReport& report, const stats::GoalOptions& options = {}) {
  std::ostringstream tsv;
  stats::write_report_tsv(tsv, report);
  return {{"metadata", stats::report_metadata(report, options)}, {"table", tsv.str()}};
}

/// Maps HTTP-shaped requests to engine operations. Transport-free so it can
/// be exercised directly; serve() binds it to a socket.
class ApiRouter {
 public:
  using Clock = std::function<Timestamp()>;

  explicit ApiRouter(Engine& engine, Clock clock = default_clock()) : engine_(engine), clock_(std::move(clock)) {}

  static Clock default_clock() {
    return [] { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); };
  }

  ApiResponse handle(const ApiRequest& req) const {
    try {
      return dispatch(req);
    } catch (const Unauthorized& e) {
      return {401, error_body("unauthorized", e.what())};
    } catch (const DecisionConflict& e) {
      Json body = error_body(to_string(e.code()), e.what());
      body["error"]["winner"] = to_json(e.winner());
      return {409, body};
    } catch (const ValidationError& e) {
      return {422, error_body(to_string(e.code()), e.what(), e.fields())};
    } catch (const Error& e) {
      return {http_status(e.code()), error_body(to_string(e.code()), e.what())};
    } catch (const Json::exception& e) {
      return {400, error_body("argument", std::string("malformed JSON: ") + e.what())};
    } catch (const std::exception& e) {
      return {500, error_body("internal", e.what())};
    }
  }

 private:
  ApiResponse dispatch(const ApiRequest& req) const {
    const std::string& p = req.path;
    if (p == "/healthz") {
      require_method(req, "GET");
      return {200, {{"status", "ok"}, {"version", kEngineVersion}}};
    }
    if (p.rfind("/api/", 0) == 0) check_token(req);

    if (p == "/api/ingest") {
      require_method(req, "POST");
      std::istringstream in(req.body);
      return {200, to_json(engine_.ingest(in))};
    }
    if (p == "/api/runs") {
      require_method(req, "POST");
      const Json body = parse_body(req);
      if (!body.contains("as_of") || !body["as_of"].is_string())
        throw ValidationError("as_of is required", {{"as_of", "required timestamp string"}});
      const auto as_of = parse_timestamp(body["as_of"].get<std::string>());
      if (!as_of) throw ValidationError("as_of is not a timestamp", {{"as_of", "unparsable timestamp"}});
      return {200, to_json(engine_.run(*as_of))};
    }
    if (p == "/api/queue") {
      require_method(req, "GET");
      Json items = Json::array();
      std::size_t position = 0;
      for (const auto& e : engine_.board().queue()) {
        Json item = to_json(e.candidate);
        item["position"] = ++position;
        item["context"] = to_json(e.context);
        items.push_back(std::move(item));
      }
      return {200, {{"pending_count", position}, {"items", items}}};
    }
    static const std::regex candidate_re("^/api/candidates/([^/]+)$");
    static const std::regex decision_re("^/api/candidates/([^/]+)/decision$");
    std::smatch match;
    if (std::regex_match(p, match, decision_re)) {
      require_method(req, "POST");
      const Json body = parse_body(req);
      const DecisionPayload payload = parse_decision_payload(body);
      return {200, to_json(engine_.decide(match[1].str(), payload, clock_()))};
    }
    if (std::regex_match(p, match, candidate_re)) {
      require_method(req, "GET");
      const std::string id = match[1].str();
      const auto entry = engine_.board().find(id);
      if (!entry) fail(ErrorCode::not_found, "unknown candidate '" + id + "'");
      Json out = to_json(entry->candidate);
      out["context"] = to_json(entry->context);
      const auto review = engine_.board().review_of(id);
      const auto publication = engine_.board().publication_of(id);
      out["status"] = review ? (review->decision == Decision::accept ? "accepted" : "rejected") : "pending";
      out["review"] = review ? to_json(*review) : Json();
      out["publication"] = publication ? to_json(*publication) : Json();
      return {200, out};
    }
    if (p == "/api/publish") {
      require_method(req, "POST");
      const Json body = req.body.empty() ? Json::object() : parse_body(req);
      Timestamp since{};
      if (body.contains("since")) since = require_timestamp(body.at("since").get<std::string>());
      Json events = Json::array();
      for (const auto& e : engine_.publish(clock_(), since)) events.push_back(to_json(e));
      return {200, {{"published", events}}};
    }
    if (p == "/api/metrics/acceptance") {
      require_method(req, "GET");
      // Defaults span the generated candidates.
      std::optional<Date> first, last;
      for (const auto& c : engine_.board().candidates()) {
        const Date d = date_of(c.generated_at);
        if (!first || d < *first) first = d;
        if (!last || d > *last) last = d;
      }
      const Date to = query_date(req, "to", last.value_or(date_of(clock_())));
      const Date from = query_date(req, "from", first.value_or(to));
      if (to < from) fail(ErrorCode::argument, "to precedes from");
      if (to - from > std::chrono::days{3660}) fail(ErrorCode::argument, "date range exceeds ten years");
      return {200, to_json(engine_.metrics(from, to))};
    }
    if (p == "/api/analysis/goal1") {
      require_method(req, "GET");
      return {200, to_json(engine_.goal1(), engine_.goal_options())};
    }
    if (p == "/api/analysis/goal2") {
      require_method(req, "GET");
      return {200, to_json(engine_.goal2())};
    }
    if (p == "/api/analysis/permutation") {
      require_method(req, "GET");
      std::optional<std::size_t> n;
      std::optional<std::uint64_t> seed;
      if (auto it = req.query.find("n"); it != req.query.end()) n = parse_count(it->second, "n");
      if (auto it = req.query.find("seed"); it != req.query.end()) seed = parse_count(it->second, "seed");
      Json results = Json::array();
      for (const auto& r : engine_.permutation(n, seed)) results.push_back(stats::to_json(r));
      return {200, {{"results", results}}};
    }
    if (p == "/api/analysis/balance") {
      require_method(req, "GET");
      return {200, stats::to_json(engine_.balance())};
    }
    if (p == "/api/coding") {
      require_method(req, "POST");
      return {200, to_json(engine_.code())};
    }
    return {404, error_body("not_found", "no route for " + req.method + " " + req.path)};
  }

  static void require_method(const ApiRequest& req, const char* method) {
    if (req.method != method) fail(ErrorCode::argument, "method " + req.method + " not allowed on " + req.path);
  }

  void check_token(const ApiRequest& req) const {
    const std::string& token = engine_.config().server.api_token;
    if (token.empty()) return;
    auto it = req.headers.find("authorization");
    if (it == req.headers.end() || it->second != "Bearer " + token) throw Unauthorized();
  }

  static Json parse_body(const ApiRequest& req) {
    Json j = Json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ValidationError("request body must be a JSON object", {{"", "not a JSON object"}});
    return j;
  }

  static Date query_date(const ApiRequest& req, const char* key, Date fallback) {
    auto it = req.query.find(key);
    if (it == req.query.end() || it->second.empty()) return fallback;
    const auto d = parse_date(it->second);
    if (!d) throw ValidationError(std::string(key) + " is not a date", {{key, "expected YYYY-MM-DD"}});
    return *d;
  }

  static std::uint64_t parse_count(const std::string& s, const char* key) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(s, &used);
      if (used == s.size()) return v;
    } catch (const std::logic_error&) {
    }
    throw ValidationError(std::string(key) + " must be a non-negative integer", {{key, "not an integer"}});
  }

 public:
  struct Unauthorized : Error {
    Unauthorized() : Error(ErrorCode::argument, "missing or wrong API token") {}
  };

 private:
  Engine& engine_;
  Clock clock_;
};

}  // namespace facihub
