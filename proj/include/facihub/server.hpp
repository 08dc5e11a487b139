#pragma once

#include <string>

#include <httplib.h>

#include "facihub/api.hpp"

namespace facihub {

inline ApiRequest to_api_request(const httplib::Request& req) {
  ApiRequest out{req.method, req.path, {}, req.body, {}};
  for (const auto& [k, v] : req.params) out.query.emplace(k, v);
  for (const auto& [k, v] : req.headers) {
    std::string key = k;
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.headers.emplace(key, v);
  }
  return out;
}

/// Routes every request through the router; no HTML error pages.
inline void bind_router(httplib::Server& server, const ApiRouter& router) {
  auto handler = [&router](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse r = router.handle(to_api_request(req));
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  const char* any = R"(/.*)";
  server.Get(any, handler);
  server.Post(any, handler);
  server.Put(any, handler);
  server.Delete(any, handler);
  server.Patch(any, handler);
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    res.status = 500;
    res.set_content(error_body("internal", "unhandled server error").dump(), "application/json");
  });
}

}  // namespace facihub
