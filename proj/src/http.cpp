#include "triples/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <thread>

namespace triples::http {

Endpoint parse_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("endpoint '" + url + "' must start with http:// or https://");
  std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error("endpoint '" + url + "' must start with http:// or https://");
  }
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  if (ep.origin.size() <= scheme_end + 3) throw Error("endpoint '" + url + "' has no host");
  if (path_start != std::string::npos) ep.base_path = url.substr(path_start);
  while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  return ep;
}

Response post_json(const Endpoint& endpoint, const std::string& path, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers,
                   std::chrono::milliseconds timeout) {
  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);
  auto res = client.Post(endpoint.base_path + path, hdrs, body, "application/json");
  if (!res) {
    throw TransportError("request to " + endpoint.origin + endpoint.base_path + path +
                         " failed: " + httplib::to_string(res.error()));
  }
  return Response{res->status, res->body};
}

Response post_json_with_retries(const Endpoint& endpoint, const std::string& path,
                                const std::string& body,
                                const std::vector<std::pair<std::string, std::string>>& headers,
                                std::chrono::milliseconds timeout, const RetryPolicy& retry) {
  std::string last_error;
  auto delay = retry.base_delay;
  for (int attempt = 0; attempt <= retry.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay = std::min(delay * 2, retry.max_delay);
    }
    try {
      Response res = post_json(endpoint, path, body, headers, timeout);
      if (res.status < 500) return res;
      last_error = "HTTP " + std::to_string(res.status) + " from " + endpoint.origin +
                   endpoint.base_path + path;
    } catch (const TransportError& e) {
      last_error = e.what();
    }
  }
  throw GatewayError("giving up after " + std::to_string(retry.max_retries + 1) +
                     " attempts: " + last_error);
}

}  // namespace triples::http
