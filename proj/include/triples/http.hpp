#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "triples/common.hpp"

namespace triples::http {

/// Connection-level failure (DNS, refused, timeout). Retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

struct Response {
  int status = 0;
  std::string body;
};

struct Endpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // without trailing slash, may be empty
};

/// Splits `http(s)://host[:port][/path]`. Throws Error on a malformed URL.
Endpoint parse_endpoint(const std::string& url);

/// POSTs a JSON body to origin + path. Throws TransportError when no HTTP
/// response was received.
Response post_json(const Endpoint& endpoint, const std::string& path, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers,
                   std::chrono::milliseconds timeout);

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{200};
  std::chrono::milliseconds max_delay{5000};
};

/// post_json with exponential backoff on transport failures and 5xx replies.
/// Other statuses are returned to the caller. Throws GatewayError once the
/// retries are spent.
Response post_json_with_retries(const Endpoint& endpoint, const std::string& path,
                                const std::string& body,
                                const std::vector<std::pair<std::string, std::string>>& headers,
                                std::chrono::milliseconds timeout, const RetryPolicy& retry);

}  // namespace triples::http
