#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace lrml::http {

class HttpError : public std::runtime_error {
 public:
  HttpError(int status, const std::string& detail,
            std::optional<std::chrono::seconds> retry_after = std::nullopt);

  /// 0 when no response was received (connection refused, TLS failure).
  int status() const noexcept { return status_; }
  std::optional<std::chrono::seconds> retry_after() const noexcept { return retry_after_; }

 private:
  int status_;
  std::optional<std::chrono::seconds> retry_after_;
};

class Timeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingApiKey : public std::runtime_error {
 public:
  explicit MissingApiKey(const std::string& env_var);
};

class MalformedResponse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Response {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
};

/// POSTs a JSON body to `base_url` + `path`. `base_url` may carry a path
/// prefix (`https://host/v1`). Non-2xx statuses throw HttpError.
Response post_json(const std::string& base_url, const std::string& path, const std::string& body,
                   const std::optional<std::string>& bearer_token, int timeout_seconds);

/// Reads the key from the environment; throws MissingApiKey when unset or empty.
std::string api_key_from_env(const std::string& env_var);

}  // namespace lrml::http
