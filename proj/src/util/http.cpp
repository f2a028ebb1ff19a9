#include "lrml/util/http.hpp"

#include <cstdlib>

#include <httplib.h>

namespace lrml::http {

HttpError::HttpError(int status, const std::string& detail,
                     std::optional<std::chrono::seconds> retry_after)
    : std::runtime_error("HTTP " + std::to_string(status) + ": " + detail),
      status_(status),
      retry_after_(retry_after) {}

MissingApiKey::MissingApiKey(const std::string& env_var)
    : std::runtime_error("API key environment variable " + env_var + " is not set") {}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = base_url.find('/', host_start);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.origin = base_url;
  } else {
    out.origin = base_url.substr(0, path_start);
    out.prefix = base_url.substr(path_start);
  }
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

std::optional<std::chrono::seconds> parse_retry_after(const httplib::Response& res) {
  if (!res.has_header("Retry-After")) return std::nullopt;
  const std::string value = res.get_header_value("Retry-After");
  char* end = nullptr;
  long seconds = std::strtol(value.c_str(), &end, 10);
  if (end == value.c_str() || seconds < 0) return std::nullopt;
  return std::chrono::seconds(seconds);
}

}  // namespace

Response post_json(const std::string& base_url, const std::string& path, const std::string& body,
                   const std::optional<std::string>& bearer_token, int timeout_seconds) {
  SplitUrl url = split_url(base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);

  httplib::Headers headers;
  if (bearer_token) headers.emplace("Authorization", "Bearer " + *bearer_token);

  auto started = std::chrono::steady_clock::now();
  httplib::Result result = client.Post(url.prefix + path, headers, body, "application/json");
  if (!result) {
    auto elapsed = std::chrono::steady_clock::now() - started;
    httplib::Error err = result.error();
    if (err == httplib::Error::ConnectionTimeout ||
        (err == httplib::Error::Read && elapsed >= std::chrono::seconds(timeout_seconds))) {
      throw Timeout("request to " + base_url + path + " timed out");
    }
    throw HttpError(0, "request to " + base_url + path + " failed: " + httplib::to_string(err));
  }

  const httplib::Response& res = *result;
  if (res.status < 200 || res.status >= 300) {
    throw HttpError(res.status, res.body, parse_retry_after(res));
  }
  Response out;
  out.status = res.status;
  out.body = res.body;
  for (const auto& [k, v] : res.headers) out.headers.emplace(k, v);
  return out;
}

std::string api_key_from_env(const std::string& env_var) {
  const char* value = std::getenv(env_var.c_str());
  if (value == nullptr || *value == '\0') throw MissingApiKey(env_var);
  return value;
}

}  // namespace lrml::http
