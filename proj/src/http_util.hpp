#pragma once

#include <cstdlib>
#include <memory>
#include <optional>
#include <string>

#include <httplib.h>

namespace maestro::detail {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix without trailing slash
};

inline ParsedUrl parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  ParsedUrl p;
  if (path_start == std::string::npos) {
    p.origin = url;
  } else {
    p.origin = url.substr(0, path_start);
    p.path = url.substr(path_start);
  }
  while (!p.path.empty() && p.path.back() == '/') p.path.pop_back();
  return p;
}

inline std::unique_ptr<httplib::Client> make_client(const std::string& origin, double timeout_s) {
  auto client = std::make_unique<httplib::Client>(origin);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client->set_connection_timeout(secs, usecs);
  client->set_read_timeout(secs, usecs);
  client->set_write_timeout(secs, usecs);
  return client;
}

// Empty optional when a credential variable is named but not set.
inline std::optional<httplib::Headers> auth_headers(const std::string& api_key_env) {
  httplib::Headers h;
  if (api_key_env.empty()) return h;
  const char* key = std::getenv(api_key_env.c_str());
  if (key == nullptr || *key == '\0') return std::nullopt;
  h.emplace("Authorization", std::string("Bearer ") + key);
  return h;
}

}  // namespace maestro::detail
