#pragma once

#include <map>
#include <memory>
#include <string>

namespace eigenfolio {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using QueryParams = std::multimap<std::string, std::string>;

/// Minimal GET interface, backed by the network or by recorded fixtures.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// Throws Error{transport} when no response could be obtained.
  virtual HttpResponse get(const std::string& path, const QueryParams& query) = 0;
};

/// cpp-httplib backed transport for http:// and https:// base URLs.
std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url);

}  // namespace eigenfolio
