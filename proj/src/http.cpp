#include "eigenfolio/http.hpp"

#include <httplib.h>

#include "eigenfolio/error.hpp"

namespace eigenfolio {

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(const std::string& base_url) : base_url_(base_url), client_(base_url) {
    if (!client_.is_valid()) throw Error(ErrorKind::argument, "invalid endpoint URL: " + base_url);
    client_.set_connection_timeout(10);
    client_.set_read_timeout(30);
    client_.set_follow_location(true);
  }

  HttpResponse get(const std::string& path, const QueryParams& query) override {
    httplib::Params params(query.begin(), query.end());
    auto result = client_.Get(path, params, httplib::Headers{});
    if (!result) {
      throw Error(ErrorKind::transport, "GET " + base_url_ + path + " failed: " +
                                            httplib::to_string(result.error()));
    }
    return {result->status, result->body};
  }

 private:
  std::string base_url_;
  httplib::Client client_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url) {
  return std::make_unique<HttplibTransport>(base_url);
}

}  // namespace eigenfolio
