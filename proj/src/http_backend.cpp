#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>

#include "egomind/backend.hpp"
#include "egomind/errors.hpp"

namespace egomind::gen {

namespace {

// Splits "https://host:port/v1" into ("https://host:port", "/v1").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("backend URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

}  // namespace

HttpBackend::HttpBackend(std::string base_url, std::string api_key, double timeout_s)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {
  if (base_url_.empty()) throw ConfigError("backend URL is empty");
  (void)split_url(base_url_);
}

nlohmann::json HttpBackend::request_body(const BackendRequest& request) {
  nlohmann::json content = nlohmann::json::array();
  for (const auto& p : request.user_parts) {
    if (p.kind == ContentPart::Kind::Text) {
      content.push_back({{"type", "text"}, {"text", p.value}});
    } else {
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", p.value}}}});
    }
  }
  nlohmann::json messages = nlohmann::json::array();
  if (!request.system_text.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_text}});
  }
  messages.push_back({{"role", "user"}, {"content", content}});
  return {{"model", request.model_hint},
          {"messages", messages},
          {"temperature", request.temperature},
          {"max_tokens", request.max_output_tokens}};
}

BackendResponse HttpBackend::parse_response(const nlohmann::json& body) {
  try {
    BackendResponse r;
    const auto& content = body.at("choices").at(0).at("message").at("content");
    r.text = content.is_string() ? content.get<std::string>() : std::string{};
    if (body.contains("usage") && body["usage"].contains("total_tokens")) {
      r.token_usage = body["usage"]["total_tokens"].get<std::int64_t>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed completion response: ") + e.what());
  }
}

BackendResponse HttpBackend::complete(const BackendRequest& request) {
  validate(request);
  const auto [host, path] = split_url(base_url_);
  httplib::Client client(host);
  const auto secs = static_cast<time_t>(timeout_s_);
  client.set_connection_timeout(secs);
  client.set_read_timeout(secs);
  if (!api_key_.empty()) client.set_bearer_token_auth(api_key_);

  const auto t0 = std::chrono::steady_clock::now();
  auto res = client.Post(path + "/chat/completions", request_body(request).dump(), "application/json");
  const auto t1 = std::chrono::steady_clock::now();
  if (!res) throw BackendError("transport error: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw BackendError("backend returned HTTP " + std::to_string(res->status));
  }
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("response is not JSON: ") + e.what());
  }
  auto out = parse_response(body);
  out.latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return out;
}

}  // namespace egomind::gen
