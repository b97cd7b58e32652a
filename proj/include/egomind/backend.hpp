#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

// Chat-completion backends: one request/response shape shared by the mock
// fixture replayer and the HTTP client.
namespace egomind::gen {

struct ContentPart {
  enum class Kind { Text, ImageUrl };
  Kind kind = Kind::Text;
  std::string value;  // text, or an image URL / data URI

  static ContentPart text(std::string s) { return {Kind::Text, std::move(s)}; }
  static ContentPart image(std::string url) { return {Kind::ImageUrl, std::move(url)}; }
  bool operator==(const ContentPart&) const = default;
};

struct BackendRequest {
  std::string model_hint;
  std::string system_text;
  std::vector<ContentPart> user_parts;
  double temperature = 0.0;
  int max_output_tokens = 2048;
  // Routing keys that never reach the wire (sample_id, stage).
  std::map<std::string, std::string> metadata;
};

// Throws PreconditionError: user_parts empty or temperature negative.
void validate(const BackendRequest& request);

struct BackendResponse {
  std::string text;
  std::int64_t token_usage = 0;
  double latency_ms = 0.0;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // Throws BackendError on transport failure.
  virtual BackendResponse complete(const BackendRequest& request) = 0;
};

// Thrown by MockBackend when a simulated crash fires. Deliberately not an
// egomind::Error so the pipeline does not swallow it.
struct SimulatedCrash : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Replays canned replies keyed by (sample_id, stage) from request metadata.
// Thread safe.
class MockBackend : public ChatBackend {
 public:
  void add_fixture(const std::string& sample_id, const std::string& stage, std::string text);
  // The next n calls for the key fail with BackendError.
  void inject_failures(const std::string& sample_id, const std::string& stage, int n);
  // Crash (SimulatedCrash) instead of serving once this many replies were served.
  void crash_after(std::int64_t served_calls);

  // JSON-Lines records {sample_id, stage, text[, fail]}.
  void load_fixtures(const std::string& path);

  BackendResponse complete(const BackendRequest& request) override;

  // Replies actually served, per key and in total.
  int calls(const std::string& sample_id, const std::string& stage) const;
  std::int64_t total_calls() const;

 private:
  using Key = std::pair<std::string, std::string>;
  mutable std::mutex mu_;
  std::map<Key, std::string> fixtures_;
  std::map<Key, int> pending_failures_;
  std::map<Key, int> calls_;
  std::int64_t total_ = 0;
  std::optional<std::int64_t> crash_after_;
};

// OpenAI-style /chat/completions client. base_url like
// "http://localhost:8000/v1"; the key is sent as a bearer token when present.
class HttpBackend : public ChatBackend {
 public:
  HttpBackend(std::string base_url, std::string api_key, double timeout_s = 120.0);
  BackendResponse complete(const BackendRequest& request) override;

  static nlohmann::json request_body(const BackendRequest& request);
  static BackendResponse parse_response(const nlohmann::json& body);

 private:
  std::string base_url_;
  std::string api_key_;
  double timeout_s_;
};

// Approximate token count used by the mock: whitespace-separated words.
std::int64_t count_words(std::string_view text);

}  // namespace egomind::gen
