#include "egomind/backend.hpp"

#include <cctype>
#include <fstream>

#include "egomind/errors.hpp"

namespace egomind::gen {

void validate(const BackendRequest& request) {
  if (request.user_parts.empty()) throw PreconditionError("backend request has no user parts");
  if (!(request.temperature >= 0.0)) throw PreconditionError("temperature must be non-negative");
}

std::int64_t count_words(std::string_view text) {
  std::int64_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

void MockBackend::add_fixture(const std::string& sample_id, const std::string& stage,
                              std::string text) {
  std::lock_guard lock(mu_);
  fixtures_[{sample_id, stage}] = std::move(text);
}

void MockBackend::inject_failures(const std::string& sample_id, const std::string& stage, int n) {
  std::lock_guard lock(mu_);
  pending_failures_[{sample_id, stage}] += n;
}

void MockBackend::crash_after(std::int64_t served_calls) {
  std::lock_guard lock(mu_);
  crash_after_ = served_calls;
}

void MockBackend::load_fixtures(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read fixtures " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("sample_id").get<std::string>();
      const auto stage = j.at("stage").get<std::string>();
      add_fixture(id, stage, j.at("text").get<std::string>());
      if (j.contains("fail")) inject_failures(id, stage, j.at("fail").get<int>());
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": bad fixture record: " + e.what());
    }
  }
}

BackendResponse MockBackend::complete(const BackendRequest& request) {
  validate(request);
  const auto meta = [&](const char* k) {
    auto it = request.metadata.find(k);
    return it == request.metadata.end() ? std::string{} : it->second;
  };
  const Key key{meta("sample_id"), meta("stage")};

  std::lock_guard lock(mu_);
  if (crash_after_ && total_ >= *crash_after_) throw SimulatedCrash("mock backend crash");
  if (auto it = pending_failures_.find(key); it != pending_failures_.end() && it->second > 0) {
    --it->second;
    throw BackendError("mock transport error for " + key.first + "/" + key.second);
  }
  auto it = fixtures_.find(key);
  if (it == fixtures_.end()) {
    throw BackendError("no mock fixture for " + key.first + "/" + key.second);
  }
  ++calls_[key];
  ++total_;
  std::int64_t prompt_words = count_words(request.system_text);
  for (const auto& p : request.user_parts) {
    prompt_words += p.kind == ContentPart::Kind::Text ? count_words(p.value) : 1;
  }
  return {it->second, prompt_words + count_words(it->second), 0.0};
}

int MockBackend::calls(const std::string& sample_id, const std::string& stage) const {
  std::lock_guard lock(mu_);
  auto it = calls_.find({sample_id, stage});
  return it == calls_.end() ? 0 : it->second;
}

std::int64_t MockBackend::total_calls() const {
  std::lock_guard lock(mu_);
  return total_;
}

}  // namespace egomind::gen
