#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace onco {

// Minimal completion contract. Callers render full prompts; implementations
// own transport, retries and determinism settings.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string name() const = 0;
};

struct LlmSpec {
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int max_retries = 3;
  int timeout_seconds = 60;
  int backoff_initial_ms = 500;
  std::string api_key_env = "LLM_API_KEY";
};

// Chat-completions HTTP client: POST {"model", "messages", "temperature"},
// reads choices[0].message.content. Retries 429/5xx with exponential backoff.
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(LlmSpec spec);
  std::string complete(const std::string& prompt) override;
  std::string name() const override { return "http:" + spec_.model; }

 private:
  LlmSpec spec_;
};

// Deterministic scripted client for tests and offline runs. Responses are
// resolved in order: exact prompt hash, (concept_id, chunk_id, kind) keys
// scanned out of the prompt body, a consumable response sequence, then
// per-kind defaults.
class MockLlmClient : public LlmClient {
 public:
  static MockLlmClient from_script(const std::filesystem::path& path);

  std::string complete(const std::string& prompt) override;
  std::string name() const override { return "mock"; }

  void add_keyed_response(const std::string& key, const std::string& response);
  void push_response(const std::string& response);
  void set_default(const std::string& kind, const std::string& response);

  size_t call_count() const { return calls_; }

 private:
  std::map<std::string, std::string> keyed_;
  std::vector<std::string> sequence_;
  size_t sequence_pos_ = 0;
  std::map<std::string, std::string> defaults_;  // kind -> response
  size_t calls_ = 0;
};

uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

std::unique_ptr<LlmClient> make_mock_llm(const std::filesystem::path& script_path);

}  // namespace onco
