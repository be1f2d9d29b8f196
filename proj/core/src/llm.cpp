#include "onco/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "onco/errors.hpp"
#include "onco/io.hpp"

namespace onco {

using nlohmann::json;

uint64_t fnv1a64(std::string_view data) {
  uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string fnv1a64_hex(std::string_view data) {
  std::ostringstream out;
  out << std::hex << fnv1a64(data);
  return out.str();
}

namespace {

// Splits "http://host:port/path" into (scheme://host:port, /path).
std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

}  // namespace

HttpLlmClient::HttpLlmClient(LlmSpec spec) : spec_(std::move(spec)) {
  if (spec_.endpoint.empty() || spec_.model.empty())
    throw config_error("llm client requires endpoint and model");
}

std::string HttpLlmClient::complete(const std::string& prompt) {
  auto [base, path] = split_url(spec_.endpoint);
  httplib::Client client(base);
  client.set_connection_timeout(spec_.timeout_seconds);
  client.set_read_timeout(spec_.timeout_seconds);

  json body;
  body["model"] = spec_.model;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = spec_.temperature;

  httplib::Headers headers;
  if (const char* key = std::getenv(spec_.api_key_env.c_str()))
    headers.emplace("Authorization", std::string("Bearer ") + key);

  int delay_ms = spec_.backoff_initial_ms;
  std::string last_error;
  for (int attempt = 0; attempt <= spec_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport failure";
      continue;
    }
    if (retryable_status(res->status)) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw remote_error("llm endpoint returned status " + std::to_string(res->status));
    try {
      json parsed = json::parse(res->body);
      return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw remote_error(std::string("llm response parse failure: ") + e.what());
    }
  }
  throw remote_error("llm endpoint unreachable after retries: " + last_error);
}

namespace {

// Prompts carry a leading marker line of the form
//   # request concept=<id> chunk=<id> kind=<label|verify|expand> ...
// which the mock uses for scripted lookups.
std::map<std::string, std::string> parse_marker(const std::string& prompt) {
  std::map<std::string, std::string> fields;
  auto eol = prompt.find('\n');
  std::string first = prompt.substr(0, eol);
  if (first.rfind("# request", 0) != 0) return fields;
  std::istringstream words(first.substr(9));
  std::string word;
  while (words >> word) {
    auto eq = word.find('=');
    if (eq != std::string::npos) fields[word.substr(0, eq)] = word.substr(eq + 1);
  }
  return fields;
}

}  // namespace

MockLlmClient MockLlmClient::from_script(const std::filesystem::path& path) {
  MockLlmClient mock;
  json script;
  try {
    script = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw config_error("mock llm script parse failure: " + std::string(e.what()));
  }
  if (script.contains("defaults"))
    for (auto& [kind, resp] : script["defaults"].items())
      mock.set_default(kind, resp.get<std::string>());
  if (script.contains("entries")) {
    for (const auto& entry : script["entries"]) {
      std::string response = entry.at("response").get<std::string>();
      if (entry.contains("prompt_hash")) {
        mock.add_keyed_response("hash:" + entry["prompt_hash"].get<std::string>(), response);
        continue;
      }
      std::string key = entry.at("concept_id").get<std::string>() + "\t" +
                        entry.at("chunk_id").get<std::string>();
      if (entry.contains("kind")) key += "\t" + entry["kind"].get<std::string>();
      mock.add_keyed_response(key, response);
    }
  }
  if (script.contains("sequence"))
    for (const auto& resp : script["sequence"]) mock.push_response(resp.get<std::string>());
  return mock;
}

void MockLlmClient::add_keyed_response(const std::string& key, const std::string& response) {
  keyed_[key] = response;
}

void MockLlmClient::push_response(const std::string& response) {
  sequence_.push_back(response);
}

void MockLlmClient::set_default(const std::string& kind, const std::string& response) {
  defaults_[kind] = response;
}

std::string MockLlmClient::complete(const std::string& prompt) {
  ++calls_;
  auto hash_it = keyed_.find("hash:" + fnv1a64_hex(prompt));
  if (hash_it != keyed_.end()) return hash_it->second;

  auto fields = parse_marker(prompt);
  std::string concept_key = fields.count("concept") ? fields["concept"] : "";
  std::string chunk = fields.count("chunk") ? fields["chunk"] : "";
  std::string kind = fields.count("kind") ? fields["kind"] : "";
  if (!concept_key.empty() && !chunk.empty()) {
    auto it = keyed_.find(concept_key + "\t" + chunk + "\t" + kind);
    if (it != keyed_.end()) return it->second;
    it = keyed_.find(concept_key + "\t" + chunk);
    if (it != keyed_.end()) return it->second;
  }
  if (sequence_pos_ < sequence_.size()) return sequence_[sequence_pos_++];
  auto def = defaults_.find(kind);
  if (def != defaults_.end()) return def->second;
  def = defaults_.find("");
  if (def != defaults_.end()) return def->second;
  throw remote_error("mock llm: no scripted response for prompt (kind=" + kind + " concept=" +
                     concept_key + " chunk=" + chunk + ")");
}

std::unique_ptr<LlmClient> make_mock_llm(const std::filesystem::path& script_path) {
  return std::make_unique<MockLlmClient>(MockLlmClient::from_script(script_path));
}

}  // namespace onco
