#include "onco/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "onco/errors.hpp"
#include "onco/llm.hpp"

namespace onco {

using nlohmann::json;

EmbeddingVector EmbeddingVector::make(std::vector<float> values) {
  if (values.empty()) throw validation_error("embedding vector must be non-empty");
  bool nonzero = std::any_of(values.begin(), values.end(), [](float v) { return v != 0.0f; });
  if (!nonzero) throw validation_error("zero embedding vector rejected");
  return EmbeddingVector{std::move(values)};
}

double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    throw validation_error("cosine_distance: dimension mismatch (" + std::to_string(a.dim()) +
                           " vs " + std::to_string(b.dim()) + ")");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    dot += static_cast<double>(a.values[i]) * b.values[i];
    na += static_cast<double>(a.values[i]) * a.values[i];
    nb += static_cast<double>(b.values[i]) * b.values[i];
  }
  if (na == 0 || nb == 0) throw validation_error("cosine_distance: zero vector");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

void EmbedderSpec::validate() const {
  if (dim == 0) throw config_error("embedder dim must be positive");
  if (batch_size == 0) throw config_error("embedder batch_size must be positive");
  if (kind == Kind::remote && (endpoint.empty() || model_name.empty()))
    throw config_error("remote embedder requires endpoint and model_name");
}

EmbeddingVector Embedder::embed_one(const std::string& text) {
  auto result = embed({text});
  return std::move(result.at(0));
}

LocalEmbedder::LocalEmbedder(size_t dim) : dim_(dim) {
  if (dim < 16) throw config_error("local embedder requires dim >= 16");
}

EmbeddingVector embed_local(const std::string& text, size_t dim) {
  if (dim < 16) throw config_error("local embedder requires dim >= 16");
  if (text.empty()) throw validation_error("cannot embed empty text");
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::vector<float> buckets(dim, 0.0f);
  if (lower.size() >= 3) {
    for (size_t i = 0; i + 3 <= lower.size(); ++i)
      buckets[fnv1a64(std::string_view(lower).substr(i, 3)) % dim] += 1.0f;
  } else {
    for (char c : lower) buckets[fnv1a64(std::string_view(&c, 1)) % dim] += 1.0f;
  }
  double norm = 0;
  for (float v : buckets) norm += static_cast<double>(v) * v;
  norm = std::sqrt(norm);
  for (float& v : buckets) v = static_cast<float>(v / norm);
  return EmbeddingVector::make(std::move(buckets));
}

std::vector<EmbeddingVector> LocalEmbedder::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_local(t, dim_));
  return out;
}

std::string LocalEmbedder::fingerprint() const {
  return "local-trigram-fnv1a64/dim=" + std::to_string(dim_);
}

RemoteEmbedder::RemoteEmbedder(EmbedderSpec spec) : spec_(std::move(spec)), dim_(spec_.dim) {
  spec_.kind = EmbedderSpec::Kind::remote;
  spec_.validate();
}

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(const std::vector<std::string>& batch) {
  auto [base, path] = split_url(spec_.endpoint);
  httplib::Client client(base);
  client.set_connection_timeout(spec_.timeout_seconds);
  client.set_read_timeout(spec_.timeout_seconds);

  json body;
  body["model"] = spec_.model_name;
  body["input"] = batch;

  httplib::Headers headers;
  if (const char* key = std::getenv(spec_.api_key_env.c_str()))
    headers.emplace("Authorization", std::string("Bearer ") + key);

  int delay_ms = spec_.backoff_initial_ms;
  std::string last_error;
  for (int attempt = 0; attempt < spec_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport failure";
      continue;
    }
    if (res->status == 429 || (res->status >= 500 && res->status < 600)) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw remote_error("embedding endpoint returned status " + std::to_string(res->status));

    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::exception& e) {
      throw remote_error(std::string("embedding response parse failure: ") + e.what());
    }
    const auto& data = parsed.at("data");
    if (data.size() != batch.size())
      throw remote_error("embedding response count " + std::to_string(data.size()) +
                         " != request count " + std::to_string(batch.size()));
    std::vector<EmbeddingVector> vectors(batch.size());
    std::vector<bool> filled(batch.size(), false);
    for (const auto& item : data) {
      size_t index = item.at("index").get<size_t>();
      if (index >= batch.size() || filled[index])
        throw remote_error("embedding response has invalid index " + std::to_string(index));
      std::vector<float> values = item.at("embedding").get<std::vector<float>>();
      if (values.size() != spec_.dim)
        throw remote_error("embedding response dimension " + std::to_string(values.size()) +
                           " != configured dimension " + std::to_string(spec_.dim));
      vectors[index] = EmbeddingVector::make(std::move(values));
      filled[index] = true;
    }
    return vectors;
  }
  throw remote_error("embedding endpoint unreachable after " +
                     std::to_string(spec_.max_attempts) + " attempts: " + last_error);
}

std::vector<EmbeddingVector> RemoteEmbedder::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw validation_error("embed: texts must be non-empty");

  std::vector<std::vector<std::string>> batches;
  for (size_t i = 0; i < texts.size(); i += spec_.batch_size) {
    size_t end = std::min(texts.size(), i + spec_.batch_size);
    batches.emplace_back(texts.begin() + i, texts.begin() + end);
  }

  std::vector<std::vector<EmbeddingVector>> results(batches.size());
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  size_t workers = std::min<size_t>(std::max(1, spec_.parallel_requests), batches.size());
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        size_t i = next.fetch_add(1);
        if (i >= batches.size()) return;
        try {
          results[i] = embed_batch(batches[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  // Reassemble in input order regardless of batch completion order.
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  size_t expected_dim = 0;
  for (auto& batch : results) {
    for (auto& vec : batch) {
      if (expected_dim == 0) expected_dim = vec.dim();
      if (vec.dim() != expected_dim)
        throw remote_error("inconsistent embedding dims in response");
      out.push_back(std::move(vec));
    }
  }
  dim_ = expected_dim;
  return out;
}

std::string RemoteEmbedder::fingerprint() const {
  return "remote/" + spec_.model_name + "/dim=" + std::to_string(dim_);
}

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
  spec.validate();
  if (spec.kind == EmbedderSpec::Kind::local)
    return std::make_unique<LocalEmbedder>(spec.dim);
  return std::make_unique<RemoteEmbedder>(spec);
}

}  // namespace onco
