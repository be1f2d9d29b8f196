#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace onco {

// L2 geometry vector; zero vectors are rejected at construction.
struct EmbeddingVector {
  std::vector<float> values;

  size_t dim() const { return values.size(); }

  static EmbeddingVector make(std::vector<float> values);
};

// 1 - (a.b)/(|a||b|), in [0, 2].
double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b);

struct EmbedderSpec {
  enum class Kind { local, remote };
  Kind kind = Kind::local;
  size_t dim = 256;
  std::string endpoint;    // remote only
  std::string model_name;  // remote only
  size_t batch_size = 64;
  int parallel_requests = 4;
  int max_attempts = 5;
  int backoff_initial_ms = 500;
  int timeout_seconds = 60;
  std::string api_key_env = "EMBED_API_KEY";

  void validate() const;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
  virtual size_t dim() const = 0;
  virtual std::string fingerprint() const = 0;

  EmbeddingVector embed_one(const std::string& text);
};

// Deterministic hashed character-trigram embedder (FNV-1a 64 buckets,
// L2-normalized counts). A pure function of (text, dim).
class LocalEmbedder : public Embedder {
 public:
  explicit LocalEmbedder(size_t dim = 256);
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  size_t dim() const override { return dim_; }
  std::string fingerprint() const override;

 private:
  size_t dim_;
};

EmbeddingVector embed_local(const std::string& text, size_t dim);

// Batched client for the de-facto embedding API shape:
// POST {"model", "input": [...]} -> {"data": [{"index", "embedding"}]}.
class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderSpec spec);
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  size_t dim() const override { return dim_; }
  std::string fingerprint() const override;

 private:
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& batch);

  EmbedderSpec spec_;
  size_t dim_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

}  // namespace onco
