#include <doctest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "onco/embedding.hpp"
#include "onco/errors.hpp"

using namespace onco;
using nlohmann::json;

TEST_CASE("cosine distance hand value") {
  // d((1,2,2),(2,1,2)) = 1 - 8/(3*3) = 1/9.
  EmbeddingVector a = EmbeddingVector::make({1, 2, 2});
  EmbeddingVector b = EmbeddingVector::make({2, 1, 2});
  CHECK(cosine_distance(a, b) == doctest::Approx(0.1111).epsilon(1e-3));
  CHECK(cosine_distance(a, a) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("cosine distance symmetry, scale invariance and range") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> coord(-1.0f, 1.0f);
  // Power-of-two scales keep float multiplication exact, so any deviation
  // beyond 1e-9 reflects the distance computation rather than input rounding.
  const float scales[] = {0.0625f, 0.25f, 0.5f, 2.0f, 4.0f, 16.0f};
  for (int i = 0; i < 100000; ++i) {
    std::vector<float> av(8), bv(8);
    bool az = true, bz = true;
    for (size_t j = 0; j < 8; ++j) {
      av[j] = coord(rng);
      bv[j] = coord(rng);
      if (av[j] != 0) az = false;
      if (bv[j] != 0) bz = false;
    }
    if (az || bz) continue;
    EmbeddingVector a = EmbeddingVector::make(av);
    EmbeddingVector b = EmbeddingVector::make(bv);
    double d = cosine_distance(a, b);
    REQUIRE(d >= -1e-12);
    REQUIRE(d <= 2.0 + 1e-12);
    REQUIRE(cosine_distance(b, a) == d);  // exact symmetry
    float s = scales[i % 6];
    std::vector<float> scaled = av;
    for (auto& v : scaled) v *= s;
    REQUIRE(cosine_distance(EmbeddingVector::make(scaled), b) == doctest::Approx(d).epsilon(1e-9));
  }
}

TEST_CASE("embedding vector construction rejects degenerate input") {
  CHECK_THROWS_AS(EmbeddingVector::make({}), Error);
  CHECK_THROWS_AS(EmbeddingVector::make({0, 0, 0}), Error);
  EmbeddingVector a = EmbeddingVector::make({1, 0});
  EmbeddingVector b = EmbeddingVector::make({1, 0, 0});
  CHECK_THROWS_AS(cosine_distance(a, b), Error);
}

TEST_CASE("local embedder is deterministic and unit-norm") {
  LocalEmbedder embedder(64);
  auto v1 = embedder.embed_one("stage IIIb adenocarcinoma");
  auto v2 = embedder.embed_one("stage IIIb adenocarcinoma");
  CHECK(v1.values == v2.values);
  double norm = 0;
  for (float x : v1.values) norm += double(x) * x;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(v1.dim() == 64);

  // Different texts land on different vectors (with overwhelming likelihood).
  auto v3 = embedder.embed_one("family history of breast cancer");
  CHECK(cosine_distance(v1, v3) > 1e-6);
}

TEST_CASE("local embedder handles short and empty text") {
  LocalEmbedder embedder(32);
  CHECK_NOTHROW(embedder.embed_one("ab"));
  CHECK_NOTHROW(embedder.embed_one("x"));
  CHECK_THROWS_AS(embedder.embed_one(""), Error);
  CHECK_THROWS_AS(LocalEmbedder(8), Error);  // dim too small
}

TEST_CASE("embedder spec validation") {
  EmbedderSpec spec;
  spec.kind = EmbedderSpec::Kind::remote;
  spec.endpoint = "";
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = EmbedderSpec{};
  spec.batch_size = 0;
  CHECK_THROWS_AS(spec.validate(), Error);
}

namespace {

struct StubEmbedServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> requests{0};

  explicit StubEmbedServer(std::function<void(const httplib::Request&, httplib::Response&, int)>
                               handler) {
    server.Post("/v1/embeddings", [this, handler](const httplib::Request& req,
                                                  httplib::Response& res) {
      handler(req, res, ++requests);
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~StubEmbedServer() {
    server.stop();
    thread.join();
  }

  EmbedderSpec spec(size_t dim = 16) {
    EmbedderSpec s;
    s.kind = EmbedderSpec::Kind::remote;
    s.dim = dim;
    s.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings";
    s.model_name = "stub-model";
    s.batch_size = 2;
    s.parallel_requests = 2;
    s.max_attempts = 4;
    s.backoff_initial_ms = 1;
    return s;
  }
};

json embedding_payload(const json& inputs, size_t dim) {
  json data = json::array();
  for (size_t i = 0; i < inputs.size(); ++i) {
    std::vector<double> vec(dim, 0.0);
    // Value encodes the input so order preservation is checkable.
    vec[0] = 1.0 + double(inputs[i].get<std::string>().size());
    vec[1] = 1.0;
    data.push_back({{"index", i}, {"embedding", vec}});
  }
  return json{{"data", data}};
}

}  // namespace

TEST_CASE("remote embedder batches and preserves input order") {
  StubEmbedServer stub([](const httplib::Request& req, httplib::Response& res, int) {
    json body = json::parse(req.body);
    res.set_content(embedding_payload(body["input"], 16).dump(), "application/json");
  });
  RemoteEmbedder embedder(stub.spec());
  std::vector<std::string> texts = {"a", "bb", "ccc", "dddd", "eeeee"};
  auto vecs = embedder.embed(texts);
  REQUIRE(vecs.size() == texts.size());
  for (size_t i = 0; i < texts.size(); ++i)
    CHECK(vecs[i].values[0] == doctest::Approx(1.0 + double(texts[i].size())));
  CHECK(stub.requests.load() == 3);  // ceil(5/2) batches
}

TEST_CASE("remote embedder retries 429 then succeeds") {
  StubEmbedServer stub([](const httplib::Request& req, httplib::Response& res, int n) {
    if (n <= 2) {
      res.status = 429;
      return;
    }
    json body = json::parse(req.body);
    res.set_content(embedding_payload(body["input"], 16).dump(), "application/json");
  });
  RemoteEmbedder embedder(stub.spec());
  auto vecs = embedder.embed({"hello"});
  REQUIRE(vecs.size() == 1);
  CHECK(stub.requests.load() == 3);
}

TEST_CASE("remote embedder fails after exhausting retries") {
  StubEmbedServer stub([](const httplib::Request&, httplib::Response& res, int) {
    res.status = 503;
  });
  RemoteEmbedder embedder(stub.spec());
  try {
    embedder.embed({"hello"});
    FAIL("expected remote error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::remote);
  }
  CHECK(stub.requests.load() == 4);  // max_attempts
}

TEST_CASE("remote embedder rejects count and dimension mismatches") {
  StubEmbedServer stub([](const httplib::Request& req, httplib::Response& res, int) {
    json body = json::parse(req.body);
    json inputs = body["input"];
    json payload = embedding_payload(inputs, 16);
    payload["data"].erase(payload["data"].size() - 1);  // drop one vector
    res.set_content(payload.dump(), "application/json");
  });
  RemoteEmbedder embedder(stub.spec());
  CHECK_THROWS_AS(embedder.embed({"a", "b"}), Error);

  StubEmbedServer stub2([](const httplib::Request& req, httplib::Response& res, int) {
    json body = json::parse(req.body);
    res.set_content(embedding_payload(body["input"], 8).dump(), "application/json");
  });
  RemoteEmbedder embedder2(stub2.spec(16));
  CHECK_THROWS_AS(embedder2.embed({"a"}), Error);
}

TEST_CASE("fingerprints identify the embedding space") {
  LocalEmbedder a(256), b(128);
  CHECK(a.fingerprint() != b.fingerprint());
  CHECK(a.fingerprint().find("256") != std::string::npos);
}
