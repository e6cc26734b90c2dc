#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "local_server.hpp"
#include "maestro/embedding.hpp"
#include "maestro/errors.hpp"
#include "maestro/matrix.hpp"

using namespace maestro;

TEST(HashEmbedder, EmptyStringIsFirstBasisVector) {
  HashEmbedder e(256);
  const auto v = e.embed("");
  ASSERT_EQ(v.dim(), 256u);
  EXPECT_EQ(v.values[0], 1.0);
  for (std::size_t i = 1; i < v.dim(); ++i) EXPECT_EQ(v.values[i], 0.0);
}

TEST(HashEmbedder, DeterministicAndUnitNorm) {
  HashEmbedder e(256);
  const auto a = e.embed("What is 2 + 2?");
  EXPECT_EQ(a, e.embed("What is 2 + 2?"));
  EXPECT_NEAR(squared_norm(a.span()), 1.0, 1e-12);
}

TEST(HashEmbedder, SimilarTextsAreCloserThanUnrelatedOnes) {
  HashEmbedder e(256);
  const auto a = e.embed("Quick sum: what is 3 + 4?");
  const auto b = e.embed("Quick sum: what is 5 + 9?");
  const auto c = e.embed("Translate the poem into French, please.");
  EXPECT_GT(dot(a.span(), b.span()), dot(a.span(), c.span()));
}

TEST(HashEmbedder, BatchMatchesSingleCalls) {
  HashEmbedder e(64);
  EXPECT_TRUE(e.embed_batch({}).empty());
  const auto two = e.embed_batch({"a", "a"});
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0], two[1]);
  const std::vector<std::string> texts{"alpha", "beta", "gamma delta"};
  const auto batch = e.embed_batch(texts);
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(batch[i], e.embed(texts[i]));
}

TEST(HashEmbedder, RejectsTinyDimension) { EXPECT_THROW(HashEmbedder(4), ConfigError); }

TEST(Normalized, ZeroVectorBecomesFirstBasisVector) {
  const auto v = normalized({0.0, 0.0, 0.0});
  EXPECT_EQ(v.values, (std::vector<double>{1.0, 0.0, 0.0}));
  const auto w = normalized({3.0, 4.0});
  EXPECT_DOUBLE_EQ(w.values[0], 0.6);
  EXPECT_DOUBLE_EQ(w.values[1], 0.8);
}

TEST(EmbeddingCache, EvictsLeastRecentlyUsed) {
  EmbeddingCache cache(2);
  cache.put("a", normalized({1.0, 0.0}));
  cache.put("b", normalized({0.0, 1.0}));
  ASSERT_TRUE(cache.get("a"));  // refresh a
  cache.put("c", normalized({1.0, 1.0}));
  EXPECT_EQ(cache.size(), 2u);
  EXPECT_TRUE(cache.get("a"));
  EXPECT_FALSE(cache.get("b"));
  EXPECT_TRUE(cache.get("c"));
}

TEST(EmbeddingCache, ComputesOncePerKeyUnderContention) {
  EmbeddingCache cache(100);
  std::atomic<int> computed{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 200; ++i) {
        const auto v = cache.get_or_compute("k" + std::to_string(i % 10), [&] {
          ++computed;
          return normalized({1.0, static_cast<double>(i % 10)});
        });
        ASSERT_EQ(v.dim(), 2u);
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(cache.size(), 10u);
  // Racing first lookups may compute a key more than once, but never unboundedly.
  EXPECT_LE(computed.load(), 80);
}

namespace {

void serve_embeddings(maestro::testing::LocalServer& srv, std::atomic<int>& hits) {
  srv.server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json data = nlohmann::json::array();
    const auto& input = body.at("input");
    // Reverse the item order to exercise the index field.
    for (std::size_t k = input.size(); k-- > 0;) {
      const double len = static_cast<double>(input[k].get<std::string>().size());
      data.push_back({{"index", k}, {"embedding", {len, 1.0, 0.0}}});
    }
    res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
  });
}

}  // namespace

TEST(RemoteEmbedder, ParsesProviderResponseInIndexOrder) {
  maestro::testing::LocalServer srv;
  std::atomic<int> hits{0};
  serve_embeddings(srv, hits);
  srv.start();
  RemoteEmbedder e(RemoteEndpoint{srv.base_url(), "", "embed-model", 5.0});
  const auto out = e.embed_batch({"abc", ""});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], normalized({3.0, 1.0, 0.0}));
  EXPECT_EQ(out[1], normalized({0.0, 1.0, 0.0}));
  EXPECT_EQ(e.dim(), 3u);
  EXPECT_EQ(hits.load(), 1);
}

TEST(RemoteEmbedder, MissingCredentialIsRetriable) {
  RemoteEmbedder e(RemoteEndpoint{"http://127.0.0.1:9/v1", "MAESTRO_TEST_UNSET_KEY", "m", 1.0});
  try {
    e.embed("x");
    FAIL() << "expected EmbeddingError";
  } catch (const EmbeddingError& err) {
    EXPECT_TRUE(err.retriable());
  }
}

TEST(RemoteEmbedder, ServerErrorSurfacesAsEmbeddingError) {
  maestro::testing::LocalServer srv;
  srv.server.Post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  srv.start();
  RemoteEmbedder e(RemoteEndpoint{srv.base_url(), "", "m", 5.0});
  EXPECT_THROW(e.embed("x"), EmbeddingError);
}

TEST(MakeEmbedder, HashKindHonoursDimension) {
  EmbedderConfig cfg;
  cfg.dim = 32;
  EXPECT_EQ(make_embedder(cfg)->dim(), 32u);
}
