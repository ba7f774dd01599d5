#include "threer/embedding.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

using namespace threer;

namespace {

EmbeddingVector random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  while (true) {
    std::vector<double> values(dim);
    for (auto& v : values) v = dist(rng);
    double sq = 0.0;
    for (double v : values) sq += v * v;
    if (sq > 1e-12) return EmbeddingVector(std::move(values));
  }
}

}  // namespace

TEST_CASE("embedding vector construction validates its invariants") {
  CHECK_THROWS_AS(EmbeddingVector({}), ValidationError);
  CHECK_THROWS_AS(EmbeddingVector({0.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(EmbeddingVector({1.0, std::nan("")}), ValidationError);
  CHECK_THROWS_AS(EmbeddingVector({1.0, std::numeric_limits<double>::infinity()}),
                  ValidationError);
  EmbeddingVector v({3.0, 4.0});
  CHECK(v.dim() == 2);
  CHECK(v.norm() == Catch::Approx(5.0));
}

TEST_CASE("cosine similarity of a vector with itself is 1") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 200; ++i) {
    EmbeddingVector v = random_vector(rng, 1 + i % 24);
    CHECK(std::abs(cosine_similarity(v, v) - 1.0) <= 1e-12);
  }
}

TEST_CASE("cosine similarity of orthogonal vectors is 0") {
  EmbeddingVector a({1.0, 0.0});
  EmbeddingVector b({0.0, 1.0});
  CHECK(cosine_similarity(a, b) == 0.0);
}

TEST_CASE("cosine similarity matches the hand-derived (1,2,3)x(4,5,6) value") {
  EmbeddingVector a({1.0, 2.0, 3.0});
  EmbeddingVector b({4.0, 5.0, 6.0});
  // 32 / (sqrt(14) * sqrt(77))
  CHECK(std::abs(cosine_similarity(a, b) - 0.974631846) <= 1e-9);
}

TEST_CASE("cosine similarity is symmetric") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    std::size_t dim = 1 + i % 16;
    EmbeddingVector a = random_vector(rng, dim);
    EmbeddingVector b = random_vector(rng, dim);
    CHECK(std::abs(cosine_similarity(a, b) - cosine_similarity(b, a)) <= 1e-12);
  }
}

TEST_CASE("cosine similarity is invariant under positive scaling") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int i = 0; i < 300; ++i) {
    std::size_t dim = 2 + i % 16;
    EmbeddingVector a = random_vector(rng, dim);
    EmbeddingVector b = random_vector(rng, dim);
    double c = scale(rng);
    std::vector<double> scaled = a.values();
    for (auto& v : scaled) v *= c;
    EmbeddingVector ca{std::move(scaled)};
    CHECK(std::abs(cosine_similarity(ca, b) - cosine_similarity(a, b)) <= 1e-9);
  }
}

TEST_CASE("cosine similarity rejects mismatched dimensions") {
  EmbeddingVector a({1.0, 2.0});
  EmbeddingVector b({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(cosine_similarity(a, b), DimensionMismatch);
}

TEST_CASE("cosine similarity stays within [-1, 1]") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    std::size_t dim = 1 + i % 8;
    EmbeddingVector a = random_vector(rng, dim);
    EmbeddingVector b = random_vector(rng, dim);
    double s = cosine_similarity(a, b);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}
