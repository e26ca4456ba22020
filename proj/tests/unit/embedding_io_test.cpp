#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "adp/embedding_io.hpp"
#include "adp/errors.hpp"
#include "support/oracles.hpp"

using namespace adp;

TEST(EmbeddingIo, RoundTripIsExact) {
  std::mt19937_64 rng(31);
  for (int n = 0; n < 50; ++n) {
    const auto e = oracle::random_embeddings(rng);
    std::stringstream buf;
    io::write_embeddings(buf, e);
    EXPECT_TRUE(io::read_embeddings(buf) == e);
  }
}

TEST(EmbeddingIo, HeaderLayout) {
  std::mt19937_64 rng(32);
  const auto e = oracle::random_embeddings(rng);
  std::stringstream buf;
  io::write_embeddings(buf, e);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "ADPE");
  const std::size_t header = 4 + 4 * 4 + 9 * e.segments().size();
  EXPECT_EQ(bytes.size(), header + 4 * e.rows() * e.cols());
}

TEST(EmbeddingIo, RejectsDamagedFiles) {
  std::mt19937_64 rng(33);
  const auto e = oracle::random_embeddings(rng);
  std::stringstream buf;
  io::write_embeddings(buf, e);
  const std::string bytes = buf.str();

  std::stringstream bad_magic("XXXX" + bytes.substr(4));
  EXPECT_THROW(io::read_embeddings(bad_magic), ParseError);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(io::read_embeddings(truncated), ParseError);

  std::stringstream trailing(bytes + "z");
  EXPECT_THROW(io::read_embeddings(trailing), ParseError);

  std::string wrong_version = bytes;
  wrong_version[4] = 9;
  std::stringstream v(wrong_version);
  EXPECT_THROW(io::read_embeddings(v), ParseError);
}

TEST(EmbeddingIo, LayoutViolationIsSchemaError) {
  // Segment lengths claim 3 rows for a 2-row payload.
  std::stringstream buf;
  auto u32 = [&](std::uint32_t x) { buf.write(reinterpret_cast<const char*>(&x), 4); };
  buf.write("ADPE", 4);
  u32(1);
  u32(2);
  u32(1);
  u32(2);
  buf.put(0);
  u32(1);
  u32(0);
  buf.put(1);
  u32(2);
  u32(0);
  const float zero = 0.0f;
  for (int i = 0; i < 2; ++i) buf.write(reinterpret_cast<const char*>(&zero), 4);
  EXPECT_THROW(io::read_embeddings(buf), SchemaError);
}

TEST(WeightsIo, RoundTripIsExact) {
  std::mt19937_64 rng(34);
  const auto w = oracle::random_weights(rng, 8);
  std::stringstream buf;
  io::write_weights(buf, w);
  EXPECT_EQ(buf.str().substr(0, 4), "ADPW");
  const auto back = io::read_weights(buf);
  EXPECT_TRUE(back.w_q == w.w_q);
  EXPECT_TRUE(back.w_k == w.w_k);
  EXPECT_EQ(back.num_heads, w.num_heads);
  EXPECT_EQ(back.head_dim, w.head_dim);
}

TEST(WeightsIo, RejectsHeadMismatch) {
  std::mt19937_64 rng(35);
  auto w = oracle::random_weights(rng, 8);
  w.num_heads = 3;
  std::stringstream buf;
  EXPECT_THROW(io::write_weights(buf, w), InvalidArgument);
}
