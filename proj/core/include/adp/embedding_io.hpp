#pragma once

#include <filesystem>
#include <iosfwd>

#include "adp/token_scoring.hpp"

namespace adp::io {

// Binary little-endian embedding file:
//   "ADPE" u32 version=1 u32 rows u32 cols u32 segment_count
//   segment_count x { u8 kind, u32 length, u32 view_id }
//   rows*cols float32, row-major
//
// Weights file uses the same header with magic "ADPW", two segments of
// kind 0 (W_Q) and 1 (W_K) whose length is D, then u32 num_heads, u32
// head_dim, then W_Q and W_K as D*D float32 each, row-major, in segment order.

inline constexpr char kEmbeddingMagic[4] = {'A', 'D', 'P', 'E'};
inline constexpr char kWeightsMagic[4] = {'A', 'D', 'P', 'W'};
inline constexpr std::uint32_t kFormatVersion = 1;

enum class WeightKind : std::uint8_t { kQuery = 0, kKey = 1 };

tokens::EmbeddingMatrix read_embeddings(std::istream& in);
tokens::EmbeddingMatrix read_embeddings(const std::filesystem::path& path);
void write_embeddings(std::ostream& out, const tokens::EmbeddingMatrix& embeddings);
void write_embeddings(const std::filesystem::path& path, const tokens::EmbeddingMatrix& embeddings);

tokens::ProjectionWeights read_weights(std::istream& in);
tokens::ProjectionWeights read_weights(const std::filesystem::path& path);
void write_weights(std::ostream& out, const tokens::ProjectionWeights& weights);
void write_weights(const std::filesystem::path& path, const tokens::ProjectionWeights& weights);

}  // namespace adp::io
