#include "adp/embedding_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "adp/errors.hpp"

namespace adp::io {

namespace {

using tokens::RowMatrixF;
using tokens::SegmentKind;
using tokens::SegmentSpec;

// Refuse absurd headers before allocating.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw ParseError(std::string("truncated file while reading ") + what);
  }
}

std::uint8_t read_u8(std::istream& in, const char* what) {
  char b = 0;
  read_exact(in, &b, 1, what);
  return static_cast<std::uint8_t>(b);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> b{};
  read_exact(in, reinterpret_cast<char*>(b.data()), 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void write_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

RowMatrixF read_floats(std::istream& in, std::uint32_t rows, std::uint32_t cols) {
  const std::uint64_t n = std::uint64_t{rows} * cols;
  if (n > kMaxElements) throw ParseError("matrix too large: " + std::to_string(n) + " elements");
  RowMatrixF m(rows, cols);
  std::vector<unsigned char> raw(n * 4);
  read_exact(in, reinterpret_cast<char*>(raw.data()), raw.size(), "matrix payload");
  float* dst = m.data();
  for (std::uint64_t i = 0; i < n; ++i) {
    const unsigned char* p = raw.data() + 4 * i;
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    dst[i] = std::bit_cast<float>(bits);
  }
  return m;
}

void write_floats(std::ostream& out, const RowMatrixF& m) {
  const float* src = m.data();
  const auto n = static_cast<std::size_t>(m.size());
  for (std::size_t i = 0; i < n; ++i) write_u32(out, std::bit_cast<std::uint32_t>(src[i]));
}

void expect_magic(std::istream& in, const char (&magic)[4]) {
  char got[4] = {};
  read_exact(in, got, 4, "magic");
  if (std::memcmp(got, magic, 4) != 0) {
    throw ParseError(std::string("bad magic, expected ") + std::string(magic, 4));
  }
  const std::uint32_t version = read_u32(in, "version");
  if (version != kFormatVersion) {
    throw ParseError("unsupported format version " + std::to_string(version));
  }
}

void expect_eof(std::istream& in) {
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after payload");
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  return out;
}

}  // namespace

tokens::EmbeddingMatrix read_embeddings(std::istream& in) {
  expect_magic(in, kEmbeddingMagic);
  const std::uint32_t rows = read_u32(in, "rows");
  const std::uint32_t cols = read_u32(in, "cols");
  const std::uint32_t count = read_u32(in, "segment count");
  if (count > 4096) throw ParseError("implausible segment count " + std::to_string(count));
  std::vector<SegmentSpec> layout;
  layout.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint8_t kind = read_u8(in, "segment kind");
    if (kind > 5) throw ParseError("unknown segment kind " + std::to_string(kind));
    const std::uint32_t length = read_u32(in, "segment length");
    const std::uint32_t view = read_u32(in, "segment view id");
    layout.push_back({static_cast<SegmentKind>(kind), length, view});
  }
  RowMatrixF data = read_floats(in, rows, cols);
  expect_eof(in);
  try {
    return tokens::EmbeddingMatrix(std::move(data), std::move(layout));
  } catch (const InvalidArgument& e) {
    throw SchemaError(e.what());
  }
}

tokens::EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_embeddings(in);
}

void write_embeddings(std::ostream& out, const tokens::EmbeddingMatrix& embeddings) {
  out.write(kEmbeddingMagic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(embeddings.rows()));
  write_u32(out, static_cast<std::uint32_t>(embeddings.cols()));
  write_u32(out, static_cast<std::uint32_t>(embeddings.segments().size()));
  for (const auto& seg : embeddings.segments()) {
    write_u8(out, static_cast<std::uint8_t>(seg.spec.kind));
    write_u32(out, seg.spec.length);
    write_u32(out, seg.spec.view_id);
  }
  write_floats(out, embeddings.data());
  if (!out) throw InvalidArgument("write_embeddings: stream error");
}

void write_embeddings(const std::filesystem::path& path, const tokens::EmbeddingMatrix& embeddings) {
  auto out = open_out(path);
  write_embeddings(out, embeddings);
}

tokens::ProjectionWeights read_weights(std::istream& in) {
  expect_magic(in, kWeightsMagic);
  const std::uint32_t rows = read_u32(in, "rows");
  const std::uint32_t cols = read_u32(in, "cols");
  const std::uint32_t count = read_u32(in, "segment count");
  if (count != 2) throw ParseError("weights file must hold exactly two matrices");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint8_t kind = read_u8(in, "segment kind");
    const std::uint32_t length = read_u32(in, "segment length");
    read_u32(in, "segment view id");
    if (kind != i) throw ParseError("weights segments must be W_Q (0) then W_K (1)");
    if (length != rows) throw ParseError("weights segment length does not match rows");
  }
  tokens::ProjectionWeights w;
  w.num_heads = read_u32(in, "num_heads");
  w.head_dim = read_u32(in, "head_dim");
  w.w_q = read_floats(in, rows, cols);
  w.w_k = read_floats(in, rows, cols);
  expect_eof(in);
  try {
    w.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaError(e.what());
  }
  return w;
}

tokens::ProjectionWeights read_weights(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_weights(in);
}

void write_weights(std::ostream& out, const tokens::ProjectionWeights& weights) {
  weights.validate();
  const auto d = static_cast<std::uint32_t>(weights.width());
  out.write(kWeightsMagic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, d);
  write_u32(out, d);
  write_u32(out, 2);
  for (std::uint8_t kind : {std::uint8_t{0}, std::uint8_t{1}}) {
    write_u8(out, kind);
    write_u32(out, d);
    write_u32(out, 0);
  }
  write_u32(out, weights.num_heads);
  write_u32(out, weights.head_dim);
  write_floats(out, weights.w_q);
  write_floats(out, weights.w_k);
  if (!out) throw InvalidArgument("write_weights: stream error");
}

void write_weights(const std::filesystem::path& path, const tokens::ProjectionWeights& weights) {
  auto out = open_out(path);
  write_weights(out, weights);
}

}  // namespace adp::io
