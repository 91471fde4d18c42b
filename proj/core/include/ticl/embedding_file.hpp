#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ticl/geometry.hpp"

namespace ticl {

// Binary layout, little-endian, no padding:
//   "TICLEMB1" | u32 version=1 | u8 kind | u8 dtype=1 (f32) | u16 reserved=0 | u32 dim | u64 count
//   followed by count * dim f32 values, row-major.
inline constexpr std::string_view kEmbeddingMagic = "TICLEMB1";
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;
inline constexpr std::size_t kEmbeddingHeaderSize = 28;

enum class EmbeddingKind : std::uint8_t { Text = 1, Acoustic = 2 };

std::string_view to_string(EmbeddingKind kind) noexcept;
EmbeddingKind parse_embedding_kind(std::string_view name);

/// Row-major block of `count` embeddings of width `dim`.
struct EmbeddingMatrix {
    EmbeddingKind kind = EmbeddingKind::Text;
    std::uint32_t dim = 0;
    std::vector<float> data;

    std::size_t count() const noexcept { return dim == 0 ? 0 : data.size() / dim; }
    std::span<const float> row(std::size_t i) const { return std::span<const float>(data).subspan(i * dim, dim); }

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

EmbeddingMatrix make_matrix(EmbeddingKind kind, std::span<const EmbeddingVector> rows);

std::string encode_embeddings(const EmbeddingMatrix& matrix);
EmbeddingMatrix decode_embeddings(std::string_view bytes);

void write_embedding_file(const std::filesystem::path& path, const EmbeddingMatrix& matrix);
EmbeddingMatrix read_embedding_file(const std::filesystem::path& path);

} // namespace ticl
