#include "ticl/embedding_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ticl/error.hpp"

namespace ticl {

namespace {

template <typename T> void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename T> T get_le(std::string_view bytes, std::size_t offset) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    }
    return value;
}

} // namespace

std::string_view to_string(EmbeddingKind kind) noexcept {
    return kind == EmbeddingKind::Text ? "text" : "acoustic";
}

EmbeddingKind parse_embedding_kind(std::string_view name) {
    if (name == "text") return EmbeddingKind::Text;
    if (name == "acoustic") return EmbeddingKind::Acoustic;
    fail(ErrorCode::ConfigError, "unknown embedding kind '" + std::string(name) + "'");
}

EmbeddingMatrix make_matrix(EmbeddingKind kind, std::span<const EmbeddingVector> rows) {
    EmbeddingMatrix m;
    m.kind = kind;
    if (rows.empty()) return m;
    m.dim = static_cast<std::uint32_t>(rows.front().dim());
    m.data.reserve(rows.size() * m.dim);
    for (const auto& r : rows) {
        if (r.dim() != m.dim) {
            fail(ErrorCode::DimMismatch, "row of dimension " + std::to_string(r.dim()) + " in matrix of dimension " +
                                             std::to_string(m.dim));
        }
        m.data.insert(m.data.end(), r.values().begin(), r.values().end());
    }
    return m;
}

std::string encode_embeddings(const EmbeddingMatrix& matrix) {
    if (matrix.dim == 0 && !matrix.data.empty()) fail(ErrorCode::DimMismatch, "data present with dim 0");
    if (matrix.dim != 0 && matrix.data.size() % matrix.dim != 0) {
        fail(ErrorCode::DimMismatch, "data length is not a multiple of dim");
    }
    std::string out;
    out.reserve(kEmbeddingHeaderSize + matrix.data.size() * 4);
    out.append(kEmbeddingMagic);
    put_le<std::uint32_t>(out, kEmbeddingFormatVersion);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(matrix.kind));
    put_le<std::uint8_t>(out, kDtypeFloat32);
    put_le<std::uint16_t>(out, 0);
    put_le<std::uint32_t>(out, matrix.dim);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(matrix.count()));
    for (float x : matrix.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
    return out;
}

EmbeddingMatrix decode_embeddings(std::string_view bytes) {
    if (bytes.size() < kEmbeddingMagic.size()) fail(ErrorCode::TruncatedFile, "file shorter than magic");
    if (bytes.substr(0, kEmbeddingMagic.size()) != kEmbeddingMagic) fail(ErrorCode::BadMagic, "expected TICLEMB1");
    if (bytes.size() < kEmbeddingHeaderSize) fail(ErrorCode::TruncatedFile, "file shorter than header");

    const auto version = get_le<std::uint32_t>(bytes, 8);
    if (version != kEmbeddingFormatVersion) fail(ErrorCode::UnsupportedVersion, "version " + std::to_string(version));
    const auto kind = get_le<std::uint8_t>(bytes, 12);
    const auto dtype = get_le<std::uint8_t>(bytes, 13);
    const auto reserved = get_le<std::uint16_t>(bytes, 14);
    const auto dim = get_le<std::uint32_t>(bytes, 16);
    const auto count = get_le<std::uint64_t>(bytes, 20);

    if (kind != 1 && kind != 2) fail(ErrorCode::ParseError, "unknown embedding kind " + std::to_string(kind));
    if (dtype != kDtypeFloat32) fail(ErrorCode::UnsupportedVersion, "dtype " + std::to_string(dtype));
    if (reserved != 0) fail(ErrorCode::ParseError, "reserved header field is non-zero");
    if (dim == 0 && count != 0) fail(ErrorCode::DimMismatch, "dim 0 with non-zero count");

    const std::size_t payload = bytes.size() - kEmbeddingHeaderSize;
    // count * dim * 4 cannot overflow for any file that fits in memory; guard anyway against hostile headers.
    if (dim != 0 && count > payload / (4ull * dim)) {
        fail(ErrorCode::TruncatedFile, "header declares " + std::to_string(count) + " rows of dim " +
                                           std::to_string(dim) + " but only " + std::to_string(payload) +
                                           " payload bytes are present");
    }
    const std::size_t values = static_cast<std::size_t>(count) * dim;
    if (payload != values * 4) fail(ErrorCode::ParseError, "trailing bytes after embedding payload");

    EmbeddingMatrix m;
    m.kind = static_cast<EmbeddingKind>(kind);
    m.dim = dim;
    m.data.resize(values);
    for (std::size_t i = 0; i < values; ++i) {
        m.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, kEmbeddingHeaderSize + 4 * i));
    }
    return m;
}

void write_embedding_file(const std::filesystem::path& path, const EmbeddingMatrix& matrix) {
    const std::string bytes = encode_embeddings(matrix);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

EmbeddingMatrix read_embedding_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_embeddings(bytes);
}

} // namespace ticl
