#include "ticl/error.hpp"

namespace ticl {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingPseudoLabelEmbedding: return "MissingPseudoLabelEmbedding";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::EmptyStageOne: return "EmptyStageOne";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::NoValidPairs: return "NoValidPairs";
    case ErrorCode::ZeroBaseline: return "ZeroBaseline";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

ErrorClass error_class(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::ProviderError: return ErrorClass::Provider;
    case ErrorCode::ConfigError: return ErrorClass::Usage;
    default: return ErrorClass::Data;
    }
}

} // namespace ticl
