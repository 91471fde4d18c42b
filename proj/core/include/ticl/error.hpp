#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ticl {

enum class ErrorCode {
    // geometry
    ZeroNorm,
    DimMismatch,
    NonFinite,
    // candidate store and file formats
    ParseError,
    DuplicateId,
    CountMismatch,
    KindMismatch,
    NotNormalized,
    BadMagic,
    UnsupportedVersion,
    TruncatedFile,
    IoError,
    // retrieval
    MissingPseudoLabelEmbedding,
    EmptyStore,
    EmptyStageOne,
    // providers
    ProviderError,
    // evaluation
    EmptyReference,
    NoValidPairs,
    ZeroBaseline,
    // configuration / usage
    ConfigError,
};

/// Coarse error class, used by the command-line tool to pick an exit status.
enum class ErrorClass { Usage, Data, Provider };

std::string_view error_code_name(ErrorCode code) noexcept;
ErrorClass error_class(ErrorCode code) noexcept;

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code),
          detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

  private:
    ErrorCode code_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

} // namespace ticl
