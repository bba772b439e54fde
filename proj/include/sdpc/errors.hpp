#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdpc {

// One code per distinct image-file malformation.
enum class PgmError {
    BadMagic,
    BadHeader,
    UnsupportedMaxval,
    TruncatedPayload,
};

class PgmParseError : public std::runtime_error {
public:
    PgmParseError(PgmError code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    PgmError code() const noexcept { return code_; }

private:
    PgmError code_;
};

enum class StreamError {
    BadMagic,
    VersionMismatch,
    GeneratorVersionMismatch,
    BadHeaderField,
    Truncated,
    TrailingGarbage,
    BadModeCode,
    IndexOverflow,
};

class StreamFormatError : public std::runtime_error {
public:
    StreamFormatError(StreamError code, const std::string& what,
                      std::ptrdiff_t block_index = -1)
        : std::runtime_error(what), code_(code), block_(block_index) {}
    StreamError code() const noexcept { return code_; }
    // Scan index of the block being processed when the error was detected,
    // -1 when the error is not tied to a block.
    std::ptrdiff_t block_index() const noexcept { return block_; }

private:
    StreamError code_;
    std::ptrdiff_t block_;
};

} // namespace sdpc
