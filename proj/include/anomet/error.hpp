#pragma once

#include <stdexcept>
#include <string>

namespace anomet {

/// Base of every error raised by the library. `kind()` groups errors into the
/// categories the command-line front end maps onto exit codes.
class Error : public std::runtime_error {
public:
    enum class Kind { invalid_input, decode, malformed_record, version_mismatch, training_failed, generation };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct InvalidInput : Error {
    explicit InvalidInput(const std::string& what) : Error(Kind::invalid_input, what) {}
};

struct DecodeError : Error {
    explicit DecodeError(const std::string& what) : Error(Kind::decode, what) {}
};

struct MalformedRecord : Error {
    explicit MalformedRecord(const std::string& what) : Error(Kind::malformed_record, what) {}
};

struct VersionMismatch : Error {
    explicit VersionMismatch(const std::string& what) : Error(Kind::version_mismatch, what) {}
};

struct TrainingFailed : Error {
    explicit TrainingFailed(const std::string& what) : Error(Kind::training_failed, what) {}
};

struct GenerationError : Error {
    explicit GenerationError(const std::string& what) : Error(Kind::generation, what) {}
};

} // namespace anomet
