#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace equss {

// Caller handed us something that violates a precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input data is internally inconsistent (e.g. a code index outside [0, K)).
class DataCorruption : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A serialized file does not follow its declared format.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& msg, std::size_t byte_offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Computation produced a non-finite value.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace equss
