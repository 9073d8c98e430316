#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace sephr {

enum class ErrorKind {
    config,             // invalid configuration or shape mismatch
    usage,              // API misuse (non-scalar backward, bad eps, ...)
    data,               // bad data values (label out of range, ...)
    state,              // operation not valid in the current state
    dataset_format,     // malformed dataset container
    checkpoint_format,  // malformed or incompatible checkpoint archive
    io,                 // file could not be opened/written
    diverged,           // NaN/Inf loss during training
    unknown_preset,     // model preset outside the fixed set
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

namespace detail {

template <typename... Args>
[[noreturn]] void raise(ErrorKind kind, Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    throw Error(kind, os.str());
}

}  // namespace detail

#define SEPHR_CHECK(cond, kind, ...)                              \
    do {                                                          \
        if (!(cond)) ::sephr::detail::raise(kind, __VA_ARGS__);   \
    } while (0)

}  // namespace sephr
