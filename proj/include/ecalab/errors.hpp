#pragma once

#include <stdexcept>
#include <string>

namespace ecalab {

// An orbit contains two transitions that map the same neighborhood to
// different outputs, so no radius-r rule under periodic boundary produced it.
struct InconsistentOrbitError : std::runtime_error {
    explicit InconsistentOrbitError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed dataset or checkpoint file (bad magic, version, truncation, ...).
struct DataFormatError : std::runtime_error {
    explicit DataFormatError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite value encountered during forward/backward computation.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ecalab
