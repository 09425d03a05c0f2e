#pragma once

#include <stdexcept>
#include <string>

namespace fedskip {

// Config/invariant violations. The CLI maps these to exit code 1.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files (bad magic, truncation, unparsable tokens).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/parameter layout mismatches between values that must agree.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures (missing paths, unwritable outputs).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fedskip
