#pragma once

#include <stdexcept>
#include <string>

namespace varith {

// Filesystem / stream failures. The CLI maps these to exit code 2,
// std::invalid_argument (validation failures) to exit code 1.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable or unsupported file contents (bad magic, malformed header,
// truncated payload).
struct FormatError : IoError {
    using IoError::IoError;
};

}  // namespace varith
