#pragma once

#include <stdexcept>
#include <string>

namespace obtree {

/// Malformed model file or a model that violates a structural invariant.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or mis-shaped sample data (CSV cells, column counts, etc).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two kernel backends produced different predictions.
class BackendMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace obtree
