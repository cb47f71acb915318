#pragma once

#include <string>
#include <string_view>

namespace obtree {

/// Kernel dispatch selector: the scalar reference loops, or the chunked
/// masked schedule operating on `lanes()` samples per step.
class Backend {
public:
    enum class Kind { Scalar, Vectorized };

    static constexpr Backend scalar() { return Backend(Kind::Scalar, 1); }

    /// Throws std::invalid_argument unless lanes is one of 4, 8, 16, 32.
    static Backend vectorized(int lanes);

    /// Parses "scalar" or "vec:W".
    static Backend parse(std::string_view text);

    constexpr Kind kind() const { return kind_; }
    constexpr int lanes() const { return lanes_; }
    constexpr bool is_scalar() const { return kind_ == Kind::Scalar; }

    std::string to_string() const;

    friend constexpr bool operator==(Backend, Backend) = default;

private:
    constexpr Backend(Kind kind, int lanes) : kind_(kind), lanes_(lanes) {}

    Kind kind_;
    int lanes_;
};

inline constexpr int kSupportedLanes[] = {4, 8, 16, 32};

}  // namespace obtree
