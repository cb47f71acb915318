#include "obtree/backend.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

namespace obtree {

Backend Backend::vectorized(int lanes) {
    if (std::find(std::begin(kSupportedLanes), std::end(kSupportedLanes), lanes) == std::end(kSupportedLanes))
        throw std::invalid_argument("lane count must be one of 4, 8, 16, 32 (got " + std::to_string(lanes) + ")");
    return Backend(Kind::Vectorized, lanes);
}

Backend Backend::parse(std::string_view text) {
    if (text == "scalar") return scalar();
    constexpr std::string_view prefix = "vec:";
    if (text.starts_with(prefix)) {
        const auto digits = text.substr(prefix.size());
        int lanes = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), lanes);
        if (ec == std::errc() && ptr == digits.data() + digits.size()) return vectorized(lanes);
    }
    throw std::invalid_argument("unknown backend '" + std::string(text) + "' (expected scalar or vec:W)");
}

std::string Backend::to_string() const {
    return is_scalar() ? std::string("scalar") : "vec:" + std::to_string(lanes_);
}

}  // namespace obtree
