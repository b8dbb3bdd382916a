#pragma once

#include <cstdint>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rdaf {

using i64 = std::int64_t;

/// Dense NCHW extents. Parameter tensors reuse the four slots
/// (conv weights as [out, in, kh, kw], biases as [1, c, 1, 1]).
struct Shape {
    i64 n = 0;
    i64 c = 0;
    i64 h = 0;
    i64 w = 0;

    i64 numel() const { return n * c * h * w; }
    bool valid() const { return n >= 1 && c >= 1 && h >= 1 && w >= 1; }
    bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
    std::ostringstream os;
    os << "(" << s.n << "," << s.c << "," << s.h << "," << s.w << ")";
    return os.str();
}

inline std::ostream& operator<<(std::ostream& os, const Shape& s) {
    return os << to_string(s);
}

namespace detail {

template <typename... Args>
std::string cat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

/// Kernel parallelism cap: min(hardware threads, RDAF_THREADS if set).
int thread_count();

}  // namespace detail

}  // namespace rdaf

#define RDAF_CHECK(cond, ...)                                              \
    do {                                                                   \
        if (!(cond))                                                       \
            throw std::invalid_argument(::rdaf::detail::cat(__VA_ARGS__)); \
    } while (0)
