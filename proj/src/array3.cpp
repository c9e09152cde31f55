#include "fdtd/array3.hpp"

#include <algorithm>

namespace fdtd {

std::string to_string(const Shape3& s) {
    return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) + ")";
}

Box intersect(const Box& a, const Box& b) {
    Box r;
    for (int d = 0; d < 3; ++d) {
        r.lo[d] = std::max(a.lo[d], b.lo[d]);
        r.hi[d] = std::min(a.hi[d], b.hi[d]);
    }
    return r;
}

std::string to_string(const Box& b) {
    std::string s = "[";
    for (int d = 0; d < 3; ++d) {
        if (d) s += ",";
        s += std::to_string(b.lo[d]) + ":" + std::to_string(b.hi[d]);
    }
    return s + "]";
}

} // namespace fdtd
