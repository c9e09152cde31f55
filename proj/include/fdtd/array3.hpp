#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fdtd {

using Index = std::int64_t;
using Shape3 = std::array<Index, 3>;
using Offset3 = std::array<int, 3>;

inline Index volume(const Shape3& s) { return s[0] * s[1] * s[2]; }

std::string to_string(const Shape3& s);

/// Half-open 3D index box [lo, hi).
struct Box {
    Shape3 lo{0, 0, 0};
    Shape3 hi{0, 0, 0};

    Index extent(int axis) const { return hi[axis] - lo[axis]; }
    Shape3 extents() const { return {extent(0), extent(1), extent(2)}; }
    bool empty() const { return extent(0) <= 0 || extent(1) <= 0 || extent(2) <= 0; }
    Index points() const { return empty() ? 0 : volume(extents()); }

    bool contains(Index i, Index j, Index k) const {
        return i >= lo[0] && i < hi[0] && j >= lo[1] && j < hi[1] && k >= lo[2] && k < hi[2];
    }

    Box shifted(const Offset3& o) const {
        return {{lo[0] + o[0], lo[1] + o[1], lo[2] + o[2]},
                {hi[0] + o[0], hi[1] + o[1], hi[2] + o[2]}};
    }

    static Box of_shape(const Shape3& s) { return {{0, 0, 0}, s}; }

    friend bool operator==(const Box&, const Box&) = default;
};

Box intersect(const Box& a, const Box& b);
std::string to_string(const Box& b);

/// Dense row-major 3D array (i slowest, k fastest).
template <typename T>
class Array3 {
public:
    Array3() = default;
    explicit Array3(const Shape3& shape, T fill = T{})
        : shape_(shape), data_(static_cast<std::size_t>(volume(shape)), fill) {}

    const Shape3& shape() const noexcept { return shape_; }
    Index size() const noexcept { return static_cast<Index>(data_.size()); }
    Index stride_i() const noexcept { return shape_[1] * shape_[2]; }
    Index stride_j() const noexcept { return shape_[2]; }

    Index linear(Index i, Index j, Index k) const noexcept {
        return (i * shape_[1] + j) * shape_[2] + k;
    }

    T& operator()(Index i, Index j, Index k) noexcept { return data_[linear(i, j, k)]; }
    const T& operator()(Index i, Index j, Index k) const noexcept { return data_[linear(i, j, k)]; }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Array3&, const Array3&) = default;

private:
    Shape3 shape_{0, 0, 0};
    std::vector<T> data_;
};

} // namespace fdtd
