#pragma once

#include <string>
#include <string_view>

#include "fdtd/yee.hpp"

namespace fdtd {

/// What the execution target reports about its SIMD unit. `scalable`
/// targets report their lane count only at run start.
struct TargetDescriptor {
    std::string name;
    int vector_bits = 0; // 0: no SIMD
    bool scalable = false;

    /// Lanes of `p` per vector register; 1 on scalar targets.
    int lanes(Precision p) const;
};

/// Known names: avx512, avx2, sve-512, scalar.
TargetDescriptor target_by_name(std::string_view name);

/// FDTD_TARGET when set, otherwise the best ISA this binary was compiled for.
TargetDescriptor detect_target();

} // namespace fdtd
