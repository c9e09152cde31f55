#include "fdtd/target.hpp"

#include <cstdlib>

#include "fdtd/error.hpp"

namespace fdtd {

int TargetDescriptor::lanes(Precision p) const {
    if (vector_bits <= 0) return 1;
    return vector_bits / (8 * element_bytes(p));
}

TargetDescriptor target_by_name(std::string_view name) {
    if (name == "avx512") return {"avx512", 512, false};
    if (name == "avx2") return {"avx2", 256, false};
    if (name == "sve-512") return {"sve-512", 512, true};
    if (name == "scalar") return {"scalar", 0, false};
    throw ValidationError("unknown target '" + std::string(name) + "' (expected avx512, avx2, sve-512 or scalar)");
}

TargetDescriptor detect_target() {
    if (const char* env = std::getenv("FDTD_TARGET"); env && *env) return target_by_name(env);
#if defined(__AVX512F__)
    return target_by_name("avx512");
#elif defined(__AVX2__)
    return target_by_name("avx2");
#else
    return target_by_name("scalar");
#endif
}

} // namespace fdtd
