#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fdtd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point behind the `fdtd` executable. `args` excludes the program
/// name. Machine output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace fdtd
