#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fdtd/yee.hpp"

namespace fdtd {

struct DumpMeta {
    SimParams params;
    std::int64_t step = 0;
    std::uint64_t seed = 0;
    std::string init = "zero";
};

/// Writes <dir>/<comp>.bin (little-endian, row-major) and <dir>/<comp>.json
/// for all six components. Creates `dir` if missing; throws IoError.
void write_dump(const std::filesystem::path& dir, const AnyFieldSet& fields, const DumpMeta& meta);

struct LoadedDump {
    AnyFieldSet fields;
    DumpMeta meta;
};

/// Throws IoError for unreadable files, ValidationError for inconsistent
/// sidecars or sizes.
LoadedDump read_dump(const std::filesystem::path& dir);

struct CompareReport {
    bool within = true;
    std::uint64_t max_ulps = 0;
    std::int64_t mismatches = 0; // elements above the tolerance
    std::string worst;           // "<comp>(i,j,k) a vs b"
    std::vector<std::string> problems; // shape / dtype differences
};

/// Distance in units in the last place; equal values (including +0 / -0)
/// are 0 apart, NaN against anything non-identical is the maximum.
std::uint64_t ulp_distance(double a, double b);
std::uint64_t ulp_distance(float a, float b);

CompareReport compare_dumps(const LoadedDump& a, const LoadedDump& b, std::uint64_t max_ulps);

/// Legacy ASCII VTK STRUCTURED_POINTS for one component, x fastest.
void write_vtk(const std::filesystem::path& file, const AnyFieldSet& fields, const SimParams& params, Component c);

/// One <dir>/<comp>.vtk per component. `dir` must already exist.
std::vector<std::filesystem::path> export_vtk(const std::filesystem::path& dir, const AnyFieldSet& fields,
                                              const SimParams& params, const std::vector<Component>& components);

} // namespace fdtd
