#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fdtd/target.hpp"
#include "fdtd/yee.hpp"

namespace fdtd::bench {

struct BenchConfig {
    std::vector<Index> sizes{16, 32, 64, 128};
    std::int64_t steps = 1000;
    int repeats = 10;
    std::vector<Precision> precisions{Precision::f32, Precision::f64};
    std::vector<std::string> pipelines{"none", "tile", "tile+vec", "tile+vec+fuse"};
    std::int64_t warmup = 100;
    std::uint64_t seed = 1;
    /// Refuse sizes whose six arrays need more than this many bytes.
    std::uint64_t memory_cap_bytes = 4ull << 30;
    TargetDescriptor target = detect_target();
};

/// Throws ValidationError.
void validate(const BenchConfig& c);

/// 6 * (N+1)^3 * element size.
std::uint64_t estimated_bytes(Index n, Precision p);

/// Stable hash of the measurement matrix (everything except timings).
std::string config_hash(const BenchConfig& c);

struct BenchRecord {
    Index size = 0;
    Precision precision = Precision::f64;
    std::string pipeline;
    std::int64_t steps = 0;
    int repeats = 0;
    double mean_s = 0.0; // seconds per measurement of `steps` steps
    double std_s = 0.0;
    double cells_per_s = 0.0;
    std::optional<double> speedup;
    std::string baseline;
    /// Relative change of the synchronized energy over all timed steps.
    double energy_drift = 0.0;
    std::string notes;
};

using Progress = std::function<void(const BenchRecord&)>;

std::vector<BenchRecord> run_benchmark(const BenchConfig& config, const Progress& progress = {});

struct BaselineSelector {
    std::string pipeline = "none";
    /// When set, every record is compared against this precision's baseline
    /// (e.g. f64 for "speedup relative to double precision").
    std::optional<Precision> precision;
};

struct SpeedupRow {
    Index size = 0;
    Precision precision = Precision::f64;
    std::string pipeline;
    double mean_s = 0.0;
    double baseline_mean_s = 0.0;
    double speedup = 0.0;
};

/// speedup = baseline mean / record mean. Throws ValidationError naming the
/// (size, precision) key when its baseline is missing.
std::vector<SpeedupRow> speedup_table(const std::vector<BenchRecord>& records, const BaselineSelector& baseline);

/// Fills speedup/baseline on each record from speedup_table.
void attach_speedups(std::vector<BenchRecord>& records, const BaselineSelector& baseline);

inline constexpr const char* kCsvHeader =
    "size,precision,pipeline,steps,repeats,mean_s,std_s,cells_per_s,speedup,baseline,host,notes";

std::string csv_quote(const std::string& field);
void write_csv(std::ostream& os, const std::vector<BenchRecord>& records, const std::string& host);

/// Hostname plus target name.
std::string host_tag(const TargetDescriptor& target);

} // namespace fdtd::bench
