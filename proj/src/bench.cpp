#include "fdtd/bench.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "fdtd/error.hpp"
#include "fdtd/exec.hpp"
#include "fdtd/schedule.hpp"

namespace fdtd::bench {

void validate(const BenchConfig& c) {
    if (c.sizes.empty()) throw ValidationError("no benchmark sizes given");
    for (Index n : c.sizes)
        if (n < 2) throw ValidationError("benchmark size " + std::to_string(n) + " is below 2");
    if (c.repeats < 1) throw ValidationError("repeats must be >= 1");
    if (c.steps < 1) throw ValidationError("steps must be >= 1");
    if (c.warmup < 0) throw ValidationError("warmup must be >= 0");
    if (c.precisions.empty()) throw ValidationError("no precisions given");
    if (c.pipelines.empty()) throw ValidationError("no pipelines given");
    for (const auto& p : c.pipelines) sched::canonical_pipeline(p);
    for (Index n : c.sizes)
        for (Precision p : c.precisions)
            if (estimated_bytes(n, p) > c.memory_cap_bytes)
                throw ValidationError("size " + std::to_string(n) + " (" + std::string(to_string(p)) + ") needs " +
                                      std::to_string(estimated_bytes(n, p)) + " bytes, above the cap of " +
                                      std::to_string(c.memory_cap_bytes));
}

std::uint64_t estimated_bytes(Index n, Precision p) {
    const auto e = static_cast<std::uint64_t>(n + 1);
    return 6 * e * e * e * static_cast<std::uint64_t>(element_bytes(p));
}

std::string config_hash(const BenchConfig& c) {
    std::string s = "sizes=";
    for (Index n : c.sizes) s += std::to_string(n) + ",";
    s += ";steps=" + std::to_string(c.steps) + ";repeats=" + std::to_string(c.repeats) + ";prec=";
    for (Precision p : c.precisions) s += std::string(to_string(p)) + ",";
    s += ";pipes=";
    for (const auto& p : c.pipelines) s += sched::canonical_pipeline(p) + ",";
    s += ";warmup=" + std::to_string(c.warmup) + ";seed=" + std::to_string(c.seed) + ";target=" + c.target.name;
    std::uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

template <typename T>
BenchRecord measure(const BenchConfig& c, Index n, const std::string& pipeline) {
    SimParams p;
    p.nx = p.ny = p.nz = n;
    p.precision = precision_of<T>();
    p = finalize(p);
    const auto kernel = exec::lower_pipeline(p, pipeline, c.target);
    const auto init = InitialCondition::random(c.seed);

    BenchRecord r;
    r.size = n;
    r.precision = p.precision;
    r.pipeline = pipeline;
    r.steps = c.steps;
    r.repeats = c.repeats;

    FieldSet<T> f = make_fields<T>(p, init);
    if (c.warmup > 0) exec::run(kernel, f, c.warmup);

    std::vector<double> times;
    double drift = 0.0;
    for (int rep = 0; rep < c.repeats; ++rep) {
        f = make_fields<T>(p, init);
        const double e0 = exec::synchronized_energy(f, p);
        const auto st = exec::run(kernel, f, c.steps);
        times.push_back(st.wall_seconds);
        const double e1 = exec::synchronized_energy(f, p);
        drift = std::max(drift, std::abs(e1 - e0) / e0);
    }
    double sum = 0.0;
    for (double t : times) sum += t;
    r.mean_s = sum / static_cast<double>(times.size());
    double var = 0.0;
    for (double t : times) var += (t - r.mean_s) * (t - r.mean_s);
    r.std_s = times.size() > 1 ? std::sqrt(var / static_cast<double>(times.size() - 1)) : 0.0;
    r.cells_per_s = r.mean_s > 0 ? static_cast<double>(n * n * n) * static_cast<double>(c.steps) / r.mean_s : 0.0;
    r.energy_drift = drift;
    char buf[64];
    std::snprintf(buf, sizeof buf, "energy_drift=%.3g", drift);
    r.notes = buf;
    return r;
}

} // namespace

std::vector<BenchRecord> run_benchmark(const BenchConfig& config, const Progress& progress) {
    validate(config);
    std::vector<BenchRecord> out;
    for (Index n : config.sizes)
        for (Precision p : config.precisions)
            for (const auto& name : config.pipelines) {
                const std::string pipe = sched::canonical_pipeline(name);
                out.push_back(p == Precision::f32 ? measure<float>(config, n, pipe) : measure<double>(config, n, pipe));
                if (progress) progress(out.back());
            }
    if (std::any_of(out.begin(), out.end(), [](const BenchRecord& r) { return r.pipeline == "none"; }))
        attach_speedups(out, {});
    return out;
}

std::vector<SpeedupRow> speedup_table(const std::vector<BenchRecord>& records, const BaselineSelector& baseline) {
    std::map<std::pair<Index, Precision>, double> base;
    for (const auto& r : records)
        if (r.pipeline == baseline.pipeline) base[{r.size, r.precision}] = r.mean_s;
    std::vector<SpeedupRow> out;
    for (const auto& r : records) {
        const std::pair<Index, Precision> key{r.size, baseline.precision.value_or(r.precision)};
        const auto it = base.find(key);
        if (it == base.end())
            throw ValidationError("missing baseline '" + baseline.pipeline + "' for size=" + std::to_string(key.first) +
                                  " precision=" + std::string(to_string(key.second)));
        if (!(r.mean_s > 0)) throw ValidationError("record " + r.pipeline + " size=" + std::to_string(r.size) + " has no time");
        out.push_back({r.size, r.precision, r.pipeline, r.mean_s, it->second, it->second / r.mean_s});
    }
    return out;
}

void attach_speedups(std::vector<BenchRecord>& records, const BaselineSelector& baseline) {
    const auto rows = speedup_table(records, baseline);
    for (std::size_t n = 0; n < records.size(); ++n) {
        records[n].speedup = rows[n].speedup;
        records[n].baseline = baseline.pipeline +
                              (baseline.precision ? "/" + std::string(to_string(*baseline.precision)) : std::string());
    }
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_csv(std::ostream& os, const std::vector<BenchRecord>& records, const std::string& host) {
    os << kCsvHeader << "\r\n";
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    for (const auto& r : records) {
        os << r.size << ',' << to_string(r.precision) << ',' << csv_quote(r.pipeline) << ',' << r.steps << ','
           << r.repeats << ',' << num(r.mean_s) << ',' << num(r.std_s) << ',' << num(r.cells_per_s) << ','
           << (r.speedup ? num(*r.speedup) : std::string()) << ',' << csv_quote(r.baseline) << ',' << csv_quote(host)
           << ',' << csv_quote(r.notes) << "\r\n";
    }
}

std::string host_tag(const TargetDescriptor& target) {
    char name[256] = {};
    if (gethostname(name, sizeof name - 1) != 0) std::snprintf(name, sizeof name, "unknown");
    return std::string(name) + " (" + target.name + ")";
}

} // namespace fdtd::bench
