#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "fdtd/error.hpp"
#include "fdtd/io.hpp"

namespace fdtd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json params_json(const SimParams& p) {
    return {{"nx", p.nx},   {"ny", p.ny},     {"nz", p.nz},   {"dx", p.dx},
            {"dy", p.dy},   {"dz", p.dz},     {"dt", p.dt},   {"eps", p.eps},
            {"mu", p.mu},   {"precision", std::string(to_string(p.precision))}, {"cfl_factor", p.cfl_factor}};
}

SimParams params_from(const json& j) {
    SimParams p;
    p.nx = j.at("nx").get<Index>();
    p.ny = j.at("ny").get<Index>();
    p.nz = j.at("nz").get<Index>();
    p.dx = j.at("dx").get<double>();
    p.dy = j.at("dy").get<double>();
    p.dz = j.at("dz").get<double>();
    p.dt = j.at("dt").get<double>();
    p.eps = j.at("eps").get<double>();
    p.mu = j.at("mu").get<double>();
    p.precision = parse_precision(j.at("precision").get<std::string>());
    p.cfl_factor = j.at("cfl_factor").get<double>();
    return p;
}

template <typename T>
void write_raw(const fs::path& file, const Array3<T>& a) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot open " + file.string() + " for writing");
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(T)));
    } else {
        for (T v : a.values()) {
            auto bits = std::bit_cast<std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>(v);
            unsigned char b[sizeof(T)];
            for (std::size_t n = 0; n < sizeof(T); ++n) b[n] = static_cast<unsigned char>(bits >> (8 * n));
            os.write(reinterpret_cast<const char*>(b), sizeof(T));
        }
    }
    if (!os) throw IoError("write failed: " + file.string());
}

template <typename T>
void read_raw(const fs::path& file, Array3<T>& a) {
    std::ifstream is(file, std::ios::binary | std::ios::ate);
    if (!is) throw IoError("cannot open " + file.string());
    const auto bytes = static_cast<std::uint64_t>(is.tellg());
    const auto want = static_cast<std::uint64_t>(a.size()) * sizeof(T);
    if (bytes != want)
        throw ValidationError(file.string() + " holds " + std::to_string(bytes) + " bytes, sidecar shape needs " +
                              std::to_string(want));
    is.seekg(0);
    is.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(want));
    if (!is) throw IoError("read failed: " + file.string());
    if constexpr (std::endian::native != std::endian::little) {
        using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
        for (T& v : a.values()) {
            unsigned char b[sizeof(T)];
            std::memcpy(b, &v, sizeof(T));
            U bits = 0;
            for (std::size_t n = 0; n < sizeof(T); ++n) bits |= static_cast<U>(b[n]) << (8 * n);
            v = std::bit_cast<T>(bits);
        }
    }
}

json read_json(const fs::path& file) {
    std::ifstream is(file);
    if (!is) throw IoError("cannot open " + file.string());
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw ValidationError(file.string() + ": " + e.what());
    }
}

} // namespace

void write_dump(const fs::path& dir, const AnyFieldSet& fields, const DumpMeta& meta) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create dump directory " + dir.string());
    std::visit(
        [&](const auto& f) {
            for (Component c : kAllComponents) {
                const auto& a = f[c];
                const std::string name(to_string(c));
                write_raw(dir / (name + ".bin"), a);
                json j = {{"component", name},
                          {"shape", {a.shape()[0], a.shape()[1], a.shape()[2]}},
                          {"dtype", std::string(to_string(meta.params.precision))},
                          {"step", meta.step},
                          {"params", params_json(meta.params)},
                          {"seed", meta.seed},
                          {"init", meta.init}};
                std::ofstream os(dir / (name + ".json"));
                if (!os) throw IoError("cannot open " + (dir / (name + ".json")).string() + " for writing");
                os << j.dump(2) << '\n';
                if (!os) throw IoError("write failed: " + (dir / (name + ".json")).string());
            }
        },
        fields);
}

LoadedDump read_dump(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("dump directory " + dir.string() + " does not exist");
    LoadedDump d;
    bool first = true;
    std::array<json, 6> side;
    for (Component c : kAllComponents) {
        const std::string name(to_string(c));
        side[static_cast<int>(c)] = read_json(dir / (name + ".json"));
        const auto& j = side[static_cast<int>(c)];
        try {
            if (j.at("component").get<std::string>() != name)
                throw ValidationError((dir / (name + ".json")).string() + " describes component " +
                                      j.at("component").get<std::string>());
            if (first) {
                d.meta.params = params_from(j.at("params"));
                d.meta.step = j.at("step").get<std::int64_t>();
                d.meta.seed = j.at("seed").get<std::uint64_t>();
                d.meta.init = j.value("init", std::string("unknown"));
                first = false;
            }
            if (parse_precision(j.at("dtype").get<std::string>()) != d.meta.params.precision)
                throw ValidationError(name + " dtype differs from params precision");
        } catch (const json::exception& e) {
            throw ValidationError((dir / (name + ".json")).string() + ": " + e.what());
        }
    }
    const Shape3 cells = d.meta.params.cells();
    auto load = [&](auto tag) {
        using T = decltype(tag);
        FieldSet<T> f = allocate_fields<T>(cells);
        for (Component c : kAllComponents) {
            const auto& j = side[static_cast<int>(c)];
            const auto s = j.at("shape").get<std::vector<Index>>();
            if (s.size() != 3 || Shape3{s[0], s[1], s[2]} != f[c].shape())
                throw ValidationError(std::string(to_string(c)) + " sidecar shape does not match staggered shape " +
                                      to_string(f[c].shape()));
            read_raw(dir / (std::string(to_string(c)) + ".bin"), f[c]);
        }
        return f;
    };
    if (d.meta.params.precision == Precision::f32) d.fields = load(float{});
    else d.fields = load(double{});
    return d;
}

namespace {

template <typename U, typename F>
std::uint64_t ulp_impl(F a, F b) {
    if (a == b) return 0;
    if (std::isnan(a) || std::isnan(b)) {
        return std::bit_cast<U>(a) == std::bit_cast<U>(b) ? 0 : std::numeric_limits<std::uint64_t>::max();
    }
    auto ordered = [](F x) {
        const U bits = std::bit_cast<U>(x);
        constexpr U sign = U(1) << (sizeof(U) * 8 - 1);
        return (bits & sign) ? static_cast<U>(sign - (bits & ~sign)) : static_cast<U>(sign + bits);
    };
    const U x = ordered(a), y = ordered(b);
    return x > y ? x - y : y - x;
}

} // namespace

std::uint64_t ulp_distance(double a, double b) { return ulp_impl<std::uint64_t>(a, b); }
std::uint64_t ulp_distance(float a, float b) { return ulp_impl<std::uint32_t>(a, b); }

CompareReport compare_dumps(const LoadedDump& a, const LoadedDump& b, std::uint64_t max_ulps) {
    CompareReport r;
    if (a.fields.index() != b.fields.index()) {
        r.within = false;
        r.problems.push_back("precision differs");
        return r;
    }
    std::visit(
        [&](const auto& fa) {
            using FS = std::decay_t<decltype(fa)>;
            const auto& fb = std::get<FS>(b.fields);
            for (Component c : kAllComponents) {
                const auto& x = fa[c];
                const auto& y = fb[c];
                if (x.shape() != y.shape()) {
                    r.within = false;
                    r.problems.push_back(std::string(to_string(c)) + " shape " + to_string(x.shape()) + " vs " +
                                         to_string(y.shape()));
                    continue;
                }
                const auto& s = x.shape();
                for (Index n = 0; n < x.size(); ++n) {
                    const auto u = ulp_distance(x.data()[n], y.data()[n]);
                    if (u > max_ulps) {
                        r.within = false;
                        ++r.mismatches;
                    }
                    if (u > r.max_ulps || (r.worst.empty() && u > max_ulps)) {
                        r.max_ulps = std::max(r.max_ulps, u);
                        const Index i = n / (s[1] * s[2]), j = (n / s[2]) % s[1], k = n % s[2];
                        char buf[160];
                        std::snprintf(buf, sizeof buf, "%s(%lld,%lld,%lld) %.17g vs %.17g", std::string(to_string(c)).c_str(),
                                      static_cast<long long>(i), static_cast<long long>(j), static_cast<long long>(k),
                                      static_cast<double>(x.data()[n]), static_cast<double>(y.data()[n]));
                        r.worst = buf;
                    }
                }
            }
        },
        a.fields);
    return r;
}

} // namespace fdtd
