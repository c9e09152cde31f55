#include "fdtd/yee.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fdtd/error.hpp"

namespace fdtd {

std::string_view to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view s) {
    if (s == "f32" || s == "float32" || s == "single") return Precision::f32;
    if (s == "f64" || s == "float64" || s == "double") return Precision::f64;
    throw ValidationError("unknown precision '" + std::string(s) + "' (expected f32 or f64)");
}

std::string_view to_string(Component c) {
    static constexpr std::array<std::string_view, 6> names{"ex", "ey", "ez", "hx", "hy", "hz"};
    return names[static_cast<int>(c)];
}

Component parse_component(std::string_view s) {
    for (Component c : kAllComponents) {
        if (to_string(c) == s) return c;
    }
    std::string upper{s};
    for (Component c : kAllComponents) {
        std::string n{to_string(c)};
        n[0] = static_cast<char>(n[0] - 'a' + 'A');
        if (n == upper) return c;
    }
    throw ValidationError("unknown field component '" + std::string(s) + "'");
}

std::string_view to_string(InitialCondition::Kind k) {
    switch (k) {
    case InitialCondition::Kind::zero: return "zero";
    case InitialCondition::Kind::random_interior: return "random_interior";
    case InitialCondition::Kind::mode: return "mode";
    }
    return "?";
}

Shape3 staggered_shape(Component c, const Shape3& cells) {
    const int a = component_axis(c);
    Shape3 s = cells;
    for (int d = 0; d < 3; ++d) {
        // E: cell count along its own axis, node count across. H is the dual.
        const bool own = d == a;
        if (is_electric(c) ? !own : own) s[d] += 1;
    }
    return s;
}

bool on_tangential_wall(Component c, const Shape3& cells, Index i, Index j, Index k) {
    if (!is_electric(c)) return false;
    const int a = component_axis(c);
    const std::array<Index, 3> idx{i, j, k};
    for (int d = 0; d < 3; ++d) {
        if (d == a) continue;
        if (idx[d] == 0 || idx[d] == cells[d]) return true;
    }
    return false;
}

std::array<double, 3> node_offset(Component c) {
    std::array<double, 3> o{0.0, 0.0, 0.0};
    const int a = component_axis(c);
    for (int d = 0; d < 3; ++d) {
        const bool own = d == a;
        if (is_electric(c) ? own : !own) o[d] = 0.5;
    }
    return o;
}

double SimParams::wave_speed() const { return 1.0 / std::sqrt(eps * mu); }

double cfl_limit(const SimParams& p) {
    if (!(p.dx > 0) || !(p.dy > 0) || !(p.dz > 0))
        throw ValidationError("cell sizes must be positive");
    if (!(p.eps > 0) || !(p.mu > 0))
        throw ValidationError("eps and mu must be positive");
    const double inv2 = 1.0 / (p.dx * p.dx) + 1.0 / (p.dy * p.dy) + 1.0 / (p.dz * p.dz);
    return 1.0 / (p.wave_speed() * std::sqrt(inv2));
}

SimParams finalize(SimParams p, CflPolicy policy) {
    if (p.nx < 2 || p.ny < 2 || p.nz < 2)
        throw ValidationError("cell counts must be >= 2, got " + to_string(p.cells()));
    if (!(p.cfl_factor > 0) || (p.cfl_factor > 1 && policy == CflPolicy::enforce))
        throw ValidationError("cfl_factor must be in (0, 1], got " + std::to_string(p.cfl_factor));
    const double limit = cfl_limit(p);
    if (p.dt == 0.0) p.dt = p.cfl_factor * limit;
    if (!(p.dt > 0) || !std::isfinite(p.dt))
        throw ValidationError("dt must be positive and finite");
    if (policy == CflPolicy::enforce && p.dt > limit)
        throw ValidationError("dt=" + std::to_string(p.dt) + " exceeds the CFL limit " + std::to_string(limit));
    return p;
}

SimParams unit_cavity(Index n, Precision precision, double cfl_factor) {
    SimParams p;
    p.nx = p.ny = p.nz = n;
    p.dx = p.dy = p.dz = 1.0 / static_cast<double>(n);
    p.eps = p.mu = 1.0;
    p.precision = precision;
    p.cfl_factor = cfl_factor;
    return finalize(p);
}

template <typename T>
FieldSet<T> allocate_fields(const Shape3& cells) {
    static constexpr std::array<const char*, 3> axis_names{"nx", "ny", "nz"};
    const auto limit = std::numeric_limits<std::size_t>::max() / (2 * sizeof(T));
    for (int d = 0; d < 3; ++d) {
        if (cells[d] < 1) throw ValidationError(std::string("extent ") + axis_names[d] + " must be positive");
    }
    std::size_t total = 1;
    for (int d = 0; d < 3; ++d) {
        const auto e = static_cast<std::size_t>(cells[d]) + 1;
        if (total > limit / e)
            throw ValidationError(std::string("allocation size overflow at extent ") + axis_names[d] + "=" +
                                  std::to_string(cells[d]));
        total *= e;
    }
    FieldSet<T> f;
    f.cells = cells;
    for (Component c : kAllComponents) f[c] = Array3<T>(staggered_shape(c, cells));
    return f;
}

namespace {

// Uniform in [-1, 1) from the top 53 bits of a 64-bit draw. Independent of
// the standard library's distribution implementations.
double symmetric_unit(std::mt19937_64& rng) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
}

template <typename T>
void fill_random_interior(FieldSet<T>& f, std::uint64_t seed, double amplitude) {
    std::mt19937_64 rng(seed);
    for (Component c : {Component::ex, Component::ey, Component::ez}) {
        auto& a = f[c];
        const auto& s = a.shape();
        for (Index i = 0; i < s[0]; ++i)
            for (Index j = 0; j < s[1]; ++j)
                for (Index k = 0; k < s[2]; ++k) {
                    if (on_tangential_wall(c, f.cells, i, j, k)) continue;
                    a(i, j, k) = static_cast<T>(amplitude * symmetric_unit(rng));
                }
    }
}

template <typename T>
void fill_mode(FieldSet<T>& f, const SimParams& p, const InitialCondition& init) {
    if (init.m < 1 || init.n < 1 || init.p < 0)
        throw ValidationError("mode indices require m,n >= 1 and p >= 0");
    const double pi = std::numbers::pi;
    const double lx = p.nx * p.dx, ly = p.ny * p.dy, lz = p.nz * p.dz;
    auto& ez = f.ez();
    const auto& s = ez.shape();
    for (Index i = 0; i < s[0]; ++i)
        for (Index j = 0; j < s[1]; ++j)
            for (Index k = 0; k < s[2]; ++k) {
                if (on_tangential_wall(Component::ez, f.cells, i, j, k)) continue;
                const double x = i * p.dx, y = j * p.dy, z = (k + 0.5) * p.dz;
                const double v = init.amplitude * std::sin(init.m * pi * x / lx) * std::sin(init.n * pi * y / ly) *
                                 std::cos(init.p * pi * z / lz);
                ez(i, j, k) = static_cast<T>(v);
            }
}

} // namespace

template <typename T>
FieldSet<T> make_fields(const SimParams& params, const InitialCondition& init) {
    FieldSet<T> f = allocate_fields<T>(params.cells());
    switch (init.kind) {
    case InitialCondition::Kind::zero: break;
    case InitialCondition::Kind::random_interior: fill_random_interior(f, init.seed, init.amplitude); break;
    case InitialCondition::Kind::mode: fill_mode(f, params, init); break;
    }
    return f;
}

AnyFieldSet make_any_fields(const SimParams& params, const InitialCondition& init) {
    if (params.precision == Precision::f32) return make_fields<float>(params, init);
    return make_fields<double>(params, init);
}

template <typename T>
double energy(const FieldSet<T>& fields, const SimParams& params) {
    if (fields.cells != params.cells())
        throw ValidationError("field shape " + to_string(fields.cells) + " does not match params " +
                              to_string(params.cells()));
    double e_sum = 0.0, h_sum = 0.0;
    for (Component c : kAllComponents) {
        double s = 0.0;
        for (T v : fields[c].values()) s += static_cast<double>(v) * static_cast<double>(v);
        (is_electric(c) ? e_sum : h_sum) += s;
    }
    return (0.5 * params.eps * e_sum + 0.5 * params.mu * h_sum) * params.cell_volume();
}

template <typename T>
T probe(const FieldSet<T>& fields, Component c, Index i, Index j, Index k) {
    const auto& a = fields[c];
    const auto& s = a.shape();
    if (i < 0 || j < 0 || k < 0 || i >= s[0] || j >= s[1] || k >= s[2])
        throw std::out_of_range("probe " + std::string(to_string(c)) + to_string(Shape3{i, j, k}) +
                                " outside shape " + to_string(s));
    return a(i, j, k);
}

template <typename T>
double max_norm(const FieldSet<T>& fields) {
    double m = 0.0;
    for (const auto& a : fields.arrays)
        for (T v : a.values()) {
            if (!std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
            m = std::max(m, static_cast<double>(std::abs(v)));
        }
    return m;
}

template <typename T>
void apply_pec(FieldSet<T>& fields) {
    for (Component c : {Component::ex, Component::ey, Component::ez}) {
        auto& a = fields[c];
        const auto& s = a.shape();
        for (Index i = 0; i < s[0]; ++i)
            for (Index j = 0; j < s[1]; ++j)
                for (Index k = 0; k < s[2]; ++k)
                    if (on_tangential_wall(c, fields.cells, i, j, k)) a(i, j, k) = T(0);
    }
}

template <typename T>
bool pec_walls_zero(const FieldSet<T>& fields) {
    for (Component c : {Component::ex, Component::ey, Component::ez}) {
        const auto& a = fields[c];
        const auto& s = a.shape();
        for (Index i = 0; i < s[0]; ++i)
            for (Index j = 0; j < s[1]; ++j)
                for (Index k = 0; k < s[2]; ++k)
                    if (on_tangential_wall(c, fields.cells, i, j, k) && a(i, j, k) != T(0)) return false;
    }
    return true;
}

#define FDTD_INSTANTIATE(T)                                                                  \
    template FieldSet<T> allocate_fields<T>(const Shape3&);                                 \
    template FieldSet<T> make_fields<T>(const SimParams&, const InitialCondition&);         \
    template double energy<T>(const FieldSet<T>&, const SimParams&);                        \
    template T probe<T>(const FieldSet<T>&, Component, Index, Index, Index);                \
    template double max_norm<T>(const FieldSet<T>&);                                        \
    template void apply_pec<T>(FieldSet<T>&);                                               \
    template bool pec_walls_zero<T>(const FieldSet<T>&);

FDTD_INSTANTIATE(float)
FDTD_INSTANTIATE(double)
#undef FDTD_INSTANTIATE

} // namespace fdtd
