#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>

#include "fdtd/array3.hpp"

namespace fdtd {

// CODATA 2018
inline constexpr double kVacuumPermittivity = 8.8541878128e-12; // F/m
inline constexpr double kVacuumPermeability = 1.25663706212e-6; // H/m

enum class Precision { f32, f64 };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view s);
inline int element_bytes(Precision p) { return p == Precision::f32 ? 4 : 8; }

template <typename T>
constexpr Precision precision_of() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? Precision::f32 : Precision::f64;
}

enum class Component : int { ex = 0, ey, ez, hx, hy, hz };

inline constexpr std::array<Component, 6> kAllComponents{
    Component::ex, Component::ey, Component::ez, Component::hx, Component::hy, Component::hz};

std::string_view to_string(Component c);
Component parse_component(std::string_view s);
inline bool is_electric(Component c) { return static_cast<int>(c) < 3; }
/// Axis the component points along (0 = x, 1 = y, 2 = z).
inline int component_axis(Component c) { return static_cast<int>(c) % 3; }

/// Standard Yee staggering: E on cell edges, H on cell faces.
Shape3 staggered_shape(Component c, const Shape3& cells);

/// True when (i,j,k) of E component `c` lies on a PEC wall it is tangential to.
bool on_tangential_wall(Component c, const Shape3& cells, Index i, Index j, Index k);

/// Physical coordinate offset of node (0,0,0) in units of the cell size: 0 or 1/2 per axis.
std::array<double, 3> node_offset(Component c);

struct SimParams {
    Index nx = 16, ny = 16, nz = 16;
    double dx = 1e-3, dy = 1e-3, dz = 1e-3;
    /// 0 means "derive as cfl_factor * cfl_limit".
    double dt = 0.0;
    double eps = kVacuumPermittivity;
    double mu = kVacuumPermeability;
    Precision precision = Precision::f64;
    double cfl_factor = 0.5;

    Shape3 cells() const { return {nx, ny, nz}; }
    Index cell_count() const { return nx * ny * nz; }
    double cell_volume() const { return dx * dy * dz; }
    double wave_speed() const;

    friend bool operator==(const SimParams&, const SimParams&) = default;
};

enum class CflPolicy { enforce, allow_unstable };

/// 1 / (c * sqrt(1/dx^2 + 1/dy^2 + 1/dz^2)).
double cfl_limit(const SimParams& p);

/// Validates `p` and fills dt when it is 0. Throws ValidationError.
SimParams finalize(SimParams p, CflPolicy policy = CflPolicy::enforce);

/// Unit-system cavity of side 1 with eps = mu = 1 (c = 1), n cells per axis.
SimParams unit_cavity(Index n, Precision precision = Precision::f64, double cfl_factor = 0.5);

struct InitialCondition {
    enum class Kind { zero, random_interior, mode };

    Kind kind = Kind::zero;
    std::uint64_t seed = 0;
    double amplitude = 1.0;
    int m = 1, n = 1, p = 0;

    static InitialCondition zero() { return {}; }
    static InitialCondition random(std::uint64_t seed, double amplitude = 1.0) {
        return {Kind::random_interior, seed, amplitude};
    }
    static InitialCondition cavity_mode(int m, int n, int p, double amplitude = 1.0) {
        return {Kind::mode, 0, amplitude, m, n, p};
    }
};

std::string_view to_string(InitialCondition::Kind k);

template <typename T>
struct FieldSet {
    Shape3 cells{0, 0, 0};
    std::array<Array3<T>, 6> arrays;

    Array3<T>& operator[](Component c) { return arrays[static_cast<int>(c)]; }
    const Array3<T>& operator[](Component c) const { return arrays[static_cast<int>(c)]; }

    Array3<T>& ex() { return (*this)[Component::ex]; }
    Array3<T>& ey() { return (*this)[Component::ey]; }
    Array3<T>& ez() { return (*this)[Component::ez]; }
    Array3<T>& hx() { return (*this)[Component::hx]; }
    Array3<T>& hy() { return (*this)[Component::hy]; }
    Array3<T>& hz() { return (*this)[Component::hz]; }

    friend bool operator==(const FieldSet&, const FieldSet&) = default;
};

using AnyFieldSet = std::variant<FieldSet<float>, FieldSet<double>>;

/// Allocates zeroed staggered arrays for `cells`. Throws ValidationError on
/// size overflow, naming the offending extent.
template <typename T>
FieldSet<T> allocate_fields(const Shape3& cells);

template <typename T>
FieldSet<T> make_fields(const SimParams& params, const InitialCondition& init);

AnyFieldSet make_any_fields(const SimParams& params, const InitialCondition& init);

/// Collocated-as-stored electromagnetic energy, accumulated in double.
template <typename T>
double energy(const FieldSet<T>& fields, const SimParams& params);

template <typename T>
T probe(const FieldSet<T>& fields, Component c, Index i, Index j, Index k);

/// Largest |value| over all six arrays; NaN if any value is non-finite.
template <typename T>
double max_norm(const FieldSet<T>& fields);

/// Sets tangential E on all six walls to +0.
template <typename T>
void apply_pec(FieldSet<T>& fields);

/// True iff every tangential E wall value is exactly +0 or -0.
template <typename T>
bool pec_walls_zero(const FieldSet<T>& fields);

} // namespace fdtd
