#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "spectrum.hpp"

using namespace fdtd;

TEST_CASE("peak finder recovers a synthetic tone") {
    const double dt = 0.013, w = 5.3;
    std::vector<double> s(4096);
    for (std::size_t t = 0; t < s.size(); ++t) s[t] = std::cos(w * (t + 1) * dt) + 0.1;
    CHECK(oracle::peak_omega(s, dt) == doctest::Approx(w).epsilon(1e-3));
}

TEST_CASE("TM110 resonance of a unit cavity") {
    const auto p = unit_cavity(16);
    const double want = oracle::cavity_omega(1.0, 1.0, 1.0, 1.0, 1, 1, 0);
    CHECK(want == doctest::Approx(std::numbers::pi * std::sqrt(2.0)).epsilon(1e-15));
    for (const char* pipe : {"none", "tile+vec+fuse"}) {
        const auto samples = oracle::centre_probe(p, pipe, 4096, 1, 1, 0);
        const double got = oracle::peak_omega(samples, p.dt);
        INFO("pipeline " << pipe << " omega " << got << " want " << want);
        CHECK(std::abs(got - want) / want < 0.02);
    }
}

TEST_CASE("TM120 in a non-cubic cavity") {
    SimParams s;
    s.nx = 16;
    s.ny = 24;
    s.nz = 8;
    s.dx = 1.0 / 16;
    s.dy = 1.5 / 24;
    s.dz = 0.5 / 8;
    s.eps = s.mu = 1.0;
    s = finalize(s);
    const double want = oracle::cavity_omega(1.0, 1.0, 1.5, 0.5, 1, 2, 0);
    // The centre is a node of the two-lobe profile along y.
    auto f = make_fields<double>(s, InitialCondition::cavity_mode(1, 2, 0));
    const auto kernel = exec::lower_pipeline(s, "tile+vec");
    std::vector<double> off;
    for (int t = 0; t < 4096; ++t) {
        exec::run(kernel, f, 1, {.check_interval = 0});
        off.push_back(probe(f, Component::ez, 8, 6, 4));
    }
    CHECK(std::abs(oracle::peak_omega(off, s.dt) - want) / want < 0.02);
}
