#include <doctest.h>

#include <cmath>

#include "fdtd/error.hpp"
#include "fdtd/exec.hpp"
#include "fdtd/schedule.hpp"
#include "oracles.hpp"

using namespace fdtd;

namespace {

SimParams grid(Index nx, Index ny, Index nz, Precision p) {
    SimParams s;
    s.nx = nx;
    s.ny = ny;
    s.nz = nz;
    s.dx = 1e-3;
    s.dy = 1.3e-3;
    s.dz = 0.7e-3;
    s.precision = p;
    return finalize(s);
}

template <typename T>
void check_pipeline(const SimParams& p, std::string_view pipeline, const TargetDescriptor& target, int steps) {
    const auto kernel = exec::lower_pipeline(p, pipeline, target);
    auto got = oracle::random_fields<T>(p, 11);
    auto want = got;
    exec::run(kernel, got, steps);
    for (int s = 0; s < steps; ++s) oracle::yee_step(want, p);
    INFO("pipeline=" << pipeline << " target=" << target.name << " cells=" << to_string(p.cells()));
    CHECK(oracle::first_difference(got, want) == "");
}

} // namespace

TEST_CASE("reference_step agrees bit for bit with the independent stepper") {
    for (auto cells : {Shape3{4, 4, 4}, Shape3{5, 7, 3}, Shape3{9, 2, 6}}) {
        const auto p64 = grid(cells[0], cells[1], cells[2], Precision::f64);
        auto a = oracle::random_fields<double>(p64, 3);
        auto b = a;
        for (int s = 0; s < 4; ++s) {
            exec::reference_step(a, p64);
            oracle::yee_step(b, p64);
        }
        CHECK(oracle::first_difference(a, b) == "");

        const auto p32 = grid(cells[0], cells[1], cells[2], Precision::f32);
        auto c = oracle::random_fields<float>(p32, 3);
        auto d = c;
        for (int s = 0; s < 4; ++s) {
            exec::reference_step(c, p32);
            oracle::yee_step(d, p32);
        }
        CHECK(oracle::first_difference(c, d) == "");
    }
}

TEST_CASE("every preset is bit-exact on every target") {
    const std::vector<Shape3> shapes{{8, 8, 8}, {5, 6, 37}, {3, 11, 17}, {6, 4, 64}};
    for (const char* t : {"avx512", "avx2", "sve-512", "scalar"}) {
        const auto target = target_by_name(t);
        for (auto pipe : sched::kPipelineNames)
            for (const auto& s : shapes) {
                check_pipeline<double>(grid(s[0], s[1], s[2], Precision::f64), pipe, target, 3);
                check_pipeline<float>(grid(s[0], s[1], s[2], Precision::f32), pipe, target, 3);
            }
    }
}

TEST_CASE("hand-written schedules on other axes stay exact") {
    const auto p = grid(7, 9, 10, Precision::f64);
    const char* scripts[] = {
        "%a, %b = tile %curl_hx axis=i size=3\n",
        "%a, %b = tile %curl_ez axis=j size=4\n%c, %d = tile %a axis=k size=5\n",
        "%a, %la = tile %curl_hx axis=k size=4\n%b, %lb = tile %curl_hy axis=k size=4\n%f = fuse %la %lb\n",
        "%a, %la = tile %curl_ex axis=i size=2\n%b, %lb = tile %curl_ey axis=i size=2\n%f = fuse %la %lb\n"
        "%c, %lc = tile %curl_ez axis=i size=2\n%g = fuse %f %lc\n",
        "plan-inplace\n%a, %la = tile %curl_hz axis=k size=8\nvectorize %la width=4\n",
        "plan-inplace\n%a, %la = tile %curl_hz axis=k size=8\nvectorize %la scalable\n",
        "%a, %la = tile %bc_e_xlo_ey axis=k size=3\n",
    };
    for (const char* text : scripts) {
        INFO(std::string(text));
        const auto sp = sched::apply_script(ir::build_step_program(p), sched::parse_script(text));
        const auto kernel = exec::lower(sp, target_by_name("avx2"));
        auto got = oracle::random_fields<double>(p, 5);
        auto want = got;
        exec::run(kernel, got, 2);
        for (int s = 0; s < 2; ++s) oracle::yee_step(want, p);
        CHECK(oracle::first_difference(got, want) == "");
    }
}

TEST_CASE("in-place execution matches the copy-on-write interpretation") {
    std::mt19937_64 rng(2024);
    int fallbacks = 0;
    for (int n = 0; n < 60; ++n) {
        const auto prog = oracle::random_program(rng);
        const bool plan = n % 2 == 0;
        auto sp = plan ? sched::apply_script(prog, sched::parse_script("plan-inplace\n")) : sched::unscheduled(prog);
        fallbacks += static_cast<int>(sp.plan.fallbacks.size());
        const auto kernel = exec::lower(sp, target_by_name("scalar"));
        auto inputs = oracle::random_inputs(prog, n);
        const auto want = oracle::interpret_cow(prog, inputs);
        exec::run_buffers(kernel, inputs, 1);
        for (std::size_t v = 0; v < want.size(); ++v) {
            INFO("program " << n << " input " << v << "\n" << ir::print_ir(prog));
            CHECK(oracle::bit_equal(inputs[v], want[v]));
        }
    }
    CHECK(fallbacks > 0);
}

TEST_CASE("run reports timing statistics") {
    const auto p = grid(8, 8, 8, Precision::f64);
    auto f = make_fields<double>(p, InitialCondition::random(1));
    const auto st = exec::run(exec::lower_pipeline(p, "tile+vec+fuse"), f, 20);
    CHECK(st.steps == 20);
    CHECK(st.std_step_seconds >= 0.0);
    CHECK(st.mean_step_seconds > 0.0);
    CHECK(st.cells_per_second > 0.0);

    const auto none = exec::run(exec::lower_pipeline(p, "none"), f, 0);
    CHECK(none.steps == 0);
    CHECK(none.wall_seconds == 0.0);
}

TEST_CASE("run rejects mismatched inputs") {
    const auto p = grid(6, 6, 6, Precision::f64);
    const auto kernel = exec::lower_pipeline(p, "none");
    auto f32 = make_fields<float>(p, InitialCondition::zero());
    CHECK_THROWS_AS(exec::run(kernel, f32, 1), ValidationError);
    auto other = make_fields<double>(grid(6, 6, 7, Precision::f64), InitialCondition::zero());
    CHECK_THROWS_AS(exec::run(kernel, other, 1), ValidationError);
    auto ok = make_fields<double>(p, InitialCondition::zero());
    CHECK_THROWS_AS(exec::run(kernel, ok, -1), ValidationError);
}

TEST_CASE("dt above the CFL limit is caught by the stability check") {
    SimParams p = unit_cavity(12);
    p.dt = 1.1 * cfl_limit(p);
    p = finalize(p, CflPolicy::allow_unstable);
    auto f = make_fields<double>(p, InitialCondition::random(4));
    const auto kernel = exec::lower_pipeline(p, "tile+vec+fuse");
    try {
        exec::run(kernel, f, 5000);
        FAIL("no instability reported");
    } catch (const InstabilityError& e) {
        CHECK(e.step() > 0);
        CHECK(e.step() % 100 == 0);
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("stable runs keep the synchronized energy") {
    const auto p = unit_cavity(10);
    auto f = make_fields<double>(p, InitialCondition::random(9));
    const double e0 = exec::synchronized_energy(f, p);
    exec::run(exec::lower_pipeline(p, "tile+vec"), f, 300);
    const double e1 = exec::synchronized_energy(f, p);
    CHECK(std::abs(e1 - e0) / e0 < 1e-10);
    CHECK(pec_walls_zero(f));
}

TEST_CASE("lowering rejects unresolved buffers") {
    const auto p = grid(4, 4, 4, Precision::f64);
    auto sp = sched::unscheduled(ir::build_step_program(p));
    sp.plan.buffer_of[sp.program.outputs[0]] = -1;
    CHECK_THROWS_AS(exec::lower(sp, target_by_name("scalar")), LoweringError);
}

TEST_CASE("kernel dumps are deterministic and resolve scalable widths") {
    const auto p = grid(8, 8, 32, Precision::f32);
    const auto a = exec::lower_pipeline(p, "tile+vec+fuse", target_by_name("sve-512")).dump();
    const auto b = exec::lower_pipeline(p, "tile+vec+fuse", target_by_name("sve-512")).dump();
    CHECK(a == b);
    CHECK(a.find("width=16") != std::string::npos);
    const auto c = exec::lower_pipeline(p, "tile+vec+fuse", target_by_name("avx2")).dump();
    CHECK(c.find("width=8") != std::string::npos);
    const auto none = exec::lower_pipeline(p, "none", target_by_name("avx2")).dump();
    CHECK(none.find("width=") == std::string::npos);
}
