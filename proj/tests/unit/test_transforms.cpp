#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "fdtd/error.hpp"
#include "fdtd/exec.hpp"
#include "fdtd/schedule.hpp"
#include "oracles.hpp"

using namespace fdtd;
using namespace fdtd::sched;

namespace {

SimParams cube(Index n, Precision p = Precision::f64) {
    SimParams s;
    s.nx = s.ny = s.nz = n;
    s.precision = p;
    return finalize(s);
}

// Single-op program over a box of the given extents.
ir::StepProgram box_program(Shape3 extents) {
    ir::ProgramBuilder b(extents, Precision::f64);
    const auto x = b.add_input("x", extents);
    ir::Payload pl;
    pl.add(pl.out(), pl.out());
    b.add_curl("op", ir::OpGroup::other, Box::of_shape(extents), {{x, {0, 0, 0}, ir::AccessRole::write}}, pl, "x1");
    return b.finish();
}

// Multiset of executed points, built from the op domains alone.
std::vector<PointVisit> expected_points(const ir::StepProgram& p) {
    std::vector<PointVisit> out;
    for (const auto& op : p.ops) {
        const Box& d = ir::op_domain(op);
        for (Index i = d.lo[0]; i < d.hi[0]; ++i)
            for (Index j = d.lo[1]; j < d.hi[1]; ++j)
                for (Index k = d.lo[2]; k < d.hi[2]; ++k) out.push_back({ir::op_id(op), i, j, k});
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<PointVisit> executed_points(const ScheduledProgram& sp) {
    auto v = enumerate_points(sp);
    std::sort(v.begin(), v.end());
    return v;
}

std::string script_error(const ir::StepProgram& p, const std::string& text) {
    try {
        apply_script(p, parse_script(text));
    } catch (const ScriptError& e) {
        return e.what();
    }
    return {};
}

std::vector<Index> tile_sizes(const ScheduleNode& loop, const Box& dom) {
    std::vector<Index> out;
    for (Index t = loop.tile_begin; t < loop.tile_end; ++t) {
        const auto [a, b] = tile_range(dom.lo[loop.axis], dom.hi[loop.axis], loop.size, t);
        out.push_back(b - a);
    }
    return out;
}

} // namespace

TEST_CASE("tile examples") {
    {
        const auto p = box_program({2, 2, 64});
        const auto sp = apply_script(p, parse_script("%a, %l = tile %op axis=k size=16\n"));
        REQUIRE(sp.forest.size() == 1);
        CHECK(sp.forest[0].trip() == 4);
        CHECK(tile_sizes(sp.forest[0], ir::op_domain(p.ops[0])) == std::vector<Index>{16, 16, 16, 16});
    }
    {
        const auto p = box_program({10, 2, 2});
        const auto sp = apply_script(p, parse_script("%a, %l = tile %op axis=i size=4\n"));
        CHECK(tile_sizes(sp.forest[0], ir::op_domain(p.ops[0])) == std::vector<Index>{4, 4, 2});
        std::vector<Index> covered;
        for (const auto& v : enumerate_points(sp))
            if (v.j == 0 && v.k == 0) covered.push_back(v.i);
        CHECK(covered == std::vector<Index>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    }
    {
        const auto p = ir::build_step_program(cube(64, Precision::f32));
        const auto sp = apply_script(p, parse_script(preset_script("tile", Precision::f32, target_by_name("avx512"))));
        for (const auto& n : sp.forest)
            if (n.kind == ScheduleNode::Kind::loop) CHECK(n.size == 16);
    }
    const auto p = box_program({4, 4, 4});
    CHECK(script_error(p, "%a, %l = tile %op axis=k size=0\n").find("size") != std::string::npos);
    CHECK(script_error(p, "%a, %l = tile %op axis=k size=2\n%b, %m = tile %op axis=k size=2\n")
              .find("dangling handle %op") != std::string::npos);
}

TEST_CASE("tiling preserves the point multiset on random (extent, tile) pairs") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<Index> ext(1, 40), tile(1, 48);
    std::uniform_int_distribution<int> axis(0, 2);
    for (int t = 0; t < 200; ++t) {
        Shape3 e{2, 3, 2};
        const int a = axis(rng);
        e[a] = ext(rng);
        const Index s = tile(rng);
        const auto p = box_program(e);
        const std::string ax = std::string(1, "ijk"[a]);
        const auto sp = apply_script(p, parse_script("%a, %l = tile %op axis=" + ax + " size=" + std::to_string(s) + "\n"));
        INFO("extent " << e[a] << " tile " << s);
        CHECK(executed_points(sp) == expected_points(p));
        CHECK(check_partition(sp).empty());
        CHECK(sp.forest[0].trip() == (e[a] + s - 1) / s);
    }
}

TEST_CASE("random well-formed scripts keep the partition and the results") {
    std::mt19937_64 rng(31);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const char* h[] = {"hx", "hy", "hz"};
    const char* e[] = {"ex", "ey", "ez"};
    int fused = 0, vectorized = 0;
    for (int t = 0; t < 40; ++t) {
        const auto params = [&] {
            SimParams s;
            s.nx = pick(2, 9);
            s.ny = pick(2, 9);
            s.nz = pick(2, 20);
            return finalize(s);
        }();
        const auto prog = ir::build_step_program(params);
        std::string text;
        std::vector<std::string> vec_loops;
        for (const auto* group : {h, e}) {
            const int ax = pick(0, 2);
            const int size = pick(1, 12);
            const bool fuse = pick(0, 1) == 1;
            for (int c = 0; c < 3; ++c) {
                const std::string a = std::string(1, "ijk"[pick(0, 2)]);
                text += "%" + std::string(group[c]) + ", %l" + group[c] + " = tile %curl_" + group[c] + " axis=" +
                        (fuse ? std::string(1, "ijk"[ax]) : a) + " size=" + std::to_string(size) + "\n";
            }
            if (fuse) {
                text += "%f" + std::string(group[0]) + " = fuse %l" + group[0] + " %l" + group[1] + "\n";
                text += "%g" + std::string(group[0]) + " = fuse %f" + group[0] + " %l" + group[2] + "\n";
                if (ax == 2) vec_loops.push_back("%g" + std::string(group[0]));
            }
        }
        if (pick(0, 1) == 1) {
            text += "plan-inplace\n";
            for (const auto& l : vec_loops) text += "vectorize " + l + " width=" + std::to_string(1 << pick(0, 4)) + "\n";
        }
        INFO(text);
        ScheduledProgram sp;
        try {
            sp = apply_script(prog, parse_script(text));
        } catch (const ScriptError& err) {
            // Structure mismatches are legitimate outcomes of random sizes.
            CHECK(std::string(err.what()).find("structure mismatch") != std::string::npos);
            continue;
        }
        fused += text.find("fuse") != std::string::npos;
        vectorized += text.find("vectorize") != std::string::npos;
        CHECK(check_partition(sp).empty());
        CHECK(executed_points(sp) == expected_points(prog));

        const auto kernel = exec::lower(sp, target_by_name("avx512"));
        auto got = oracle::random_fields<double>(params, t);
        auto want = got;
        exec::run(kernel, got, 2);
        for (int s = 0; s < 2; ++s) oracle::yee_step(want, params);
        CHECK(oracle::first_difference(got, want) == "");
    }
    CHECK(fused > 0);
    CHECK(vectorized > 0);
}

TEST_CASE("fusing the H loops") {
    const auto p = ir::build_step_program(cube(8));
    const auto sp = apply_script(p, parse_script("%a, %la = tile %curl_hx axis=k size=4\n"
                                                 "%b, %lb = tile %curl_hy axis=k size=4\n"
                                                 "%f = fuse %la %lb\n"));
    REQUIRE(sp.forest[0].kind == ScheduleNode::Kind::loop);
    CHECK(ops_under(sp.forest[0]) == std::vector<ir::OpId>{0, 1});
    CHECK(sp.forest.size() == p.ops.size() - 1);
    CHECK(check_partition(sp).empty());
}

TEST_CASE("structure mismatch") {
    ir::ProgramBuilder b({2, 2, 64}, Precision::f64);
    const auto x = b.add_input("x", {2, 2, 64});
    const auto y = b.add_input("y", {2, 2, 64});
    ir::Payload pl;
    pl.add(pl.out(), pl.out());
    b.add_curl("a", ir::OpGroup::other, Box::of_shape({2, 2, 64}), {{x, {0, 0, 0}, ir::AccessRole::write}}, pl, "x1");
    b.add_curl("b", ir::OpGroup::other, Box::of_shape({2, 2, 63}), {{y, {0, 0, 0}, ir::AccessRole::write}}, pl, "y1");
    const auto p = b.finish();

    const auto err = script_error(p, "%a, %la = tile %a axis=k size=7\n%b, %lb = tile %b axis=k size=7\n%f = fuse %la %lb\n");
    CHECK(err.find("structure mismatch") != std::string::npos);
    CHECK(err.find("directive") == std::string::npos);
    CHECK(err.find("line 3") != std::string::npos);

    CHECK(script_error(p, "%a, %la = tile %a axis=k size=8\n%b, %lb = tile %b axis=k size=4\n%f = fuse %la %lb\n")
              .find("structure mismatch") != std::string::npos);
    CHECK(script_error(p, "%a, %la = tile %a axis=k size=8\n%b, %lb = tile %b axis=j size=8\n%f = fuse %la %lb\n")
              .find("structure mismatch") != std::string::npos);
    // Same aligned tile grid: the partial last tile is clipped per op.
    CHECK(script_error(p, "%a, %la = tile %a axis=k size=16\n%b, %lb = tile %b axis=k size=16\n%f = fuse %la %lb\n") == "");
}

TEST_CASE("fusion verdicts match the access-intersection oracle") {
    std::mt19937_64 rng(123);
    oracle::ProgramShape shape;
    shape.min_ops = 2;
    int legal = 0, illegal = 0;
    for (int t = 0; t < 100; ++t) {
        const auto prog = oracle::random_program(rng, shape);
        const int n = static_cast<int>(prog.ops.size());
        const int a = std::uniform_int_distribution<int>(0, n - 2)(rng);
        const int b = std::uniform_int_distribution<int>(a + 1, n - 1)(rng);
        bool want = true;
        for (int x = a; x < b; ++x) want &= !oracle::conflicts(prog, x, b);

        const std::string text = "%x, %la = tile %op" + std::to_string(a) + " axis=k size=16\n" + "%y, %lb = tile %op" +
                                 std::to_string(b) + " axis=k size=16\n" + "%f = fuse %la %lb\n";
        const auto err = script_error(prog, text);
        INFO(text << ir::print_ir(prog) << err);
        CHECK((err.empty()) == want);
        if (!want) CHECK(err.find("not independent") != std::string::npos);
        (want ? legal : illegal)++;
    }
    CHECK(legal > 0);
    CHECK(illegal > 10);
}

TEST_CASE("curl_hx with curl_ex on an 8^3 program") {
    const auto p = ir::build_step_program(cube(8));
    const int hx = *p.find_op("curl_hx"), ex = *p.find_op("curl_ex");
    bool want = true;
    for (int x = hx; x < ex; ++x) want &= !oracle::conflicts(p, x, ex);
    CHECK_FALSE(want);
    const auto err = script_error(p, "%a, %la = tile %curl_hx axis=k size=8\n%b, %lb = tile %curl_ex axis=k size=8\n"
                                     "%f = fuse %la %lb\n");
    CHECK(err.find("not independent") != std::string::npos);

    // The three H updates are mutually independent.
    for (const char* other : {"curl_hy", "curl_hz"}) CHECK_FALSE(oracle::conflicts(p, hx, *p.find_op(other)));
}

TEST_CASE("plan_inplace on the canonical program") {
    const auto p = ir::build_step_program(cube(6));
    for (auto pipe : kPipelineNames) {
        const auto sp = apply_script(p, parse_script(preset_script(pipe, Precision::f64, target_by_name("avx512"))));
        CHECK(sp.plan.buffer_count == 6);
        CHECK(sp.plan.extra_buffers == 0);
        CHECK(sp.plan.copies.empty());
        CHECK(sp.plan.writeback.empty());
        for (const auto& v : p.values) {
            CHECK(sp.plan.buffer_of[v.id] >= 0);
            CHECK(sp.plan.buffer_of[v.id] == sp.plan.buffer_of[p.chain_root(v.id)]);
        }
    }
}

TEST_CASE("stale read forces an extra buffer") {
    ir::ProgramBuilder b({4, 4, 4}, Precision::f64);
    const auto ex = b.add_input("ex", {4, 4, 4});
    const auto y = b.add_input("y", {4, 4, 4});
    b.add_constant("c", 0.5);
    ir::Payload inc;
    inc.add(inc.out(), inc.mul(inc.constant(0), inc.read(1)));
    b.add_curl("upd", ir::OpGroup::other, Box::of_shape({4, 4, 4}),
               {{ex, {0, 0, 0}, ir::AccessRole::write}, {y, {0, 0, 0}, ir::AccessRole::read}}, inc, "ex1");
    b.add_curl("stale", ir::OpGroup::other, Box::of_shape({4, 4, 4}),
               {{y, {0, 0, 0}, ir::AccessRole::write}, {ex, {0, 0, 0}, ir::AccessRole::read}}, inc, "y1");
    const auto p = b.finish();
    const auto sp = apply_script(p, parse_script("plan-inplace\n"));
    CHECK(sp.plan.extra_buffers >= 1);
    CHECK_FALSE(sp.plan.fallbacks.empty());

    auto inputs = oracle::random_inputs(p, 1);
    const auto want = oracle::interpret_cow(p, inputs);
    exec::run_buffers(exec::lower(sp, target_by_name("scalar")), inputs, 1);
    CHECK(oracle::bit_equal(inputs[0], want[0]));
    CHECK(oracle::bit_equal(inputs[1], want[1]));
}

TEST_CASE("in-place plans equal copy-on-write execution on random programs") {
    std::mt19937_64 rng(77);
    int extra = 0;
    for (int t = 0; t < 100; ++t) {
        const auto prog = oracle::random_program(rng);
        std::string text;
        for (std::size_t o = 0; o < prog.ops.size(); ++o)
            if (rng() % 2) text += "%t" + std::to_string(o) + ", %l" + std::to_string(o) + " = tile %op" + std::to_string(o) +
                                   " axis=" + std::string(1, "ijk"[rng() % 3]) + " size=" + std::to_string(1 + rng() % 5) + "\n";
        text += "plan-inplace\n";
        const auto sp = apply_script(prog, parse_script(text));
        extra += sp.plan.extra_buffers;
        for (const auto& v : prog.values) CHECK(sp.plan.buffer_of[v.id] >= 0);

        auto inputs = oracle::random_inputs(prog, t);
        const auto want = oracle::interpret_cow(prog, inputs);
        exec::run_buffers(exec::lower(sp, target_by_name("scalar")), inputs, 1);
        for (std::size_t v = 0; v < want.size(); ++v) {
            INFO(text << ir::print_ir(prog));
            CHECK(oracle::bit_equal(inputs[v], want[v]));
        }
    }
    CHECK(extra > 0);
}

TEST_CASE("vectorize rules") {
    const auto p = ir::build_step_program(cube(8));
    const std::string tile = "%a, %la = tile %curl_hx axis=k size=8\n";
    CHECK(script_error(p, tile + "vectorize %la width=8\n").find("plan-inplace") != std::string::npos);
    CHECK(script_error(p, tile + "plan-inplace\nvectorize %la width=6\n").find("power of two") != std::string::npos);
    CHECK(script_error(p, tile + "plan-inplace\nvectorize %la width=128\n").find("power of two") != std::string::npos);
    CHECK(script_error(p, "%a, %la = tile %curl_hx axis=j size=4\nplan-inplace\nvectorize %la width=4\n")
              .find("only k loops") != std::string::npos);
    CHECK(script_error(p, "%a, %la = tile %curl_hx axis=k size=4\n%b, %lb = tile %a axis=i size=2\nplan-inplace\n"
                          "vectorize %lb width=4\n")
              .find("only k loops") != std::string::npos);
    CHECK(script_error(p, "%a, %la = tile %curl_hx axis=i size=4\n%b, %lb = tile %a axis=k size=2\nplan-inplace\n"
                          "vectorize %la width=4\n")
              .find("only k loops") != std::string::npos);
    CHECK(script_error(p, tile + "plan-inplace\nvectorize %la width=8\nvectorize %la width=8\n").find("already") !=
          std::string::npos);
    CHECK(script_error(p, tile + "plan-inplace\nplan-inplace\n").find("only once") != std::string::npos);
    CHECK(script_error(p, tile + "plan-inplace\nvectorize %la width=8\n%b, %lb = tile %a axis=i size=2\n")
              .find("vectorized") != std::string::npos);
    CHECK(script_error(p, tile + "plan-inplace\nvectorize %la scalable\n") == "");
}

TEST_CASE("f64 width 8 over extent 10 leaves a scalar remainder and matches scalar execution") {
    SimParams s;
    s.nx = 4;
    s.ny = 4;
    s.nz = 10;
    s = finalize(s);
    const auto p = ir::build_step_program(s);
    const auto sp = apply_script(p, parse_script("%a, %la = tile %curl_ez axis=k size=16\nplan-inplace\n"
                                                 "vectorize %la width=8\n"));
    const auto kernel = exec::lower(sp, target_by_name("avx512"));
    const auto dump = kernel.dump();
    CHECK(dump.find("width=8") != std::string::npos);
    const Box& dom = ir::op_domain(p.op(*p.find_op("curl_ez")));
    CHECK(dom.extent(2) == 10);
    CHECK(dom.extent(2) / 8 == 1);
    CHECK(dom.extent(2) % 8 == 2);

    auto a = oracle::random_fields<double>(s, 4);
    auto b = a;
    exec::run(kernel, a, 3);
    exec::run(exec::lower_pipeline(s, "none", target_by_name("scalar")), b, 3);
    CHECK(oracle::first_difference(a, b) == "");
}

TEST_CASE("empty script equals the unscheduled program") {
    const auto p = ir::build_step_program(cube(5));
    const auto a = apply_script(p, parse_script(""));
    const auto b = unscheduled(p);
    REQUIRE(a.forest.size() == b.forest.size());
    for (std::size_t n = 0; n < a.forest.size(); ++n) {
        CHECK(a.forest[n].kind == ScheduleNode::Kind::op);
        CHECK(a.forest[n].op == b.forest[n].op);
    }
    CHECK(a.plan.buffer_count == 6);
    CHECK(a.plan.extra_buffers == 0);
}

TEST_CASE("full pipeline shape") {
    const auto p = ir::build_step_program(cube(64, Precision::f32));
    const auto sp = apply_script(p, parse_script(preset_script("tile+vec+fuse", Precision::f32, target_by_name("avx512"))));
    int fused = 0;
    for (const auto& n : sp.forest)
        if (n.kind == ScheduleNode::Kind::loop) {
            ++fused;
            CHECK(n.children.size() == 3);
            CHECK(n.vector_width == 16);
            CHECK(n.size == 16);
            CHECK(n.axis == 2);
        }
    CHECK(fused == 2);
    CHECK(sp.forest.size() == 2 + 6 + 12);

    const auto kernel = exec::lower(sp, target_by_name("avx512"));
    int vec_loops = 0, boundary = 0;
    for (const auto& st : kernel.stages) {
        if (st.kind == exec::StageKind::loop && st.fused() && st.width == 16) ++vec_loops;
        if (st.kind == exec::StageKind::boundary) ++boundary;
    }
    CHECK(vec_loops == 2);
    CHECK(boundary == 12);

    const auto scal = apply_script(p, parse_script(preset_script("tile+vec+fuse", Precision::f32, target_by_name("sve-512"))));
    for (const auto& n : scal.forest)
        if (n.kind == ScheduleNode::Kind::loop) CHECK(n.scalable);
}

TEST_CASE("fused loop body order and handle threading") {
    const auto p = ir::build_step_program(cube(8));
    Scheduler s(p);
    auto [hz, lz] = s.tile(s.op_handle("curl_hz"), 2, 4);
    auto [hx, lx] = s.tile(s.op_handle("curl_hx"), 2, 4);
    const auto f = s.fuse_siblings(lz, lx);
    CHECK(s.live(f));
    CHECK_FALSE(s.live(lz));
    CHECK_FALSE(s.live(lx));
    CHECK(s.live(hz));
    REQUIRE(s.forest()[0].kind == ScheduleNode::Kind::loop);
    CHECK(ops_under(s.forest()[0]) == std::vector<ir::OpId>{*p.find_op("curl_hz"), *p.find_op("curl_hx")});
    CHECK_THROWS_AS(s.fuse_siblings(lz, f), ScriptError);
    CHECK(check_partition(s.finish()).empty());
}
