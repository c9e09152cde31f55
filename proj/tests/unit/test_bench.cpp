#include <doctest.h>

#include <map>
#include <sstream>

#include "fdtd/bench.hpp"
#include "fdtd/error.hpp"

using namespace fdtd;
using namespace fdtd::bench;

namespace {

// Minimal RFC-4180 reader, kept separate from the writer under test.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows(1, std::vector<std::string>(1));
    bool quoted = false;
    for (std::size_t n = 0; n < text.size(); ++n) {
        const char c = text[n];
        auto& field = rows.back().back();
        if (quoted) {
            if (c == '"' && n + 1 < text.size() && text[n + 1] == '"') field += '"', ++n;
            else if (c == '"') quoted = false;
            else field += c;
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            rows.back().emplace_back();
        } else if (c == '\r' && n + 1 < text.size() && text[n + 1] == '\n') {
            ++n;
            rows.emplace_back(1);
        } else {
            field += c;
        }
    }
    if (rows.back().size() == 1 && rows.back()[0].empty()) rows.pop_back();
    return rows;
}

BenchRecord rec(Index n, Precision p, std::string pipe, double mean) {
    BenchRecord r;
    r.size = n;
    r.precision = p;
    r.pipeline = std::move(pipe);
    r.mean_s = mean;
    r.steps = 10;
    r.repeats = 3;
    return r;
}

BenchConfig tiny() {
    BenchConfig c;
    c.sizes = {8};
    c.steps = 10;
    c.repeats = 3;
    c.warmup = 2;
    c.pipelines = {"none"};
    return c;
}

} // namespace

TEST_CASE("small benchmark run") {
    const auto c = tiny();
    int calls = 0;
    const auto records = run_benchmark(c, [&](const BenchRecord&) { ++calls; });
    REQUIRE(records.size() == 2);
    CHECK(calls == 2);
    CHECK(records[0].precision == Precision::f32);
    CHECK(records[1].precision == Precision::f64);
    for (const auto& r : records) {
        CHECK(r.size == 8);
        CHECK(r.pipeline == "none");
        CHECK(r.steps == 10);
        CHECK(r.repeats == 3);
        CHECK(r.std_s >= 0.0);
        CHECK(r.mean_s > 0.0);
        CHECK(r.cells_per_s == doctest::Approx(512.0 * 10 / r.mean_s));
        REQUIRE(r.speedup);
        CHECK(*r.speedup == 1.0);
        CHECK(r.baseline == "none");
        CHECK(r.notes.rfind("energy_drift=", 0) == 0);
    }
    CHECK(records[1].energy_drift < 1e-10);
    CHECK(records[0].energy_drift < 1e-4);
}

TEST_CASE("matrix order and determinism") {
    auto c = tiny();
    c.sizes = {4, 6};
    c.precisions = {Precision::f64};
    c.pipelines = {"none", "tile+fuse+vec"};
    const auto a = run_benchmark(c);
    const auto b = run_benchmark(c);
    REQUIRE(a.size() == 4);
    REQUIRE(b.size() == a.size());
    CHECK(a[1].pipeline == "tile+vec+fuse");
    CHECK(a[2].size == 6);
    for (std::size_t n = 0; n < a.size(); ++n) {
        CHECK(a[n].size == b[n].size);
        CHECK(a[n].pipeline == b[n].pipeline);
    }
    CHECK(config_hash(c) == config_hash(c));
    auto d = c;
    d.seed = 2;
    CHECK(config_hash(d) != config_hash(c));
    auto e = c;
    e.pipelines = {"none", "tile+vec+fuse"};
    CHECK(config_hash(e) == config_hash(c));
    CHECK(config_hash(c).size() == 16);
}

TEST_CASE("speedup table") {
    const std::vector<BenchRecord> rs{rec(64, Precision::f32, "none", 7.69), rec(64, Precision::f32, "tile+vec+fuse", 1.0),
                                      rec(64, Precision::f64, "none", 2.0), rec(64, Precision::f64, "tile", 2.0)};
    const auto t = speedup_table(rs, {});
    REQUIRE(t.size() == 4);
    CHECK(t[1].speedup == doctest::Approx(7.69).epsilon(1e-12));
    CHECK(t[1].baseline_mean_s == 7.69);
    CHECK(t[0].speedup == 1.0);
    CHECK(t[3].speedup == 1.0);

    const auto cross = speedup_table(rs, {"none", Precision::f64});
    CHECK(cross[1].speedup == doctest::Approx(2.0));
    CHECK(cross[0].speedup == doctest::Approx(2.0 / 7.69));

    auto copy = rs;
    attach_speedups(copy, {"none", Precision::f64});
    CHECK(copy[0].baseline == "none/f64");
    REQUIRE(copy[1].speedup);
    CHECK(*copy[1].speedup == doctest::Approx(2.0));
}

TEST_CASE("missing baseline names the key") {
    const std::vector<BenchRecord> rs{rec(32, Precision::f64, "none", 1.0), rec(64, Precision::f64, "tile", 1.0)};
    try {
        speedup_table(rs, {});
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()) == "missing baseline 'none' for size=64 precision=f64");
    }
    CHECK_THROWS_AS(speedup_table(rs, {"tile", std::nullopt}), ValidationError);
}

TEST_CASE("csv quoting and layout") {
    CHECK(csv_quote("plain") == "plain");
    CHECK(csv_quote("a,b") == "\"a,b\"");
    CHECK(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_quote("two\nlines") == "\"two\nlines\"");
    CHECK(csv_quote("") == "");

    std::vector<BenchRecord> rs{rec(16, Precision::f64, "none", 0.5), rec(16, Precision::f64, "tile+vec", 0.125)};
    rs[1].notes = "l1=12,llc=\"3\"";
    rs[0].std_s = 0.01;
    attach_speedups(rs, {});
    std::ostringstream os;
    write_csv(os, rs, "host, one");
    const auto text = os.str();
    CHECK(text.rfind(std::string(kCsvHeader) + "\r\n", 0) == 0);

    const auto rows = parse_csv(text);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) CHECK(r.size() == 12);
    CHECK(rows[0][0] == "size");
    CHECK(rows[0][11] == "notes");
    CHECK(rows[2][2] == "tile+vec");
    CHECK(rows[2][10] == "host, one");
    CHECK(rows[2][11] == "l1=12,llc=\"3\"");
    CHECK(rows[1][6] == "0.01");

    // Recompute the speedup column from the mean column, row by row.
    std::map<std::string, double> base;
    for (std::size_t n = 1; n < rows.size(); ++n)
        if (rows[n][2] == "none") base[rows[n][0] + rows[n][1]] = std::stod(rows[n][5]);
    for (std::size_t n = 1; n < rows.size(); ++n) {
        const double want = base.at(rows[n][0] + rows[n][1]) / std::stod(rows[n][5]);
        CHECK(std::stod(rows[n][8]) == doctest::Approx(want).epsilon(1e-8));
        CHECK(rows[n][9] == "none");
    }
    CHECK(std::stod(rows[2][8]) == 4.0);

    std::ostringstream empty;
    rs[0].speedup.reset();
    write_csv(empty, {rs[0]}, "h");
    CHECK(parse_csv(empty.str())[1][8] == "");
}

TEST_CASE("config validation and the memory cap") {
    auto c = tiny();
    CHECK_NOTHROW(validate(c));
    CHECK(estimated_bytes(15, Precision::f64) == 6ull * 16 * 16 * 16 * 8);
    CHECK(estimated_bytes(1023, Precision::f32) == 6ull * 1024 * 1024 * 1024 * 4);

    c.sizes = {16, 1024};
    try {
        validate(c);
        FAIL("expected the cap to refuse 1024");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("size 1024") != std::string::npos);
    }
    c.memory_cap_bytes = 64ull << 30;
    CHECK_NOTHROW(validate(c));

    auto bad = tiny();
    bad.sizes = {1};
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = tiny();
    bad.repeats = 0;
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = tiny();
    bad.steps = 0;
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = tiny();
    bad.pipelines = {"warp"};
    CHECK_THROWS_AS(validate(bad), ValidationError);
    CHECK_THROWS_AS(run_benchmark(bad), ValidationError);
}

TEST_CASE("host tag") {
    const auto t = host_tag(target_by_name("avx2"));
    CHECK(t.find("(avx2)") != std::string::npos);
    CHECK(t.size() > 7);
}
