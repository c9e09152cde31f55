#include "fdtd/cli.hpp"

#include <sched.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdtd/bench.hpp"
#include "fdtd/error.hpp"
#include "fdtd/exec.hpp"
#include "fdtd/io.hpp"
#include "fdtd/ir.hpp"
#include "fdtd/schedule.hpp"

namespace fdtd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GridFlags {
    Index n = 16;
    Index nx = 0, ny = 0, nz = 0;
    double spacing = 1e-3;
    double dt = 0.0;
    double cfl = 0.5;
    bool unit = false;
    bool allow_unstable = false;
    std::string precision = "f64";
    std::string pipeline;
    std::string script;
    std::string target;

    void add(CLI::App* app) {
        app->add_option("--n", n, "Cells per axis (cubic grid)");
        app->add_option("--nx", nx, "Cells along x (overrides --n)");
        app->add_option("--ny", ny, "Cells along y (overrides --n)");
        app->add_option("--nz", nz, "Cells along z (overrides --n)");
        app->add_option("--spacing", spacing, "Cell size in metres");
        app->add_option("--dt", dt, "Time step; default derives from --cfl");
        app->add_option("--cfl", cfl, "Fraction of the CFL limit");
        app->add_flag("--unit", unit, "Unit cavity: side 1, eps = mu = 1");
        app->add_flag("--allow-unstable", allow_unstable, "Accept dt above the CFL limit");
        app->add_option("--precision", precision, "f32 or f64");
        auto* p = app->add_option("--pipeline", pipeline, "Preset: none, tile, tile+fuse, tile+vec, tile+vec+fuse");
        auto* s = app->add_option("--script", script, "Transform script file");
        p->excludes(s);
        s->excludes(p);
        app->add_option("--target", target, "avx512, avx2, sve-512 or scalar (default: FDTD_TARGET or host)");
    }

    SimParams params() const {
        SimParams p;
        p.nx = nx > 0 ? nx : n;
        p.ny = ny > 0 ? ny : n;
        p.nz = nz > 0 ? nz : n;
        if (unit) {
            p.dx = 1.0 / static_cast<double>(p.nx);
            p.dy = 1.0 / static_cast<double>(p.ny);
            p.dz = 1.0 / static_cast<double>(p.nz);
            p.eps = p.mu = 1.0;
        } else {
            p.dx = p.dy = p.dz = spacing;
        }
        p.dt = dt;
        p.cfl_factor = cfl;
        p.precision = parse_precision(precision);
        return finalize(p, allow_unstable ? CflPolicy::allow_unstable : CflPolicy::enforce);
    }

    TargetDescriptor resolved_target() const { return target.empty() ? detect_target() : target_by_name(target); }

    std::string pipeline_name() const { return pipeline.empty() && script.empty() ? "none" : pipeline; }

    sched::ScheduledProgram scheduled(const SimParams& p, const TargetDescriptor& t) const {
        const auto program = ir::build_step_program(p);
        return sched::apply_script(program, sched::parse_script(script_text(p, t)));
    }

    std::string script_text(const SimParams& p, const TargetDescriptor& t) const {
        if (script.empty()) return sched::preset_script(sched::canonical_pipeline(pipeline_name()), p.precision, t);
        std::ifstream is(script);
        if (!is) throw IoError("cannot read script " + script);
        std::ostringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }
};

struct InitFlags {
    std::string kind = "random";
    std::uint64_t seed = 0;
    double amplitude = 1.0;
    std::vector<int> mode{1, 1, 0};

    void add(CLI::App* app) {
        app->add_option("--init", kind, "zero, random or mode");
        app->add_option("--seed", seed, "Seed for --init random");
        app->add_option("--amplitude", amplitude, "Initial amplitude");
        app->add_option("--mode", mode, "Cavity mode indices m n p")->expected(3)->delimiter(',');
    }

    InitialCondition resolve() const {
        if (kind == "zero") return InitialCondition::zero();
        if (kind == "random") return InitialCondition::random(seed, amplitude);
        if (kind == "mode") return InitialCondition::cavity_mode(mode[0], mode[1], mode[2], amplitude);
        throw ValidationError("unknown init '" + kind + "' (expected zero, random or mode)");
    }

    std::string label() const {
        if (kind == "mode")
            return "mode(" + std::to_string(mode[0]) + "," + std::to_string(mode[1]) + "," + std::to_string(mode[2]) + ")";
        return kind;
    }
};

std::vector<Component> parse_components(const std::vector<std::string>& names) {
    std::vector<Component> out;
    for (const auto& n : names) out.push_back(parse_component(n));
    if (out.empty()) out.assign(kAllComponents.begin(), kAllComponents.end());
    return out;
}

void require_directory(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("output directory " + dir + " does not exist");
}

void make_directory(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
}

double any_energy(const AnyFieldSet& f, const SimParams& p) {
    return std::visit([&](const auto& x) { return energy(x, p); }, f);
}

double any_sync_energy(const AnyFieldSet& f, const SimParams& p) {
    return std::visit([&](const auto& x) { return exec::synchronized_energy(x, p); }, f);
}

double any_max_norm(const AnyFieldSet& f) {
    return std::visit([](const auto& x) { return max_norm(x); }, f);
}

std::vector<Index> parse_sizes(const std::string& s) {
    std::vector<Index> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(static_cast<Index>(v));
        } catch (const std::exception&) {
            throw ValidationError("bad size '" + item + "' in --sizes");
        }
    }
    return out;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

void pin_to(int cpu) {
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(cpu, &set);
    if (sched_setaffinity(0, sizeof set, &set) != 0)
        throw ValidationError("cannot pin to cpu " + std::to_string(cpu));
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Scheduled FDTD solver", "fdtd"};
    app.require_subcommand(1);

    // run
    GridFlags run_grid;
    InitFlags run_init;
    std::int64_t run_steps = 100;
    std::int64_t run_check = 100;
    std::string run_dump, run_vtk;
    std::vector<std::string> run_comps;
    auto* run = app.add_subcommand("run", "Advance fields and optionally dump them");
    run_grid.add(run);
    run_init.add(run);
    run->add_option("--steps", run_steps, "Time steps");
    run->add_option("--check-interval", run_check, "Steps between stability checks (0 disables)");
    run->add_option("--dump-out", run_dump, "Directory for raw field dumps");
    run->add_option("--vtk-out", run_vtk, "Existing directory for VTK files");
    run->add_option("--components", run_comps, "Components for --vtk-out")->delimiter(',');

    // bench
    std::string b_sizes = "16,32,64,128", b_precisions = "f32,f64", b_pipes = "none,tile,tile+vec,tile+vec+fuse";
    std::string b_csv, b_target, b_baseline = "none", b_baseline_precision;
    bench::BenchConfig bc;
    double b_cap_gib = 4.0;
    int b_pin = -1;
    auto* bench_cmd = app.add_subcommand("bench", "Time pipelines over a size sweep");
    bench_cmd->add_option("--sizes", b_sizes, "Comma-separated cubic sizes");
    bench_cmd->add_option("--steps", bc.steps, "Steps per timed run");
    bench_cmd->add_option("--repeats", bc.repeats, "Timed runs per configuration");
    bench_cmd->add_option("--warmup", bc.warmup, "Untimed steps before measuring");
    bench_cmd->add_option("--seed", bc.seed, "Seed for the random initial fields");
    bench_cmd->add_option("--precisions", b_precisions, "Comma-separated precisions");
    bench_cmd->add_option("--pipelines", b_pipes, "Comma-separated pipelines");
    auto* b_baseline_opt = bench_cmd->add_option("--baseline", b_baseline, "Pipeline used as speedup baseline");
    bench_cmd->add_option("--baseline-precision", b_baseline_precision, "Fix the baseline precision (e.g. f64)");
    bench_cmd->add_option("--csv", b_csv, "Output CSV path (default: stdout)");
    bench_cmd->add_option("--mem-cap-gib", b_cap_gib, "Refuse sizes needing more memory than this");
    bench_cmd->add_option("--target", b_target, "Target override");
    bench_cmd->add_option("--pin", b_pin, "Pin the process to this CPU");

    // dump-ir
    GridFlags ir_grid;
    std::string ir_what = "all", ir_out;
    auto* dump_ir = app.add_subcommand("dump-ir", "Print the step program, schedule and lowered kernel");
    ir_grid.add(dump_ir);
    dump_ir->add_option("--what", ir_what, "ir, script, kernel or all")->check(CLI::IsMember({"ir", "script", "kernel", "all"}));
    dump_ir->add_option("--out", ir_out, "Write to a file instead of stdout");

    // export-vtk
    GridFlags vtk_grid;
    InitFlags vtk_init;
    std::int64_t vtk_steps = 0;
    std::string vtk_from, vtk_out;
    std::vector<std::string> vtk_comps;
    auto* vtk = app.add_subcommand("export-vtk", "Write legacy VTK files for a run or an existing dump");
    vtk_grid.add(vtk);
    vtk_init.add(vtk);
    vtk->add_option("--steps", vtk_steps, "Steps to run before export");
    vtk->add_option("--from-dump", vtk_from, "Export an existing dump directory instead of running");
    vtk->add_option("--out", vtk_out, "Existing output directory")->required();
    vtk->add_option("--components", vtk_comps, "Components to export (default all)")->delimiter(',');

    // compare-dumps
    std::string cmp_a, cmp_b;
    std::uint64_t cmp_ulps = 0;
    auto* cmp = app.add_subcommand("compare-dumps", "Compare two dump directories element-wise");
    cmp->add_option("a", cmp_a, "First dump directory")->required();
    cmp->add_option("b", cmp_b, "Second dump directory")->required();
    cmp->add_option("--max-ulps", cmp_ulps, "Largest accepted ULP distance");

    try {
        std::vector<const char*> argv{"fdtd"};
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        CLI::App* sub = nullptr;
        for (auto* s : app.get_subcommands()) sub = s;
        err << (sub ? sub->help() : app.help());
        return kExitValidation;
    }

    try {
        if (run->parsed()) {
            const SimParams p = run_grid.params();
            const auto target = run_grid.resolved_target();
            const auto init = run_init.resolve();
            if (run_steps < 0) throw ValidationError("--steps must be >= 0");
            if (!run_vtk.empty()) require_directory(run_vtk);
            const auto comps = parse_components(run_comps);
            if (!run_dump.empty()) make_directory(run_dump);
            const auto kernel = exec::lower(run_grid.scheduled(p, target), target);

            AnyFieldSet f = make_any_fields(p, init);
            const double e0 = any_energy(f, p), s0 = any_sync_energy(f, p);
            exec::RunOptions opts;
            opts.check_interval = run_check;
            const auto st = exec::run(kernel, f, run_steps, opts);
            if (!run_dump.empty()) write_dump(run_dump, f, {p, run_steps, run_init.seed, run_init.label()});
            if (!run_vtk.empty()) export_vtk(run_vtk, f, p, comps);

            json j = {{"steps", st.steps},
                      {"cells", {p.nx, p.ny, p.nz}},
                      {"precision", std::string(to_string(p.precision))},
                      {"pipeline", run_grid.script.empty() ? sched::canonical_pipeline(run_grid.pipeline_name())
                                                           : "script:" + run_grid.script},
                      {"target", kernel.target},
                      {"dt", p.dt},
                      {"energy_initial", e0},
                      {"energy_final", any_energy(f, p)},
                      {"sync_energy_initial", s0},
                      {"sync_energy_final", any_sync_energy(f, p)},
                      {"max_norm", any_max_norm(f)},
                      {"wall_s", st.wall_seconds},
                      {"mean_step_s", st.mean_step_seconds},
                      {"std_step_s", st.std_step_seconds},
                      {"cells_per_s", st.cells_per_second}};
            out << j.dump(2) << "\n";
            return kExitOk;
        }

        if (bench_cmd->parsed()) {
            bc.sizes = parse_sizes(b_sizes);
            bc.precisions.clear();
            for (const auto& s : split(b_precisions)) bc.precisions.push_back(parse_precision(s));
            bc.pipelines = split(b_pipes);
            bc.memory_cap_bytes = static_cast<std::uint64_t>(b_cap_gib * 1024.0 * 1024.0 * 1024.0);
            bc.target = b_target.empty() ? detect_target() : target_by_name(b_target);
            bench::BaselineSelector sel;
            sel.pipeline = sched::canonical_pipeline(b_baseline);
            if (!b_baseline_precision.empty()) sel.precision = parse_precision(b_baseline_precision);
            bench::validate(bc);
            if (b_baseline_opt->count() > 0 &&
                std::none_of(bc.pipelines.begin(), bc.pipelines.end(),
                             [&](const std::string& p) { return sched::canonical_pipeline(p) == sel.pipeline; }))
                throw ValidationError("missing baseline '" + sel.pipeline + "': not among --pipelines");
            if (b_pin >= 0) pin_to(b_pin);

            std::ofstream csv_file;
            if (!b_csv.empty()) {
                csv_file.open(b_csv, std::ios::binary);
                if (!csv_file) throw IoError("cannot open " + b_csv + " for writing");
            }
            err << "bench config " << bench::config_hash(bc) << " target=" << bc.target.name << "\n";
            auto records = bench::run_benchmark(bc, [&](const bench::BenchRecord& r) {
                err << "  N=" << r.size << " " << to_string(r.precision) << " " << r.pipeline << " mean=" << r.mean_s
                    << "s std=" << r.std_s << "s\n";
            });
            const bool have_base = b_baseline_opt->count() > 0 || std::any_of(records.begin(), records.end(), [&](const auto& r) {
                                       return r.pipeline == sel.pipeline;
                                   });
            if (have_base) bench::attach_speedups(records, sel);
            const std::string host = bench::host_tag(bc.target);
            if (b_csv.empty()) {
                bench::write_csv(out, records, host);
            } else {
                bench::write_csv(csv_file, records, host);
                csv_file.close();
                if (!csv_file) throw IoError("write failed: " + b_csv);
            }
            return kExitOk;
        }

        if (dump_ir->parsed()) {
            const SimParams p = ir_grid.params();
            const auto target = ir_grid.resolved_target();
            std::ostringstream os;
            const auto sp = ir_grid.scheduled(p, target);
            if (ir_what == "ir" || ir_what == "all") os << ir::print_ir(sp.program);
            if (ir_what == "script" || ir_what == "all") {
                if (ir_what == "all") os << "\n";
                os << sched::to_text(sched::parse_script(ir_grid.script_text(p, target)));
            }
            if (ir_what == "kernel" || ir_what == "all") {
                if (ir_what == "all") os << "\n";
                os << exec::lower(sp, target).dump();
            }
            if (ir_out.empty()) {
                out << os.str();
            } else {
                std::ofstream f(ir_out, std::ios::binary);
                if (!f) throw IoError("cannot open " + ir_out + " for writing");
                f << os.str();
                if (!f) throw IoError("write failed: " + ir_out);
            }
            return kExitOk;
        }

        if (vtk->parsed()) {
            require_directory(vtk_out);
            const auto comps = parse_components(vtk_comps);
            std::vector<fs::path> files;
            if (!vtk_from.empty()) {
                const auto d = read_dump(vtk_from);
                files = export_vtk(vtk_out, d.fields, d.meta.params, comps);
            } else {
                const SimParams p = vtk_grid.params();
                const auto target = vtk_grid.resolved_target();
                AnyFieldSet f = make_any_fields(p, vtk_init.resolve());
                if (vtk_steps > 0) exec::run(exec::lower(vtk_grid.scheduled(p, target), target), f, vtk_steps);
                files = export_vtk(vtk_out, f, p, comps);
            }
            for (const auto& f : files) out << f.string() << "\n";
            return kExitOk;
        }

        if (cmp->parsed()) {
            const auto a = read_dump(cmp_a);
            const auto b = read_dump(cmp_b);
            const auto r = compare_dumps(a, b, cmp_ulps);
            json j = {{"within", r.within},
                      {"max_ulps", r.max_ulps},
                      {"tolerance", cmp_ulps},
                      {"mismatches", r.mismatches},
                      {"worst", r.worst},
                      {"problems", r.problems}};
            out << j.dump(2) << "\n";
            if (!r.within) err << "dumps differ beyond " << cmp_ulps << " ULP" << (r.worst.empty() ? "" : ": " + r.worst) << "\n";
            return r.within ? kExitOk : kExitValidation;
        }
    } catch (const InstabilityError& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const ScriptError& e) {
        err << "error: script: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}

} // namespace fdtd
