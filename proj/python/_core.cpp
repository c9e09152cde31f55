#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "fdtd/bench.hpp"
#include "fdtd/error.hpp"
#include "fdtd/exec.hpp"
#include "fdtd/io.hpp"
#include "fdtd/schedule.hpp"

namespace py = pybind11;
using namespace fdtd;

namespace {

SimParams make_params(Index n, std::optional<Index> nx, std::optional<Index> ny, std::optional<Index> nz,
                      const std::string& precision, double spacing, double cfl, bool unit, double dt,
                      bool allow_unstable) {
    SimParams p;
    p.nx = nx.value_or(n);
    p.ny = ny.value_or(n);
    p.nz = nz.value_or(n);
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

InitialCondition make_init(const std::string& kind, std::uint64_t seed, double amplitude, std::array<int, 3> mode) {
    if (kind == "zero") return InitialCondition::zero();
    if (kind == "random") return InitialCondition::random(seed, amplitude);
    if (kind == "mode") return InitialCondition::cavity_mode(mode[0], mode[1], mode[2], amplitude);
    throw ValidationError("unknown init '" + kind + "' (zero, random, mode)");
}

template <typename T>
py::array_t<T> to_numpy(const Array3<T>& a) {
    const auto& s = a.shape();
    py::array_t<T> out({s[0], s[1], s[2]});
    std::memcpy(out.mutable_data(), a.data(), static_cast<std::size_t>(a.size()) * sizeof(T));
    return out;
}

py::dict fields_dict(const AnyFieldSet& f) {
    py::dict d;
    std::visit(
        [&](const auto& fs) {
            for (Component c : kAllComponents) d[py::str(std::string(to_string(c)))] = to_numpy(fs[c]);
        },
        f);
    return d;
}

class Simulation {
public:
    Simulation(SimParams p, const std::string& pipeline, std::optional<std::string> script, const std::string& target,
               const InitialCondition& init)
        : params_(p), target_(target.empty() ? detect_target() : target_by_name(target)),
          fields_(make_any_fields(p, init)) {
        const auto program = ir::build_step_program(p);
        const auto text = script ? *script : sched::preset_script(sched::canonical_pipeline(pipeline), p.precision, target_);
        kernel_ = exec::lower(sched::apply_script(program, sched::parse_script(text)), target_);
    }

    py::dict step(std::int64_t steps, std::int64_t check_interval) {
        exec::RunOptions o;
        o.check_interval = check_interval;
        o.first_step = step_;
        exec::RunStats st;
        {
            py::gil_scoped_release release;
            st = exec::run(kernel_, fields_, steps, o);
        }
        step_ += steps;
        py::dict d;
        d["steps"] = st.steps;
        d["wall_s"] = st.wall_seconds;
        d["mean_step_s"] = st.mean_step_seconds;
        d["std_step_s"] = st.std_step_seconds;
        d["cells_per_s"] = st.cells_per_second;
        return d;
    }

    py::array field(const std::string& name) const {
        const Component c = parse_component(name);
        return std::visit([&](const auto& f) -> py::array { return to_numpy(f[c]); }, fields_);
    }

    void set_field(const std::string& name, const py::array& values) {
        const Component c = parse_component(name);
        std::visit(
            [&](auto& f) {
                using T = std::remove_pointer_t<decltype(f[c].data())>;
                auto a = py::array_t<T, py::array::c_style | py::array::forcecast>::ensure(values);
                if (!a) throw ValidationError("cannot convert values for " + name);
                const auto& s = f[c].shape();
                if (a.ndim() != 3 || a.shape(0) != s[0] || a.shape(1) != s[1] || a.shape(2) != s[2])
                    throw ValidationError(name + " expects shape " + to_string(s));
                std::memcpy(f[c].data(), a.data(), static_cast<std::size_t>(f[c].size()) * sizeof(T));
            },
            fields_);
    }

    py::dict fields() const { return fields_dict(fields_); }

    double energy() const {
        return std::visit([&](const auto& f) { return fdtd::energy(f, params_); }, fields_);
    }
    double synchronized_energy() const {
        return std::visit([&](const auto& f) { return exec::synchronized_energy(f, params_); }, fields_);
    }

    void dump(const std::filesystem::path& dir, std::uint64_t seed, const std::string& init) const {
        write_dump(dir, fields_, {params_, step_, seed, init});
    }

    std::vector<std::filesystem::path> export_vtk(const std::filesystem::path& dir, std::vector<std::string> comps) const {
        std::vector<Component> cs;
        for (const auto& c : comps) cs.push_back(parse_component(c));
        if (cs.empty()) cs.assign(kAllComponents.begin(), kAllComponents.end());
        return fdtd::export_vtk(dir, fields_, params_, cs);
    }

    std::string kernel_dump() const { return kernel_.dump(); }
    std::int64_t current_step() const { return step_; }
    const SimParams& params() const { return params_; }

private:
    SimParams params_;
    TargetDescriptor target_;
    AnyFieldSet fields_;
    exec::LoweredKernel kernel_;
    std::int64_t step_ = 0;
};

std::string dump_ir(const SimParams& p, const std::string& pipeline, std::optional<std::string> script,
                    const std::string& target_name, const std::string& what) {
    const auto target = target_name.empty() ? detect_target() : target_by_name(target_name);
    const auto program = ir::build_step_program(p);
    const auto parsed =
        sched::parse_script(script ? *script : sched::preset_script(sched::canonical_pipeline(pipeline), p.precision, target));
    if (what == "ir") return ir::print_ir(program);
    if (what == "script") return sched::to_text(parsed);
    const auto kernel = exec::lower(sched::apply_script(program, parsed), target);
    if (what == "kernel") return kernel.dump();
    if (what != "all") throw ValidationError("unknown --what '" + what + "'");
    return ir::print_ir(program) + "\n" + sched::to_text(parsed) + "\n" + kernel.dump();
}

py::dict record_dict(const bench::BenchRecord& r) {
    py::dict d;
    d["size"] = r.size;
    d["precision"] = std::string(to_string(r.precision));
    d["pipeline"] = r.pipeline;
    d["steps"] = r.steps;
    d["repeats"] = r.repeats;
    d["mean_s"] = r.mean_s;
    d["std_s"] = r.std_s;
    d["cells_per_s"] = r.cells_per_s;
    d["speedup"] = r.speedup ? py::cast(*r.speedup) : py::none();
    d["baseline"] = r.baseline;
    d["energy_drift"] = r.energy_drift;
    d["notes"] = r.notes;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Scheduled 3D FDTD (Yee) stepping with tile/fuse/vectorize transforms";

    static py::exception<ValidationError> validation_error(m, "ValidationError", PyExc_ValueError);
    static py::exception<ScriptError> script_error(m, "ScriptError", validation_error.ptr());
    static py::exception<InstabilityError> instability_error(m, "InstabilityError", PyExc_RuntimeError);
    static py::exception<IoError> io_error(m, "IoError", PyExc_OSError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ScriptError& e) {
            PyErr_SetString(script_error.ptr(), e.what());
        } catch (const ValidationError& e) {
            PyErr_SetString(validation_error.ptr(), e.what());
        } catch (const InstabilityError& e) {
            PyErr_SetString(instability_error.ptr(), e.what());
        } catch (const IoError& e) {
            PyErr_SetString(io_error.ptr(), e.what());
        }
    });

    py::class_<SimParams>(m, "SimParams")
        .def(py::init([](Index n, std::optional<Index> nx, std::optional<Index> ny, std::optional<Index> nz,
                         const std::string& precision, double spacing, double cfl, bool unit, double dt,
                         bool allow_unstable) {
                 return make_params(n, nx, ny, nz, precision, spacing, cfl, unit, dt, allow_unstable);
             }),
             py::arg("n") = 16, py::arg("nx") = py::none(), py::arg("ny") = py::none(), py::arg("nz") = py::none(),
             py::arg("precision") = "f64", py::arg("spacing") = 1e-3, py::arg("cfl") = 0.5, py::arg("unit") = false,
             py::arg("dt") = 0.0, py::arg("allow_unstable") = false)
        .def_property_readonly("cells", [](const SimParams& p) { return std::make_tuple(p.nx, p.ny, p.nz); })
        .def_readonly("dx", &SimParams::dx)
        .def_readonly("dy", &SimParams::dy)
        .def_readonly("dz", &SimParams::dz)
        .def_readonly("dt", &SimParams::dt)
        .def_readonly("eps", &SimParams::eps)
        .def_readonly("mu", &SimParams::mu)
        .def_property_readonly("precision", [](const SimParams& p) { return std::string(to_string(p.precision)); })
        .def_property_readonly("cfl_limit", [](const SimParams& p) { return cfl_limit(p); })
        .def("__repr__", [](const SimParams& p) {
            std::ostringstream os;
            os << "SimParams(cells=" << to_string(p.cells()) << ", precision=" << to_string(p.precision) << ", dt=" << p.dt
               << ")";
            return os.str();
        });

    py::class_<Simulation>(m, "Simulation")
        .def(py::init([](const SimParams& p, const std::string& pipeline, std::optional<std::string> script,
                         const std::string& target, const std::string& init, std::uint64_t seed, double amplitude,
                         std::array<int, 3> mode) {
                 return Simulation(p, pipeline, script, target, make_init(init, seed, amplitude, mode));
             }),
             py::arg("params"), py::arg("pipeline") = "none", py::arg("script") = py::none(), py::arg("target") = "",
             py::arg("init") = "random", py::arg("seed") = 0, py::arg("amplitude") = 1.0,
             py::arg("mode") = std::array<int, 3>{1, 1, 0})
        .def("step", &Simulation::step, py::arg("steps") = 1, py::arg("check_interval") = 100)
        .def("field", &Simulation::field, py::arg("name"))
        .def("set_field", &Simulation::set_field, py::arg("name"), py::arg("values"))
        .def("fields", &Simulation::fields)
        .def("energy", &Simulation::energy)
        .def("synchronized_energy", &Simulation::synchronized_energy)
        .def("dump", &Simulation::dump, py::arg("dir"), py::arg("seed") = 0, py::arg("init") = "python")
        .def("export_vtk", &Simulation::export_vtk, py::arg("dir"), py::arg("components") = std::vector<std::string>{})
        .def("kernel_dump", &Simulation::kernel_dump)
        .def_property_readonly("step_count", &Simulation::current_step)
        .def_property_readonly("params", &Simulation::params);

    m.def("cfl_limit", [](double dx, double dy, double dz, double eps, double mu) {
        SimParams p;
        p.dx = dx;
        p.dy = dy;
        p.dz = dz;
        p.eps = eps;
        p.mu = mu;
        return cfl_limit(p);
    }, py::arg("dx"), py::arg("dy"), py::arg("dz"), py::arg("eps") = kVacuumPermittivity, py::arg("mu") = kVacuumPermeability);

    m.def("preset_script", [](const std::string& pipeline, const std::string& precision, const std::string& target) {
        const auto t = target.empty() ? detect_target() : target_by_name(target);
        return sched::preset_script(sched::canonical_pipeline(pipeline), parse_precision(precision), t);
    }, py::arg("pipeline"), py::arg("precision") = "f64", py::arg("target") = "");

    m.def("dump_ir", &dump_ir, py::arg("params"), py::arg("pipeline") = "none", py::arg("script") = py::none(),
          py::arg("target") = "", py::arg("what") = "all");

    m.def("detect_target", [] { return detect_target().name; });

    m.def("read_dump", [](const std::filesystem::path& dir) {
        const auto d = read_dump(dir);
        py::dict meta;
        meta["step"] = d.meta.step;
        meta["seed"] = d.meta.seed;
        meta["init"] = d.meta.init;
        meta["cells"] = std::make_tuple(d.meta.params.nx, d.meta.params.ny, d.meta.params.nz);
        meta["precision"] = std::string(to_string(d.meta.params.precision));
        meta["dt"] = d.meta.params.dt;
        return py::make_tuple(fields_dict(d.fields), meta);
    }, py::arg("dir"));

    m.def("compare_dumps", [](const std::filesystem::path& a, const std::filesystem::path& b, std::uint64_t max_ulps) {
        const auto r = compare_dumps(read_dump(a), read_dump(b), max_ulps);
        py::dict d;
        d["within"] = r.within;
        d["max_ulps"] = r.max_ulps;
        d["mismatches"] = r.mismatches;
        d["worst"] = r.worst;
        d["problems"] = r.problems;
        return d;
    }, py::arg("a"), py::arg("b"), py::arg("max_ulps") = 0);

    m.def("bench", [](std::vector<Index> sizes, std::int64_t steps, int repeats, std::vector<std::string> precisions,
                      std::vector<std::string> pipelines, std::int64_t warmup, std::uint64_t seed, const std::string& target,
                      std::optional<std::string> csv) {
        bench::BenchConfig c;
        c.sizes = std::move(sizes);
        c.steps = steps;
        c.repeats = repeats;
        c.precisions.clear();
        for (const auto& p : precisions) c.precisions.push_back(parse_precision(p));
        c.pipelines = std::move(pipelines);
        c.warmup = warmup;
        c.seed = seed;
        if (!target.empty()) c.target = target_by_name(target);
        std::vector<bench::BenchRecord> records;
        {
            py::gil_scoped_release release;
            records = bench::run_benchmark(c);
        }
        if (csv) {
            std::ofstream os(*csv, std::ios::binary);
            if (!os) throw IoError("cannot open " + *csv + " for writing");
            bench::write_csv(os, records, bench::host_tag(c.target));
        }
        py::list out;
        for (const auto& r : records) out.append(record_dict(r));
        return out;
    }, py::arg("sizes"), py::arg("steps") = 1000, py::arg("repeats") = 10,
          py::arg("precisions") = std::vector<std::string>{"f32", "f64"},
          py::arg("pipelines") = std::vector<std::string>{"none", "tile", "tile+vec", "tile+vec+fuse"},
          py::arg("warmup") = 100, py::arg("seed") = 1, py::arg("target") = "", py::arg("csv") = py::none());

    m.attr("CSV_HEADER") = bench::kCsvHeader;
    m.attr("PIPELINES") = std::vector<std::string>(std::begin(sched::kPipelineNames), std::end(sched::kPipelineNames));
}
