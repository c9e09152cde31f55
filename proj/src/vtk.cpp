#include <cstdio>
#include <memory>

#include "fdtd/error.hpp"
#include "fdtd/io.hpp"

namespace fdtd {

namespace fs = std::filesystem;

void write_vtk(const fs::path& file, const AnyFieldSet& fields, const SimParams& params, Component c) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(file.string().c_str(), "w"), &std::fclose);
    if (!f) throw IoError("cannot open " + file.string() + " for writing");
    std::FILE* out = f.get();
    const auto off = node_offset(c);
    const std::string name(to_string(c));
    std::visit(
        [&](const auto& fs_) {
            const auto& a = fs_[c];
            const auto& s = a.shape();
            std::fprintf(out, "# vtk DataFile Version 3.0\n%s\nASCII\nDATASET STRUCTURED_POINTS\n", name.c_str());
            std::fprintf(out, "DIMENSIONS %lld %lld %lld\n", static_cast<long long>(s[0]), static_cast<long long>(s[1]),
                         static_cast<long long>(s[2]));
            std::fprintf(out, "ORIGIN %.9g %.9g %.9g\n", off[0] * params.dx, off[1] * params.dy, off[2] * params.dz);
            std::fprintf(out, "SPACING %.9g %.9g %.9g\n", params.dx, params.dy, params.dz);
            std::fprintf(out, "POINT_DATA %lld\nSCALARS %s %s 1\nLOOKUP_TABLE default\n", static_cast<long long>(a.size()),
                         name.c_str(), params.precision == Precision::f32 ? "float" : "double");
            for (Index k = 0; k < s[2]; ++k)
                for (Index j = 0; j < s[1]; ++j)
                    for (Index i = 0; i < s[0]; ++i) std::fprintf(out, "%.9g\n", static_cast<double>(a(i, j, k)));
        },
        fields);
    if (std::ferror(out)) throw IoError("write failed: " + file.string());
}

std::vector<fs::path> export_vtk(const fs::path& dir, const AnyFieldSet& fields, const SimParams& params,
                                 const std::vector<Component>& components) {
    if (!fs::is_directory(dir)) throw IoError("output directory " + dir.string() + " does not exist");
    std::vector<fs::path> out;
    for (Component c : components) {
        out.push_back(dir / (std::string(to_string(c)) + ".vtk"));
        write_vtk(out.back(), fields, params, c);
    }
    return out;
}

} // namespace fdtd
