#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <span>
#include <tuple>

#include "fdtd/error.hpp"
#include "fdtd/exec.hpp"

#if defined(__clang__)
#define FDTD_NOVEC_PRAGMA _Pragma("clang loop vectorize(disable) interleave(disable)")
#define FDTD_NOVEC_FN
#elif defined(__GNUC__)
#define FDTD_NOVEC_PRAGMA
#define FDTD_NOVEC_FN __attribute__((optimize("no-tree-vectorize")))
#else
#define FDTD_NOVEC_PRAGMA
#define FDTD_NOVEC_FN
#endif

namespace fdtd::exec {

namespace {

// out += coef * ((ahi - alo) * ia - (bhi - blo) * ib), one element at a time.
template <typename T>
FDTD_NOVEC_FN void row_scalar(Index n, T* __restrict out, const T* __restrict alo, const T* __restrict ahi,
                              const T* __restrict blo, const T* __restrict bhi, T coef, T ia, T ib) {
    FDTD_NOVEC_PRAGMA
    for (Index k = 0; k < n; ++k) out[k] = out[k] + coef * ((ahi[k] - alo[k]) * ia - (bhi[k] - blo[k]) * ib);
}

template <typename T, int W>
void row_vector(Index n, T* __restrict out, const T* __restrict alo, const T* __restrict ahi,
                const T* __restrict blo, const T* __restrict bhi, T coef, T ia, T ib) {
    typedef T V __attribute__((vector_size(sizeof(T) * W)));
    const V vc = V{} + coef, va = V{} + ia, vb = V{} + ib;
    Index k = 0;
    for (; k + W <= n; k += W) {
        V o, a0, a1, b0, b1;
        std::memcpy(&o, out + k, sizeof(V));
        std::memcpy(&a0, alo + k, sizeof(V));
        std::memcpy(&a1, ahi + k, sizeof(V));
        std::memcpy(&b0, blo + k, sizeof(V));
        std::memcpy(&b1, bhi + k, sizeof(V));
        o = o + vc * ((a1 - a0) * va - (b1 - b0) * vb);
        std::memcpy(out + k, &o, sizeof(V));
    }
    if (k < n) row_scalar(n - k, out + k, alo + k, ahi + k, blo + k, bhi + k, coef, ia, ib);
}

template <typename T>
struct Buf {
    T* data = nullptr;
    Shape3 shape{0, 0, 0};
    Index si() const { return shape[1] * shape[2]; }
    Index sj() const { return shape[2]; }
};

template <typename T>
struct Strided {
    T* base = nullptr; // offset already folded in
    Index si = 0, sj = 0;
    T* at(Index i, Index j, Index k) const { return base + i * si + j * sj + k; }
};

template <typename T>
struct PreparedOp {
    KernelOp::Kind kind = KernelOp::Kind::noop;
    bool canonical = false;
    Strided<T> out;
    std::vector<Strided<T>> acc; // one per access, same order as KernelOp::accesses
    std::array<int, 4> c{};      // a_lo, a_hi, b_lo, b_hi access indices
    T coef{}, ia{}, ib{};
    const ir::Payload* payload = nullptr;
    Box domain;
};

template <typename T>
class Engine {
public:
    Engine(const LoweredKernel& k, std::vector<Buf<T>> bufs) : k_(k), bufs_(std::move(bufs)) {
        for (double c : k.constants) consts_.push_back(static_cast<T>(c));
        for (const auto& o : k.ops) ops_.push_back(prepare(o));
    }

    void step() {
        for (const auto& s : k_.stages) exec(s);
    }

private:
    struct Restriction {
        int axis;
        Index size, tile;
    };

    Strided<T> strided(int buffer, const Offset3& off) const {
        const auto& b = bufs_[buffer];
        Strided<T> s;
        s.si = b.si();
        s.sj = b.sj();
        s.base = b.data + off[0] * s.si + off[1] * s.sj + off[2];
        return s;
    }

    PreparedOp<T> prepare(const KernelOp& o) const {
        PreparedOp<T> p;
        p.kind = o.kind;
        p.domain = o.domain;
        p.payload = &o.payload;
        if (o.kind == KernelOp::Kind::noop) return p;
        p.out = strided(o.out_buffer, {0, 0, 0});
        for (const auto& a : o.accesses) p.acc.push_back(strided(a.buffer, a.offset));
        if (o.canonical) {
            p.canonical = true;
            p.c = {o.canonical->a_lo, o.canonical->a_hi, o.canonical->b_lo, o.canonical->b_hi};
            p.coef = consts_[o.canonical->coef];
            p.ia = consts_[o.canonical->inv_a];
            p.ib = consts_[o.canonical->inv_b];
        }
        return p;
    }

    void row(const PreparedOp<T>& p, Index i, Index j, Index k0, Index k1, int width) {
        const Index n = k1 - k0;
        if (n <= 0) return;
        switch (p.kind) {
        case KernelOp::Kind::noop: return;
        case KernelOp::Kind::zero: {
            T* out = p.out.at(i, j, k0);
            std::fill(out, out + n, T(0));
            return;
        }
        case KernelOp::Kind::curl: break;
        }
        if (!p.canonical) {
            generic_row(p, i, j, k0, k1);
            return;
        }
        T* out = p.out.at(i, j, k0);
        const T* alo = p.acc[p.c[0]].at(i, j, k0);
        const T* ahi = p.acc[p.c[1]].at(i, j, k0);
        const T* blo = p.acc[p.c[2]].at(i, j, k0);
        const T* bhi = p.acc[p.c[3]].at(i, j, k0);
        switch (width) {
        case 2: row_vector<T, 2>(n, out, alo, ahi, blo, bhi, p.coef, p.ia, p.ib); break;
        case 4: row_vector<T, 4>(n, out, alo, ahi, blo, bhi, p.coef, p.ia, p.ib); break;
        case 8: row_vector<T, 8>(n, out, alo, ahi, blo, bhi, p.coef, p.ia, p.ib); break;
        case 16: row_vector<T, 16>(n, out, alo, ahi, blo, bhi, p.coef, p.ia, p.ib); break;
        case 32: row_vector<T, 32>(n, out, alo, ahi, blo, bhi, p.coef, p.ia, p.ib); break;
        case 64: row_vector<T, 64>(n, out, alo, ahi, blo, bhi, p.coef, p.ia, p.ib); break;
        default: row_scalar(n, out, alo, ahi, blo, bhi, p.coef, p.ia, p.ib); break;
        }
    }

    void generic_row(const PreparedOp<T>& p, Index i, Index j, Index k0, Index k1) {
        const std::span<const T> cs(consts_);
        for (Index k = k0; k < k1; ++k) {
            T* out = p.out.at(i, j, k);
            *out = ir::evaluate<T>(*p.payload, cs, *out, [&](int a) { return *p.acc[a].at(i, j, k); });
        }
    }

    Box restricted(const PreparedOp<T>& p, const std::vector<Restriction>& r) const {
        Box b = p.domain;
        for (const auto& x : r)
            std::tie(b.lo[x.axis], b.hi[x.axis]) = sched::tile_range(b.lo[x.axis], b.hi[x.axis], x.size, x.tile);
        return b;
    }

    void run_box(const PreparedOp<T>& p, const Box& b) {
        if (b.empty()) return;
        for (Index i = b.lo[0]; i < b.hi[0]; ++i)
            for (Index j = b.lo[1]; j < b.hi[1]; ++j) row(p, i, j, b.lo[2], b.hi[2], 0);
    }

    void copy(int src, int dst) {
        const auto& s = bufs_[src];
        const auto& d = bufs_[dst];
        std::memcpy(d.data, s.data, static_cast<std::size_t>(volume(s.shape)) * sizeof(T));
    }

    void exec(const Stage& s) {
        if (s.kind == StageKind::copy) {
            copy(s.src, s.dst);
            return;
        }
        exec(s, restrictions_);
    }

    bool leaves_only(const Stage& s) const {
        for (const auto& c : s.children)
            if (c.kind == StageKind::loop || c.kind == StageKind::copy) return false;
        return true;
    }

    void exec(const Stage& s, std::vector<Restriction>& r) {
        if (s.kind != StageKind::loop) {
            run_box(ops_[s.op], restricted(ops_[s.op], r));
            return;
        }
        if (s.axis == 2 && leaves_only(s)) {
            jammed(s, r);
            return;
        }
        for (Index t = s.tile_begin; t < s.tile_end; ++t) {
            r.push_back({s.axis, s.size, t});
            for (const auto& c : s.children) exec(c, r);
            r.pop_back();
        }
    }

    // Interchanged form of a k tile loop over independent leaves: walk (i,j)
    // once and run each leaf's row in tile-aligned chunks.
    void jammed(const Stage& s, const std::vector<Restriction>& r) {
        struct Item {
            const PreparedOp<T>* p;
            Box b;
        };
        std::vector<Item> items;
        Box u{{0, 0, 0}, {0, 0, 0}};
        bool any = false;
        for (const auto& c : s.children) {
            const auto& p = ops_[c.op];
            Box b = restricted(p, r);
            b.lo[2] = std::max(b.lo[2], s.tile_begin * s.size);
            b.hi[2] = std::min(b.hi[2], s.tile_end * s.size);
            if (b.empty() || p.kind == KernelOp::Kind::noop) continue;
            items.push_back({&p, b});
            for (int d = 0; d < 2; ++d) {
                u.lo[d] = any ? std::min(u.lo[d], b.lo[d]) : b.lo[d];
                u.hi[d] = any ? std::max(u.hi[d], b.hi[d]) : b.hi[d];
            }
            any = true;
        }
        if (!any) return;
        const Index size = s.size;
        for (Index i = u.lo[0]; i < u.hi[0]; ++i)
            for (Index j = u.lo[1]; j < u.hi[1]; ++j)
                for (const auto& it : items) {
                    const Box& b = it.b;
                    if (i < b.lo[0] || i >= b.hi[0] || j < b.lo[1] || j >= b.hi[1]) continue;
                    if (s.width > 0) {
                        row(*it.p, i, j, b.lo[2], b.hi[2], s.width);
                        continue;
                    }
                    for (Index k = b.lo[2]; k < b.hi[2];) {
                        const Index end = std::min(b.hi[2], (k / size + 1) * size);
                        row(*it.p, i, j, k, end, 0);
                        k = end;
                    }
                }
    }

    const LoweredKernel& k_;
    std::vector<Buf<T>> bufs_;
    std::vector<T> consts_;
    std::vector<PreparedOp<T>> ops_;
    std::vector<Restriction> restrictions_;
};

template <typename T>
void check_precision(const LoweredKernel& k) {
    if (k.precision != precision_of<T>())
        throw ValidationError("kernel precision " + std::string(to_string(k.precision)) + " does not match fields " +
                              std::string(to_string(precision_of<T>())));
}

template <typename T>
std::vector<Buf<T>> bind_buffers(const LoweredKernel& k, const std::vector<Array3<T>*>& inputs, std::vector<Array3<T>>& scratch) {
    if (inputs.size() != k.input_count())
        throw ValidationError("kernel has " + std::to_string(k.input_count()) + " inputs, got " +
                              std::to_string(inputs.size()));
    std::vector<Buf<T>> bufs(k.buffers.size());
    scratch.clear();
    scratch.reserve(k.buffers.size());
    for (std::size_t b = 0; b < k.buffers.size(); ++b) {
        const auto& kb = k.buffers[b];
        if (kb.input >= 0) {
            auto* a = inputs[kb.input];
            if (a->shape() != kb.shape)
                throw ValidationError("input " + std::to_string(kb.input) + " (%" + kb.value + ") has shape " +
                                      to_string(a->shape()) + ", kernel expects " + to_string(kb.shape));
            bufs[b] = {a->data(), kb.shape};
        } else {
            scratch.emplace_back(kb.shape);
            bufs[b] = {scratch.back().data(), kb.shape};
        }
    }
    return bufs;
}

} // namespace

template <typename T>
RunStats run(const LoweredKernel& kernel, FieldSet<T>& fields, std::int64_t steps, const RunOptions& options) {
    check_precision<T>(kernel);
    if (steps < 0) throw ValidationError("steps must be >= 0");
    if (fields.cells != kernel.cells)
        throw ValidationError("fields " + to_string(fields.cells) + " do not match kernel cells " + to_string(kernel.cells));
    std::vector<Array3<T>*> inputs;
    for (auto& a : fields.arrays) inputs.push_back(&a);
    std::vector<Array3<T>> scratch;
    Engine<T> engine(kernel, bind_buffers(kernel, inputs, scratch));

    using clock = std::chrono::steady_clock;
    RunStats st;
    double sum = 0.0, sum2 = 0.0;
    for (std::int64_t s = 0; s < steps; ++s) {
        const auto t0 = clock::now();
        engine.step();
        const double dt = std::chrono::duration<double>(clock::now() - t0).count();
        sum += dt;
        sum2 += dt * dt;
        ++st.steps;
        if (options.check_interval > 0 && (s + 1) % options.check_interval == 0) {
            const double m = max_norm(fields);
            if (!(m <= options.max_norm_limit)) {
                const std::int64_t at = options.first_step + s + 1;
                throw InstabilityError("instability at step " + std::to_string(at) + ": max |field| = " +
                                           (std::isnan(m) ? std::string("non-finite") : std::to_string(m)),
                                       at);
            }
        }
    }
    st.wall_seconds = sum;
    if (steps > 0) {
        st.mean_step_seconds = sum / static_cast<double>(steps);
        const double var = steps > 1 ? (sum2 - sum * sum / static_cast<double>(steps)) / static_cast<double>(steps - 1) : 0.0;
        st.std_step_seconds = std::sqrt(std::max(0.0, var));
        if (sum > 0) st.cells_per_second = static_cast<double>(volume(kernel.cells)) * static_cast<double>(steps) / sum;
    }
    return st;
}

RunStats run(const LoweredKernel& kernel, AnyFieldSet& fields, std::int64_t steps, const RunOptions& options) {
    return std::visit([&](auto& f) { return run(kernel, f, steps, options); }, fields);
}

template <typename T>
void run_buffers(const LoweredKernel& kernel, std::vector<Array3<T>>& inputs, std::int64_t steps) {
    check_precision<T>(kernel);
    std::vector<Array3<T>*> ptrs;
    for (auto& a : inputs) ptrs.push_back(&a);
    std::vector<Array3<T>> scratch;
    Engine<T> engine(kernel, bind_buffers(kernel, ptrs, scratch));
    for (std::int64_t s = 0; s < steps; ++s) engine.step();
}

template <typename T>
void reference_step(FieldSet<T>& f, const SimParams& p) {
    const Index nx = f.cells[0], ny = f.cells[1], nz = f.cells[2];
    const T ch = static_cast<T>(p.dt / p.mu), ce = static_cast<T>(p.dt / p.eps);
    const T idx = static_cast<T>(1.0 / p.dx), idy = static_cast<T>(1.0 / p.dy), idz = static_cast<T>(1.0 / p.dz);
    auto &ex = f.ex(), &ey = f.ey(), &ez = f.ez(), &hx = f.hx(), &hy = f.hy(), &hz = f.hz();

    for (Index i = 0; i < nx; ++i)
        for (Index j = 0; j < ny; ++j)
            for (Index k = 0; k < nz; ++k)
                hx(i, j, k) = hx(i, j, k) + ch * ((ey(i, j, k + 1) - ey(i, j, k)) * idz - (ez(i, j + 1, k) - ez(i, j, k)) * idy);
    for (Index i = 0; i < nx; ++i)
        for (Index j = 0; j < ny; ++j)
            for (Index k = 0; k < nz; ++k)
                hy(i, j, k) = hy(i, j, k) + ch * ((ez(i + 1, j, k) - ez(i, j, k)) * idx - (ex(i, j, k + 1) - ex(i, j, k)) * idz);
    for (Index i = 0; i < nx; ++i)
        for (Index j = 0; j < ny; ++j)
            for (Index k = 0; k < nz; ++k)
                hz(i, j, k) = hz(i, j, k) + ch * ((ex(i, j + 1, k) - ex(i, j, k)) * idy - (ey(i + 1, j, k) - ey(i, j, k)) * idx);

    for (Index i = 0; i < nx; ++i)
        for (Index j = 1; j < ny; ++j)
            for (Index k = 1; k < nz; ++k)
                ex(i, j, k) = ex(i, j, k) + ce * ((hz(i, j, k) - hz(i, j - 1, k)) * idy - (hy(i, j, k) - hy(i, j, k - 1)) * idz);
    for (Index i = 1; i < nx; ++i)
        for (Index j = 0; j < ny; ++j)
            for (Index k = 1; k < nz; ++k)
                ey(i, j, k) = ey(i, j, k) + ce * ((hx(i, j, k) - hx(i, j, k - 1)) * idz - (hz(i, j, k) - hz(i - 1, j, k)) * idx);
    for (Index i = 1; i < nx; ++i)
        for (Index j = 1; j < ny; ++j)
            for (Index k = 0; k < nz; ++k)
                ez(i, j, k) = ez(i, j, k) + ce * ((hy(i, j, k) - hy(i - 1, j, k)) * idx - (hx(i, j, k) - hx(i, j - 1, k)) * idy);

    apply_pec(f);
}

template <typename T>
double synchronized_energy(const FieldSet<T>& f, const SimParams& p) {
    if (f.cells != p.cells())
        throw ValidationError("field shape " + to_string(f.cells) + " does not match params " + to_string(p.cells()));
    const Index nx = f.cells[0], ny = f.cells[1], nz = f.cells[2];
    const double ch = p.dt / p.mu, idx = 1.0 / p.dx, idy = 1.0 / p.dy, idz = 1.0 / p.dz;
    auto d = [](T v) { return static_cast<double>(v); };
    const auto &ex = f[Component::ex], &ey = f[Component::ey], &ez = f[Component::ez];
    const auto &hx = f[Component::hx], &hy = f[Component::hy], &hz = f[Component::hz];

    double we = 0.0;
    for (Component c : {Component::ex, Component::ey, Component::ez})
        for (T v : f[c].values()) we += d(v) * d(v);

    // H values outside the update box do not change in the next half step.
    double wh = 0.0;
    for (Component c : {Component::hx, Component::hy, Component::hz})
        for (T v : f[c].values()) wh += d(v) * d(v);
    for (Index i = 0; i < nx; ++i)
        for (Index j = 0; j < ny; ++j)
            for (Index k = 0; k < nz; ++k) {
                const double dx_ = ch * ((d(ey(i, j, k + 1)) - d(ey(i, j, k))) * idz - (d(ez(i, j + 1, k)) - d(ez(i, j, k))) * idy);
                const double dy_ = ch * ((d(ez(i + 1, j, k)) - d(ez(i, j, k))) * idx - (d(ex(i, j, k + 1)) - d(ex(i, j, k))) * idz);
                const double dz_ = ch * ((d(ex(i, j + 1, k)) - d(ex(i, j, k))) * idy - (d(ey(i + 1, j, k)) - d(ey(i, j, k))) * idx);
                wh += d(hx(i, j, k)) * dx_ + d(hy(i, j, k)) * dy_ + d(hz(i, j, k)) * dz_;
            }
    return (0.5 * p.eps * we + 0.5 * p.mu * wh) * p.cell_volume();
}

#define FDTD_INSTANTIATE(T)                                                                                 \
    template RunStats run<T>(const LoweredKernel&, FieldSet<T>&, std::int64_t, const RunOptions&);          \
    template void run_buffers<T>(const LoweredKernel&, std::vector<Array3<T>>&, std::int64_t);             \
    template void reference_step<T>(FieldSet<T>&, const SimParams&);                                       \
    template double synchronized_energy<T>(const FieldSet<T>&, const SimParams&);

FDTD_INSTANTIATE(float)
FDTD_INSTANTIATE(double)
#undef FDTD_INSTANTIATE

} // namespace fdtd::exec
