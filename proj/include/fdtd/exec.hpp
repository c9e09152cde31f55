#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdtd/ir.hpp"
#include "fdtd/schedule.hpp"
#include "fdtd/target.hpp"
#include "fdtd/yee.hpp"

namespace fdtd::exec {

struct KernelAccess {
    int buffer = -1;
    Offset3 offset{0, 0, 0};
    ir::AccessRole role = ir::AccessRole::read;
};

struct KernelOp {
    enum class Kind { curl, zero, noop };

    ir::OpId op = -1;
    std::string name;
    Kind kind = Kind::noop;
    Box domain;
    int out_buffer = -1;
    std::vector<KernelAccess> accesses;
    ir::Payload payload;
    /// Set when the payload has the canonical curl form and the output buffer
    /// is not read by the op; such ops run on the row kernels.
    std::optional<ir::CanonicalCurl> canonical;
};

enum class StageKind { scalar_nest, generic_nest, loop, boundary, noop, copy };

struct Stage {
    StageKind kind = StageKind::noop;
    int op = -1; // index into LoweredKernel::ops for leaves
    int axis = -1;
    Index size = 0, tile_begin = 0, tile_end = 0;
    int width = 0; // resolved lane count; 0 = scalar
    int src = -1, dst = -1; // copy
    std::vector<Stage> children;

    bool fused() const { return kind == StageKind::loop && children.size() > 1; }
};

struct BufferBinding {
    Shape3 shape{0, 0, 0};
    /// Program input bound to this buffer, or -1 for planner scratch.
    int input = -1;
    std::string value;
};

struct LoweredKernel {
    Precision precision = Precision::f64;
    Shape3 cells{0, 0, 0};
    std::string target;
    std::vector<BufferBinding> buffers;
    std::vector<double> constants;
    std::vector<KernelOp> ops;
    std::vector<Stage> stages;

    std::size_t input_count() const;
    /// Deterministic text form.
    std::string dump() const;
};

/// Throws LoweringError for unresolved buffers or copies that cannot be placed.
LoweredKernel lower(const sched::ScheduledProgram& scheduled, const TargetDescriptor& target = detect_target());

/// Kernel for a named pipeline preset on the canonical program.
LoweredKernel lower_pipeline(const SimParams& params, std::string_view pipeline,
                             const TargetDescriptor& target = detect_target());

struct RunOptions {
    /// Steps between field checks; 0 disables.
    std::int64_t check_interval = 100;
    double max_norm_limit = 1e30;
    /// Step index the run starts from, used only in instability messages.
    std::int64_t first_step = 0;
};

struct RunStats {
    std::int64_t steps = 0;
    double wall_seconds = 0.0;
    double mean_step_seconds = 0.0;
    double std_step_seconds = 0.0;
    double cells_per_second = 0.0;
};

/// Advances `fields` in place. Program inputs bind to ex, ey, ez, hx, hy, hz.
template <typename T>
RunStats run(const LoweredKernel& kernel, FieldSet<T>& fields, std::int64_t steps, const RunOptions& options = {});

RunStats run(const LoweredKernel& kernel, AnyFieldSet& fields, std::int64_t steps, const RunOptions& options = {});

/// Same as run() for programs with arbitrary inputs; buffers bind in input order.
template <typename T>
void run_buffers(const LoweredKernel& kernel, std::vector<Array3<T>>& inputs, std::int64_t steps);

/// One step of naive triple loops over the canonical update ranges, then PEC.
template <typename T>
void reference_step(FieldSet<T>& fields, const SimParams& params);

/// Leapfrog-synchronized energy eps/2 |E^n|^2 + mu/2 H^(n-1/2).H^(n+1/2),
/// with H^(n+1/2) computed on the side from the current state. Exactly
/// conserved by the scheme with PEC walls, up to rounding.
template <typename T>
double synchronized_energy(const FieldSet<T>& fields, const SimParams& params);

} // namespace fdtd::exec
