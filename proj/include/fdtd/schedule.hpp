#pragma once

// Transform pipeline over a StepProgram.
//
// A schedule is a loop forest. Leaves are op bodies; every interior node is a
// tile loop created by tile() and possibly widened by fuse_siblings(). Tile
// loops run over an aligned grid: tile t of size S covers [t*S, (t+1)*S) on
// its axis, clipped to each child op's own domain, so two ops whose domains
// differ by a partial tile still share one loop structure.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include "fdtd/ir.hpp"
#include "fdtd/target.hpp"

namespace fdtd::sched {

enum class HandleKind { op, loop };

struct Handle {
    HandleKind kind = HandleKind::op;
    int id = -1;

    friend bool operator==(const Handle&, const Handle&) = default;
};

struct ScheduleNode {
    enum class Kind { op, loop };

    Kind kind = Kind::op;
    ir::OpId op = -1; // op leaf

    int loop_id = -1; // loop
    int axis = -1;
    Index size = 0;
    Index tile_begin = 0, tile_end = 0;
    int vector_width = 0;
    bool scalable = false;
    std::vector<ScheduleNode> children;

    Index trip() const { return tile_end - tile_begin; }
    bool vectorized() const { return vector_width > 0 || scalable; }
    static ScheduleNode leaf(ir::OpId id) {
        ScheduleNode n;
        n.op = id;
        return n;
    }
};

struct BufferCopy {
    int before_item = -1; // top-level forest index the copy precedes
    int src = -1, dst = -1;
    ir::ValueId value = -1;
};

struct BufferPlan {
    /// buffer_of[v] for every value id.
    std::vector<int> buffer_of;
    int buffer_count = 0;
    /// Buffers beyond one per program input.
    int extra_buffers = 0;
    std::vector<BufferCopy> copies;
    /// (src, dst) copies run after the step so outputs land in input buffers.
    std::vector<std::pair<int, int>> writeback;
    /// Values that could not be updated in place, with the reason.
    std::vector<std::string> fallbacks;
};

struct ScheduledProgram {
    ir::StepProgram program;
    std::vector<ScheduleNode> forest;
    BufferPlan plan;
};

/// Interactive builder; apply_script drives it from text.
class Scheduler {
public:
    explicit Scheduler(ir::StepProgram program);

    Handle op_handle(std::string_view op_name);
    Handle op_handle(ir::OpId id);

    /// Wraps the op's leaf in a tile loop. Consumes `op`.
    std::pair<Handle, Handle> tile(Handle op, int axis, Index size);
    /// Consumes both loop handles.
    Handle fuse_siblings(Handle a, Handle b);
    const BufferPlan& plan_inplace();
    /// width 0 with scalable=true defers the width to lowering.
    void vectorize(Handle loop, int width, bool scalable = false);

    bool live(Handle h) const { return handles_.contains(h.id) && handles_.at(h.id).kind == h.kind; }
    const std::vector<ScheduleNode>& forest() const { return forest_; }
    const ir::StepProgram& program() const { return program_; }

    /// Runs the buffer planner (again) and returns the result.
    ScheduledProgram finish() const;

private:
    struct Target {
        HandleKind kind;
        int id; // op id or loop id
    };

    Handle make_handle(HandleKind kind, int id);
    int take(Handle h, HandleKind expect, const char* what);

    ir::StepProgram program_;
    std::vector<ScheduleNode> forest_;
    std::map<int, Target> handles_;
    int next_handle_ = 0;
    int next_loop_ = 0;
    bool planned_ = false;
    BufferPlan plan_;
};

/// Computes the in-place plan for a given forest.
BufferPlan plan_buffers(const ir::StepProgram& program, const std::vector<ScheduleNode>& forest);

/// Unscheduled form: one top-level leaf per op, in program order.
ScheduledProgram unscheduled(const ir::StepProgram& program);

// ---- script ------------------------------------------------------------

struct SourceLoc {
    int line = 0, column = 0;
};

struct TileDirective {
    std::string op_ref, op_result, loop_result;
    int axis = 2;
    Index size = 0;
};
struct FuseDirective {
    std::string a, b, result;
};
struct PlanDirective {};
struct VectorizeDirective {
    std::string loop;
    int width = 0;
    bool scalable = false;
};

struct Directive {
    std::variant<TileDirective, FuseDirective, PlanDirective, VectorizeDirective> body;
    SourceLoc loc;
};

struct TransformScript {
    std::vector<Directive> directives;
};

/// Parses the text form. Throws ScriptError with "line:col" in the message.
TransformScript parse_script(std::string_view text);
std::string to_text(const TransformScript& script);

/// Applies directives in order. The first failure aborts with a ScriptError
/// carrying the directive index. An op reference `%name` binds to the op of
/// that name until a directive consumes it.
ScheduledProgram apply_script(const ir::StepProgram& program, const TransformScript& script);

inline constexpr std::string_view kPipelineNames[] = {"none", "tile", "tile+fuse", "tile+vec", "tile+vec+fuse"};

/// Accepts the names above plus "tile+fuse+vec". Throws ValidationError.
std::string canonical_pipeline(std::string_view name);

/// Script text for a named pipeline. Tile size and vector width follow the
/// target's lane count for `precision` (tile 16 on scalar targets).
std::string preset_script(std::string_view pipeline, Precision precision, const TargetDescriptor& target);

// ---- checkers ----------------------------------------------------------

struct PointVisit {
    ir::OpId op;
    Index i, j, k;

    friend auto operator<=>(const PointVisit&, const PointVisit&) = default;
};

/// Every (op, point) the forest executes, in execution order.
std::vector<PointVisit> enumerate_points(const ScheduledProgram& sp);

/// Empty when each op's executed points are exactly its domain, once each,
/// and each op appears exactly once in the forest.
std::vector<std::string> check_partition(const ScheduledProgram& sp);

/// Box-level conflicts between op sets `a` and `b`: same storage chain, at
/// least one write, overlapping touched index ranges. Empty means independent.
std::vector<std::string> find_conflicts(const ir::StepProgram& program, const std::vector<ir::OpId>& a,
                                        const std::vector<ir::OpId>& b);

/// Op ids under a node, in order.
std::vector<ir::OpId> ops_under(const ScheduleNode& n);

/// Range of `domain` along `axis` inside tile `t` of size `size`.
inline std::pair<Index, Index> tile_range(Index lo, Index hi, Index size, Index t) {
    const Index a = std::max(lo, t * size);
    const Index b = std::min(hi, (t + 1) * size);
    return {a, b};
}

inline Index floor_div(Index a, Index b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
inline Index ceil_div(Index a, Index b) { return -floor_div(-a, b); }

} // namespace fdtd::sched
