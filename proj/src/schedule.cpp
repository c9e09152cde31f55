#include "fdtd/schedule.hpp"

#include <set>

#include "fdtd/error.hpp"

namespace fdtd::sched {

namespace {

const char* axis_name(int a) {
    static constexpr const char* n[] = {"i", "j", "k"};
    return a >= 0 && a < 3 ? n[a] : "?";
}

void collect_ops(const ScheduleNode& n, std::vector<ir::OpId>& out) {
    if (n.kind == ScheduleNode::Kind::op) {
        out.push_back(n.op);
        return;
    }
    for (const auto& c : n.children) collect_ops(c, out);
}

struct Found {
    std::vector<ScheduleNode>* list = nullptr;
    std::size_t index = 0;
    std::vector<const ScheduleNode*> ancestors;
};

template <typename Pred>
bool find_in(std::vector<ScheduleNode>& list, Pred&& pred, Found& out, std::vector<const ScheduleNode*>& path) {
    for (std::size_t n = 0; n < list.size(); ++n) {
        if (pred(list[n])) {
            out.list = &list;
            out.index = n;
            out.ancestors = path;
            return true;
        }
        if (list[n].kind == ScheduleNode::Kind::loop) {
            path.push_back(&list[n]);
            if (find_in(list[n].children, pred, out, path)) return true;
            path.pop_back();
        }
    }
    return false;
}

std::string access_str(const ir::StepProgram& p, const ir::Access& a) {
    const auto& o = a.offset;
    return std::string(a.role == ir::AccessRole::write ? "writes " : "reads ") + "%" + p.value(a.operand).name + "(" +
           std::to_string(o[0]) + "," + std::to_string(o[1]) + "," + std::to_string(o[2]) + ")";
}

} // namespace

std::vector<ir::OpId> ops_under(const ScheduleNode& n) {
    std::vector<ir::OpId> out;
    collect_ops(n, out);
    return out;
}

std::vector<std::string> find_conflicts(const ir::StepProgram& program, const std::vector<ir::OpId>& a,
                                        const std::vector<ir::OpId>& b) {
    std::vector<std::string> out;
    for (ir::OpId x : a) {
        const auto& ox = program.op(x);
        const auto ax = ir::op_accesses(ox);
        for (ir::OpId y : b) {
            const auto& oy = program.op(y);
            const auto ay = ir::op_accesses(oy);
            for (const auto& p : ax)
                for (const auto& q : ay) {
                    if (p.role != ir::AccessRole::write && q.role != ir::AccessRole::write) continue;
                    if (program.chain_root(p.operand) != program.chain_root(q.operand)) continue;
                    const Box overlap = intersect(ir::op_domain(ox).shifted(p.offset), ir::op_domain(oy).shifted(q.offset));
                    if (overlap.empty()) continue;
                    out.push_back(ir::op_name(ox) + " " + access_str(program, p) + " and " + ir::op_name(oy) + " " +
                                  access_str(program, q) + " overlap on " + to_string(overlap));
                }
        }
    }
    return out;
}

Scheduler::Scheduler(ir::StepProgram program) : program_(std::move(program)) {
    for (const auto& op : program_.ops) forest_.push_back(ScheduleNode::leaf(ir::op_id(op)));
}

Handle Scheduler::make_handle(HandleKind kind, int id) {
    const int h = next_handle_++;
    handles_[h] = {kind, id};
    return {kind, h};
}

int Scheduler::take(Handle h, HandleKind expect, const char* what) {
    const auto it = handles_.find(h.id);
    if (it == handles_.end()) throw ScriptError(std::string("dangling ") + what + " handle");
    if (it->second.kind != expect || h.kind != expect)
        throw ScriptError(std::string("expected a ") + what + " handle");
    const int target = it->second.id;
    handles_.erase(it);
    return target;
}

Handle Scheduler::op_handle(std::string_view op_name) {
    const auto id = program_.find_op(op_name);
    if (!id) throw ScriptError("no op named '" + std::string(op_name) + "'");
    return op_handle(*id);
}

Handle Scheduler::op_handle(ir::OpId id) {
    if (program_.position(id) < 0) throw ScriptError("no op with id " + std::to_string(id));
    return make_handle(HandleKind::op, id);
}

std::pair<Handle, Handle> Scheduler::tile(Handle op, int axis, Index size) {
    if (axis < 0 || axis > 2) throw ScriptError("tile axis must be i, j or k");
    if (size < 1) throw ScriptError("tile size must be >= 1, got " + std::to_string(size));
    if (!live(op)) throw ScriptError("dangling op handle");
    const int id = take(op, HandleKind::op, "op");

    Found f;
    std::vector<const ScheduleNode*> path;
    if (!find_in(forest_, [&](const ScheduleNode& n) { return n.kind == ScheduleNode::Kind::op && n.op == id; }, f,
                 path))
        throw ScriptError("op " + std::to_string(id) + " is not in the schedule");
    for (const auto* a : f.ancestors)
        if (a->axis == axis)
            throw ScriptError(ir::op_name(program_.op(id)) + " is already tiled along " + axis_name(axis));
    if (!f.ancestors.empty() && f.ancestors.back()->vectorized())
        throw ScriptError("cannot tile inside vectorized loop " + std::to_string(f.ancestors.back()->loop_id));

    const Box& dom = ir::op_domain(program_.op(id));
    if (dom.empty()) throw ScriptError(ir::op_name(program_.op(id)) + " has an empty domain");
    ScheduleNode loop;
    loop.kind = ScheduleNode::Kind::loop;
    loop.loop_id = next_loop_++;
    loop.axis = axis;
    loop.size = size;
    loop.tile_begin = floor_div(dom.lo[axis], size);
    loop.tile_end = ceil_div(dom.hi[axis], size);
    loop.children.push_back(std::move((*f.list)[f.index]));
    (*f.list)[f.index] = std::move(loop);
    const int loop_id = (*f.list)[f.index].loop_id;
    return {make_handle(HandleKind::op, id), make_handle(HandleKind::loop, loop_id)};
}

Handle Scheduler::fuse_siblings(Handle a, Handle b) {
    if (!live(a) || !live(b)) throw ScriptError("dangling loop handle");
    if (a.id == b.id) throw ScriptError("cannot fuse a loop with itself");
    if (handles_.at(a.id).kind != HandleKind::loop || handles_.at(b.id).kind != HandleKind::loop)
        throw ScriptError("fuse expects two loop handles");
    const int la = handles_.at(a.id).id, lb = handles_.at(b.id).id;

    auto is_loop = [](int id) {
        return [id](const ScheduleNode& n) { return n.kind == ScheduleNode::Kind::loop && n.loop_id == id; };
    };
    Found fa, fb;
    std::vector<const ScheduleNode*> pa, pb;
    if (!find_in(forest_, is_loop(la), fa, pa) || !find_in(forest_, is_loop(lb), fb, pb))
        throw ScriptError("loop handle no longer names a loop");
    if (la == lb) throw ScriptError("cannot fuse a loop with itself");
    if (fa.list != fb.list) throw ScriptError("structure mismatch: loops are not siblings");

    const ScheduleNode& na = (*fa.list)[fa.index];
    const ScheduleNode& nb = (*fb.list)[fb.index];
    if (na.axis != nb.axis || na.size != nb.size || na.tile_begin != nb.tile_begin || na.tile_end != nb.tile_end) {
        auto desc = [](const ScheduleNode& n) {
            return std::string("axis ") + axis_name(n.axis) + " size " + std::to_string(n.size) + " tiles [" +
                   std::to_string(n.tile_begin) + "," + std::to_string(n.tile_end) + ")";
        };
        throw ScriptError("structure mismatch: " + desc(na) + " vs " + desc(nb));
    }
    if (na.vectorized() || nb.vectorized()) throw ScriptError("cannot fuse a vectorized loop");

    const auto ops_a = ops_under(na), ops_b = ops_under(nb);
    auto conflicts = find_conflicts(program_, ops_a, ops_b);
    // The later loop moves up to the earlier one's position.
    const std::size_t lo = std::min(fa.index, fb.index), hi = std::max(fa.index, fb.index);
    const auto& moved = hi == fb.index ? ops_b : ops_a;
    for (std::size_t n = lo + 1; n < hi; ++n) {
        auto more = find_conflicts(program_, ops_under((*fa.list)[n]), moved);
        conflicts.insert(conflicts.end(), more.begin(), more.end());
    }
    if (!conflicts.empty()) {
        std::string msg = "not independent:";
        for (const auto& c : conflicts) msg += "\n  " + c;
        throw ScriptError(msg);
    }

    take(a, HandleKind::loop, "loop");
    take(b, HandleKind::loop, "loop");
    ScheduleNode fused;
    fused.kind = ScheduleNode::Kind::loop;
    fused.loop_id = next_loop_++;
    fused.axis = na.axis;
    fused.size = na.size;
    fused.tile_begin = na.tile_begin;
    fused.tile_end = na.tile_end;
    fused.children = na.children;
    fused.children.insert(fused.children.end(), nb.children.begin(), nb.children.end());
    auto& list = *fa.list;
    list[lo] = std::move(fused);
    list.erase(list.begin() + static_cast<std::ptrdiff_t>(hi));
    return make_handle(HandleKind::loop, list[lo].loop_id);
}

const BufferPlan& Scheduler::plan_inplace() {
    if (planned_) throw ScriptError("plan-inplace may appear only once");
    planned_ = true;
    plan_ = plan_buffers(program_, forest_);
    return plan_;
}

void Scheduler::vectorize(Handle loop, int width, bool scalable) {
    if (!planned_) throw ScriptError("vectorize must follow plan-inplace");
    if (!live(loop) || handles_.at(loop.id).kind != HandleKind::loop) throw ScriptError("dangling loop handle");
    if (scalable) {
        if (width != 0) throw ScriptError("scalable vectorize takes no explicit width");
    } else if (width < 1 || width > 64 || (width & (width - 1)) != 0) {
        throw ScriptError("vector width " + std::to_string(width) + " is not a power of two in [1,64]");
    }
    const int id = handles_.at(loop.id).id;
    Found f;
    std::vector<const ScheduleNode*> path;
    if (!find_in(forest_, [&](const ScheduleNode& n) { return n.kind == ScheduleNode::Kind::loop && n.loop_id == id; },
                 f, path))
        throw ScriptError("loop handle no longer names a loop");
    auto& n = (*f.list)[f.index];
    if (n.axis != 2) throw ScriptError(std::string("only k loops can be vectorized, this one runs along ") + axis_name(n.axis));
    for (const auto& c : n.children)
        if (c.kind != ScheduleNode::Kind::op) throw ScriptError("loop is not innermost");
    if (n.vectorized()) throw ScriptError("loop is already vectorized");
    n.vector_width = width;
    n.scalable = scalable;
}

ScheduledProgram Scheduler::finish() const {
    return {program_, forest_, plan_buffers(program_, forest_)};
}

BufferPlan plan_buffers(const ir::StepProgram& program, const std::vector<ScheduleNode>& forest) {
    std::map<ir::OpId, int> item;
    for (std::size_t n = 0; n < forest.size(); ++n)
        for (ir::OpId id : ops_under(forest[n])) item[id] = static_cast<int>(n);
    for (const auto& op : program.ops)
        if (!item.contains(ir::op_id(op))) throw IrError("op " + ir::op_name(op) + " missing from the schedule");

    BufferPlan plan;
    plan.buffer_of.assign(program.values.size(), -1);
    for (std::size_t n = 0; n < program.inputs.size(); ++n) plan.buffer_of[program.inputs[n]] = static_cast<int>(n);
    plan.buffer_count = static_cast<int>(program.inputs.size());
    const std::set<ir::ValueId> outputs(program.outputs.begin(), program.outputs.end());

    for (const auto& x : program.ops) {
        const auto result = ir::op_result(x);
        const auto u = ir::op_write_operand(x);
        if (!result || !u) continue;
        const ir::OpId xid = ir::op_id(x);
        std::string reason;
        for (const auto& a : ir::op_accesses(x))
            if (a.operand == *u && a.role == ir::AccessRole::read && a.offset != Offset3{0, 0, 0})
                reason = "reads its own input at a non-zero offset";
        for (const auto& y : program.ops) {
            const ir::OpId yid = ir::op_id(y);
            if (yid == xid || !reason.empty()) continue;
            for (const auto& a : ir::op_accesses(y)) {
                if (a.operand != *u) continue;
                if (item[yid] > item[xid]) {
                    reason = "%" + program.value(*u).name + " is used later by " + ir::op_name(y);
                } else if (item[yid] == item[xid] && a.role == ir::AccessRole::write) {
                    reason = "%" + program.value(*u).name + " is also updated by " + ir::op_name(y);
                }
            }
        }
        if (reason.empty() && outputs.contains(*u)) reason = "%" + program.value(*u).name + " is a program output";

        if (reason.empty()) {
            plan.buffer_of[*result] = plan.buffer_of[*u];
        } else {
            const int b = plan.buffer_count++;
            ++plan.extra_buffers;
            plan.buffer_of[*result] = b;
            plan.copies.push_back({item[xid], plan.buffer_of[*u], b, *result});
            plan.fallbacks.push_back("%" + program.value(*result).name + ": " + reason);
        }
    }
    for (std::size_t n = 0; n < program.inputs.size() && n < program.outputs.size(); ++n) {
        const int src = plan.buffer_of[program.outputs[n]];
        const int dst = plan.buffer_of[program.inputs[n]];
        if (src != dst) plan.writeback.emplace_back(src, dst);
    }
    return plan;
}

ScheduledProgram unscheduled(const ir::StepProgram& program) { return Scheduler(program).finish(); }

namespace {

struct Restriction {
    int axis;
    Index size, tile;
};

void visit(const ScheduledProgram& sp, const ScheduleNode& n, std::vector<Restriction>& r,
           std::vector<PointVisit>& out) {
    if (n.kind == ScheduleNode::Kind::loop) {
        for (Index t = n.tile_begin; t < n.tile_end; ++t) {
            r.push_back({n.axis, n.size, t});
            for (const auto& c : n.children) visit(sp, c, r, out);
            r.pop_back();
        }
        return;
    }
    Box b = ir::op_domain(sp.program.op(n.op));
    for (const auto& x : r) std::tie(b.lo[x.axis], b.hi[x.axis]) = tile_range(b.lo[x.axis], b.hi[x.axis], x.size, x.tile);
    if (b.empty()) return;
    for (Index i = b.lo[0]; i < b.hi[0]; ++i)
        for (Index j = b.lo[1]; j < b.hi[1]; ++j)
            for (Index k = b.lo[2]; k < b.hi[2]; ++k) out.push_back({n.op, i, j, k});
}

} // namespace

std::vector<PointVisit> enumerate_points(const ScheduledProgram& sp) {
    std::vector<PointVisit> out;
    std::vector<Restriction> r;
    for (const auto& n : sp.forest) visit(sp, n, r, out);
    return out;
}

std::vector<std::string> check_partition(const ScheduledProgram& sp) {
    std::vector<std::string> problems;
    std::map<ir::OpId, int> seen;
    for (const auto& n : sp.forest)
        for (ir::OpId id : ops_under(n)) ++seen[id];
    for (const auto& op : sp.program.ops) {
        const int c = seen[ir::op_id(op)];
        if (c != 1) problems.push_back(ir::op_name(op) + " appears " + std::to_string(c) + " times in the forest");
    }
    auto visits = enumerate_points(sp);
    std::sort(visits.begin(), visits.end());
    std::map<ir::OpId, Index> count;
    for (std::size_t n = 0; n < visits.size(); ++n) {
        const auto& v = visits[n];
        if (n > 0 && visits[n - 1] == v) {
            problems.push_back("point (" + std::to_string(v.i) + "," + std::to_string(v.j) + "," + std::to_string(v.k) +
                               ") of op " + std::to_string(v.op) + " executed twice");
            continue;
        }
        if (!ir::op_domain(sp.program.op(v.op)).contains(v.i, v.j, v.k)) {
            problems.push_back("op " + std::to_string(v.op) + " executed outside its domain");
            continue;
        }
        ++count[v.op];
    }
    for (const auto& op : sp.program.ops) {
        const Index want = ir::op_domain(op).points();
        if (count[ir::op_id(op)] != want)
            problems.push_back(ir::op_name(op) + " executed " + std::to_string(count[ir::op_id(op)]) + " of " +
                               std::to_string(want) + " points");
    }
    return problems;
}

std::string canonical_pipeline(std::string_view name) {
    if (name == "tile+fuse+vec") return "tile+vec+fuse";
    for (auto n : kPipelineNames)
        if (n == name) return std::string(n);
    throw ValidationError("unknown pipeline '" + std::string(name) + "' (expected none, tile, tile+fuse, tile+vec or tile+vec+fuse)");
}

std::string preset_script(std::string_view pipeline, Precision precision, const TargetDescriptor& target) {
    const std::string name = canonical_pipeline(pipeline);
    const int lanes = target.lanes(precision);
    const int size = lanes > 1 ? lanes : 16;
    const bool fuse = name == "tile+fuse" || name == "tile+vec+fuse";
    const bool vec = name == "tile+vec" || name == "tile+vec+fuse";
    std::string s = "# " + name + " " + std::string(to_string(precision)) + " target=" + target.name + "\n";
    if (name == "none") return s;
    for (const char* c : {"hx", "hy", "hz", "ex", "ey", "ez"})
        s += std::string("%") + c + ", %l" + c + " = tile %curl_" + c + " axis=k size=" + std::to_string(size) + "\n";
    std::vector<std::string> loops{"lhx", "lhy", "lhz", "lex", "ley", "lez"};
    if (fuse) {
        s += "%lh2 = fuse %lhx %lhy\n%lh = fuse %lh2 %lhz\n";
        s += "%le2 = fuse %lex %ley\n%le = fuse %le2 %lez\n";
        loops = {"lh", "le"};
    }
    if (vec) {
        s += "plan-inplace\n";
        const std::string w = target.scalable ? " scalable" : " width=" + std::to_string(lanes);
        for (const auto& l : loops) s += "vectorize %" + l + w + "\n";
    }
    return s;
}

} // namespace fdtd::sched
