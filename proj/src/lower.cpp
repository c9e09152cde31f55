#include <cstdio>
#include <map>
#include <sstream>

#include "fdtd/error.hpp"
#include "fdtd/exec.hpp"

namespace fdtd::exec {

std::size_t LoweredKernel::input_count() const {
    std::size_t n = 0;
    for (const auto& b : buffers)
        if (b.input >= 0) ++n;
    return n;
}

namespace {

class Lowerer {
public:
    Lowerer(const sched::ScheduledProgram& sp, const TargetDescriptor& target) : sp_(sp), target_(target) {}

    LoweredKernel run() {
        const auto& prog = sp_.program;
        const auto& plan = sp_.plan;
        LoweredKernel k;
        k.precision = prog.elem;
        k.cells = prog.cells;
        k.target = target_.name;
        for (const auto& c : prog.constants) k.constants.push_back(c.value);

        if (plan.buffer_of.size() != prog.values.size())
            throw LoweringError("buffer plan covers " + std::to_string(plan.buffer_of.size()) + " of " +
                                std::to_string(prog.values.size()) + " values");
        k.buffers.resize(static_cast<std::size_t>(plan.buffer_count));
        std::vector<bool> seen(k.buffers.size(), false);
        for (const auto& v : prog.values) {
            const int b = plan.buffer_of[v.id];
            if (b < 0 || b >= plan.buffer_count) throw LoweringError("unresolved buffer for %" + v.name);
            if (!seen[b]) {
                seen[b] = true;
                k.buffers[b].shape = v.shape;
                k.buffers[b].value = v.name;
            } else if (k.buffers[b].shape != v.shape) {
                throw LoweringError("buffer " + std::to_string(b) + " holds values of different shapes");
            }
        }
        for (std::size_t n = 0; n < prog.inputs.size(); ++n) {
            const int b = plan.buffer_of[prog.inputs[n]];
            k.buffers[b].input = static_cast<int>(n);
            k.buffers[b].value = prog.value(prog.inputs[n]).name;
        }
        for (std::size_t b = 0; b < k.buffers.size(); ++b)
            if (!seen[b]) throw LoweringError("buffer " + std::to_string(b) + " is never bound");

        for (const auto& op : prog.ops) {
            index_[ir::op_id(op)] = static_cast<int>(k.ops.size());
            k.ops.push_back(lower_op(op));
        }
        for (std::size_t n = 0; n < sp_.forest.size(); ++n) {
            for (ir::OpId id : sched::ops_under(sp_.forest[n])) item_[id] = static_cast<int>(n);
        }

        for (std::size_t n = 0; n < sp_.forest.size(); ++n) {
            for (const auto& c : plan.copies) {
                if (c.before_item != static_cast<int>(n)) continue;
                check_copy(c);
                Stage s;
                s.kind = StageKind::copy;
                s.src = c.src;
                s.dst = c.dst;
                k.stages.push_back(s);
            }
            k.stages.push_back(lower_node(sp_.forest[n], k));
        }
        for (const auto& [src, dst] : plan.writeback) {
            Stage s;
            s.kind = StageKind::copy;
            s.src = src;
            s.dst = dst;
            k.stages.push_back(s);
        }
        return k;
    }

private:
    int buffer(ir::ValueId v) const { return sp_.plan.buffer_of.at(v); }

    KernelOp lower_op(const ir::Op& op) {
        KernelOp o;
        o.op = ir::op_id(op);
        o.name = ir::op_name(op);
        o.domain = ir::op_domain(op);
        if (const auto* c = std::get_if<ir::CurlStepOp>(&op)) {
            o.kind = KernelOp::Kind::curl;
            o.out_buffer = buffer(c->result);
            o.payload = c->payload;
            bool aliased = false;
            for (const auto& a : c->accesses) {
                KernelAccess ka;
                ka.role = a.role;
                ka.offset = a.offset;
                ka.buffer = a.role == ir::AccessRole::write ? o.out_buffer : buffer(a.operand);
                if (a.role == ir::AccessRole::read && ka.buffer == o.out_buffer) aliased = true;
                o.accesses.push_back(ka);
            }
            if (!aliased) o.canonical = ir::match_canonical(*c);
        } else {
            const auto& b = std::get<ir::BoundaryOp>(op);
            if (b.target) {
                o.kind = KernelOp::Kind::zero;
                o.out_buffer = buffer(b.target->result);
                o.accesses.push_back({o.out_buffer, {0, 0, 0}, ir::AccessRole::write});
            }
        }
        return o;
    }

    void check_copy(const sched::BufferCopy& c) {
        const auto& prog = sp_.program;
        const ir::OpId x = prog.value(c.value).defining_op;
        const auto u = ir::op_write_operand(prog.op(x));
        if (!u) return;
        const auto& uv = prog.value(*u);
        if (uv.origin == ir::TensorValue::Origin::op_result && item_.at(uv.defining_op) == item_.at(x))
            throw LoweringError("%" + prog.value(c.value).name + " needs a copy of %" + uv.name +
                                ", which is produced inside the same fused loop");
    }

    Stage lower_node(const sched::ScheduleNode& n, const LoweredKernel& k) {
        Stage s;
        if (n.kind == sched::ScheduleNode::Kind::op) {
            s.op = index_.at(n.op);
            const auto& o = k.ops[s.op];
            switch (o.kind) {
            case KernelOp::Kind::curl: s.kind = o.canonical ? StageKind::scalar_nest : StageKind::generic_nest; break;
            case KernelOp::Kind::zero: s.kind = StageKind::boundary; break;
            case KernelOp::Kind::noop: s.kind = StageKind::noop; break;
            }
            return s;
        }
        s.kind = StageKind::loop;
        s.axis = n.axis;
        s.size = n.size;
        s.tile_begin = n.tile_begin;
        s.tile_end = n.tile_end;
        s.width = n.scalable ? target_.lanes(sp_.program.elem) : n.vector_width;
        for (const auto& c : n.children) s.children.push_back(lower_node(c, k));
        return s;
    }

    const sched::ScheduledProgram& sp_;
    const TargetDescriptor& target_;
    std::map<ir::OpId, int> index_;
    std::map<ir::OpId, int> item_;
};

std::string offset_str(const Offset3& o) {
    return "(" + std::to_string(o[0]) + "," + std::to_string(o[1]) + "," + std::to_string(o[2]) + ")";
}

void dump_stage(std::ostream& os, const LoweredKernel& k, const Stage& s, int depth) {
    static constexpr const char* axes[] = {"i", "j", "k"};
    os << std::string(2 * static_cast<std::size_t>(depth), ' ');
    switch (s.kind) {
    case StageKind::copy: os << "copy b" << s.dst << " <- b" << s.src << '\n'; return;
    case StageKind::scalar_nest: os << "scalar-nest " << k.ops[s.op].name << '\n'; return;
    case StageKind::generic_nest: os << "generic-nest " << k.ops[s.op].name << '\n'; return;
    case StageKind::boundary: os << "boundary " << k.ops[s.op].name << '\n'; return;
    case StageKind::noop: os << "noop " << k.ops[s.op].name << '\n'; return;
    case StageKind::loop: break;
    }
    os << (s.fused() ? "fused" : "tiled");
    if (s.width > 0) os << " vector width=" << s.width;
    os << " axis=" << axes[s.axis] << " size=" << s.size << " tiles=[" << s.tile_begin << "," << s.tile_end << ")\n";
    for (const auto& c : s.children) dump_stage(os, k, c, depth + 1);
}

} // namespace

LoweredKernel lower(const sched::ScheduledProgram& scheduled, const TargetDescriptor& target) {
    return Lowerer(scheduled, target).run();
}

LoweredKernel lower_pipeline(const SimParams& params, std::string_view pipeline, const TargetDescriptor& target) {
    const auto program = ir::build_step_program(params);
    const auto script = sched::parse_script(sched::preset_script(pipeline, params.precision, target));
    return lower(sched::apply_script(program, script), target);
}

std::string LoweredKernel::dump() const {
    std::ostringstream os;
    os << "kernel precision=" << to_string(precision) << " cells=" << to_string(cells) << " target=" << target << '\n';
    for (std::size_t n = 0; n < constants.size(); ++n) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", constants[n]);
        os << "const " << n << " = " << buf << '\n';
    }
    for (std::size_t b = 0; b < buffers.size(); ++b) {
        os << "buffer b" << b << ' ' << to_string(buffers[b].shape) << " %" << buffers[b].value;
        if (buffers[b].input >= 0) os << " input=" << buffers[b].input;
        else os << " scratch";
        os << '\n';
    }
    for (const auto& o : ops) {
        os << "op " << o.op << ' ' << o.name << " domain=" << to_string(o.domain);
        if (o.kind == KernelOp::Kind::noop) {
            os << " noop\n";
            continue;
        }
        os << " out=b" << o.out_buffer;
        if (o.kind == KernelOp::Kind::zero) {
            os << " zero\n";
            continue;
        }
        os << " form=" << (o.canonical ? "canonical" : "generic") << " reads={";
        bool first = true;
        for (const auto& a : o.accesses) {
            if (a.role != ir::AccessRole::read) continue;
            os << (first ? "" : " ") << 'b' << a.buffer << offset_str(a.offset);
            first = false;
        }
        os << "}\n";
    }
    os << "stages\n";
    for (const auto& s : stages) dump_stage(os, *this, s, 1);
    return os.str();
}

} // namespace fdtd::exec
