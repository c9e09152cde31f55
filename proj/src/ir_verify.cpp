#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "fdtd/ir.hpp"

namespace fdtd::ir {

std::string_view to_string(DiagKind k) {
    switch (k) {
    case DiagKind::ssa_redefinition: return "ssa-redefinition";
    case DiagKind::undefined_value: return "undefined-value";
    case DiagKind::use_before_def: return "use-before-def";
    case DiagKind::out_of_bounds_read: return "out-of-bounds read";
    case DiagKind::out_of_bounds_write: return "out-of-bounds write";
    case DiagKind::empty_domain: return "empty-domain";
    case DiagKind::write_count: return "write-count";
    case DiagKind::write_offset: return "write-offset";
    case DiagKind::shape_mismatch: return "shape-mismatch";
    case DiagKind::elem_mismatch: return "elem-mismatch";
    case DiagKind::ordering: return "ordering";
    case DiagKind::non_parallel_iterator: return "non-parallel-iterator";
    case DiagKind::malformed_payload: return "malformed-payload";
    }
    return "?";
}

namespace {

const char* axis_name(int a) {
    static constexpr const char* n[] = {"i", "j", "k"};
    return a >= 0 && a < 3 ? n[a] : "?";
}

std::string offset_str(const Offset3& o) {
    return "(" + std::to_string(o[0]) + "," + std::to_string(o[1]) + "," + std::to_string(o[2]) + ")";
}

bool valid_value(const StepProgram& p, ValueId id) {
    return id >= 0 && id < static_cast<ValueId>(p.values.size()) && p.values[id].id == id;
}

class Verifier {
public:
    explicit Verifier(const StepProgram& p) : p_(p) {}

    std::vector<Diagnostic> run() {
        check_values();
        for (ValueId in : p_.inputs) {
            if (!valid_value(p_, in)) {
                diag(DiagKind::undefined_value, -1, -1, "program input %" + std::to_string(in) + " is not in the value table");
                continue;
            }
            define(in, -1);
        }
        bool seen_e = false;
        for (const auto& op : p_.ops) {
            const OpId id = op_id(op);
            if (op_group(op) == OpGroup::e_field) seen_e = true;
            if (op_group(op) == OpGroup::h_field && seen_e)
                diag(DiagKind::ordering, id, -1, "H-field op '" + op_name(op) + "' follows an E-field op");
            if (const auto* c = std::get_if<CurlStepOp>(&op)) check_curl(*c);
            else check_boundary(std::get<BoundaryOp>(op));
        }
        for (ValueId out : p_.outputs)
            if (!defined_.contains(out))
                diag(DiagKind::undefined_value, -1, -1, "program output %" + std::to_string(out) + " is never defined");
        return std::move(diags_);
    }

private:
    void diag(DiagKind k, OpId op, int axis, std::string msg) {
        diags_.push_back({k, op, axis, std::move(msg)});
    }

    std::string vname(ValueId id) const {
        return valid_value(p_, id) ? "%" + p_.values[id].name : "%<" + std::to_string(id) + ">";
    }

    void check_values() {
        for (std::size_t n = 0; n < p_.values.size(); ++n) {
            const auto& v = p_.values[n];
            if (v.id != static_cast<ValueId>(n))
                diag(DiagKind::ssa_redefinition, -1, -1, "value table slot " + std::to_string(n) + " holds id " +
                                                              std::to_string(v.id));
            for (int d = 0; d < 3; ++d)
                if (v.shape[d] < 1)
                    diag(DiagKind::shape_mismatch, v.defining_op, d, "value %" + v.name + " has extent < 1 on axis " + axis_name(d));
            if (v.elem != p_.elem)
                diag(DiagKind::elem_mismatch, v.defining_op, -1, "value %" + v.name + " is " + std::string(to_string(v.elem)) +
                                                                     ", program is " + std::string(to_string(p_.elem)));
        }
    }

    void define(ValueId id, OpId op) {
        if (!defined_.insert(id).second) {
            diag(DiagKind::ssa_redefinition, op, -1, "value " + vname(id) + " defined more than once");
        }
    }

    void use(ValueId id, OpId op) {
        if (!valid_value(p_, id)) {
            diag(DiagKind::undefined_value, op, -1, "operand " + vname(id) + " is not in the value table");
            return;
        }
        if (!defined_.contains(id)) diag(DiagKind::use_before_def, op, -1, "operand " + vname(id) + " used before its definition");
    }

    void check_bounds(OpId op, const Box& domain, const Access& a) {
        if (!valid_value(p_, a.operand)) return;
        const Box touched = domain.shifted(a.offset);
        const auto& shape = p_.values[a.operand].shape;
        for (int d = 0; d < 3; ++d) {
            if (touched.lo[d] < 0 || touched.hi[d] > shape[d]) {
                const bool w = a.role == AccessRole::write;
                diag(w ? DiagKind::out_of_bounds_write : DiagKind::out_of_bounds_read, op, d,
                     std::string(w ? "write" : "read") + " of " + vname(a.operand) + " at offset " + offset_str(a.offset) +
                         " reaches [" + std::to_string(touched.lo[d]) + "," + std::to_string(touched.hi[d]) +
                         ") on axis " + axis_name(d) + ", extent " + std::to_string(shape[d]));
            }
        }
    }

    void check_domain(OpId op, const Box& b) {
        for (int d = 0; d < 3; ++d)
            if (b.extent(d) <= 0) diag(DiagKind::empty_domain, op, d, std::string("empty domain on axis ") + axis_name(d));
    }

    void check_payload(const CurlStepOp& c) {
        const auto& n = c.payload.nodes;
        const int size = static_cast<int>(n.size());
        auto bad = [&](const std::string& m) { diag(DiagKind::malformed_payload, c.id, -1, m); };
        if (c.payload.root < 0 || c.payload.root >= size) {
            bad("payload root out of range");
            return;
        }
        for (int i = 0; i < size; ++i) {
            const auto& x = n[i];
            switch (x.kind) {
            case PayloadNode::Kind::out: break;
            case PayloadNode::Kind::read:
                if (x.access < 0 || x.access >= static_cast<int>(c.accesses.size()) ||
                    c.accesses[x.access].role != AccessRole::read)
                    bad("node " + std::to_string(i) + " reads a non-read access");
                break;
            case PayloadNode::Kind::constant:
                if (x.constant < 0 || x.constant >= static_cast<int>(p_.constants.size()))
                    bad("node " + std::to_string(i) + " names an unknown constant");
                break;
            default:
                if (x.lhs < 0 || x.lhs >= i || x.rhs < 0 || x.rhs >= i)
                    bad("node " + std::to_string(i) + " has children that do not precede it");
            }
        }
    }

    void check_curl(const CurlStepOp& c) {
        int writes = 0;
        const Access* w = nullptr;
        for (const auto& a : c.accesses) {
            use(a.operand, c.id);
            if (a.role == AccessRole::write) {
                ++writes;
                w = &a;
                if (a.offset != Offset3{0, 0, 0})
                    diag(DiagKind::write_offset, c.id, -1, "write access has non-zero offset " + offset_str(a.offset));
            }
        }
        if (writes != 1) diag(DiagKind::write_count, c.id, -1, std::to_string(writes) + " write accesses (expected 1)");
        for (int d = 0; d < 3; ++d)
            if (c.iterators[d] != IteratorKind::parallel)
                diag(DiagKind::non_parallel_iterator, c.id, d, std::string("iterator ") + axis_name(d) + " is not parallel");
        check_domain(c.id, c.domain);
        if (!c.domain.empty())
            for (const auto& a : c.accesses) check_bounds(c.id, c.domain, a);
        check_payload(c);
        if (!valid_value(p_, c.result)) {
            diag(DiagKind::undefined_value, c.id, -1, "result " + vname(c.result) + " is not in the value table");
            return;
        }
        if (p_.values[c.result].defining_op != c.id || p_.values[c.result].origin != TensorValue::Origin::op_result)
            diag(DiagKind::ssa_redefinition, c.id, -1, "result " + vname(c.result) + " records a different definition");
        if (w && valid_value(p_, w->operand) && p_.values[w->operand].shape != p_.values[c.result].shape)
            diag(DiagKind::shape_mismatch, c.id, -1, "result " + vname(c.result) + " shape differs from written operand " +
                                                         vname(w->operand));
        define(c.result, c.id);
    }

    void check_boundary(const BoundaryOp& b) {
        check_domain(b.id, b.domain);
        if (!b.target) return;
        use(b.target->operand, b.id);
        if (!b.domain.empty()) check_bounds(b.id, b.domain, {b.target->operand, {0, 0, 0}, AccessRole::write});
        if (!valid_value(p_, b.target->result)) {
            diag(DiagKind::undefined_value, b.id, -1, "result " + vname(b.target->result) + " is not in the value table");
            return;
        }
        if (valid_value(p_, b.target->operand) &&
            p_.values[b.target->operand].shape != p_.values[b.target->result].shape)
            diag(DiagKind::shape_mismatch, b.id, -1, "result shape differs from written operand");
        define(b.target->result, b.id);
    }

    const StepProgram& p_;
    std::set<ValueId> defined_;
    std::vector<Diagnostic> diags_;
};

} // namespace

std::vector<Diagnostic> verify(const StepProgram& program) { return Verifier(program).run(); }

InferredDomain iteration_domain(const StepProgram& program, const CurlStepOp& op) {
    InferredDomain r;
    r.box.lo = {0, 0, 0};
    r.box.hi = {std::numeric_limits<Index>::max(), std::numeric_limits<Index>::max(), std::numeric_limits<Index>::max()};
    if (op.accesses.empty()) {
        r.box.hi = {0, 0, 0};
        r.diagnostics.push_back({DiagKind::empty_domain, op.id, -1, "op has no accesses to infer a domain from"});
        return r;
    }
    for (const auto& a : op.accesses) {
        if (!valid_value(program, a.operand)) {
            r.diagnostics.push_back({DiagKind::undefined_value, op.id, -1, "unknown operand " + std::to_string(a.operand)});
            continue;
        }
        const auto& s = program.values[a.operand].shape;
        for (int d = 0; d < 3; ++d) {
            r.box.lo[d] = std::max<Index>(r.box.lo[d], -a.offset[d]);
            r.box.hi[d] = std::min<Index>(r.box.hi[d], s[d] - a.offset[d]);
        }
    }
    for (int d = 0; d < 3; ++d)
        if (r.box.extent(d) <= 0)
            r.diagnostics.push_back({DiagKind::empty_domain, op.id, d, std::string("inferred extent <= 0 on axis ") + axis_name(d)});
    return r;
}

namespace {

void print_payload(std::ostream& os, const StepProgram& p, const CurlStepOp& c, int node) {
    if (node < 0 || node >= static_cast<int>(c.payload.nodes.size())) {
        os << "<bad>";
        return;
    }
    const auto& n = c.payload.nodes[node];
    switch (n.kind) {
    case PayloadNode::Kind::out: os << "out"; return;
    case PayloadNode::Kind::read: {
        if (n.access < 0 || n.access >= static_cast<int>(c.accesses.size())) {
            os << "<bad-read>";
            return;
        }
        const auto& a = c.accesses[n.access];
        os << (valid_value(p, a.operand) ? "%" + p.values[a.operand].name : "%?") << offset_str(a.offset);
        return;
    }
    case PayloadNode::Kind::constant:
        os << "$" << (n.constant >= 0 && n.constant < static_cast<int>(p.constants.size()) ? p.constants[n.constant].name : "?");
        return;
    case PayloadNode::Kind::add: os << "(add "; break;
    case PayloadNode::Kind::sub: os << "(sub "; break;
    case PayloadNode::Kind::mul: os << "(mul "; break;
    }
    print_payload(os, p, c, n.lhs);
    os << ' ';
    print_payload(os, p, c, n.rhs);
    os << ')';
}

const char* group_name(OpGroup g) {
    switch (g) {
    case OpGroup::h_field: return "h";
    case OpGroup::e_field: return "e";
    case OpGroup::other: return "other";
    }
    return "?";
}

} // namespace

std::string print_ir(const StepProgram& p) {
    std::ostringstream os;
    auto name = [&](ValueId id) { return valid_value(p, id) ? "%" + p.values[id].name : "%?"; };
    os << "program cells=" << fdtd::to_string(p.cells) << " elem=" << to_string(p.elem) << '\n';
    for (std::size_t n = 0; n < p.constants.size(); ++n) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", p.constants[n].value);
        os << "const $" << p.constants[n].name << " = " << buf << '\n';
    }
    for (ValueId in : p.inputs) {
        os << "input " << name(in);
        if (valid_value(p, in)) os << " : " << to_string(p.values[in].elem) << fdtd::to_string(p.values[in].shape);
        os << '\n';
    }
    for (const auto& op : p.ops) {
        os << "op " << op_id(op) << ' ' << op_name(op) << " group=" << group_name(op_group(op))
           << " domain=" << to_string(op_domain(op));
        if (const auto* c = std::get_if<CurlStepOp>(&op)) {
            os << " -> " << name(c->result) << " accesses={";
            for (std::size_t n = 0; n < c->accesses.size(); ++n) {
                const auto& a = c->accesses[n];
                os << (n ? " " : "") << (a.role == AccessRole::write ? "rw " : "r ") << name(a.operand)
                   << offset_str(a.offset);
            }
            os << "} payload=";
            print_payload(os, p, *c, c->payload.root);
        } else {
            const auto& b = std::get<BoundaryOp>(op);
            os << " face=" << to_string(b.face);
            if (b.target)
                os << " -> " << name(b.target->result) << " zero " << name(b.target->operand);
            else
                os << " noop";
        }
        os << '\n';
    }
    os << "outputs";
    for (ValueId out : p.outputs) os << ' ' << name(out);
    os << '\n';
    return os.str();
}

} // namespace fdtd::ir
