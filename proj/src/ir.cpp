#include "fdtd/ir.hpp"

#include <algorithm>
#include <stdexcept>

#include "fdtd/error.hpp"

namespace fdtd::ir {

namespace {

int push(Payload& p, PayloadNode n) {
    p.nodes.push_back(n);
    p.root = static_cast<int>(p.nodes.size()) - 1;
    return p.root;
}

} // namespace

int Payload::out() { return push(*this, {PayloadNode::Kind::out}); }
int Payload::read(int access) { return push(*this, {PayloadNode::Kind::read, access}); }
int Payload::constant(int index) { return push(*this, {PayloadNode::Kind::constant, -1, index}); }
int Payload::add(int a, int b) { return push(*this, {PayloadNode::Kind::add, -1, -1, a, b}); }
int Payload::sub(int a, int b) { return push(*this, {PayloadNode::Kind::sub, -1, -1, a, b}); }
int Payload::mul(int a, int b) { return push(*this, {PayloadNode::Kind::mul, -1, -1, a, b}); }

std::string_view to_string(Face f) {
    static constexpr std::array<std::string_view, 6> names{"xlo", "xhi", "ylo", "yhi", "zlo", "zhi"};
    return names[static_cast<int>(f)];
}

OpId op_id(const Op& op) {
    return std::visit([](const auto& o) { return o.id; }, op);
}

const std::string& op_name(const Op& op) {
    return std::visit([](const auto& o) -> const std::string& { return o.name; }, op);
}

OpGroup op_group(const Op& op) {
    return std::visit([](const auto& o) { return o.group; }, op);
}

const Box& op_domain(const Op& op) {
    return std::visit([](const auto& o) -> const Box& { return o.domain; }, op);
}

std::vector<Access> op_accesses(const Op& op) {
    if (const auto* c = std::get_if<CurlStepOp>(&op)) return c->accesses;
    const auto& b = std::get<BoundaryOp>(op);
    if (!b.target) return {};
    return {Access{b.target->operand, {0, 0, 0}, AccessRole::write}};
}

std::optional<ValueId> op_result(const Op& op) {
    if (const auto* c = std::get_if<CurlStepOp>(&op)) return c->result;
    const auto& b = std::get<BoundaryOp>(op);
    if (!b.target) return std::nullopt;
    return b.target->result;
}

std::optional<ValueId> op_write_operand(const Op& op) {
    for (const auto& a : op_accesses(op))
        if (a.role == AccessRole::write) return a.operand;
    return std::nullopt;
}

const TensorValue& StepProgram::value(ValueId id) const {
    if (id < 0 || id >= static_cast<ValueId>(values.size()) || values[id].id != id)
        throw IrError("unknown value id " + std::to_string(id));
    return values[id];
}

const Op& StepProgram::op(OpId id) const {
    const int pos = position(id);
    if (pos < 0) throw IrError("unknown op id " + std::to_string(id));
    return ops[pos];
}

int StepProgram::position(OpId id) const {
    for (std::size_t n = 0; n < ops.size(); ++n)
        if (op_id(ops[n]) == id) return static_cast<int>(n);
    return -1;
}

std::optional<OpId> StepProgram::find_op(std::string_view name) const {
    for (const auto& o : ops)
        if (op_name(o) == name) return op_id(o);
    return std::nullopt;
}

ValueId StepProgram::chain_root(ValueId id) const {
    // Bounded walk: a malformed cyclic program must not hang.
    for (std::size_t guard = 0; guard <= values.size(); ++guard) {
        const auto& v = value(id);
        if (v.origin == TensorValue::Origin::program_input) return id;
        const auto w = op_write_operand(op(v.defining_op));
        if (!w) throw IrError("value %" + v.name + " has no write operand to chain through");
        id = *w;
    }
    throw IrError("cyclic accumulation chain");
}

ProgramBuilder::ProgramBuilder(Shape3 cells, Precision elem) {
    prog_.cells = cells;
    prog_.elem = elem;
}

ValueId ProgramBuilder::new_value(std::string name, Shape3 shape, TensorValue::Origin origin, OpId op) {
    TensorValue v;
    v.id = static_cast<ValueId>(prog_.values.size());
    v.name = std::move(name);
    v.shape = shape;
    v.elem = prog_.elem;
    v.origin = origin;
    v.defining_op = op;
    prog_.values.push_back(std::move(v));
    return prog_.values.back().id;
}

ValueId ProgramBuilder::add_input(std::string name, Shape3 shape) {
    const ValueId id = new_value(std::move(name), shape, TensorValue::Origin::program_input, -1);
    prog_.inputs.push_back(id);
    return id;
}

int ProgramBuilder::add_constant(std::string name, double value) {
    prog_.constants.push_back({std::move(name), value});
    return static_cast<int>(prog_.constants.size()) - 1;
}

ValueId ProgramBuilder::add_curl(std::string name, OpGroup group, Box domain, std::vector<Access> accesses,
                                 Payload payload, std::string result_name) {
    const auto writes = std::count_if(accesses.begin(), accesses.end(),
                                      [](const Access& a) { return a.role == AccessRole::write; });
    if (writes != 1) throw IrError("curl op '" + name + "' needs exactly one write access");
    const auto w = std::find_if(accesses.begin(), accesses.end(),
                                [](const Access& a) { return a.role == AccessRole::write; });
    CurlStepOp op;
    op.id = static_cast<OpId>(prog_.ops.size());
    op.name = std::move(name);
    op.group = group;
    op.domain = domain;
    op.result = new_value(std::move(result_name), prog_.value(w->operand).shape,
                          TensorValue::Origin::op_result, op.id);
    op.accesses = std::move(accesses);
    op.payload = std::move(payload);
    prog_.ops.emplace_back(std::move(op));
    return std::get<CurlStepOp>(prog_.ops.back()).result;
}

ValueId ProgramBuilder::add_boundary(std::string name, OpGroup group, Face face, Box domain, Component component,
                                     ValueId operand, std::string result_name) {
    BoundaryOp op;
    op.id = static_cast<OpId>(prog_.ops.size());
    op.name = std::move(name);
    op.group = group;
    op.face = face;
    op.domain = domain;
    const ValueId result = new_value(std::move(result_name), prog_.value(operand).shape,
                                     TensorValue::Origin::op_result, op.id);
    op.target = BoundaryTarget{component, operand, result};
    prog_.ops.emplace_back(std::move(op));
    return result;
}

void ProgramBuilder::add_boundary_placeholder(std::string name, OpGroup group, Face face, Box domain) {
    BoundaryOp op;
    op.id = static_cast<OpId>(prog_.ops.size());
    op.name = std::move(name);
    op.group = group;
    op.face = face;
    op.domain = domain;
    prog_.ops.emplace_back(std::move(op));
}

StepProgram ProgramBuilder::finish() {
    StepProgram p = prog_;
    p.outputs.clear();
    for (ValueId in : p.inputs) {
        ValueId last = in;
        for (const auto& o : p.ops) {
            const auto r = op_result(o);
            if (r && p.chain_root(*r) == in) last = *r;
        }
        p.outputs.push_back(last);
    }
    return p;
}

Box canonical_update_box(Component c, const Shape3& cells) {
    const int a = component_axis(c);
    Box b;
    for (int d = 0; d < 3; ++d) {
        b.lo[d] = is_electric(c) && d != a ? 1 : 0;
        b.hi[d] = cells[d];
    }
    return b;
}

namespace {

Box face_slab(Face f, const Shape3& shape) {
    Box b = Box::of_shape(shape);
    const int a = face_axis(f);
    b.lo[a] = face_is_hi(f) ? shape[a] - 1 : 0;
    b.hi[a] = b.lo[a] + 1;
    return b;
}

Offset3 unit(int axis, int v) {
    Offset3 o{0, 0, 0};
    o[axis] = v;
    return o;
}

} // namespace

StepProgram build_step_program(const SimParams& params) {
    const Shape3 cells = params.cells();
    ProgramBuilder b(cells, params.precision);

    std::array<ValueId, 6> current{};
    std::array<int, 6> version{};
    for (Component c : kAllComponents) {
        current[static_cast<int>(c)] = b.add_input(std::string(to_string(c)) + "0", staggered_shape(c, cells));
    }
    const int dt_eps = b.add_constant("dt/eps", params.dt / params.eps);
    const int dt_mu = b.add_constant("dt/mu", params.dt / params.mu);
    const std::array<int, 3> inv{b.add_constant("1/dx", 1.0 / params.dx), b.add_constant("1/dy", 1.0 / params.dy),
                                 b.add_constant("1/dz", 1.0 / params.dz)};

    auto next_name = [&](Component c) {
        return std::string(to_string(c)) + std::to_string(++version[static_cast<int>(c)]);
    };

    auto add_curl = [&](Component c) {
        const int a = component_axis(c), p = (a + 1) % 3, q = (a + 2) % 3;
        const bool h = !is_electric(c);
        // H: forward differences of E.  E: backward differences of H.
        const Component src_a = h ? static_cast<Component>(p) : static_cast<Component>(3 + q);
        const Component src_b = h ? static_cast<Component>(q) : static_cast<Component>(3 + p);
        const int axis_a = h ? q : p;
        const int axis_b = h ? p : q;
        const int lo = h ? 0 : -1, hi = h ? 1 : 0;
        const ValueId va = current[static_cast<int>(src_a)];
        const ValueId vb = current[static_cast<int>(src_b)];

        std::vector<Access> acc{
            {current[static_cast<int>(c)], {0, 0, 0}, AccessRole::write},
            {va, unit(axis_a, lo), AccessRole::read},
            {va, unit(axis_a, hi), AccessRole::read},
            {vb, unit(axis_b, lo), AccessRole::read},
            {vb, unit(axis_b, hi), AccessRole::read},
        };
        Payload pl;
        const int out = pl.out();
        const int da = pl.mul(pl.sub(pl.read(2), pl.read(1)), pl.constant(inv[axis_a]));
        const int db = pl.mul(pl.sub(pl.read(4), pl.read(3)), pl.constant(inv[axis_b]));
        const int upd = pl.mul(pl.constant(h ? dt_mu : dt_eps), pl.sub(da, db));
        pl.add(out, upd);

        const std::string name = "curl_" + std::string(to_string(c));
        current[static_cast<int>(c)] = b.add_curl(name, h ? OpGroup::h_field : OpGroup::e_field,
                                                  canonical_update_box(c, cells), std::move(acc), std::move(pl),
                                                  next_name(c));
    };

    for (Component c : {Component::hx, Component::hy, Component::hz}) add_curl(c);
    for (Face f : kAllFaces) {
        b.add_boundary_placeholder("bc_h_" + std::string(to_string(f)), OpGroup::h_field, f,
                                   face_slab(f, cells));
    }
    for (Component c : {Component::ex, Component::ey, Component::ez}) add_curl(c);
    for (Face f : kAllFaces) {
        for (Component c : {Component::ex, Component::ey, Component::ez}) {
            if (component_axis(c) == face_axis(f)) continue;
            const int ci = static_cast<int>(c);
            current[ci] = b.add_boundary("bc_e_" + std::string(to_string(f)) + "_" + std::string(to_string(c)),
                                         OpGroup::e_field, f, face_slab(f, staggered_shape(c, cells)), c,
                                         current[ci], next_name(c));
        }
    }
    return b.finish();
}

std::optional<CanonicalCurl> match_canonical(const CurlStepOp& op) {
    using K = PayloadNode::Kind;
    const auto& n = op.payload.nodes;
    auto valid = [&](int i) { return i >= 0 && i < static_cast<int>(n.size()); };
    auto is = [&](int i, K k) { return valid(i) && n[i].kind == k; };
    auto read_idx = [&](int i) -> int {
        if (!is(i, K::read)) return -1;
        const int a = n[i].access;
        if (a < 0 || a >= static_cast<int>(op.accesses.size()) || op.accesses[a].role != AccessRole::read) return -1;
        return a;
    };
    const int root = op.payload.root;
    if (!is(root, K::add) || !is(n[root].lhs, K::out)) return std::nullopt;
    const int upd = n[root].rhs;
    if (!is(upd, K::mul) || !is(n[upd].lhs, K::constant) || !is(n[upd].rhs, K::sub)) return std::nullopt;
    const int diff = n[upd].rhs;
    CanonicalCurl m;
    m.coef = n[n[upd].lhs].constant;
    auto term = [&](int t, int& hi, int& lo, int& inv) {
        if (!is(t, K::mul) || !is(n[t].lhs, K::sub) || !is(n[t].rhs, K::constant)) return false;
        const int s = n[t].lhs;
        hi = read_idx(n[s].lhs);
        lo = read_idx(n[s].rhs);
        inv = n[n[t].rhs].constant;
        return hi >= 0 && lo >= 0;
    };
    if (!term(n[diff].lhs, m.a_hi, m.a_lo, m.inv_a)) return std::nullopt;
    if (!term(n[diff].rhs, m.b_hi, m.b_lo, m.inv_b)) return std::nullopt;
    return m;
}

} // namespace fdtd::ir
