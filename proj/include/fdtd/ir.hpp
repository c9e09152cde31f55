#pragma once

// Structured-op IR for one FDTD time step.
//
// Every field update is a curl_step op: an all-parallel iteration box, a list
// of constant-offset accesses, and a scalar payload tree evaluated at each
// point. Values are SSA: an op that accumulates into a field reads the old
// tensor through its single write access and defines a new tensor as result.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fdtd/array3.hpp"
#include "fdtd/yee.hpp"

namespace fdtd::ir {

using ValueId = int;
using OpId = int;

struct TensorValue {
    enum class Origin { program_input, op_result };

    ValueId id = -1;
    std::string name;
    Shape3 shape{0, 0, 0};
    Precision elem = Precision::f64;
    Origin origin = Origin::program_input;
    OpId defining_op = -1;
};

enum class AccessRole { read, write };

struct Access {
    ValueId operand = -1;
    Offset3 offset{0, 0, 0};
    AccessRole role = AccessRole::read;

    friend bool operator==(const Access&, const Access&) = default;
};

/// Payload expression node. Children always precede their parent in
/// Payload::nodes, so a forward sweep evaluates the tree.
struct PayloadNode {
    enum class Kind { out, read, constant, add, sub, mul };

    Kind kind = Kind::constant;
    int access = -1;   // read: index into the op's accesses
    int constant = -1; // constant: index into StepProgram::constants
    int lhs = -1, rhs = -1;

    friend bool operator==(const PayloadNode&, const PayloadNode&) = default;
};

struct Payload {
    std::vector<PayloadNode> nodes;
    int root = -1;

    int out();
    int read(int access);
    int constant(int index);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);

    friend bool operator==(const Payload&, const Payload&) = default;
};

/// Named scalar coefficient, computed once in double and cast to the run
/// precision at evaluation time.
struct Constant {
    std::string name;
    double value = 0.0;
};

enum class OpGroup { h_field, e_field, other };
enum class IteratorKind { parallel, reduction };

struct CurlStepOp {
    OpId id = -1;
    std::string name;
    OpGroup group = OpGroup::other;
    Box domain;
    std::vector<Access> accesses;
    Payload payload;
    ValueId result = -1;
    std::array<IteratorKind, 3> iterators{IteratorKind::parallel, IteratorKind::parallel, IteratorKind::parallel};
};

enum class Face { x_lo, x_hi, y_lo, y_hi, z_lo, z_hi };

inline constexpr std::array<Face, 6> kAllFaces{Face::x_lo, Face::x_hi, Face::y_lo,
                                               Face::y_hi, Face::z_lo, Face::z_hi};
inline int face_axis(Face f) { return static_cast<int>(f) / 2; }
inline bool face_is_hi(Face f) { return static_cast<int>(f) % 2 == 1; }
std::string_view to_string(Face f);

struct BoundaryTarget {
    Component component = Component::ex;
    ValueId operand = -1;
    ValueId result = -1;
};

/// Writes zero over `domain` (a one-thick slab on `face`) of the target
/// tensor. Without a target the op is a placeholder that does nothing; the
/// H-side boundary pass is built that way since PEC only constrains
/// tangential E.
struct BoundaryOp {
    OpId id = -1;
    std::string name;
    OpGroup group = OpGroup::other;
    Face face = Face::x_lo;
    Box domain;
    std::optional<BoundaryTarget> target;
};

using Op = std::variant<CurlStepOp, BoundaryOp>;

OpId op_id(const Op& op);
const std::string& op_name(const Op& op);
OpGroup op_group(const Op& op);
const Box& op_domain(const Op& op);
/// All accesses including the write; a boundary op with a target has one
/// zero-offset write, a placeholder has none.
std::vector<Access> op_accesses(const Op& op);
std::optional<ValueId> op_result(const Op& op);
std::optional<ValueId> op_write_operand(const Op& op);
inline bool is_curl(const Op& op) { return std::holds_alternative<CurlStepOp>(op); }

struct StepProgram {
    Shape3 cells{0, 0, 0};
    Precision elem = Precision::f64;
    std::vector<TensorValue> values;
    std::vector<Constant> constants;
    std::vector<Op> ops;
    std::vector<ValueId> inputs;
    /// outputs[n] is the last value of the chain rooted at inputs[n].
    std::vector<ValueId> outputs;

    const TensorValue& value(ValueId id) const;
    const Op& op(OpId id) const;
    /// Position of the op in `ops`, or -1.
    int position(OpId id) const;
    std::optional<OpId> find_op(std::string_view name) const;
    /// Program input a value's accumulation chain starts from.
    ValueId chain_root(ValueId id) const;
};

class ProgramBuilder {
public:
    ProgramBuilder(Shape3 cells, Precision elem);

    ValueId add_input(std::string name, Shape3 shape);
    int add_constant(std::string name, double value);

    /// Adds a curl_step op. `accesses` must contain exactly one write; the
    /// result tensor takes the write operand's shape.
    ValueId add_curl(std::string name, OpGroup group, Box domain, std::vector<Access> accesses, Payload payload,
                     std::string result_name);
    ValueId add_boundary(std::string name, OpGroup group, Face face, Box domain, Component component,
                         ValueId operand, std::string result_name);
    void add_boundary_placeholder(std::string name, OpGroup group, Face face, Box domain);

    StepProgram finish();

private:
    ValueId new_value(std::string name, Shape3 shape, TensorValue::Origin origin, OpId op);

    StepProgram prog_;
};

/// Canonical one-step program: curl H x3, H boundary placeholders, curl E x3,
/// tangential-E zeroing on all six walls.
StepProgram build_step_program(const SimParams& params);

/// Update ranges of the canonical program. All three H components share the
/// cell box [0,nx)x[0,ny)x[0,nz): the skipped upper wall-normal plane never
/// changes under PEC, and the lower one gets a zero curl. E components cover
/// every node whose reads are in bounds.
Box canonical_update_box(Component c, const Shape3& cells);

enum class DiagKind {
    ssa_redefinition,
    undefined_value,
    use_before_def,
    out_of_bounds_read,
    out_of_bounds_write,
    empty_domain,
    write_count,
    write_offset,
    shape_mismatch,
    elem_mismatch,
    ordering,
    non_parallel_iterator,
    malformed_payload,
};

std::string_view to_string(DiagKind k);

struct Diagnostic {
    DiagKind kind;
    OpId op = -1;
    int axis = -1;
    std::string message;
};

/// Empty result means the program is well formed.
std::vector<Diagnostic> verify(const StepProgram& program);

struct InferredDomain {
    Box box;
    std::vector<Diagnostic> diagnostics;
    bool ok() const { return diagnostics.empty(); }
};

/// Largest box at which every access of `op` stays inside its operand.
InferredDomain iteration_domain(const StepProgram& program, const CurlStepOp& op);

/// Textual dump, one op per line, byte-stable for identical inputs.
std::string print_ir(const StepProgram& program);

/// Evaluates a payload at one point. `read(access)` returns the operand value
/// for that access; `out` is the current value of the written tensor.
template <typename T, typename ReadFn>
T evaluate(const Payload& payload, std::span<const T> constants, T out, ReadFn&& read) {
    constexpr std::size_t kInline = 32;
    T inline_buf[kInline];
    std::vector<T> heap;
    T* v = inline_buf;
    if (payload.nodes.size() > kInline) {
        heap.resize(payload.nodes.size());
        v = heap.data();
    }
    for (std::size_t n = 0; n < payload.nodes.size(); ++n) {
        const auto& node = payload.nodes[n];
        switch (node.kind) {
        case PayloadNode::Kind::out: v[n] = out; break;
        case PayloadNode::Kind::read: v[n] = read(node.access); break;
        case PayloadNode::Kind::constant: v[n] = constants[node.constant]; break;
        case PayloadNode::Kind::add: v[n] = v[node.lhs] + v[node.rhs]; break;
        case PayloadNode::Kind::sub: v[n] = v[node.lhs] - v[node.rhs]; break;
        case PayloadNode::Kind::mul: v[n] = v[node.lhs] * v[node.rhs]; break;
        }
    }
    return v[payload.root];
}

template <typename T>
std::vector<T> cast_constants(const StepProgram& program) {
    std::vector<T> out;
    out.reserve(program.constants.size());
    for (const auto& c : program.constants) out.push_back(static_cast<T>(c.value));
    return out;
}

/// Recognized form `out + coef * ((a1 - a0) * inv_a - (b1 - b0) * inv_b)`.
struct CanonicalCurl {
    int coef = -1, inv_a = -1, inv_b = -1; // constant indices
    int a_hi = -1, a_lo = -1, b_hi = -1, b_lo = -1; // access indices
};

std::optional<CanonicalCurl> match_canonical(const CurlStepOp& op);

} // namespace fdtd::ir
