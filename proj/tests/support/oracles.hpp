#pragma once

// Test-side reference implementations. Nothing here calls into the library's
// stepping, scheduling or planning code.

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "fdtd/ir.hpp"
#include "fdtd/yee.hpp"

namespace oracle {

using fdtd::Array3;
using fdtd::FieldSet;
using fdtd::Index;
using fdtd::SimParams;

/// Straight transcription of the leapfrog update: every node whose stencil
/// stays in bounds is updated, then tangential E on the walls is cleared.
template <typename T>
void yee_step(FieldSet<T>& f, const SimParams& p);

/// E interior and all of H filled with uniform values in [-1, 1).
template <typename T>
FieldSet<T> random_fields(const SimParams& p, std::uint64_t seed);

template <typename T>
bool bit_equal(const Array3<T>& a, const Array3<T>& b);

template <typename T>
bool bit_equal(const FieldSet<T>& a, const FieldSet<T>& b) {
    for (int c = 0; c < 6; ++c)
        if (!bit_equal(a.arrays[c], b.arrays[c])) return false;
    return true;
}

/// First differing element as "<comp>(i,j,k) a vs b", empty when bit-equal.
template <typename T>
std::string first_difference(const FieldSet<T>& a, const FieldSet<T>& b);

// ---- random programs ----------------------------------------------------

struct ProgramShape {
    int min_ops = 1, max_ops = 4;
    int max_inputs = 3;
    Index min_extent = 3, max_extent = 8;
    int max_offset = 1;
};

fdtd::ir::StepProgram random_program(std::mt19937_64& rng, const ProgramShape& shape = {});

/// Storage chain a value belongs to, found by walking defining ops.
fdtd::ir::ValueId root_of(const fdtd::ir::StepProgram& p, fdtd::ir::ValueId v);

using Cell = std::tuple<fdtd::ir::ValueId, Index, Index, Index>;

/// Every (root, i, j, k) the op reads and every one it writes.
void touched_cells(const fdtd::ir::StepProgram& p, fdtd::ir::OpId op, std::set<Cell>& reads, std::set<Cell>& writes);

/// True when the two ops touch a common storage cell and at least one of the
/// two touches is a write.
bool conflicts(const fdtd::ir::StepProgram& p, fdtd::ir::OpId a, fdtd::ir::OpId b);

/// Value-semantics interpreter: each result is a fresh copy of its write
/// operand updated over the op domain. Returns program outputs in input order.
std::vector<Array3<double>> interpret_cow(const fdtd::ir::StepProgram& p, const std::vector<Array3<double>>& inputs);

std::vector<Array3<double>> random_inputs(const fdtd::ir::StepProgram& p, std::uint64_t seed);

// ---- physics ------------------------------------------------------------

/// Angular eigenfrequency of the (m,n,p) mode of a PEC box with wave speed c.
double cavity_omega(double c, double lx, double ly, double lz, int m, int n, int p);

} // namespace oracle
