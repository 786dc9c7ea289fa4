// Copyright 2026 The qmfs-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QMFS_STROBOSCOPIC_H
#define QMFS_STROBOSCOPIC_H

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qmfs {

/// Bits are numbered from the left: in basis state |x_0 x_1 ... x_{n-1}> bit j
/// is (index >> (n - 1 - j)) & 1.
inline int bit_of(uint32_t index, int j, int n) {
    return static_cast<int>((index >> (n - 1 - j)) & 1u);
}

struct Gate {
    enum class Kind { X, CX, CCX };
    Kind kind = Kind::X;
    /// Controls first, target last.
    std::vector<int> bits;

    static Gate x(int t) {
        return {Kind::X, {t}};
    }
    static Gate cx(int c, int t) {
        return {Kind::CX, {c, t}};
    }
    static Gate ccx(int c1, int c2, int t) {
        return {Kind::CCX, {c1, c2, t}};
    }
    int target() const {
        return bits.back();
    }
    bool operator==(const Gate &) const = default;
};

class ReversibleCircuit {
   public:
    static constexpr int kMaxBits = 16;

    explicit ReversibleCircuit(int n_bits);
    ReversibleCircuit(int n_bits, std::vector<Gate> gates);

    /// Throws std::invalid_argument on bad arity, out-of-range or repeated bits.
    ReversibleCircuit &add(const Gate &gate);
    /// This circuit followed by `next`.
    ReversibleCircuit then(const ReversibleCircuit &next) const;

    int n_bits() const {
        return n_bits_;
    }
    const std::vector<Gate> &gates() const {
        return gates_;
    }
    bool operator==(const ReversibleCircuit &) const = default;

   private:
    int n_bits_;
    std::vector<Gate> gates_;
};

/// Heisenberg image of a Z operator: the diagonal (-1)^f(x), stored as the
/// truth table of f over the 2^n basis states.
struct BoolFunc {
    int n = 0;
    std::vector<uint8_t> table;

    BoolFunc() = default;
    BoolFunc(int n, std::vector<uint8_t> table);
    static BoolFunc variable(int n, int j);
    static BoolFunc constant(int n, bool value);

    bool operator()(uint32_t x) const {
        return table[x] != 0;
    }
    bool operator==(const BoolFunc &) const = default;
};

/// pi(x) for every basis state x.
std::vector<uint32_t> circuit_permutation(const ReversibleCircuit &c);

/// f_j(x) = bit j of pi(x), the image U^dag Z_j U.
BoolFunc propagate_z(const ReversibleCircuit &c, int j);

/// Dense 2^n x 2^n integer verification of every propagate_z image: builds U
/// as a product of Kronecker-structured gate matrices, conjugates each Z_j
/// and returns the largest entry of |U^T Z_j U - diag((-1)^f_j)| together with
/// |[U^T Z_j U, Z_k]| over all j, k. Throws std::invalid_argument for n > 8.
long dense_oracle_check(const ReversibleCircuit &c);

/// Algebraic normal form: coefficient of each monomial, indexed by the same
/// bit mask convention as basis states.
std::vector<uint8_t> algebraic_normal_form(const BoolFunc &f);

struct Synthesis {
    ReversibleCircuit circuit{1};
    int n_inputs = 0;
    /// Wire holding each target. A target equal to an input variable reuses
    /// the input wire and costs no gates.
    std::vector<int> output_bits;
    int n_ancillas = 0;
};

/// One Toffoli chain per ANF monomial into a fresh output wire, with ancillas
/// for monomials of degree > 2 that are uncomputed afterwards. Inputs are
/// wires 0..n-1 and are never modified; outputs and ancillas start at 0.
/// Throws std::length_error when more than max_bits wires or max_gates gates
/// are needed.
Synthesis build_classical_function(const std::vector<BoolFunc> &targets, int max_bits = ReversibleCircuit::kMaxBits,
                                   long max_gates = 100000);

/// Truth table of the image of wire j restricted to inputs with every
/// non-input wire set to 0.
BoolFunc restrict_to_inputs(const BoolFunc &f, int n_inputs);

ReversibleCircuit random_circuit(int n_bits, int n_gates, uint64_t seed);

/// "bits N" followed by one gate per line ("X t", "CX c t", "CCX c1 c2 t");
/// blank lines and lines starting with '#' are ignored.
ReversibleCircuit parse_circuit(std::istream &in);
ReversibleCircuit parse_circuit(const std::string &text);
std::string format_circuit(const ReversibleCircuit &c);

/// Header "x,<name_0>,..." then one row per basis state with x written as a
/// bit string x_0 x_1 ... x_{n-1}.
void write_truth_table_csv(std::ostream &out, const std::vector<BoolFunc> &functions,
                           const std::vector<std::string> &names);

/// Inverse of write_truth_table_csv; rows may come in any order but every
/// basis state must appear exactly once. Column names are returned in `names`.
std::vector<BoolFunc> read_truth_table_csv(std::istream &in, std::vector<std::string> *names = nullptr);

}  // namespace qmfs

#endif
