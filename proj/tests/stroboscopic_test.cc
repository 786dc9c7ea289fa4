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

#include "qmfs/stroboscopic.h"

#include <sstream>

#include <gtest/gtest.h>

using namespace qmfs;

namespace {

// Independent truth table from the closed form of each target.
template <typename F>
BoolFunc table_of(int n, F f) {
    std::vector<uint8_t> t(size_t{1} << n);
    for (uint32_t x = 0; x < t.size(); x++) {
        std::vector<int> bits(n);
        for (int j = 0; j < n; j++) {
            bits[j] = (x >> (n - 1 - j)) & 1;
        }
        t[x] = static_cast<uint8_t>(f(bits) & 1);
    }
    return {n, t};
}

}  // namespace

TEST(stroboscopic, permutation_examples) {
    ReversibleCircuit empty(3);
    auto id = circuit_permutation(empty);
    for (uint32_t x = 0; x < 8; x++) {
        EXPECT_EQ(id[x], x);
    }
    ReversibleCircuit toffoli(3, {Gate::ccx(0, 1, 2)});
    auto pi = circuit_permutation(toffoli);
    for (uint32_t x = 0; x < 8; x++) {
        uint32_t expected = x == 0b110 ? 0b111 : x == 0b111 ? 0b110 : x;
        EXPECT_EQ(pi[x], expected) << x;
    }
    ReversibleCircuit twice(3, {Gate::cx(0, 1), Gate::cx(0, 1)});
    EXPECT_EQ(circuit_permutation(twice), id);
}

TEST(stroboscopic, invalid_gates_rejected) {
    ReversibleCircuit c(3);
    EXPECT_THROW(c.add(Gate::cx(1, 1)), std::invalid_argument);
    EXPECT_THROW(c.add(Gate::ccx(0, 1, 3)), std::invalid_argument);
    EXPECT_THROW(c.add({Gate::Kind::CX, {0}}), std::invalid_argument);
    EXPECT_THROW(ReversibleCircuit(17), std::invalid_argument);
    EXPECT_THROW(ReversibleCircuit(0), std::invalid_argument);
    EXPECT_THROW(dense_oracle_check(ReversibleCircuit(9)), std::invalid_argument);
}

TEST(stroboscopic, cnot_images) {
    ReversibleCircuit cnot(2, {Gate::cx(0, 1)});
    EXPECT_EQ(propagate_z(cnot, 0), BoolFunc::variable(2, 0));
    EXPECT_EQ(propagate_z(cnot, 1), table_of(2, [](auto b) { return b[0] ^ b[1]; }));
    // Z1 Z2 on two qubits is diag(1, -1, -1, 1).
    BoolFunc f = propagate_z(cnot, 1);
    std::vector<int> diag;
    for (uint32_t x = 0; x < 4; x++) {
        diag.push_back(f(x) ? -1 : 1);
    }
    EXPECT_EQ(diag, (std::vector<int>{1, -1, -1, 1}));
    EXPECT_EQ(dense_oracle_check(cnot), 0);
}

TEST(stroboscopic, toffoli_image_matches_projector_expansion) {
    ReversibleCircuit toffoli(3, {Gate::ccx(0, 1, 2)});
    BoolFunc f = propagate_z(toffoli, 2);
    // (I - (I - Z1)(I - Z2)/2) Z3 evaluated on each basis state with z = +-1.
    for (uint32_t x = 0; x < 8; x++) {
        int z1 = (x & 4) ? -1 : 1, z2 = (x & 2) ? -1 : 1, z3 = (x & 1) ? -1 : 1;
        int value = (1 - (1 - z1) * (1 - z2) / 2) * z3;
        EXPECT_EQ(f(x) ? -1 : 1, value) << x;
    }
    EXPECT_EQ(propagate_z(toffoli, 0), BoolFunc::variable(3, 0));
    EXPECT_EQ(propagate_z(toffoli, 1), BoolFunc::variable(3, 1));
    EXPECT_EQ(dense_oracle_check(toffoli), 0);
}

TEST(stroboscopic, identity_images) {
    ReversibleCircuit c(4);
    for (int j = 0; j < 4; j++) {
        EXPECT_EQ(propagate_z(c, j), BoolFunc::variable(4, j));
    }
}

TEST(stroboscopic, dense_oracle_exhaustive_small) {
    // Every circuit of up to two gates on up to three bits.
    for (int n = 1; n <= 3; n++) {
        std::vector<Gate> all;
        for (int a = 0; a < n; a++) {
            all.push_back(Gate::x(a));
            for (int b = 0; b < n; b++) {
                if (b == a) {
                    continue;
                }
                all.push_back(Gate::cx(a, b));
                for (int c = 0; c < n; c++) {
                    if (c != a && c != b) {
                        all.push_back(Gate::ccx(a, b, c));
                    }
                }
            }
        }
        for (const auto &g1 : all) {
            EXPECT_EQ(dense_oracle_check(ReversibleCircuit(n, {g1})), 0);
            for (const auto &g2 : all) {
                EXPECT_EQ(dense_oracle_check(ReversibleCircuit(n, {g1, g2})), 0);
            }
        }
    }
}

TEST(stroboscopic, dense_oracle_random) {
    for (uint64_t seed = 0; seed < 30; seed++) {
        int n = 4 + static_cast<int>(seed % 5);
        EXPECT_EQ(dense_oracle_check(random_circuit(n, 20, seed)), 0) << seed;
    }
}

TEST(stroboscopic, composition) {
    for (uint64_t seed = 0; seed < 40; seed++) {
        int n = 1 + static_cast<int>(seed % 4);
        ReversibleCircuit c1 = random_circuit(n, 5, seed), c2 = random_circuit(n, 7, seed + 1000);
        auto pi1 = circuit_permutation(c1);
        ReversibleCircuit both = c1.then(c2);
        for (int j = 0; j < n; j++) {
            BoolFunc f2 = propagate_z(c2, j), f = propagate_z(both, j);
            for (uint32_t x = 0; x < (1u << n); x++) {
                EXPECT_EQ(f(x), f2(pi1[x]));
            }
        }
    }
}

TEST(stroboscopic, images_are_balanced) {
    // Each image of a bijection is balanced: half the states flip sign.
    ReversibleCircuit c = random_circuit(6, 30, 9);
    for (int j = 0; j < 6; j++) {
        BoolFunc f = propagate_z(c, j);
        int ones = 0;
        for (auto v : f.table) {
            ones += v;
        }
        EXPECT_EQ(ones, 32);
    }
}

TEST(stroboscopic, anf_examples) {
    BoolFunc and2 = table_of(2, [](auto b) { return b[0] & b[1]; });
    auto anf = algebraic_normal_form(and2);
    EXPECT_EQ(anf, (std::vector<uint8_t>{0, 0, 0, 1}));
    BoolFunc or2 = table_of(2, [](auto b) { return b[0] | b[1]; });
    EXPECT_EQ(algebraic_normal_form(or2), (std::vector<uint8_t>{0, 1, 1, 1}));
}

TEST(stroboscopic, full_adder_round_trip) {
    BoolFunc sum = table_of(3, [](auto b) { return b[0] + b[1] + b[2]; });
    BoolFunc carry = table_of(3, [](auto b) { return (b[0] + b[1] + b[2]) >> 1; });
    Synthesis s = build_classical_function({sum, carry});
    for (const auto &g : s.circuit.gates()) {
        EXPECT_NE(g.kind, Gate::Kind::X);
    }
    EXPECT_EQ(restrict_to_inputs(propagate_z(s.circuit, s.output_bits[0]), 3), sum);
    EXPECT_EQ(restrict_to_inputs(propagate_z(s.circuit, s.output_bits[1]), 3), carry);
    for (int j = 0; j < 3; j++) {
        EXPECT_EQ(restrict_to_inputs(propagate_z(s.circuit, j), 3), BoolFunc::variable(3, j));
    }
    EXPECT_EQ(dense_oracle_check(s.circuit), 0);
}

TEST(stroboscopic, synthesis_examples) {
    Synthesis id = build_classical_function({BoolFunc::variable(2, 0), BoolFunc::variable(2, 1)});
    EXPECT_TRUE(id.circuit.gates().empty());
    EXPECT_EQ(id.output_bits, (std::vector<int>{0, 1}));

    Synthesis and2 = build_classical_function({table_of(2, [](auto b) { return b[0] & b[1]; })});
    ASSERT_EQ(and2.circuit.gates().size(), 1u);
    EXPECT_EQ(and2.circuit.gates()[0], Gate::ccx(0, 1, 2));

    // Degree-4 product needs ancillas, which are returned to zero.
    BoolFunc and4 = table_of(4, [](auto b) { return b[0] & b[1] & b[2] & b[3]; });
    BoolFunc nand3 = table_of(4, [](auto b) { return 1 - (b[0] & b[2] & b[3]); });
    Synthesis big = build_classical_function({and4, nand3});
    EXPECT_EQ(big.n_ancillas, 2);
    EXPECT_EQ(restrict_to_inputs(propagate_z(big.circuit, big.output_bits[0]), 4), and4);
    EXPECT_EQ(restrict_to_inputs(propagate_z(big.circuit, big.output_bits[1]), 4), nand3);
    for (int a = 0; a < big.n_ancillas; a++) {
        EXPECT_EQ(restrict_to_inputs(propagate_z(big.circuit, big.circuit.n_bits() - 1 - a), 4),
                  BoolFunc::constant(4, false));
    }

    EXPECT_THROW(build_classical_function({and4, nand3}, 7), std::length_error);
    EXPECT_THROW(build_classical_function({and4}, 16, 2), std::length_error);
}

TEST(stroboscopic, text_format_round_trip) {
    ReversibleCircuit c = random_circuit(5, 12, 4);
    EXPECT_EQ(parse_circuit(format_circuit(c)), c);
    ReversibleCircuit parsed = parse_circuit("# adder\nbits 3\n\nCCX 0 1 2\nCX 0 1\nX 2\n");
    EXPECT_EQ(parsed, ReversibleCircuit(3, {Gate::ccx(0, 1, 2), Gate::cx(0, 1), Gate::x(2)}));
    EXPECT_THROW(parse_circuit("X 0\n"), std::invalid_argument);
    EXPECT_THROW(parse_circuit("bits 2\nCX 0 2\n"), std::invalid_argument);
    EXPECT_THROW(parse_circuit("bits 2\nSWAP 0 1\n"), std::invalid_argument);
    EXPECT_THROW(parse_circuit("bits 2\nCX 0 1x\n"), std::invalid_argument);
    EXPECT_THROW(parse_circuit(""), std::invalid_argument);
}

TEST(stroboscopic, truth_table_csv) {
    ReversibleCircuit cnot(2, {Gate::cx(0, 1)});
    std::ostringstream out;
    write_truth_table_csv(out, {propagate_z(cnot, 0), propagate_z(cnot, 1)}, {"z0", "z1"});
    EXPECT_EQ(out.str(), "x,z0,z1\n00,0,0\n01,0,1\n10,1,1\n11,1,0\n");
}

TEST(stroboscopic, truth_table_csv_round_trip) {
    ReversibleCircuit c = random_circuit(4, 10, 2);
    std::vector<BoolFunc> images;
    for (int j = 0; j < 4; j++) {
        images.push_back(propagate_z(c, j));
    }
    std::stringstream buffer;
    write_truth_table_csv(buffer, images, {"a", "b", "c", "d"});
    std::vector<std::string> names;
    EXPECT_EQ(read_truth_table_csv(buffer, &names), images);
    EXPECT_EQ(names, (std::vector<std::string>{"a", "b", "c", "d"}));

    std::stringstream missing("x,f\n0,1\n");
    EXPECT_THROW(read_truth_table_csv(missing), std::invalid_argument);
    std::stringstream repeated("x,f\n0,1\n0,1\n");
    EXPECT_THROW(read_truth_table_csv(repeated), std::invalid_argument);
    std::stringstream bad("x,f\n0,2\n1,0\n");
    EXPECT_THROW(read_truth_table_csv(bad), std::invalid_argument);
}
