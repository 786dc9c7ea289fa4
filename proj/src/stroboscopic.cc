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

#include <algorithm>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "qmfs/counter_rng.h"

namespace qmfs {

namespace {

void check_bits(int n) {
    if (n < 1 || n > ReversibleCircuit::kMaxBits) {
        throw std::invalid_argument("circuit width must be in 1.." + std::to_string(ReversibleCircuit::kMaxBits));
    }
}

void check_gate(const Gate &g, int n) {
    size_t arity = g.kind == Gate::Kind::X ? 1 : g.kind == Gate::Kind::CX ? 2 : 3;
    if (g.bits.size() != arity) {
        throw std::invalid_argument("gate has wrong number of bits");
    }
    for (size_t i = 0; i < g.bits.size(); i++) {
        if (g.bits[i] < 0 || g.bits[i] >= n) {
            throw std::invalid_argument("gate bit " + std::to_string(g.bits[i]) + " out of range");
        }
        for (size_t k = 0; k < i; k++) {
            if (g.bits[k] == g.bits[i]) {
                throw std::invalid_argument("gate bits must be distinct");
            }
        }
    }
}

const char *gate_name(Gate::Kind kind) {
    switch (kind) {
        case Gate::Kind::X:
            return "X";
        case Gate::Kind::CX:
            return "CX";
        case Gate::Kind::CCX:
            return "CCX";
    }
    return "?";
}

using IMat = Eigen::MatrixXi;

IMat kron_chain(const std::vector<Eigen::Matrix2i> &factors) {
    IMat out = IMat::Ones(1, 1);
    for (const auto &f : factors) {
        IMat next = Eigen::kroneckerProduct(out, f);
        out = std::move(next);
    }
    return out;
}

IMat dense_gate(const Gate &g, int n) {
    Eigen::Matrix2i I = Eigen::Matrix2i::Identity(), X, P0, P1;
    X << 0, 1, 1, 0;
    P0 << 1, 0, 0, 0;
    P1 << 0, 0, 0, 1;
    std::vector<Eigen::Matrix2i> f(n, I);
    switch (g.kind) {
        case Gate::Kind::X:
            f[g.bits[0]] = X;
            return kron_chain(f);
        case Gate::Kind::CX: {
            std::vector<Eigen::Matrix2i> off = f, on = f;
            off[g.bits[0]] = P0;
            on[g.bits[0]] = P1;
            on[g.bits[1]] = X;
            return kron_chain(off) + kron_chain(on);
        }
        case Gate::Kind::CCX: {
            f[g.bits[0]] = P1;
            f[g.bits[1]] = P1;
            f[g.bits[2]] = I - X;
            const long d = 1L << n;
            return IMat::Identity(d, d) - kron_chain(f);
        }
    }
    throw std::logic_error("unknown gate");
}

}  // namespace

ReversibleCircuit::ReversibleCircuit(int n_bits) : n_bits_(n_bits) {
    check_bits(n_bits);
}

ReversibleCircuit::ReversibleCircuit(int n_bits, std::vector<Gate> gates) : ReversibleCircuit(n_bits) {
    for (const auto &g : gates) {
        add(g);
    }
}

ReversibleCircuit &ReversibleCircuit::add(const Gate &gate) {
    check_gate(gate, n_bits_);
    gates_.push_back(gate);
    return *this;
}

ReversibleCircuit ReversibleCircuit::then(const ReversibleCircuit &next) const {
    if (next.n_bits_ != n_bits_) {
        throw std::invalid_argument("cannot concatenate circuits of different width");
    }
    ReversibleCircuit out = *this;
    out.gates_.insert(out.gates_.end(), next.gates_.begin(), next.gates_.end());
    return out;
}

BoolFunc::BoolFunc(int n, std::vector<uint8_t> table) : n(n), table(std::move(table)) {
    check_bits(n);
    if (this->table.size() != (size_t{1} << n)) {
        throw std::invalid_argument("truth table must have 2^n entries");
    }
    for (auto &v : this->table) {
        if (v > 1) {
            throw std::invalid_argument("truth table entries must be 0 or 1");
        }
    }
}

BoolFunc BoolFunc::variable(int n, int j) {
    check_bits(n);
    if (j < 0 || j >= n) {
        throw std::invalid_argument("variable index out of range");
    }
    std::vector<uint8_t> t(size_t{1} << n);
    for (uint32_t x = 0; x < t.size(); x++) {
        t[x] = static_cast<uint8_t>(bit_of(x, j, n));
    }
    return {n, std::move(t)};
}

BoolFunc BoolFunc::constant(int n, bool value) {
    check_bits(n);
    return {n, std::vector<uint8_t>(size_t{1} << n, value ? 1 : 0)};
}

std::vector<uint32_t> circuit_permutation(const ReversibleCircuit &c) {
    const int n = c.n_bits();
    std::vector<uint32_t> pi(size_t{1} << n);
    for (uint32_t x = 0; x < pi.size(); x++) {
        uint32_t y = x;
        for (const auto &g : c.gates()) {
            bool fire = true;
            for (size_t k = 0; k + 1 < g.bits.size(); k++) {
                fire = fire && bit_of(y, g.bits[k], n);
            }
            if (fire) {
                y ^= 1u << (n - 1 - g.target());
            }
        }
        pi[x] = y;
    }
    return pi;
}

BoolFunc propagate_z(const ReversibleCircuit &c, int j) {
    const int n = c.n_bits();
    if (j < 0 || j >= n) {
        throw std::invalid_argument("propagate_z: bit out of range");
    }
    std::vector<uint32_t> pi = circuit_permutation(c);
    std::vector<uint8_t> t(pi.size());
    for (uint32_t x = 0; x < pi.size(); x++) {
        t[x] = static_cast<uint8_t>(bit_of(pi[x], j, n));
    }
    return {n, std::move(t)};
}

long dense_oracle_check(const ReversibleCircuit &c) {
    const int n = c.n_bits();
    if (n > 8) {
        throw std::invalid_argument("dense_oracle_check: at most 8 bits");
    }
    const long d = 1L << n;
    IMat U = IMat::Identity(d, d);
    for (const auto &g : c.gates()) {
        U = dense_gate(g, n) * U;
    }
    Eigen::Matrix2i Z;
    Z << 1, 0, 0, -1;
    std::vector<Eigen::VectorXi> z_diag;
    for (int j = 0; j < n; j++) {
        std::vector<Eigen::Matrix2i> f(n, Eigen::Matrix2i::Identity());
        f[j] = Z;
        z_diag.push_back(kron_chain(f).diagonal());
    }
    long worst = 0;
    for (int j = 0; j < n; j++) {
        IMat image = U.transpose() * (z_diag[j].asDiagonal() * U);
        BoolFunc f = propagate_z(c, j);
        IMat expected = IMat::Zero(d, d);
        for (long x = 0; x < d; x++) {
            expected(x, x) = f(static_cast<uint32_t>(x)) ? -1 : 1;
        }
        worst = std::max<long>(worst, (image - expected).cwiseAbs().maxCoeff());
        for (int k = 0; k < n; k++) {
            IMat comm = image * z_diag[k].asDiagonal();
            comm -= z_diag[k].asDiagonal() * image;
            worst = std::max<long>(worst, comm.cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

std::vector<uint8_t> algebraic_normal_form(const BoolFunc &f) {
    // Binary Moebius transform.
    std::vector<uint8_t> a = f.table;
    for (size_t step = 1; step < a.size(); step <<= 1) {
        for (size_t x = 0; x < a.size(); x++) {
            if (x & step) {
                a[x] ^= a[x ^ step];
            }
        }
    }
    return a;
}

Synthesis build_classical_function(const std::vector<BoolFunc> &targets, int max_bits, long max_gates) {
    if (targets.empty()) {
        throw std::invalid_argument("build_classical_function: no targets");
    }
    const int n = targets[0].n;
    for (const auto &t : targets) {
        if (t.n != n) {
            throw std::invalid_argument("build_classical_function: targets must share one input width");
        }
    }
    max_bits = std::min(max_bits, ReversibleCircuit::kMaxBits);

    struct Plan {
        int reuse = -1;
        std::vector<uint32_t> monomials;
    };
    std::vector<Plan> plans;
    int fresh = 0, max_degree = 0;
    for (const auto &t : targets) {
        Plan plan;
        for (int j = 0; j < n && plan.reuse < 0; j++) {
            if (t == BoolFunc::variable(n, j)) {
                plan.reuse = j;
            }
        }
        if (plan.reuse < 0) {
            std::vector<uint8_t> anf = algebraic_normal_form(t);
            for (uint32_t m = 0; m < anf.size(); m++) {
                if (anf[m]) {
                    plan.monomials.push_back(m);
                    max_degree = std::max(max_degree, __builtin_popcount(m));
                }
            }
            fresh++;
        }
        plans.push_back(std::move(plan));
    }
    const int n_ancillas = std::max(0, max_degree - 2);
    const int total = n + fresh + n_ancillas;
    if (total > max_bits) {
        throw std::length_error("build_classical_function: needs " + std::to_string(total) + " wires, budget " +
                                std::to_string(max_bits));
    }

    Synthesis out;
    out.circuit = ReversibleCircuit(total);
    out.n_inputs = n;
    out.n_ancillas = n_ancillas;
    const int ancilla0 = n + fresh;
    int next_out = n;
    auto emit = [&](const Gate &g) {
        if (static_cast<long>(out.circuit.gates().size()) >= max_gates) {
            throw std::length_error("build_classical_function: gate budget exceeded");
        }
        out.circuit.add(g);
    };
    for (const auto &plan : plans) {
        if (plan.reuse >= 0) {
            out.output_bits.push_back(plan.reuse);
            continue;
        }
        const int target = next_out++;
        out.output_bits.push_back(target);
        for (uint32_t m : plan.monomials) {
            std::vector<int> vars;
            for (int j = 0; j < n; j++) {
                if (bit_of(m, j, n)) {
                    vars.push_back(j);
                }
            }
            if (vars.empty()) {
                emit(Gate::x(target));
            } else if (vars.size() == 1) {
                emit(Gate::cx(vars[0], target));
            } else if (vars.size() == 2) {
                emit(Gate::ccx(vars[0], vars[1], target));
            } else {
                // Accumulate the product on ancillas, apply, then uncompute.
                std::vector<Gate> chain{Gate::ccx(vars[0], vars[1], ancilla0)};
                for (size_t k = 2; k + 1 < vars.size(); k++) {
                    chain.push_back(Gate::ccx(ancilla0 + static_cast<int>(k) - 2, vars[k], ancilla0 + static_cast<int>(k) - 1));
                }
                for (const auto &g : chain) {
                    emit(g);
                }
                emit(Gate::ccx(ancilla0 + static_cast<int>(vars.size()) - 3, vars.back(), target));
                for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
                    emit(*it);
                }
            }
        }
    }
    return out;
}

BoolFunc restrict_to_inputs(const BoolFunc &f, int n_inputs) {
    if (n_inputs < 1 || n_inputs > f.n) {
        throw std::invalid_argument("restrict_to_inputs: bad input count");
    }
    std::vector<uint8_t> t(size_t{1} << n_inputs);
    for (uint32_t x = 0; x < t.size(); x++) {
        t[x] = f.table[static_cast<size_t>(x) << (f.n - n_inputs)];
    }
    return {n_inputs, std::move(t)};
}

ReversibleCircuit random_circuit(int n_bits, int n_gates, uint64_t seed) {
    ReversibleCircuit c(n_bits);
    for (int k = 0; k < n_gates; k++) {
        uint64_t counter = 0;
        auto draw = [&](uint64_t bound) { return counter_hash(seed, k, counter++) % bound; };
        int kinds = std::min(n_bits, 3);
        int arity = 1 + static_cast<int>(draw(kinds));
        std::vector<int> bits;
        while (static_cast<int>(bits.size()) < arity) {
            int b = static_cast<int>(draw(n_bits));
            if (std::find(bits.begin(), bits.end(), b) == bits.end()) {
                bits.push_back(b);
            }
        }
        c.add({arity == 1 ? Gate::Kind::X : arity == 2 ? Gate::Kind::CX : Gate::Kind::CCX, bits});
    }
    return c;
}

ReversibleCircuit parse_circuit(std::istream &in) {
    std::string line;
    int line_no = 0;
    std::optional<ReversibleCircuit> c;
    auto fail = [&](const std::string &what) {
        throw std::invalid_argument("circuit line " + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        line_no++;
        std::istringstream ss(line);
        std::string op;
        if (!(ss >> op) || op[0] == '#') {
            continue;
        }
        std::vector<int> args;
        std::string tok;
        while (ss >> tok) {
            try {
                size_t used = 0;
                int v = std::stoi(tok, &used);
                if (used != tok.size()) {
                    fail("bad integer '" + tok + "'");
                }
                args.push_back(v);
            } catch (const std::logic_error &) {
                fail("bad integer '" + tok + "'");
            }
        }
        if (!c) {
            if (op != "bits" || args.size() != 1) {
                fail("expected 'bits N' header");
            }
            try {
                c.emplace(args[0]);
            } catch (const std::invalid_argument &e) {
                fail(e.what());
            }
            continue;
        }
        Gate g;
        if (op == "X") {
            g.kind = Gate::Kind::X;
        } else if (op == "CX") {
            g.kind = Gate::Kind::CX;
        } else if (op == "CCX") {
            g.kind = Gate::Kind::CCX;
        } else {
            fail("unknown gate '" + op + "'");
        }
        g.bits = args;
        try {
            c->add(g);
        } catch (const std::invalid_argument &e) {
            fail(e.what());
        }
    }
    if (!c) {
        throw std::invalid_argument("circuit: missing 'bits N' header");
    }
    return *c;
}

ReversibleCircuit parse_circuit(const std::string &text) {
    std::istringstream in(text);
    return parse_circuit(in);
}

std::string format_circuit(const ReversibleCircuit &c) {
    std::ostringstream out;
    out << "bits " << c.n_bits() << "\n";
    for (const auto &g : c.gates()) {
        out << gate_name(g.kind);
        for (int b : g.bits) {
            out << " " << b;
        }
        out << "\n";
    }
    return out.str();
}

void write_truth_table_csv(std::ostream &out, const std::vector<BoolFunc> &functions,
                           const std::vector<std::string> &names) {
    if (functions.empty() || names.size() != functions.size()) {
        throw std::invalid_argument("write_truth_table_csv: need one name per function");
    }
    const int n = functions[0].n;
    for (const auto &f : functions) {
        if (f.n != n) {
            throw std::invalid_argument("write_truth_table_csv: functions must share one width");
        }
    }
    out << "x";
    for (const auto &name : names) {
        out << "," << name;
    }
    out << "\n";
    for (uint32_t x = 0; x < (1u << n); x++) {
        for (int j = 0; j < n; j++) {
            out << bit_of(x, j, n);
        }
        for (const auto &f : functions) {
            out << "," << (f(x) ? 1 : 0);
        }
        out << "\n";
    }
}

std::vector<BoolFunc> read_truth_table_csv(std::istream &in, std::vector<std::string> *names) {
    auto split = [](const std::string &line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
                cell.pop_back();
            }
            cells.push_back(cell);
        }
        return cells;
    };
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument("truth table: empty input");
    }
    std::vector<std::string> header = split(line);
    if (header.size() < 2 || header[0] != "x") {
        throw std::invalid_argument("truth table: header must be 'x,<name>,...'");
    }
    const size_t m = header.size() - 1;
    int n = -1;
    std::vector<std::vector<uint8_t>> tables(m);
    std::vector<bool> seen;
    long row = 1;
    while (std::getline(in, line)) {
        row++;
        if (line.empty() || line == "\r") {
            continue;
        }
        std::vector<std::string> cells = split(line);
        auto fail = [&](const std::string &what) {
            throw std::invalid_argument("truth table row " + std::to_string(row) + ": " + what);
        };
        if (cells.size() != m + 1) {
            fail("wrong number of columns");
        }
        if (n < 0) {
            n = static_cast<int>(cells[0].size());
            if (n < 1 || n > ReversibleCircuit::kMaxBits) {
                fail("input width out of range");
            }
            seen.assign(size_t{1} << n, false);
            for (auto &t : tables) {
                t.assign(size_t{1} << n, 0);
            }
        }
        if (static_cast<int>(cells[0].size()) != n) {
            fail("inconsistent input width");
        }
        uint32_t x = 0;
        for (char ch : cells[0]) {
            if (ch != '0' && ch != '1') {
                fail("input must be a bit string");
            }
            x = (x << 1) | static_cast<uint32_t>(ch - '0');
        }
        if (seen[x]) {
            fail("repeated input " + cells[0]);
        }
        seen[x] = true;
        for (size_t k = 0; k < m; k++) {
            if (cells[k + 1] != "0" && cells[k + 1] != "1") {
                fail("outputs must be 0 or 1");
            }
            tables[k][x] = static_cast<uint8_t>(cells[k + 1] == "1");
        }
    }
    if (n < 0 || std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw std::invalid_argument("truth table: every input must appear exactly once");
    }
    std::vector<BoolFunc> out;
    for (auto &t : tables) {
        out.emplace_back(n, std::move(t));
    }
    if (names) {
        names->assign(header.begin() + 1, header.end());
    }
    return out;
}

}  // namespace qmfs
