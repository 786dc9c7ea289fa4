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

#include "qmfs/polynomial.h"

#include <cmath>
#include <set>
#include <stdexcept>

namespace qmfs {

using nlohmann::json;

double TimeFactor::operator()(double t) const {
    return constant ? 1.0 : std::cos(omega * t + phase);
}

int Monomial::degree() const {
    int d = 0;
    for (int x : a) {
        d += x;
    }
    for (int x : b) {
        d += x;
    }
    return d;
}

Polynomial::Polynomial(int n_pairs) : n_pairs_(n_pairs) {
    if (n_pairs < 1) {
        throw std::invalid_argument("Polynomial: need at least one variable pair");
    }
}

Polynomial::Polynomial(int n_pairs, std::vector<Monomial> terms) : Polynomial(n_pairs) {
    for (auto &m : terms) {
        add(std::move(m));
    }
}

Polynomial Polynomial::term(double coef, int a, int b) {
    Polynomial p(1);
    p.add(coef, a, b);
    return p;
}

Polynomial &Polynomial::add(Monomial m) {
    if (static_cast<int>(m.a.size()) != n_pairs_ || static_cast<int>(m.b.size()) != n_pairs_) {
        throw std::invalid_argument("Polynomial: monomial has wrong number of exponents");
    }
    for (size_t j = 0; j < m.a.size(); j++) {
        if (m.a[j] < 0 || m.b[j] < 0) {
            throw std::invalid_argument("Polynomial: negative exponent");
        }
    }
    if (!std::isfinite(m.coef) || !std::isfinite(m.time.omega) || !std::isfinite(m.time.phase)) {
        throw std::invalid_argument("Polynomial: non-finite coefficient");
    }
    if (m.coef != 0.0) {
        terms_.push_back(std::move(m));
    }
    return *this;
}

Polynomial &Polynomial::add(double coef, int a, int b, TimeFactor time) {
    if (n_pairs_ != 1) {
        throw std::invalid_argument("Polynomial::add(coef, a, b) needs a single-pair polynomial");
    }
    return add(Monomial{{a}, {b}, coef, time});
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto &m : terms_) {
        d = std::max(d, m.degree());
    }
    return d;
}

bool Polynomial::is_time_dependent() const {
    for (const auto &m : terms_) {
        if (!m.time.constant) {
            return true;
        }
    }
    return false;
}

double Polynomial::operator()(const Eigen::VectorXd &Q, const Eigen::VectorXd &Pi, double t) const {
    if (Q.size() != n_pairs_ || Pi.size() != n_pairs_) {
        throw std::invalid_argument("Polynomial: argument has wrong size");
    }
    double sum = 0.0;
    for (const auto &m : terms_) {
        double v = m.coef * m.time(t);
        for (int j = 0; j < n_pairs_; j++) {
            for (int k = 0; k < m.a[j]; k++) {
                v *= Q(j);
            }
            for (int k = 0; k < m.b[j]; k++) {
                v *= Pi(j);
            }
        }
        sum += v;
    }
    return sum;
}

Polynomial Polynomial::d_dQ(int j) const {
    Polynomial out(n_pairs_);
    for (auto m : terms_) {
        if (m.a.at(j) == 0) {
            continue;
        }
        m.coef *= m.a[j];
        m.a[j]--;
        out.add(std::move(m));
    }
    return out;
}

Polynomial Polynomial::d_dPi(int j) const {
    Polynomial out(n_pairs_);
    for (auto m : terms_) {
        if (m.b.at(j) == 0) {
            continue;
        }
        m.coef *= m.b[j];
        m.b[j]--;
        out.add(std::move(m));
    }
    return out;
}

void PolyKoopman::validate(int max_degree) const {
    if (M < 1 || M > 2) {
        throw std::invalid_argument("PolyKoopman: M must be 1 or 2");
    }
    if (static_cast<int>(f.size()) != M || static_cast<int>(g.size()) != M) {
        throw std::invalid_argument("PolyKoopman: need one f and one g per pair");
    }
    if (!std::isfinite(hbar) || !(hbar > 0.0)) {
        throw std::invalid_argument("PolyKoopman: hbar must be positive");
    }
    if (!std::isfinite(m_scale) || m_scale == 0.0 || !std::isfinite(omega_scale) || !(omega_scale > 0.0)) {
        throw std::invalid_argument("PolyKoopman: reference scales must be finite and non-zero");
    }
    auto check = [&](const Polynomial &p, const char *name) {
        if (p.n_pairs() != M) {
            throw std::invalid_argument(std::string("PolyKoopman: ") + name + " has wrong number of variables");
        }
        if (p.degree() > max_degree) {
            throw std::invalid_argument(std::string("PolyKoopman: ") + name + " exceeds maximum degree " +
                                        std::to_string(max_degree));
        }
    };
    for (int j = 0; j < M; j++) {
        check(f[j], "f");
        check(g[j], "g");
    }
    check(h, "h");
}

bool PolyKoopman::is_time_dependent() const {
    for (int j = 0; j < M; j++) {
        if (f[j].is_time_dependent() || g[j].is_time_dependent()) {
            return true;
        }
    }
    return h.is_time_dependent();
}

PolyKoopman PolyKoopman::harmonic(double m, double omega, double hbar) {
    if (!std::isfinite(m) || m == 0.0 || !std::isfinite(omega) || !(omega > 0.0)) {
        throw std::invalid_argument("PolyKoopman::harmonic: bad m or omega");
    }
    PolyKoopman pk;
    pk.f = {Polynomial::term(1.0 / m, 0, 1)};
    pk.g = {Polynomial::term(m * omega * omega, 1, 0)};
    pk.h = Polynomial(1);
    pk.hbar = hbar;
    pk.m_scale = std::abs(m);
    pk.omega_scale = omega;
    return pk;
}

PolyKoopman PolyKoopman::quadratic_drift(double m, double omega, double eps, double hbar) {
    PolyKoopman pk = harmonic(m, omega, hbar);
    pk.f[0].add(eps, 2, 0);
    return pk;
}

int koopman_index_Q(int, int j) {
    return 2 * j;
}
int koopman_index_P(int, int j) {
    return 2 * j + 1;
}
int koopman_index_Phi(int M, int j) {
    return 2 * (M + j);
}
int koopman_index_Pi(int M, int j) {
    return 2 * (M + j) + 1;
}

std::optional<LinearModel> as_linear_model(const PolyKoopman &pk) {
    pk.validate();
    if (pk.is_time_dependent()) {
        return std::nullopt;
    }
    const int M = pk.M;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(4 * M, 4 * M);
    auto var_index = [&](const Monomial &m) {
        // Index of the single variable of a degree-1 monomial.
        for (int j = 0; j < M; j++) {
            if (m.a[j] == 1) {
                return koopman_index_Q(M, j);
            }
            if (m.b[j] == 1) {
                return koopman_index_Pi(M, j);
            }
        }
        return -1;
    };
    // With H = 1/2 x^T G x, the symmetrized product c (P x + x P) / 2 is
    // G(P, x) = G(x, P) = c.
    auto add_linear = [&](const Polynomial &p, int row) {
        for (const auto &m : p.terms()) {
            if (m.degree() != 1) {
                return false;
            }
            int col = var_index(m);
            G(row, col) += m.coef;
            G(col, row) += m.coef;
        }
        return true;
    };
    for (int j = 0; j < M; j++) {
        if (!add_linear(pk.f[j], koopman_index_P(M, j)) || !add_linear(pk.g[j], koopman_index_Phi(M, j))) {
            return std::nullopt;
        }
    }
    for (const auto &m : pk.h.terms()) {
        if (m.degree() != 2) {
            return std::nullopt;
        }
        std::vector<int> vars;
        for (int j = 0; j < M; j++) {
            for (int k = 0; k < m.a[j]; k++) {
                vars.push_back(koopman_index_Q(M, j));
            }
            for (int k = 0; k < m.b[j]; k++) {
                vars.push_back(koopman_index_Pi(M, j));
            }
        }
        // c x y gives G(x, y) = G(y, x) = c, and c x^2 gives G(x, x) = 2c.
        if (vars[0] == vars[1]) {
            G(vars[0], vars[0]) += 2.0 * m.coef;
        } else {
            G(vars[0], vars[1]) += m.coef;
            G(vars[1], vars[0]) += m.coef;
        }
    }
    return LinearModel(G, pk.hbar);
}

json to_json(const Polynomial &p) {
    json out = json::array();
    for (const auto &m : p.terms()) {
        json t;
        if (p.n_pairs() == 1) {
            t["a"] = m.a[0];
            t["b"] = m.b[0];
        } else {
            t["a"] = m.a;
            t["b"] = m.b;
        }
        t["coef"] = m.coef;
        if (!m.time.constant) {
            t["omega_t"] = m.time.omega;
            t["phase_t"] = m.time.phase;
        }
        out.push_back(t);
    }
    return out;
}

json to_json(const PolyKoopman &pk) {
    json out;
    out["M"] = pk.M;
    auto list = [&](const std::vector<Polynomial> &ps) {
        if (pk.M == 1) {
            return to_json(ps[0]);
        }
        json arr = json::array();
        for (const auto &p : ps) {
            arr.push_back(to_json(p));
        }
        return arr;
    };
    out["f"] = list(pk.f);
    out["g"] = list(pk.g);
    out["h"] = to_json(pk.h);
    out["hbar"] = pk.hbar;
    out["m"] = pk.m_scale;
    out["omega"] = pk.omega_scale;
    return out;
}

namespace {

std::vector<int> exponents(const json &v, int n_pairs, const char *key) {
    std::vector<int> out;
    if (v.is_number_integer()) {
        out.push_back(v.get<int>());
    } else if (v.is_array()) {
        out = v.get<std::vector<int>>();
    } else {
        throw std::invalid_argument(std::string("polynomial term: '") + key + "' must be an integer or array");
    }
    if (static_cast<int>(out.size()) != n_pairs) {
        throw std::invalid_argument(std::string("polynomial term: '") + key + "' needs " + std::to_string(n_pairs) +
                                    " exponents");
    }
    return out;
}

}  // namespace

Polynomial polynomial_from_json(const json &j, int n_pairs) {
    if (!j.is_array()) {
        throw std::invalid_argument("polynomial must be a JSON array of terms");
    }
    static const std::set<std::string> allowed{"a", "b", "coef", "omega_t", "phase_t"};
    Polynomial p(n_pairs);
    for (const auto &t : j) {
        if (!t.is_object()) {
            throw std::invalid_argument("polynomial term must be an object");
        }
        for (const auto &[key, value] : t.items()) {
            if (!allowed.count(key)) {
                throw std::invalid_argument("polynomial term: unknown key '" + key + "'");
            }
        }
        if (!t.contains("a") || !t.contains("b") || !t.contains("coef")) {
            throw std::invalid_argument("polynomial term needs 'a', 'b' and 'coef'");
        }
        Monomial m{exponents(t["a"], n_pairs, "a"), exponents(t["b"], n_pairs, "b"), t["coef"].get<double>(), {}};
        if (t.contains("omega_t") || t.contains("phase_t")) {
            m.time = TimeFactor::cosine(t.value("omega_t", 0.0), t.value("phase_t", 0.0));
        }
        p.add(std::move(m));
    }
    return p;
}

PolyKoopman poly_koopman_from_json(const json &j) {
    if (!j.is_object()) {
        throw std::invalid_argument("PolyKoopman JSON must be an object");
    }
    static const std::set<std::string> allowed{"M", "f", "g", "h", "hbar", "m", "omega"};
    for (const auto &[key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw std::invalid_argument("PolyKoopman JSON: unknown key '" + key + "'");
        }
    }
    PolyKoopman pk;
    pk.M = j.value("M", 1);
    if (pk.M < 1 || pk.M > 2) {
        throw std::invalid_argument("PolyKoopman JSON: M must be 1 or 2");
    }
    auto list = [&](const char *key) {
        std::vector<Polynomial> out;
        if (!j.contains(key)) {
            out.assign(pk.M, Polynomial(pk.M));
            return out;
        }
        const json &v = j[key];
        if (pk.M == 1) {
            out.push_back(polynomial_from_json(v, 1));
            return out;
        }
        if (!v.is_array() || static_cast<int>(v.size()) != pk.M) {
            throw std::invalid_argument(std::string("PolyKoopman JSON: '") + key + "' needs one term list per pair");
        }
        for (const auto &p : v) {
            out.push_back(polynomial_from_json(p, pk.M));
        }
        return out;
    };
    pk.f = list("f");
    pk.g = list("g");
    pk.h = j.contains("h") ? polynomial_from_json(j["h"], pk.M) : Polynomial(pk.M);
    pk.hbar = j.value("hbar", 1.0);
    pk.m_scale = j.value("m", 1.0);
    pk.omega_scale = j.value("omega", 1.0);
    pk.validate();
    return pk;
}

}  // namespace qmfs
