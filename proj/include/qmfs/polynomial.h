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

#ifndef QMFS_POLYNOMIAL_H
#define QMFS_POLYNOMIAL_H

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qmfs/phase_space.h"

namespace qmfs {

/// Scalar time factor multiplying a monomial: 1, or cos(omega t + phase).
struct TimeFactor {
    bool constant = true;
    double omega = 0.0;
    double phase = 0.0;

    static TimeFactor cosine(double omega, double phase = 0.0) {
        return {false, omega, phase};
    }
    double operator()(double t) const;
    bool operator==(const TimeFactor &) const = default;
};

/// coef * time(t) * prod_j Q_j^a[j] Pi_j^b[j].
struct Monomial {
    std::vector<int> a;
    std::vector<int> b;
    double coef = 0.0;
    TimeFactor time;

    int degree() const;
};

/// Real polynomial in the commuting variables (Q_1..Q_M, Pi_1..Pi_M), with
/// separable time dependence per term.
class Polynomial {
   public:
    explicit Polynomial(int n_pairs = 1);
    Polynomial(int n_pairs, std::vector<Monomial> terms);

    /// Single-pair shorthand: coef * Q^a Pi^b.
    static Polynomial term(double coef, int a, int b);

    Polynomial &add(Monomial m);
    Polynomial &add(double coef, int a, int b, TimeFactor time = {});

    int n_pairs() const {
        return n_pairs_;
    }
    const std::vector<Monomial> &terms() const {
        return terms_;
    }
    bool empty() const {
        return terms_.empty();
    }
    int degree() const;
    bool is_time_dependent() const;

    double operator()(const Eigen::VectorXd &Q, const Eigen::VectorXd &Pi, double t = 0.0) const;
    Polynomial d_dQ(int j) const;
    Polynomial d_dPi(int j) const;

   private:
    int n_pairs_;
    std::vector<Monomial> terms_;
};

/// Coefficients of the Koopman Hamiltonian
///   H = 1/2 sum_j (P_j f_j + f_j P_j + Phi_j g_j + g_j Phi_j) + h,
/// with f_j, g_j, h functions of (Q, Pi, t). m_scale and omega_scale set the
/// reference oscillator m*omega used for the Fock-space quadratures.
struct PolyKoopman {
    int M = 1;
    std::vector<Polynomial> f;
    std::vector<Polynomial> g;
    Polynomial h;
    double hbar = 1.0;
    double m_scale = 1.0;
    double omega_scale = 1.0;

    static constexpr int kDefaultMaxDegree = 4;

    /// Throws std::invalid_argument on size mismatch, non-finite data or degree > max_degree.
    void validate(int max_degree = kDefaultMaxDegree) const;
    bool is_time_dependent() const;

    /// f = Pi/m, g = m omega^2 Q: the collective form of an oscillator pair.
    static PolyKoopman harmonic(double m, double omega, double hbar = 1.0);
    /// Harmonic plus f += eps Q^2.
    static PolyKoopman quadratic_drift(double m, double omega, double eps, double hbar = 1.0);
};

/// Phase-space ordering used for PolyKoopman variables:
/// (Q_1, P_1, ..., Q_M, P_M, Phi_1, Pi_1, ..., Phi_M, Pi_M).
int koopman_index_Q(int M, int j);
int koopman_index_P(int M, int j);
int koopman_index_Phi(int M, int j);
int koopman_index_Pi(int M, int j);

/// The LinearModel with the same Hamiltonian when f, g are homogeneous linear
/// and h homogeneous quadratic and nothing depends on time; nullopt otherwise.
std::optional<LinearModel> as_linear_model(const PolyKoopman &pk);

nlohmann::json to_json(const Polynomial &p);
nlohmann::json to_json(const PolyKoopman &pk);
Polynomial polynomial_from_json(const nlohmann::json &j, int n_pairs);
/// Schema: {"M", "f": [terms] or [[terms] per pair], "g": ..., "h": [terms],
/// optional "hbar", "m", "omega"}; a term is {"a", "b", "coef"} with optional
/// {"omega_t", "phase_t"} for a cosine time factor. For M = 2, a and b are
/// two-element arrays. Unknown keys are rejected.
PolyKoopman poly_koopman_from_json(const nlohmann::json &j);

}  // namespace qmfs

#endif
