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

#include "qmfs/spin_exact.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <unsupported/Eigen/KroneckerProduct>

#include "qmfs/counter_rng.h"
#include "qmfs/fock_oracle.h"
#include "qmfs/model_library.h"

namespace qmfs {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using cd = std::complex<double>;

namespace {

int level_count(double j) {
    double twice = 2.0 * j;
    if (!std::isfinite(j) || twice < 1.0 || std::abs(twice - std::round(twice)) > 1e-12) {
        throw std::invalid_argument("spin size must be a positive multiple of 1/2");
    }
    return static_cast<int>(std::lround(twice)) + 1;
}

MatrixXcd rotation(const MatrixXcd &J, double angle, double hbar) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(J);
    VectorXcd phases = (cd(0.0, -angle / hbar) * solver.eigenvalues().cast<cd>()).array().exp();
    return solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
}

}  // namespace

SpinMatrices spin_matrices(double j, double hbar) {
    const int n = level_count(j);
    SpinMatrices out{MatrixXcd::Zero(n, n), MatrixXcd::Zero(n, n), MatrixXcd::Zero(n, n)};
    // Row k holds m = j - k; J+ |m> = hbar sqrt(j(j+1) - m(m+1)) |m+1>.
    for (int k = 0; k < n; k++) {
        double m = j - k;
        out.z(k, k) = hbar * m;
        if (k > 0) {
            double up = hbar * std::sqrt(j * (j + 1) - m * (m + 1));
            out.x(k - 1, k) = out.x(k, k - 1) = 0.5 * up;
            out.y(k - 1, k) = cd(0.0, -0.5 * up);
            out.y(k, k - 1) = cd(0.0, 0.5 * up);
        }
    }
    return out;
}

SpinPair build_spin_pair(double J0, double gamma_B0, double hbar, long dimension_cap) {
    const int n = level_count(J0);
    if (!(gamma_B0 > 0.0) || !std::isfinite(gamma_B0)) {
        throw std::invalid_argument("build_spin_pair: gamma_B0 must be positive");
    }
    if (!(hbar > 0.0) || !std::isfinite(hbar)) {
        throw std::invalid_argument("build_spin_pair: hbar must be positive");
    }
    if (static_cast<long>(n) * n > dimension_cap) {
        throw std::length_error("build_spin_pair: dimension " + std::to_string(n * n) + " exceeds cap " +
                                std::to_string(dimension_cap));
    }
    SpinMatrices s = spin_matrices(J0, hbar);
    MatrixXcd I = MatrixXcd::Identity(n, n);
    SpinPair pair;
    pair.J0 = J0;
    pair.gamma_B0 = gamma_B0;
    pair.hbar = hbar;
    pair.levels = n;
    pair.Jx = Eigen::kroneckerProduct(s.x, I);
    pair.Jy = Eigen::kroneckerProduct(s.y, I);
    pair.Jz = Eigen::kroneckerProduct(s.z, I);
    pair.Jxp = Eigen::kroneckerProduct(I, s.x);
    pair.Jyp = Eigen::kroneckerProduct(I, s.y);
    pair.Jzp = Eigen::kroneckerProduct(I, s.z);
    pair.H = -gamma_B0 * (pair.Jz + pair.Jzp);
    pair.energies = pair.H.diagonal().real();
    return pair;
}

long SpinPair::index(int a, int b) const {
    if (a < 0 || b < 0 || a >= levels || b >= levels) {
        throw std::out_of_range("SpinPair::index: excitation out of range");
    }
    return static_cast<long>(a) * levels + (levels - 1 - b);
}

MatrixXcd SpinPair::q() const {
    return Jx / std::sqrt(hbar * J0);
}
MatrixXcd SpinPair::p() const {
    return Jy / std::sqrt(hbar * J0);
}
MatrixXcd SpinPair::qp() const {
    return Jxp / std::sqrt(hbar * J0);
}
MatrixXcd SpinPair::pp() const {
    return -Jyp / std::sqrt(hbar * J0);
}
MatrixXcd SpinPair::linear(const Eigen::Vector4d &s) const {
    return s(0) * q() + s(1) * p() + s(2) * qp() + s(3) * pp();
}
MatrixXcd SpinPair::Q() const {
    return q() + qp();
}
MatrixXcd SpinPair::Pi() const {
    return p() - pp();
}

MatrixXcd SpinPair::heisenberg(const MatrixXcd &O, double t) const {
    // U = diag(exp(-i E t / hbar)); (U^dag O U)_ij = O_ij exp(i (E_i - E_j) t / hbar).
    VectorXcd phase = (cd(0.0, t / hbar) * energies.cast<cd>()).array().exp();
    return phase.asDiagonal() * O * phase.conjugate().asDiagonal();
}

VectorXcd SpinPair::propagate(const VectorXcd &psi, double t) const {
    VectorXcd phase = (cd(0.0, -t / hbar) * energies.cast<cd>()).array().exp();
    return phase.cwiseProduct(psi);
}

MatrixXcd spin_commutator_closed_form(const SpinPair &pair, double t, double t_prime) {
    return cd(0.0, std::sin(pair.gamma_B0 * (t_prime - t)) / pair.J0) * (pair.Jz + pair.Jzp);
}

SpinCommutatorCheck qmfs_commutator_identity(const SpinPair &pair, double t, double t_prime) {
    MatrixXcd Q = pair.Q();
    MatrixXcd A = pair.heisenberg(Q, t), B = pair.heisenberg(Q, t_prime);
    MatrixXcd C = A * B - B * A;
    SpinCommutatorCheck out;
    out.commutator_norm = anti_hermitian_norm(C);
    out.residual = anti_hermitian_norm(C - spin_commutator_closed_form(pair, t, t_prime));
    return out;
}

double low_excitation_norm(const SpinPair &pair, double t, double t_prime, int n) {
    if (n < 0) {
        throw std::invalid_argument("low_excitation_norm: n must be >= 0");
    }
    std::vector<long> states;
    for (int a = 0; a <= n && a < pair.levels; a++) {
        for (int b = 0; a + b <= n && b < pair.levels; b++) {
            states.push_back(pair.index(a, b));
        }
    }
    MatrixXcd Q = pair.Q();
    MatrixXcd A = pair.heisenberg(Q, t), B = pair.heisenberg(Q, t_prime);
    const auto k = static_cast<long>(states.size());
    MatrixXcd A_rows(k, pair.dim()), B_rows(k, pair.dim()), A_cols(pair.dim(), k), B_cols(pair.dim(), k);
    for (long i = 0; i < k; i++) {
        A_rows.row(i) = A.row(states[i]);
        B_rows.row(i) = B.row(states[i]);
        A_cols.col(i) = A.col(states[i]);
        B_cols.col(i) = B.col(states[i]);
    }
    MatrixXcd block = A_rows * B_cols - B_rows * A_cols;
    return anti_hermitian_norm(block);
}

VectorXcd spin_coherent_state(const SpinPair &pair, cd d, bool primed) {
    SpinMatrices s = spin_matrices(pair.J0, pair.hbar);
    const int n = pair.levels;
    double theta = std::abs(d) / std::sqrt(pair.hbar * pair.J0);
    double phi = std::abs(d) > 0.0 ? std::arg(d) : 0.0;
    VectorXcd stretched = VectorXcd::Zero(n);
    if (primed) {
        // Tilting -z by -theta about y gives J'x ~ +sin(theta); p' = -J'y flips the phase.
        stretched(n - 1) = 1.0;
        theta = -theta;
        phi = -phi;
    } else {
        stretched(0) = 1.0;
    }
    return rotation(s.z, phi, pair.hbar) * (rotation(s.y, theta, pair.hbar) * stretched);
}

HpComparison hp_agreement(const SpinPair &pair, const Eigen::Vector4d &s, cd d, cd d_prime,
                          const std::vector<double> &times) {
    VectorXcd psi = Eigen::kroneckerProduct(spin_coherent_state(pair, d, false), spin_coherent_state(pair, d_prime, true));
    MatrixXcd O = pair.linear(s);

    ModelBundle hp = spin_pair_hp(pair.J0, pair.gamma_B0, pair.hbar);
    Eigen::Vector4d mean0(d.real(), d.imag(), d_prime.real(), d_prime.imag());
    Eigen::Matrix4d cov0 = 0.5 * pair.hbar * Eigen::Matrix4d::Identity();

    HpComparison out;
    out.times = times;
    for (double t : times) {
        VectorXcd psi_t = pair.propagate(psi, t);
        VectorXcd o_psi = O * psi_t;
        double mean = psi_t.dot(o_psi).real();
        double second = o_psi.squaredNorm();
        out.exact_mean.push_back(mean);
        out.exact_var.push_back(second - mean * mean);

        Eigen::Matrix4d Phi = transfer_matrix(hp.model, t);
        Eigen::Vector4d st = Phi.transpose() * s;
        out.hp_mean.push_back(st.dot(mean0));
        out.hp_var.push_back(st.dot(cov0 * st));

        double sd = std::sqrt(out.hp_var.back());
        out.deviation = std::max({out.deviation, std::abs(out.exact_mean.back() - out.hp_mean.back()) / sd,
                                  std::abs(out.exact_var.back() - out.hp_var.back()) / out.hp_var.back()});
    }
    return out;
}

std::vector<SpinSweepRow> spin_sweep(const SpinSweepConfig &config) {
    if (config.n_time_pairs < 1 || config.n_times < 2 || config.excitation < 0) {
        throw std::invalid_argument("spin_sweep: bad sample counts");
    }
    const double period = 2.0 * std::numbers::pi / config.gamma_B0;
    std::vector<double> grid;
    for (int k = 0; k < config.n_times; k++) {
        grid.push_back(period * k / (config.n_times - 1));
    }
    std::vector<SpinSweepRow> rows;
    for (double J0 : config.J0) {
        SpinPair pair = build_spin_pair(J0, config.gamma_B0, config.hbar);
        SpinSweepRow row;
        row.J0 = J0;
        for (int k = 0; k < config.n_time_pairs; k++) {
            double t = period * counter_uniform(config.seed, 0, k);
            double tp = period * counter_uniform(config.seed, 1, k);
            row.residual_norm = std::max(row.residual_norm, qmfs_commutator_identity(pair, t, tp).residual);
            row.low_excitation_norm =
                std::max(row.low_excitation_norm, low_excitation_norm(pair, t, tp, config.excitation));
        }
        row.hp_deviation =
            hp_agreement(pair, Eigen::Vector4d(1, 0, 1, 0), config.displacement, 0.0, grid).deviation;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace qmfs
