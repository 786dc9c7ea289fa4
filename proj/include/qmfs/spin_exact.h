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

#ifndef QMFS_SPIN_EXACT_H
#define QMFS_SPIN_EXACT_H

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace qmfs {

/// Angular momentum matrices (with hbar) for spin j in the basis
/// m = j, j-1, ..., -j.
struct SpinMatrices {
    Eigen::MatrixXcd x, y, z;
};
SpinMatrices spin_matrices(double j, double hbar = 1.0);

/// Two collective spins of size J0 on the product space (unprimed factor
/// first) with H = -gamma_B0 (Jz + J'z). The unprimed spin is the
/// positive-mass oscillator about |J0, J0>, the primed one the negative-mass
/// oscillator about |J0, -J0>.
struct SpinPair {
    double J0 = 0.0;
    double gamma_B0 = 0.0;
    double hbar = 1.0;
    int levels = 0;  // 2 J0 + 1
    Eigen::MatrixXcd Jx, Jy, Jz, Jxp, Jyp, Jzp;
    Eigen::MatrixXcd H;
    /// H is diagonal in this basis; evolution uses these directly.
    Eigen::VectorXd energies;

    long dim() const {
        return static_cast<long>(levels) * levels;
    }
    /// Basis index of |J0 - a> (x) |-J0 + b>: a, b excitations of each oscillator.
    long index(int a, int b) const;

    /// Quadratures of the Holstein-Primakoff map, scaled by sqrt(hbar J0):
    /// q = Jx, p = Jy, q' = J'x, p' = -J'y.
    Eigen::MatrixXcd q() const;
    Eigen::MatrixXcd p() const;
    Eigen::MatrixXcd qp() const;
    Eigen::MatrixXcd pp() const;
    /// s . (q, p, q', p').
    Eigen::MatrixXcd linear(const Eigen::Vector4d &s) const;
    /// Q = q + q' and Pi = p - p'.
    Eigen::MatrixXcd Q() const;
    Eigen::MatrixXcd Pi() const;

    Eigen::MatrixXcd heisenberg(const Eigen::MatrixXcd &O, double t) const;
    Eigen::VectorXcd propagate(const Eigen::VectorXcd &psi, double t) const;
};

/// Throws std::invalid_argument unless 2 J0 is a positive integer, and
/// std::length_error when (2 J0 + 1)^2 exceeds dimension_cap.
SpinPair build_spin_pair(double J0, double gamma_B0, double hbar = 1.0, long dimension_cap = 4096);

struct SpinCommutatorCheck {
    /// ||[Q(t), Q(t')] - i hbar sin(gamma_B0 (t' - t)) (Jz + J'z) / (hbar J0)||.
    double residual = 0.0;
    /// ||[Q(t), Q(t')]|| on the full space.
    double commutator_norm = 0.0;
};

/// Closed form of [Q(t), Q(t')] from the exact precession
/// Jx(t) = Jx cos(wt) + Jy sin(wt), w = gamma_B0.
Eigen::MatrixXcd spin_commutator_closed_form(const SpinPair &pair, double t, double t_prime);
SpinCommutatorCheck qmfs_commutator_identity(const SpinPair &pair, double t, double t_prime);

/// Norm of [Q(t), Q(t')] restricted to states with at most n total
/// excitations above |J0, J0> (x) |J0, -J0>.
double low_excitation_norm(const SpinPair &pair, double t, double t_prime, int n);

/// |theta, phi> = exp(-i phi Jz) exp(-i theta Jy) applied to the stretched
/// state that the oscillator is built on. The displacement d is in quadrature
/// units: the tilt angle is |d| / sqrt(hbar J0) and the phase is chosen so that
/// <q> + i<p> (or <q'> + i<p'>) points along d.
Eigen::VectorXcd spin_coherent_state(const SpinPair &pair, std::complex<double> d, bool primed);

struct HpComparison {
    std::vector<double> times;
    std::vector<double> exact_mean, hp_mean;
    std::vector<double> exact_var, hp_var;
    /// max over t of max(|mean difference| / hp std, |variance difference| / hp variance).
    double deviation = 0.0;
};

/// Exact moments of s . (q, p, q', p') for the product of tilted stretched
/// states, against the Gaussian model of the same oscillator pair started
/// at mean (Re d, Im d, Re d', Im d') with vacuum covariance hbar/2.
HpComparison hp_agreement(const SpinPair &pair, const Eigen::Vector4d &s, std::complex<double> d,
                          std::complex<double> d_prime, const std::vector<double> &times);

struct SpinSweepRow {
    double J0 = 0.0;
    double residual_norm = 0.0;
    double low_excitation_norm = 0.0;
    double hp_deviation = 0.0;
};

struct SpinSweepConfig {
    std::vector<double> J0 = {2, 4, 8, 16};
    double gamma_B0 = 1.0;
    double hbar = 1.0;
    /// Time pairs for the identity check, drawn from this seed on [0, 2 pi / gamma_B0].
    int n_time_pairs = 5;
    uint64_t seed = 1;
    int excitation = 1;
    /// Displacement of the unprimed oscillator in quadrature units.
    double displacement = 0.4;
    int n_times = 25;
};

std::vector<SpinSweepRow> spin_sweep(const SpinSweepConfig &config);

}  // namespace qmfs

#endif
