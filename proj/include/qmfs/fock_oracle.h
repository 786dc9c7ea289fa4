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

#ifndef QMFS_FOCK_ORACLE_H
#define QMFS_FOCK_ORACLE_H

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qmfs/phase_space.h"
#include "qmfs/polynomial.h"

namespace qmfs {

/// Truncation of every mode to the Fock levels 0 .. n_levels-1.
///
/// Results are only trusted on a "test shell": basis states whose total
/// excitation number is at most test_shell (default n_levels - 1 - guard_levels).
/// The guard check evolves every shell state and flags a result when the
/// population in the top guard_levels of any mode exceeds guard_fraction.
struct TruncationSpec {
    int n_levels = 20;
    int guard_levels = 2;
    double guard_fraction = 1e-6;
    int test_shell = -1;
    long dimension_cap = 4096;

    int shell() const {
        return test_shell >= 0 ? test_shell : n_levels - 1 - guard_levels;
    }
    /// Throws std::invalid_argument (bad values) or std::length_error (cap exceeded).
    void validate(int n_modes) const;
    std::string describe() const;
};

/// Single-mode ladder quadratures with reference scale w = m * omega:
///   q = sqrt(hbar / 2w) (a + a^dagger),  p = i sqrt(hbar w / 2)(a^dagger - a).
Eigen::MatrixXcd ladder_q(int n_levels, double hbar, double scale);
Eigen::MatrixXcd ladder_p(int n_levels, double hbar, double scale);

/// Kronecker product of per-mode operators; mode 0 is the most significant index.
Eigen::MatrixXcd kron_modes(const std::vector<Eigen::MatrixXcd> &locals);

/// Quadrature operators of a multi-mode truncated Fock space. Operators are
/// kept per mode; full-space matrices are assembled on request.
class FockSpace {
   public:
    FockSpace(int n_modes, const TruncationSpec &spec, double hbar, std::vector<double> scales = {});

    int n_modes() const {
        return n_modes_;
    }
    int n_levels() const {
        return spec_.n_levels;
    }
    long dim() const {
        return dim_;
    }
    double hbar() const {
        return hbar_;
    }
    const TruncationSpec &spec() const {
        return spec_;
    }
    const Eigen::MatrixXcd &local_q(int mode) const {
        return q_.at(mode);
    }
    const Eigen::MatrixXcd &local_p(int mode) const {
        return p_.at(mode);
    }

    /// Full-space q or p of one mode.
    Eigen::MatrixXcd q(int mode) const;
    Eigen::MatrixXcd p(int mode) const;
    /// Full-space operator sum_i c_i x_i with x = (q_0, p_0, q_1, p_1, ...).
    Eigen::MatrixXcd linear_combination(const Eigen::VectorXd &c) const;
    /// kron of the given local operators, identity elsewhere.
    Eigen::MatrixXcd embed(const std::vector<std::pair<int, Eigen::MatrixXcd>> &locals) const;

    /// Fock level of `mode` in the basis state `index`.
    int level(long index, int mode) const;
    /// Basis indices with total excitation <= shell, in increasing order.
    const std::vector<long> &shell_states() const {
        return shell_;
    }
    /// Columns of the identity at the shell states.
    Eigen::MatrixXcd shell_basis() const;
    /// True for basis states with some mode in its top guard_levels levels.
    const std::vector<bool> &guard_mask() const {
        return guard_;
    }
    /// Product state of single-mode state vectors.
    Eigen::VectorXcd product_state(const std::vector<Eigen::VectorXcd> &modes) const;

   private:
    int n_modes_;
    TruncationSpec spec_;
    double hbar_;
    long dim_;
    std::vector<Eigen::MatrixXcd> q_;
    std::vector<Eigen::MatrixXcd> p_;
    std::vector<long> shell_;
    std::vector<bool> guard_;
};

/// Normalized truncated coherent state |alpha>.
Eigen::VectorXcd coherent_state(int n_levels, std::complex<double> alpha);

/// Fock space of a PolyKoopman: modes (Q_j, P_j) for j < M, then (Phi_j, Pi_j).
FockSpace koopman_space(const PolyKoopman &pk, const TruncationSpec &spec);

/// H = 1/2 sum_j (P_j f_j + f_j P_j + Phi_j g_j + g_j Phi_j) + h at time t, with
/// f, g, h built from the commuting (Q, Pi). Throws std::runtime_error if the
/// result is not Hermitian to 1e-12 (relative).
Eigen::MatrixXcd build_koopman_hamiltonian(const PolyKoopman &pk, const FockSpace &space, double t = 0.0);

/// Full-space operator of a polynomial in (Q, Pi) at time t.
Eigen::MatrixXcd polynomial_operator(const Polynomial &poly, const FockSpace &space, double t = 0.0);

/// H = 1/2 x^T G x with symmetric ordering, x = (q_0, p_0, q_1, p_1, ...).
Eigen::MatrixXcd quadratic_hamiltonian(const LinearModel &model, const FockSpace &space);

struct GuardReport {
    double max_population = 0.0;
    double threshold = 0.0;
    bool trusted = true;
    std::string describe() const;
};

/// Dense Heisenberg-picture evolution under a time-independent H through its
/// eigendecomposition. O(t) = exp(iHt/hbar) O exp(-iHt/hbar).
class HeisenbergEvolver {
   public:
    HeisenbergEvolver(const FockSpace &space, const Eigen::MatrixXcd &H);

    const FockSpace &space() const {
        return space_;
    }
    const Eigen::VectorXd &energies() const {
        return energies_;
    }
    const Eigen::MatrixXcd &eigenvectors() const {
        return V_;
    }
    /// Full O(t).
    Eigen::MatrixXcd heisenberg(const Eigen::MatrixXcd &O, double t) const;
    /// exp(-iHt/hbar) applied to columns of X.
    Eigen::MatrixXcd propagate(const Eigen::MatrixXcd &X, double t) const;
    /// Largest guard-region population of the evolved shell states over the times.
    GuardReport guard(const std::vector<double> &times) const;

    /// Operator prepared for repeated O(t) X products.
    struct Prepared {
        Eigen::MatrixXcd eig;  // V^dagger O V
    };
    Prepared prepare(const Eigen::MatrixXcd &O) const;
    /// O(t) X without forming O(t).
    Eigen::MatrixXcd apply(const Prepared &O, double t, const Eigen::MatrixXcd &X) const;
    /// O(t) applied to the shell basis, expressed in the eigenbasis of H.
    /// Shell matrix elements follow from inner products of these columns.
    Eigen::MatrixXcd shell_image(const Prepared &O, double t) const;

   private:
    FockSpace space_;
    Eigen::VectorXd energies_;
    Eigen::MatrixXcd V_;
};

struct HeisenbergResult {
    Eigen::MatrixXcd op;
    GuardReport guard;
};

/// O(t) with the guard evaluated at t.
HeisenbergResult heisenberg_op(const HeisenbergEvolver &evolver, const Eigen::MatrixXcd &O, double t);

struct CommutatorResidual {
    /// max over pairs and time pairs of ||Pi_s [O_j(t), O_k(t')] Pi_s||_2 / hbar,
    /// with Pi_s the projector on the test shell.
    double max_residual = 0.0;
    int worst_j = -1;
    int worst_k = -1;
    double worst_t = 0.0;
    double worst_tp = 0.0;
    GuardReport guard;
    std::string truncation;
};

/// Shell-restricted two-time commutator Pi_s [A(t), B(t')] Pi_s. With A, B
/// Hermitian, Pi_s A B Pi_s = (A Pi_s)^dagger (B Pi_s), so only the shell
/// images are needed.
Eigen::MatrixXcd shell_commutator(const HeisenbergEvolver &evolver, const HeisenbergEvolver::Prepared &A, double t,
                                  const HeisenbergEvolver::Prepared &B, double tp);

/// Spectral norm of a matrix.
double spectral_norm(const Eigen::MatrixXcd &M);
/// Spectral norm of an anti-Hermitian matrix (a commutator of Hermitian
/// operators) from the eigenvalues of iC; cheaper than an SVD.
double anti_hermitian_norm(const Eigen::MatrixXcd &C);

/// All pairs j <= k over the time grid (both times from t_grid).
CommutatorResidual commutator_residual(const HeisenbergEvolver &evolver, const std::vector<Eigen::MatrixXcd> &ops,
                                       const std::vector<double> &t_grid);

/// Largest shell-restricted deviation between the oracle commutators of
/// x-linear observables S x and the c-number prediction of phase_space, over
/// the grid, divided by hbar. The model must be in the oracle's variable order.
double oracle_agreement(const HeisenbergEvolver &evolver, const LinearModel &model, const ObservableSet &set,
                        const std::vector<double> &t_grid);

/// Piecewise-constant (midpoint) propagator for time-dependent PolyKoopman
/// Hamiltonians: exp(-iH(t_k + dt/2) dt / hbar) products.
class PiecewisePropagator {
   public:
    PiecewisePropagator(const PolyKoopman &pk, const FockSpace &space, double dt);
    /// U(t1, t0).
    Eigen::MatrixXcd unitary(double t0, double t1) const;
    /// O(t) = U(t, 0)^dagger O U(t, 0).
    Eigen::MatrixXcd heisenberg(const Eigen::MatrixXcd &O, double t) const;

   private:
    PolyKoopman pk_;
    FockSpace space_;
    double dt_;
};

}  // namespace qmfs

#endif
