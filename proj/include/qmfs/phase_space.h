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

#ifndef QMFS_PHASE_SPACE_H
#define QMFS_PHASE_SPACE_H

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qmfs {

/// Block-diagonal symplectic form for `n_modes` modes in the ordering
/// (q1, p1, q2, p2, ...). Canonical commutators read [x_i, x_j] = i hbar Omega_ij.
Eigen::MatrixXd symplectic_form(int n_modes);

/// Drift matrix of the Heisenberg equations dx/dt = A x for H = x^T G x / 2.
/// Requires G exactly symmetric and dimensions matching Omega.
Eigen::MatrixXd build_drift(const Eigen::MatrixXd &G, const Eigen::MatrixXd &Omega);

/// Quadratic bosonic model H = x^T G x / 2 plus linear force couplings.
///
/// Each force coupling b enters the equations of motion as dx/dt = A x + b F(t).
class LinearModel {
   public:
    explicit LinearModel(Eigen::MatrixXd G, double hbar = 1.0, std::vector<Eigen::VectorXd> force_couplings = {});

    int n_modes() const {
        return n_modes_;
    }
    int dim() const {
        return 2 * n_modes_;
    }
    double hbar() const {
        return hbar_;
    }
    const Eigen::MatrixXd &G() const {
        return G_;
    }
    const Eigen::MatrixXd &A() const {
        return A_;
    }
    const Eigen::MatrixXd &Omega() const {
        return Omega_;
    }
    const std::vector<Eigen::VectorXd> &force_couplings() const {
        return force_couplings_;
    }

   private:
    int n_modes_;
    double hbar_;
    Eigen::MatrixXd G_;
    Eigen::MatrixXd A_;
    Eigen::MatrixXd Omega_;
    std::vector<Eigen::VectorXd> force_couplings_;
};

/// A set of linear observables s.x, one per row of S.
class ObservableSet {
   public:
    ObservableSet(Eigen::MatrixXd S, std::vector<std::string> labels);

    const Eigen::MatrixXd &S() const {
        return S_;
    }
    const std::vector<std::string> &labels() const {
        return labels_;
    }
    int size() const {
        return static_cast<int>(S_.rows());
    }
    int dim() const {
        return static_cast<int>(S_.cols());
    }
    ObservableSet subset(const std::vector<int> &rows) const;
    std::string describe() const;

   private:
    Eigen::MatrixXd S_;
    std::vector<std::string> labels_;
};

/// Operator 1-norm (max absolute column sum).
double matrix_one_norm(const Eigen::MatrixXd &M);

/// Default bound on ||A t||_1 accepted by transfer_matrix.
constexpr double kMaxExponentNorm = 50.0;

/// Propagator exp(A t) of the linear flow. Scaling-and-squaring Padé.
/// Throws std::domain_error when ||A t||_1 exceeds `max_norm`.
Eigen::MatrixXd transfer_matrix(const LinearModel &model, double t, double max_norm = kMaxExponentNorm);
Eigen::MatrixXd transfer_matrix(const Eigen::MatrixXd &A, double t, double max_norm = kMaxExponentNorm);

/// K(t, t') = i hbar S Phi(t) Omega Phi(t')^T S^T, the exact c-number two-time
/// commutator [O_j(t), O_k(t')] of the linear observables in S.
Eigen::MatrixXcd two_time_commutator(const LinearModel &model, const ObservableSet &set, double t, double t_prime);

enum class QmfsVerdict { kQmfs, kNotQmfs };

struct QmfsWitness {
    int i;
    int j;
    int row;
    int col;
    double scaled_residual;
};

struct QmfsResult {
    QmfsVerdict verdict;
    double max_scaled_residual;
    double tolerance;
    std::optional<QmfsWitness> witness;

    bool is_qmfs() const {
        return verdict == QmfsVerdict::kQmfs;
    }
};

constexpr double kQmfsTolerance = 1e-10;

/// Exact test of [O_j(t), O_k(t')] = 0 for all t, t'.
///
/// The two-time commutator is the double power series
///   K(t,t') = i hbar sum_{i,j} t^i t'^j / (i! j!) S A^i Omega (A^T)^j S^T,
/// so it vanishes identically iff every coefficient block S A^i Omega (A^T)^j S^T
/// is zero. By Cayley-Hamilton every A^i with i >= 2n is a combination of lower
/// powers, so 0 <= i, j <= 2n-1 suffices. Each block entry is compared against
/// `tol` after dividing by ||S||_F^2 ||A||_F^(i+j). The witness on failure is the
/// largest scaled residual.
QmfsResult is_qmfs(const LinearModel &model, const ObservableSet &set, double tol = kQmfsTolerance);

/// Redundant sampled diagnostic: max over an n x n grid of (t, t') in
/// [0, t_max]^2 of the spectral norm of two_time_commutator.
double max_grid_commutator(const LinearModel &model, const ObservableSet &set, double t_max, int n);

}  // namespace qmfs

#endif
