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

#include "qmfs/phase_space.h"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "qmfs/model_library.h"

using namespace qmfs;

namespace {

// H = P Pi / m + m omega^2 Phi Q in the ordering (Q, P, Phi, Pi).
LinearModel collective_pair(double m, double omega, double hbar = 1.0) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(4, 4);
    G(1, 3) = G(3, 1) = 1.0 / m;
    G(0, 2) = G(2, 0) = m * omega * omega;
    return LinearModel(G, hbar);
}

ObservableSet rows(std::initializer_list<int> idx, std::vector<std::string> labels, int dim) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(idx.size(), dim);
    int r = 0;
    for (int i : idx) {
        S(r++, i) = 1.0;
    }
    return ObservableSet(S, labels);
}

LinearModel random_model(std::mt19937_64 &rng, int n_modes) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd G(2 * n_modes, 2 * n_modes);
    for (int i = 0; i < G.rows(); i++) {
        for (int j = i; j < G.cols(); j++) {
            G(i, j) = G(j, i) = u(rng);
        }
    }
    return LinearModel(G);
}

}  // namespace

TEST(phase_space, symplectic_form_layout) {
    Eigen::MatrixXd Omega = symplectic_form(3);
    EXPECT_EQ(Omega, -Omega.transpose());
    EXPECT_EQ(Omega * Omega, -Eigen::MatrixXd::Identity(6, 6));
    EXPECT_EQ(Omega(2, 3), 1.0);
    EXPECT_EQ(Omega(3, 2), -1.0);
    EXPECT_EQ(Omega(1, 2), 0.0);
}

TEST(phase_space, build_drift_examples) {
    Eigen::MatrixXd Omega = symplectic_form(1);
    EXPECT_TRUE(build_drift(Eigen::MatrixXd::Zero(2, 2), Omega).isZero(0.0));

    double m = 2.0, omega = 3.0;
    Eigen::MatrixXd G = Eigen::Vector2d(m * omega * omega, 1.0 / m).asDiagonal();
    Eigen::MatrixXd expected(2, 2);
    expected << 0.0, 1.0 / m, -m * omega * omega, 0.0;
    EXPECT_EQ(build_drift(G, Omega), expected);

    LinearModel pair = collective_pair(m, omega);
    const Eigen::MatrixXd &A = pair.A();
    // Q' = Pi/m, P' = -m w^2 Phi, Phi' = P/m, Pi' = -m w^2 Q.
    Eigen::MatrixXd A_expected = Eigen::MatrixXd::Zero(4, 4);
    A_expected(0, 3) = 1.0 / m;
    A_expected(1, 2) = -m * omega * omega;
    A_expected(2, 1) = 1.0 / m;
    A_expected(3, 0) = -m * omega * omega;
    EXPECT_EQ(A, A_expected);
}

TEST(phase_space, build_drift_rejects_bad_input) {
    Eigen::MatrixXd Omega = symplectic_form(1);
    EXPECT_THROW(build_drift(Eigen::MatrixXd::Zero(4, 4), Omega), std::invalid_argument);
    Eigen::MatrixXd G(2, 2);
    G << 1.0, 0.5, 0.5 + 1e-15, 1.0;
    EXPECT_THROW(build_drift(G, Omega), std::invalid_argument);
    EXPECT_THROW(LinearModel{G}, std::invalid_argument);
    EXPECT_THROW(LinearModel(Eigen::MatrixXd::Identity(3, 3)), std::invalid_argument);
    EXPECT_THROW(LinearModel(Eigen::MatrixXd::Identity(2, 2), -1.0), std::invalid_argument);
}

TEST(phase_space, observable_set_rejects_zero_rows) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2, 2);
    S(0, 0) = 1.0;
    EXPECT_THROW(ObservableSet(S, {"a", "b"}), std::invalid_argument);
    EXPECT_THROW(ObservableSet(Eigen::MatrixXd(0, 2), {}), std::invalid_argument);
}

TEST(phase_space, transfer_matrix_examples) {
    LinearModel osc = single_oscillator(1.0, 1.0).model;
    EXPECT_EQ(transfer_matrix(osc, 0.0), Eigen::MatrixXd::Identity(2, 2));

    Eigen::MatrixXd quarter(2, 2);
    quarter << 0.0, 1.0, -1.0, 0.0;
    EXPECT_LT((transfer_matrix(osc, std::numbers::pi / 2) - quarter).cwiseAbs().maxCoeff(), 1e-14);

    LinearModel pair = collective_pair(1.3, 0.7);
    for (double t : {0.3, 2.0, 9.5}) {
        Eigen::MatrixXd Phi = transfer_matrix(pair, t);
        for (int i : {0, 3}) {
            for (int j : {1, 2}) {
                EXPECT_LT(std::abs(Phi(i, j)), 1e-13);
                EXPECT_LT(std::abs(Phi(j, i)), 1e-13);
            }
        }
    }
}

TEST(phase_space, transfer_matrix_rejects_large_exponent) {
    LinearModel osc = single_oscillator(1.0, 1.0).model;
    EXPECT_NO_THROW(transfer_matrix(osc, 49.0));
    EXPECT_THROW(transfer_matrix(osc, 51.0), std::domain_error);
    EXPECT_THROW(transfer_matrix(osc, std::nan("")), std::invalid_argument);
}

TEST(phase_space, two_time_commutator_closed_forms) {
    LinearModel pair = collective_pair(1.0, 1.0);
    ObservableSet q_pi = rows({0, 3}, {"Q", "Pi"}, 4);
    ObservableSet q_p = rows({0, 1}, {"Q", "P"}, 4);
    LinearModel osc = single_oscillator(1.0, 1.0).model;
    ObservableSet q = rows({0}, {"q"}, 2);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int trial = 0; trial < 25; trial++) {
        double t = u(rng), tp = u(rng);
        EXPECT_LT(two_time_commutator(pair, q_pi, t, tp).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::MatrixXcd K = two_time_commutator(pair, q_p, t, tp);
        EXPECT_NEAR(K(0, 1).real(), 0.0, 1e-12);
        EXPECT_NEAR(K(0, 1).imag(), std::cos(t - tp), 1e-12);
        // [q(t), q(t')] = i hbar sin(t' - t) for the unit oscillator.
        Eigen::MatrixXcd k1 = two_time_commutator(osc, q, t, tp);
        EXPECT_NEAR(k1(0, 0).imag(), std::sin(tp - t), 1e-12);
    }
}

TEST(phase_space, two_time_commutator_scales_with_hbar) {
    LinearModel pair = collective_pair(1.0, 1.0, 0.25);
    ObservableSet q_p = rows({0, 1}, {"Q", "P"}, 4);
    EXPECT_NEAR(two_time_commutator(pair, q_p, 0.4, 1.1)(0, 1).imag(), 0.25 * std::cos(0.7), 1e-14);
}

TEST(phase_space, is_qmfs_verdicts) {
    LinearModel pair = collective_pair(1.0, 1.0);
    EXPECT_TRUE(is_qmfs(pair, rows({0, 3}, {"Q", "Pi"}, 4)).is_qmfs());
    EXPECT_TRUE(is_qmfs(pair, rows({2, 1}, {"Phi", "P"}, 4)).is_qmfs());
    for (auto set : {rows({0, 1}, {"Q", "P"}, 4), rows({2, 3}, {"Phi", "Pi"}, 4)}) {
        auto result = is_qmfs(pair, set);
        EXPECT_FALSE(result.is_qmfs());
        ASSERT_TRUE(result.witness.has_value());
    }

    LinearModel osc = single_oscillator(1.0, 1.0).model;
    auto result = is_qmfs(osc, rows({0, 1}, {"q", "p"}, 2));
    ASSERT_FALSE(result.is_qmfs());
    EXPECT_EQ(result.witness->i, 0);
    EXPECT_EQ(result.witness->j, 0);
    EXPECT_NE(result.witness->row, result.witness->col);
    // A single position is not QND for a moving oscillator either.
    EXPECT_FALSE(is_qmfs(osc, rows({0}, {"q"}, 2)).is_qmfs());
    // ... but it is for a free particle with no kinetic term (G = diag(1, 0)).
    Eigen::MatrixXd G = Eigen::Vector2d(1.0, 0.0).asDiagonal();
    EXPECT_TRUE(is_qmfs(LinearModel(G), rows({0}, {"q"}, 2)).is_qmfs());
}

TEST(phase_space, is_qmfs_trivial_drift) {
    LinearModel frozen(Eigen::MatrixXd::Zero(2, 2));
    EXPECT_TRUE(is_qmfs(frozen, rows({0}, {"q"}, 2)).is_qmfs());
    EXPECT_FALSE(is_qmfs(frozen, rows({0, 1}, {"q", "p"}, 2)).is_qmfs());
}

TEST(phase_space_property, symplectic_and_group_property) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 60; trial++) {
        LinearModel model = random_model(rng, 1 + trial % 3);
        double t = u(rng), tp = u(rng);
        Eigen::MatrixXd Phi = transfer_matrix(model, t);
        Eigen::MatrixXd Phi_p = transfer_matrix(model, tp);
        double scale = Phi.norm() * Phi.norm();
        EXPECT_LT((Phi * model.Omega() * Phi.transpose() - model.Omega()).norm() / scale, 1e-12);
        Eigen::MatrixXd sum = transfer_matrix(model, t + tp);
        EXPECT_LT((sum - Phi * Phi_p).norm() / (Phi.norm() * Phi_p.norm()), 1e-12);

        // Equal-time commutator is i hbar S Omega S^T.
        Eigen::MatrixXd S = Eigen::MatrixXd::Random(2, model.dim());
        ObservableSet set(S, {"a", "b"});
        Eigen::MatrixXcd K = two_time_commutator(model, set, t, t);
        Eigen::MatrixXd expected = model.hbar() * (S * model.Omega() * S.transpose());
        EXPECT_LT((K.imag() - expected).norm(), 1e-11 * scale * S.squaredNorm());
    }
}

TEST(phase_space_property, qmfs_sets_pass_grid_and_subsets) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> mass(0.5, 2.0);
    for (int trial = 0; trial < 20; trial++) {
        double m = mass(rng), omega = mass(rng), hbar = mass(rng);
        ModelBundle bundle = oscillator_pair(m, omega, hbar);
        for (const auto &set : bundle.qmfs_sets) {
            ASSERT_TRUE(is_qmfs(bundle.model, set).is_qmfs());
            double bound = 1e-10 * hbar * set.S().squaredNorm();
            EXPECT_LT(max_grid_commutator(bundle.model, set, 10.0 / omega, 20), bound);
            for (int r = 0; r < set.size(); r++) {
                EXPECT_TRUE(is_qmfs(bundle.model, set.subset({r})).is_qmfs());
            }
        }
    }
}
