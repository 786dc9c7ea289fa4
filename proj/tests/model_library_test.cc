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

#include "qmfs/model_library.h"

#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

using namespace qmfs;

namespace {

std::complex<double> response(const LinearModel &model, const Eigen::VectorXd &s, const Eigen::VectorXd &b,
                              double w) {
    using C = std::complex<double>;
    Eigen::MatrixXcd M = C(0.0, w) * Eigen::MatrixXcd::Identity(model.dim(), model.dim()) -
                         model.A().cast<C>();
    Eigen::VectorXcd x = M.partialPivLu().solve(b.cast<C>());
    return s.cast<C>().dot(x);
}

Eigen::MatrixXd random_symplectic(std::mt19937_64 &rng, int n_modes) {
    std::normal_distribution<double> g(0.0, 0.4);
    Eigen::MatrixXd H(2 * n_modes, 2 * n_modes);
    for (int i = 0; i < H.rows(); i++) {
        for (int j = i; j < H.cols(); j++) {
            H(i, j) = H(j, i) = g(rng);
        }
    }
    Eigen::MatrixXd generator = symplectic_form(n_modes) * H;
    return generator.exp();
}

}  // namespace

TEST(model_library, single_oscillator_drift) {
    Eigen::MatrixXd expected(2, 2);
    expected << 0.0, 1.0, -1.0, 0.0;
    EXPECT_EQ(single_oscillator(1.0, 1.0).model.A(), expected);
    // Negative mass: same frequency, opposite circulation.
    EXPECT_EQ(single_oscillator(-1.0, 1.0).model.A(), -expected);
    EXPECT_TRUE(single_oscillator(1.0, 1.0).qmfs_sets.empty());
}

TEST(model_library, constructors_reject_bad_parameters) {
    EXPECT_THROW(single_oscillator(0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(single_oscillator(1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(single_oscillator(1.0, -2.0), std::invalid_argument);
    EXPECT_THROW(oscillator_pair(1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(oscillator_pair(-1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(sideband_model(-1.0), std::invalid_argument);
    EXPECT_THROW(spin_pair_hp(0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(build_named_model("triple", {}), std::invalid_argument);
    EXPECT_THROW(build_named_model("pair", {{"mass", 1.0}}), std::invalid_argument);
}

TEST(model_library, pair_transform_is_canonical) {
    Eigen::MatrixXd T = pair_collective_transform();
    EXPECT_TRUE(is_canonical_transform(T, 1e-13));
    EXPECT_FALSE(is_canonical_transform(2.0 * T, 1e-13));
    ModelBundle bundle = oscillator_pair(1.5, 0.8);
    for (const auto &[name, basis] : bundle.named_bases) {
        EXPECT_TRUE(is_canonical_transform(basis)) << name;
    }
}

TEST(model_library, pair_in_collective_basis_has_koopman_form) {
    double m = 1.7, omega = 0.6;
    ModelBundle bundle = oscillator_pair(m, omega);
    LinearModel collective = rebase(bundle.model, bundle.named_bases.at("qmfs"));
    // H = P Pi / m + m omega^2 Phi Q  =>  G(P,Pi) = 1/m, G(Q,Phi) = m omega^2.
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
    expected(1, 3) = expected(3, 1) = 1.0 / m;
    expected(0, 2) = expected(2, 0) = m * omega * omega;
    EXPECT_LT((collective.G() - expected).cwiseAbs().maxCoeff(), 1e-14);
    // The force on p drives Pi (and P) in the new coordinates.
    EXPECT_LT((collective.force_couplings()[0] - Eigen::Vector4d(0.0, 0.5, 0.0, 1.0)).norm(), 1e-15);
}

TEST(model_library, pair_qmfs_sets) {
    ModelBundle bundle = oscillator_pair(1.0, 1.0);
    ASSERT_EQ(bundle.qmfs_sets.size(), 2u);
    for (const auto &set : bundle.qmfs_sets) {
        EXPECT_TRUE(is_qmfs(bundle.model, set).is_qmfs()) << set.describe();
    }
    Eigen::MatrixXd qp = Eigen::MatrixXd::Zero(2, 4);
    qp(0, 0) = qp(1, 1) = 1.0;
    EXPECT_FALSE(is_qmfs(bundle.model, ObservableSet(qp, {"q", "p"})).is_qmfs());
}

TEST(model_library, sideband_quadrature_amplitudes) {
    double omega = 2.5, hbar = 0.5;
    ModelBundle bundle = sideband_model(omega, hbar);
    const Eigen::MatrixXd &T = bundle.named_bases.at("qmfs");
    const ObservableSet &a1 = bundle.observable_maps.at("alpha1");
    const ObservableSet &a2 = bundle.observable_maps.at("alpha2");
    EXPECT_LT((a1.S().row(0) - 0.5 * std::sqrt(omega / hbar) * T.row(0)).norm(), 1e-15);
    EXPECT_TRUE(is_qmfs(bundle.model, a1).is_qmfs());
    EXPECT_TRUE(is_qmfs(bundle.model, a2).is_qmfs());
    // [a1, a2^dagger] = i: with a1 = x1 + i y1, a2 = x2 + i y2 the commutator is
    // [x1,x2] + [y1,y2] + i([y1,x2] - [x1,y2]).
    auto c = [&](const Eigen::RowVectorXd &u, const Eigen::RowVectorXd &v) {
        return hbar * (u * bundle.model.Omega() * v.transpose())(0, 0);  // [u.x, v.x] / i
    };
    Eigen::RowVectorXd x1 = a1.S().row(0), y1 = a1.S().row(1), x2 = a2.S().row(0), y2 = a2.S().row(1);
    std::complex<double> comm = std::complex<double>(0.0, 1.0) * (c(x1, x2) + c(y1, y2)) +
                                std::complex<double>(0.0, 1.0) * std::complex<double>(0.0, 1.0) *
                                    (c(y1, x2) - c(x1, y2));
    EXPECT_NEAR(comm.real(), 0.0, 1e-14);
    EXPECT_NEAR(comm.imag(), 1.0, 1e-14);
    // [a1, a1^dagger] = 0 inside the subsystem.
    EXPECT_NEAR(c(x1, y1), 0.0, 1e-14);
}

TEST(model_library, sideband_amplitude_rotates) {
    double omega = 1.3;
    ModelBundle bundle = sideband_model(omega);
    const Eigen::MatrixXd &S = bundle.observable_maps.at("alpha1").S();
    Eigen::MatrixXd pinv = S.completeOrthogonalDecomposition().pseudoInverse();
    for (double t : {0.2, 1.0, 3.7}) {
        Eigen::MatrixXd evolved = S * transfer_matrix(bundle.model, t);
        Eigen::MatrixXd block = evolved * pinv;
        EXPECT_LT((block * S - evolved).norm(), 1e-13);
        Eigen::MatrixXd rotation(2, 2);
        rotation << std::cos(omega * t), std::sin(omega * t), -std::sin(omega * t), std::cos(omega * t);
        EXPECT_LT((block - rotation).norm(), 1e-13);
    }
}

TEST(model_library, spin_pair_matches_oscillator_pair) {
    EXPECT_EQ(spin_pair_hp(4.0, 1.0).model.A(), oscillator_pair(1.0, 1.0).model.A());
    double gb = 2.3;
    ModelBundle spin = spin_pair_hp(8.0, gb);
    EXPECT_LT((spin.model.A() - oscillator_pair(1.0 / gb, gb).model.A()).cwiseAbs().maxCoeff(), 1e-15);
    // H = (gamma B0 / 2)(q^2 + p^2 - q'^2 - p'^2).
    Eigen::Vector4d diag(gb, gb, -gb, -gb);
    EXPECT_LT((spin.model.G() - Eigen::MatrixXd(diag.asDiagonal())).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_TRUE(is_qmfs(spin.model, spin.qmfs_sets[0]).is_qmfs());
    EXPECT_EQ(spin.metadata.at("J0"), 8.0);
}

TEST(model_library, force_response_matches_single_oscillator) {
    double m = 0.8, omega = 1.9;
    ModelBundle pair = oscillator_pair(m, omega);
    ModelBundle single = single_oscillator(m, omega);
    Eigen::VectorXd Q = pair.named_bases.at("qmfs").row(0).transpose();
    Eigen::VectorXd q = Eigen::Vector2d(1.0, 0.0);
    for (int k = 0; k <= 40; k++) {
        double w = omega * std::pow(10.0, -1.0 + 2.0 * k / 40.0);
        if (std::abs(w - omega) < 1e-9) {
            continue;
        }
        auto hp = response(pair.model, Q, pair.model.force_couplings()[0], w);
        auto hs = response(single.model, q, single.model.force_couplings()[0], w);
        EXPECT_LT(std::abs(hp - hs), 1e-12 * std::abs(hs)) << w;
    }
}

TEST(model_library_property, qmfs_survives_symplectic_rebasing) {
    std::mt19937_64 rng(99);
    ModelBundle bundle = oscillator_pair(1.2, 0.9);
    for (int trial = 0; trial < 20; trial++) {
        // Mix the modes by a random canonical transform.
        Eigen::MatrixXd T = random_symplectic(rng, 2);
        ASSERT_TRUE(is_canonical_transform(T, 1e-10));
        LinearModel moved = rebase(bundle.model, T);
        Eigen::MatrixXd Tinv = T.inverse();
        for (const auto &set : bundle.qmfs_sets) {
            ObservableSet moved_set(set.S() * Tinv, set.labels());
            EXPECT_TRUE(is_qmfs(moved, moved_set, 1e-9).is_qmfs());
        }
        Eigen::MatrixXd QP = bundle.named_bases.at("qmfs").topRows(2);
        EXPECT_FALSE(is_qmfs(moved, ObservableSet(QP * Tinv, {"Q", "P"}), 1e-9).is_qmfs());
    }
}

TEST(model_library, named_builders) {
    EXPECT_EQ(build_named_model("single", {{"m", -1.0}}).model.A()(0, 1), -1.0);
    EXPECT_EQ(build_named_model("pair", {}).model.dim(), 4);
    EXPECT_EQ(build_named_model("sideband", {{"omega", 2.0}}).observable_maps.count("alpha2"), 1u);
    EXPECT_EQ(build_named_model("spin-hp", {{"J0", 4.0}}).metadata.at("J0"), 4.0);
}
