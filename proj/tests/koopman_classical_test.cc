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

#include "qmfs/koopman_classical.h"

#include <cmath>

#include <gtest/gtest.h>

#include "qmfs/counter_rng.h"
#include "qmfs/phase_space.h"

using namespace qmfs;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec2(double a, double b) {
    VectorXd v(2);
    v << a, b;
    return v;
}

// H = Pi^2 / 2m + m w^2 Q^2 / 2 + lambda Q^4
Polynomial anharmonic(double m, double omega, double lambda) {
    Polynomial H(1);
    H.add(0.5 / m, 0, 2).add(0.5 * m * omega * omega, 2, 0).add(lambda, 4, 0);
    return H;
}

}  // namespace

TEST(koopman_classical, harmonic_closed_form) {
    double m = 1.3, omega = 0.9;
    ClassicalFlow flow = ClassicalFlow::from_koopman(PolyKoopman::harmonic(m, omega));
    VectorXd x0 = vec2(0.4, -1.1);
    ClassicalTrajectory traj = integrate(flow, x0, 10.0);
    for (size_t k = 0; k < traj.times.size(); k += 997) {
        double t = traj.times[k];
        double q = x0(0) * std::cos(omega * t) + x0(1) / (m * omega) * std::sin(omega * t);
        double p = x0(1) * std::cos(omega * t) - m * omega * x0(0) * std::sin(omega * t);
        EXPECT_NEAR(traj.states[k](0), q, 1e-10);
        EXPECT_NEAR(traj.states[k](1), p, 1e-10);
    }
    EXPECT_LT(traj.error_estimate, 1e-8);
}

TEST(koopman_classical, hamiltonian_is_conserved) {
    Polynomial H = anharmonic(1.0, 1.0, 0.1);
    ClassicalFlow flow = ClassicalFlow::hamiltonian(H);
    VectorXd x0 = vec2(1.2, 0.3);
    IntegrateOptions opt;
    opt.store_stride = 100;
    ClassicalTrajectory traj = integrate(flow, x0, 100.0, opt);
    double H0 = H(x0.head(1), x0.tail(1), 0.0);
    for (const auto &x : traj.states) {
        EXPECT_NEAR(H(x.head(1), x.tail(1), 0.0), H0, 1e-9);
    }
}

TEST(koopman_classical, liouville_volume) {
    ClassicalFlow flow = ClassicalFlow::hamiltonian(anharmonic(0.7, 1.4, 0.2));
    for (double T : {0.5, 3.0, 10.0}) {
        MatrixXd J = tangent_map(flow, vec2(0.8, -0.4), T);
        EXPECT_NEAR(J.determinant(), 1.0, 1e-9) << T;
    }
    // Linear damping on Pi contracts area by exp(-gamma T).
    double gamma = 0.3;
    ClassicalFlow damped = ClassicalFlow::from_koopman(PolyKoopman::harmonic(1.0, 1.0));
    damped.g[0].add(gamma, 0, 1);
    for (double T : {1.0, 5.0}) {
        MatrixXd J = tangent_map(damped, vec2(0.5, 0.5), T);
        EXPECT_NEAR(J.determinant(), std::exp(-gamma * T), 1e-9) << T;
    }
}

TEST(koopman_classical, tangent_map_matches_finite_difference) {
    ClassicalFlow flow = ClassicalFlow::from_koopman(PolyKoopman::quadratic_drift(1.0, 1.0, 0.2));
    VectorXd x0 = vec2(0.3, 0.2);
    double T = 2.0, h = 1e-5;
    MatrixXd J = tangent_map(flow, x0, T);
    for (int c = 0; c < 2; c++) {
        VectorXd e = VectorXd::Unit(2, c) * h;
        VectorXd col = (integrate(flow, x0 + e, T).states.back() - integrate(flow, x0 - e, T).states.back()) / (2 * h);
        EXPECT_LT((J.col(c) - col).norm(), 1e-7);
    }
}

TEST(koopman_classical, linear_flow_matches_transfer_matrix) {
    // The classical pair flow is the (Q, Pi) block of the linear Koopman model.
    double m = 0.8, omega = 1.7;
    PolyKoopman pk = PolyKoopman::harmonic(m, omega);
    auto model = as_linear_model(pk);
    ASSERT_TRUE(model.has_value());
    double T = 4.2;
    MatrixXd Phi = transfer_matrix(*model, T);
    const int iQ = koopman_index_Q(1, 0), iPi = koopman_index_Pi(1, 0);
    MatrixXd block(2, 2);
    block << Phi(iQ, iQ), Phi(iQ, iPi), Phi(iPi, iQ), Phi(iPi, iPi);
    MatrixXd J = tangent_map(ClassicalFlow::from_koopman(pk), vec2(0.0, 0.0), T);
    EXPECT_LT((J - block).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(koopman_classical, gauss_hermite_moments) {
    auto [x, w] = gauss_hermite(12);
    double m2 = 0, m4 = 0, m6 = 0;
    for (int k = 0; k < 12; k++) {
        m2 += w(k) * std::pow(x(k), 2);
        m4 += w(k) * std::pow(x(k), 4);
        m6 += w(k) * std::pow(x(k), 6);
    }
    EXPECT_NEAR(w.sum(), 1.0, 1e-14);
    EXPECT_NEAR(m2, 1.0, 1e-12);
    EXPECT_NEAR(m4, 3.0, 1e-12);
    EXPECT_NEAR(m6, 15.0, 1e-11);
    EXPECT_THROW(gauss_hermite(0), std::invalid_argument);
}

TEST(koopman_classical, delta_ensemble_follows_the_trajectory) {
    ClassicalFlow flow = ClassicalFlow::from_koopman(PolyKoopman::quadratic_drift(1.0, 1.0, 0.1));
    VectorXd x0 = vec2(0.5, -0.2);
    TransportResult r = transport_density(flow, {{x0, 1.0}}, 3.0);
    EXPECT_LT((r.moments.mean - integrate(flow, x0, 3.0).states.back()).norm(), 1e-14);
    EXPECT_LT(r.moments.cov.norm(), 1e-14);
}

TEST(koopman_classical, linear_transport_propagates_moments) {
    // Empirical initial moments pushed through the pair transfer matrix must
    // match the moments of the transported samples.
    double m = 1.0, omega = 1.3, T = 2.0;
    PolyKoopman pk = PolyKoopman::harmonic(m, omega);
    ClassicalFlow flow = ClassicalFlow::from_koopman(pk);
    std::vector<WeightedSample> samples;
    for (uint64_t k = 0; k < 10000; k++) {
        samples.push_back({vec2(0.3 + 0.5 * counter_normal(11, 0, k), -0.1 + 0.2 * counter_normal(11, 1, k)), 1.0});
    }
    Moments before = ensemble_moments(samples);
    MatrixXd Phi = transfer_matrix(*as_linear_model(pk), T);
    const int iQ = koopman_index_Q(1, 0), iPi = koopman_index_Pi(1, 0);
    MatrixXd J(2, 2);
    J << Phi(iQ, iQ), Phi(iQ, iPi), Phi(iPi, iQ), Phi(iPi, iPi);
    IntegrateOptions opt;
    opt.dt = 1e-2;
    Moments after = transport_density(flow, samples, T, opt).moments;
    EXPECT_LT((after.mean - J * before.mean).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((after.cov - J * before.cov * J.transpose()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(koopman_classical, divergence_is_reported) {
    // dQ/dt = Q^2 blows up at t = 1 / Q0.
    ClassicalFlow flow{1, {Polynomial(1).add(1.0, 2, 0)}, {Polynomial(1)}};
    EXPECT_THROW(integrate(flow, vec2(1.0, 0.0), 2.0), FlowDivergence);
    EXPECT_THROW(integrate(flow, vec2(1.0, 0.0), -1.0), std::invalid_argument);
}

TEST(koopman_classical, coherent_expectation_matches_oracle) {
    std::vector<double> times;
    for (int k = 0; k <= 8; k++) {
        times.push_back(0.25 * k);
    }
    TruncationSpec spec;
    spec.n_levels = 30;
    // Linear: the oracle and the classical mean coincide.
    ExpectationComparison lin = compare_coherent_expectation(PolyKoopman::harmonic(1.0, 1.0), {0.6, 0.1},
                                                             {0.0, 0.4}, times, spec);
    EXPECT_TRUE(lin.guard.trusted) << lin.guard.describe();
    EXPECT_LT(lin.max_abs_diff, 1e-8);
    EXPECT_NEAR(lin.var_q, 0.5, 1e-15);

    ExpectationComparison nl = compare_coherent_expectation(PolyKoopman::quadratic_drift(1.0, 1.0, 0.1),
                                                            {0.4, 0.0}, {0.0, 0.2}, times, spec);
    EXPECT_TRUE(nl.within_tolerance) << nl.max_abs_diff << " vs " << nl.tolerance;
    EXPECT_LT(nl.escaped_weight, 1e-12);
    EXPECT_GT(std::abs(nl.classical.back() - lin.classical.back()), 10 * nl.tolerance);
}
