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

#ifndef QMFS_KOOPMAN_CLASSICAL_H
#define QMFS_KOOPMAN_CLASSICAL_H

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qmfs/fock_oracle.h"
#include "qmfs/polynomial.h"

namespace qmfs {

/// dQ_j/dt = f_j(Q, Pi, t), dPi_j/dt = -g_j(Q, Pi, t).
/// State vectors are laid out as (Q_1..Q_M, Pi_1..Pi_M).
struct ClassicalFlow {
    int M = 1;
    std::vector<Polynomial> f;
    std::vector<Polynomial> g;

    static ClassicalFlow from_koopman(const PolyKoopman &pk);
    /// f_j = dH/dPi_j, g_j = dH/dQ_j.
    static ClassicalFlow hamiltonian(const Polynomial &H);

    void validate(int max_degree = PolyKoopman::kDefaultMaxDegree) const;
    Eigen::VectorXd velocity(const Eigen::VectorXd &x, double t) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd &x, double t) const;
};

struct IntegrateOptions {
    double dt = 1e-3;
    /// Step halving until the full-horizon endpoint changes by less than this (relative).
    double rel_tol = 1e-8;
    int max_halvings = 10;
    /// Divergence threshold on ||x||.
    double divergence_norm = 1e12;
    /// Keep every stride-th point (0: endpoints only).
    long store_stride = 1;
};

class FlowDivergence : public std::runtime_error {
   public:
    FlowDivergence(const std::string &what, double time) : std::runtime_error(what), time(time) {
    }
    double time;
};

struct ClassicalTrajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    double dt = 0.0;
    /// Relative endpoint change at the last halving.
    double error_estimate = 0.0;
};

/// RK4 with global step halving. Throws FlowDivergence on blow-up and
/// std::runtime_error when the tolerance is not met after max_halvings.
ClassicalTrajectory integrate(const ClassicalFlow &flow, const Eigen::VectorXd &x0, double T,
                              const IntegrateOptions &options = {});

/// Tangent map d x(T) / d x(0) from the variational equations.
Eigen::MatrixXd tangent_map(const ClassicalFlow &flow, const Eigen::VectorXd &x0, double T,
                            const IntegrateOptions &options = {});

struct WeightedSample {
    Eigen::VectorXd x;
    double weight = 1.0;
};

struct Moments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

Moments ensemble_moments(const std::vector<WeightedSample> &samples);

struct TransportResult {
    std::vector<WeightedSample> samples;
    Moments moments;
};

/// Pushes the samples along characteristics of the flow for time T.
TransportResult transport_density(const ClassicalFlow &flow, const std::vector<WeightedSample> &samples, double T,
                                  const IntegrateOptions &options = {});

/// Probabilists' Gauss-Hermite rule: nodes x_k and weights w_k with
/// sum w_k p(x_k) = E[p(X)] for X ~ N(0, 1) and deg p < 2n.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n);

/// Tensor-product quadrature samples for independent normals with the given
/// means and standard deviations.
std::vector<WeightedSample> gaussian_quadrature_samples(const Eigen::VectorXd &mean, const Eigen::VectorXd &std,
                                                        int nodes_per_dim);

struct ExpectationComparison {
    std::vector<double> times;
    std::vector<double> classical;
    std::vector<double> quantum;
    double max_abs_diff = 0.0;
    /// Initial Var Q; differences are judged against tolerance_scale * var_q.
    double var_q = 0.0;
    double tolerance = 0.0;
    bool within_tolerance = false;
    /// Quadrature weight of nodes whose trajectory diverged before the last
    /// time; they are excluded from the classical mean.
    double escaped_weight = 0.0;
    GuardReport guard;
};

/// <Q(t)> for the product coherent state |alpha> (Q, P mode) x |beta> (Phi, Pi
/// mode): the truncated Fock oracle against the classical flow applied to the
/// (Q, Pi) distribution of the same state, which is Gaussian with
///   E Q = sqrt(2 hbar / w) Re alpha, Var Q = hbar / 2w,
///   E Pi = sqrt(2 hbar w) Im beta,   Var Pi = hbar w / 2,   w = m omega.
/// Only single-pair models are supported. Nodes that blow up are dropped and
/// their weight reported, since polynomial flows can escape in finite time
/// from the far tails.
ExpectationComparison compare_coherent_expectation(const PolyKoopman &pk, std::complex<double> alpha,
                                                   std::complex<double> beta, const std::vector<double> &times,
                                                   const TruncationSpec &spec, double tolerance_scale = 1e-3,
                                                   int quadrature_nodes = 12, const IntegrateOptions &options = {});

}  // namespace qmfs

#endif
