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

namespace qmfs {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ClassicalFlow ClassicalFlow::from_koopman(const PolyKoopman &pk) {
    pk.validate();
    return {pk.M, pk.f, pk.g};
}

ClassicalFlow ClassicalFlow::hamiltonian(const Polynomial &H) {
    ClassicalFlow flow;
    flow.M = H.n_pairs();
    for (int j = 0; j < flow.M; j++) {
        flow.f.push_back(H.d_dPi(j));
        flow.g.push_back(H.d_dQ(j));
    }
    return flow;
}

void ClassicalFlow::validate(int max_degree) const {
    if (M < 1 || static_cast<int>(f.size()) != M || static_cast<int>(g.size()) != M) {
        throw std::invalid_argument("ClassicalFlow: need one f and one g per pair");
    }
    for (int j = 0; j < M; j++) {
        if (f[j].n_pairs() != M || g[j].n_pairs() != M) {
            throw std::invalid_argument("ClassicalFlow: polynomial has wrong number of variables");
        }
        if (f[j].degree() > max_degree || g[j].degree() > max_degree) {
            throw std::invalid_argument("ClassicalFlow: degree exceeds " + std::to_string(max_degree));
        }
    }
}

VectorXd ClassicalFlow::velocity(const VectorXd &x, double t) const {
    VectorXd Q = x.head(M), Pi = x.tail(M);
    VectorXd v(2 * M);
    for (int j = 0; j < M; j++) {
        v(j) = f[j](Q, Pi, t);
        v(M + j) = -g[j](Q, Pi, t);
    }
    return v;
}

MatrixXd ClassicalFlow::jacobian(const VectorXd &x, double t) const {
    VectorXd Q = x.head(M), Pi = x.tail(M);
    MatrixXd J(2 * M, 2 * M);
    for (int j = 0; j < M; j++) {
        for (int k = 0; k < M; k++) {
            J(j, k) = f[j].d_dQ(k)(Q, Pi, t);
            J(j, M + k) = f[j].d_dPi(k)(Q, Pi, t);
            J(M + j, k) = -g[j].d_dQ(k)(Q, Pi, t);
            J(M + j, M + k) = -g[j].d_dPi(k)(Q, Pi, t);
        }
    }
    return J;
}

namespace {

template <typename Rhs>
VectorXd rk4(const Rhs &rhs, const VectorXd &x, double t, double h) {
    VectorXd k1 = rhs(x, t);
    VectorXd k2 = rhs(x + 0.5 * h * k1, t + 0.5 * h);
    VectorXd k3 = rhs(x + 0.5 * h * k2, t + 0.5 * h);
    VectorXd k4 = rhs(x + h * k3, t + h);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename Rhs>
ClassicalTrajectory fixed_step(const Rhs &rhs, const VectorXd &x0, double T, double dt, const IntegrateOptions &opt,
                               long stride_scale) {
    long n = std::max(1L, static_cast<long>(std::ceil(T / dt - 1e-9)));
    double h = T / n;
    ClassicalTrajectory traj;
    traj.dt = h;
    VectorXd x = x0;
    long stride = opt.store_stride * stride_scale;
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    for (long k = 0; k < n; k++) {
        x = rk4(rhs, x, k * h, h);
        if (!x.allFinite() || x.norm() > opt.divergence_norm) {
            throw FlowDivergence("classical flow diverged at t = " + std::to_string((k + 1) * h), (k + 1) * h);
        }
        if (k + 1 == n || (stride > 0 && (k + 1) % stride == 0)) {
            traj.times.push_back((k + 1) * h);
            traj.states.push_back(x);
        }
    }
    return traj;
}

template <typename Rhs>
ClassicalTrajectory halving(const Rhs &rhs, const VectorXd &x0, double T, const IntegrateOptions &opt) {
    if (!(T >= 0.0) || !std::isfinite(T)) {
        throw std::invalid_argument("integrate: T must be finite and >= 0");
    }
    if (!(opt.dt > 0.0)) {
        throw std::invalid_argument("integrate: dt must be positive");
    }
    if (T == 0.0) {
        return {{0.0}, {x0}, opt.dt, 0.0};
    }
    ClassicalTrajectory coarse = fixed_step(rhs, x0, T, opt.dt, opt, 1);
    double dt = opt.dt;
    for (int k = 0; k < opt.max_halvings; k++) {
        dt *= 0.5;
        ClassicalTrajectory fine = fixed_step(rhs, x0, T, dt, opt, 1L << (k + 1));
        double scale = std::max(fine.states.back().norm(), 1e-300);
        fine.error_estimate = (fine.states.back() - coarse.states.back()).norm() / scale;
        if (fine.error_estimate < opt.rel_tol) {
            return fine;
        }
        coarse = std::move(fine);
    }
    throw std::runtime_error("integrate: step halving did not reach the tolerance");
}

/// Same flow with its clock started at t0.
ClassicalFlow shift_clock(const ClassicalFlow &flow, double t0) {
    ClassicalFlow out = flow;
    for (auto *polys : {&out.f, &out.g}) {
        for (auto &p : *polys) {
            std::vector<Monomial> terms = p.terms();
            for (auto &m : terms) {
                m.time.phase += m.time.omega * t0;
            }
            p = Polynomial(p.n_pairs(), terms);
        }
    }
    return out;
}

}  // namespace

ClassicalTrajectory integrate(const ClassicalFlow &flow, const VectorXd &x0, double T, const IntegrateOptions &options) {
    flow.validate();
    if (x0.size() != 2 * flow.M) {
        throw std::invalid_argument("integrate: initial state has wrong size");
    }
    auto rhs = [&](const VectorXd &x, double t) { return flow.velocity(x, t); };
    return halving(rhs, x0, T, options);
}

MatrixXd tangent_map(const ClassicalFlow &flow, const VectorXd &x0, double T, const IntegrateOptions &options) {
    flow.validate();
    const int d = 2 * flow.M;
    if (x0.size() != d) {
        throw std::invalid_argument("tangent_map: initial state has wrong size");
    }
    // Augmented state (x, vec J) with dJ/dt = Df(x) J.
    VectorXd z(d + d * d);
    z.head(d) = x0;
    MatrixXd identity = MatrixXd::Identity(d, d);
    z.tail(d * d) = Eigen::Map<const VectorXd>(identity.data(), d * d);
    auto rhs = [&](const VectorXd &s, double t) {
        VectorXd out(s.size());
        VectorXd x = s.head(d);
        out.head(d) = flow.velocity(x, t);
        Eigen::Map<const MatrixXd> J(s.data() + d, d, d);
        MatrixXd dJ = flow.jacobian(x, t) * J;
        out.tail(d * d) = Eigen::Map<const VectorXd>(dJ.data(), d * d);
        return out;
    };
    IntegrateOptions opt = options;
    opt.store_stride = 0;
    ClassicalTrajectory traj = halving(rhs, z, T, opt);
    const VectorXd &end = traj.states.back();
    return Eigen::Map<const MatrixXd>(end.data() + d, d, d);
}

Moments ensemble_moments(const std::vector<WeightedSample> &samples) {
    if (samples.empty()) {
        throw std::invalid_argument("ensemble_moments: no samples");
    }
    const auto d = samples[0].x.size();
    double total = 0.0;
    VectorXd mean = VectorXd::Zero(d);
    for (const auto &s : samples) {
        total += s.weight;
        mean += s.weight * s.x;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("ensemble_moments: total weight must be positive");
    }
    mean /= total;
    MatrixXd cov = MatrixXd::Zero(d, d);
    for (const auto &s : samples) {
        VectorXd dx = s.x - mean;
        cov += s.weight * dx * dx.transpose();
    }
    return {mean, cov / total};
}

TransportResult transport_density(const ClassicalFlow &flow, const std::vector<WeightedSample> &samples, double T,
                                  const IntegrateOptions &options) {
    IntegrateOptions opt = options;
    opt.store_stride = 0;
    TransportResult out;
    out.samples.reserve(samples.size());
    for (const auto &s : samples) {
        ClassicalTrajectory traj = integrate(flow, s.x, T, opt);
        out.samples.push_back({traj.states.back(), s.weight});
    }
    out.moments = ensemble_moments(out.samples);
    return out;
}

std::pair<VectorXd, VectorXd> gauss_hermite(int n) {
    if (n < 1) {
        throw std::invalid_argument("gauss_hermite: need at least one node");
    }
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
    MatrixXd J = MatrixXd::Zero(n, n);
    for (int k = 1; k < n; k++) {
        J(k - 1, k) = J(k, k - 1) = std::sqrt(static_cast<double>(k));
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(J);
    VectorXd w = solver.eigenvectors().row(0).transpose().array().square();
    return {solver.eigenvalues(), w / w.sum()};
}

std::vector<WeightedSample> gaussian_quadrature_samples(const VectorXd &mean, const VectorXd &std, int nodes_per_dim) {
    if (mean.size() != std.size() || mean.size() == 0) {
        throw std::invalid_argument("gaussian_quadrature_samples: size mismatch");
    }
    auto [x, w] = gauss_hermite(nodes_per_dim);
    const auto d = mean.size();
    long total = 1;
    for (Eigen::Index k = 0; k < d; k++) {
        total *= nodes_per_dim;
    }
    std::vector<WeightedSample> out;
    out.reserve(total);
    for (long idx = 0; idx < total; idx++) {
        WeightedSample s{VectorXd(d), 1.0};
        long rest = idx;
        for (Eigen::Index k = 0; k < d; k++) {
            int node = static_cast<int>(rest % nodes_per_dim);
            rest /= nodes_per_dim;
            s.x(k) = mean(k) + std(k) * x(node);
            s.weight *= w(node);
        }
        out.push_back(std::move(s));
    }
    return out;
}

ExpectationComparison compare_coherent_expectation(const PolyKoopman &pk, std::complex<double> alpha,
                                                   std::complex<double> beta, const std::vector<double> &times,
                                                   const TruncationSpec &spec, double tolerance_scale,
                                                   int quadrature_nodes, const IntegrateOptions &options) {
    pk.validate();
    if (pk.M != 1) {
        throw std::invalid_argument("compare_coherent_expectation: single-pair models only");
    }
    const double hbar = pk.hbar;
    const double w = std::abs(pk.m_scale) * pk.omega_scale;
    FockSpace space = koopman_space(pk, spec);
    HeisenbergEvolver evolver(space, build_koopman_hamiltonian(pk, space));
    Eigen::VectorXcd psi =
        space.product_state({coherent_state(spec.n_levels, alpha), coherent_state(spec.n_levels, beta)});
    Eigen::MatrixXcd Q = space.q(0);

    VectorXd mean(2), std(2);
    mean << std::sqrt(2.0 * hbar / w) * alpha.real(), std::sqrt(2.0 * hbar * w) * beta.imag();
    std << std::sqrt(hbar / (2.0 * w)), std::sqrt(hbar * w / 2.0);
    auto samples = gaussian_quadrature_samples(mean, std, quadrature_nodes);
    ClassicalFlow flow = ClassicalFlow::from_koopman(pk);
    IntegrateOptions opt = options;
    opt.store_stride = 0;

    ExpectationComparison out;
    out.var_q = std(0) * std(0);
    out.tolerance = tolerance_scale * out.var_q;
    out.times = times;
    std::vector<double> weighted_q(times.size(), 0.0);
    std::vector<double> kept(times.size(), 0.0);
    for (const auto &s : samples) {
        double t0 = 0.0;
        Eigen::VectorXd x = s.x;
        for (size_t k = 0; k < times.size(); k++) {
            if (times[k] < t0) {
                throw std::invalid_argument("compare_coherent_expectation: times must be non-decreasing");
            }
            try {
                x = integrate(shift_clock(flow, t0), x, times[k] - t0, opt).states.back();
            } catch (const FlowDivergence &) {
                out.escaped_weight += s.weight;
                break;
            }
            t0 = times[k];
            weighted_q[k] += s.weight * x(0);
            kept[k] += s.weight;
        }
    }
    for (size_t k = 0; k < times.size(); k++) {
        Eigen::VectorXcd psi_t = evolver.propagate(psi, times[k]);
        out.quantum.push_back(psi_t.dot(Q * psi_t).real());
        out.classical.push_back(kept[k] > 0.0 ? weighted_q[k] / kept[k] : std::nan(""));
        out.max_abs_diff = std::max(out.max_abs_diff, std::abs(out.quantum.back() - out.classical.back()));
    }
    // Guard on the evolved test state itself.
    out.guard.threshold = spec.guard_fraction;
    for (double t : times) {
        Eigen::VectorXcd psi_t = evolver.propagate(psi, t);
        double pop = 0.0;
        for (long i = 0; i < space.dim(); i++) {
            if (space.guard_mask()[i]) {
                pop += std::norm(psi_t(i));
            }
        }
        out.guard.max_population = std::max(out.guard.max_population, pop);
    }
    out.guard.trusted = out.guard.max_population <= out.guard.threshold;
    out.within_tolerance = out.max_abs_diff <= out.tolerance;
    return out;
}

}  // namespace qmfs
