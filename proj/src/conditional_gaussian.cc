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

#include "qmfs/conditional_gaussian.h"

#include <algorithm>
#include <cmath>

#include "qmfs/counter_rng.h"

namespace qmfs {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd rk4_step(const LinearModel &model, const std::vector<MeasurementChannel> &channels, const MatrixXd &V,
                  const MatrixXd &D_extra, const MatrixXd &damping, double h) {
    MatrixXd k1 = riccati_rhs(model, channels, V, D_extra, damping);
    MatrixXd k2 = riccati_rhs(model, channels, V + 0.5 * h * k1, D_extra, damping);
    MatrixXd k3 = riccati_rhs(model, channels, V + 0.5 * h * k2, D_extra, damping);
    MatrixXd k4 = riccati_rhs(model, channels, V + h * k3, D_extra, damping);
    return V + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void symmetrize(MatrixXd &V) {
    V = 0.5 * (V + V.transpose()).eval();
}

// One accepted adaptive step of at most h_max; updates V, returns step taken
// and writes the suggested next step into h.
double adaptive_step(const LinearModel &model, const std::vector<MeasurementChannel> &channels, MatrixXd &V,
                     const MatrixXd &D_extra, double &h, double h_max, const RiccatiOptions &options) {
    // Stay inside the RK4 stability region of the linearized flow: the local
    // error estimate alone lets h grow without bound near a fixed point.
    const MatrixXd &G = options.damping;
    double stiffness = matrix_one_norm(G.size() ? MatrixXd(model.A() - G) : model.A());
    for (const auto &c : channels) {
        stiffness += 4.0 * c.k * c.eta * c.s.lpNorm<1>() * c.s.lpNorm<1>() * matrix_one_norm(V);
    }
    if (stiffness > 0.0) {
        h_max = std::min(h_max, 1.0 / stiffness);
    }
    for (int attempt = 0; attempt < 200; attempt++) {
        double step = std::min(h, h_max);
        MatrixXd full = rk4_step(model, channels, V, D_extra, G, step);
        MatrixXd half = rk4_step(model, channels, rk4_step(model, channels, V, D_extra, G, 0.5 * step), D_extra, G,
                                 0.5 * step);
        double scale = std::max({V.norm(), half.norm(), 1e-300});
        double err = (half - full).norm() / 15.0 / scale;
        if (std::isfinite(err) && err <= options.step_tol) {
            V = half + (half - full) / 15.0;
            symmetrize(V);
            double grow = err == 0.0 ? 2.0 : std::min(2.0, 0.9 * std::pow(options.step_tol / err, 0.2));
            if (step == h) {
                h = step * std::max(1.0, grow);
            }
            return step;
        }
        double shrink = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(options.step_tol / err, 0.2)) : 0.2;
        h = step * shrink;
        if (h < 1e-300) {
            break;
        }
    }
    throw RiccatiDivergence("riccati: step size underflow", V, 0.0);
}

void check_channels(const LinearModel &model, const std::vector<MeasurementChannel> &channels) {
    for (const auto &c : channels) {
        c.validate(model.dim());
    }
}

}  // namespace

double physicality_margin(const MatrixXd &cov, const MatrixXd &Omega, double hbar) {
    Eigen::MatrixXcd M = cov.cast<std::complex<double>>();
    M += std::complex<double>(0.0, 0.5 * hbar) * Omega.cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(M, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

bool is_physical(const MatrixXd &cov, const MatrixXd &Omega, double hbar, double tol) {
    return physicality_margin(cov, Omega, hbar) >= -tol * hbar;
}

void validate_state(const GaussianState &state, const LinearModel &model) {
    if (state.mean.size() != model.dim() || state.cov.rows() != model.dim() || state.cov.cols() != model.dim()) {
        throw std::invalid_argument("GaussianState: dimension does not match model");
    }
    if (!state.mean.allFinite() || !state.cov.allFinite()) {
        throw std::invalid_argument("GaussianState: non-finite entries");
    }
    double asym = (state.cov - state.cov.transpose()).norm();
    if (asym > 1e-13 * std::max(state.cov.norm(), 1e-300)) {
        throw std::invalid_argument("GaussianState: covariance is not symmetric");
    }
    if (!is_physical(state.cov, model.Omega(), model.hbar())) {
        throw std::invalid_argument("GaussianState: covariance violates the uncertainty principle");
    }
}

Eigen::VectorXd symplectic_eigenvalues(const MatrixXd &cov, const MatrixXd &Omega) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> spd(cov);
    if (spd.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument("symplectic_eigenvalues: covariance must be positive definite");
    }
    MatrixXd root = spd.operatorSqrt();
    Eigen::MatrixXcd K = std::complex<double>(0.0, 1.0) * (root * Omega * root).cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(K, Eigen::EigenvaluesOnly);
    std::vector<double> values(solver.eigenvalues().data(), solver.eigenvalues().data() + K.rows());
    for (auto &v : values) {
        v = std::abs(v);
    }
    std::sort(values.begin(), values.end());
    Eigen::VectorXd nu(values.size() / 2);
    for (Eigen::Index k = 0; k < nu.size(); k++) {
        nu(k) = 0.5 * (values[2 * k] + values[2 * k + 1]);
    }
    return nu;
}

MatrixXd vacuum_covariance(int n_modes, double hbar, const std::vector<double> &m_omega) {
    if (!m_omega.empty() && static_cast<int>(m_omega.size()) != n_modes) {
        throw std::invalid_argument("vacuum_covariance: need one scale per mode");
    }
    MatrixXd V = MatrixXd::Zero(2 * n_modes, 2 * n_modes);
    for (int k = 0; k < n_modes; k++) {
        double s = m_omega.empty() ? 1.0 : std::abs(m_omega[k]);
        V(2 * k, 2 * k) = hbar / (2.0 * s);
        V(2 * k + 1, 2 * k + 1) = hbar * s / 2.0;
    }
    return V;
}

MatrixXd partial_transpose(const MatrixXd &cov, int mode) {
    if (mode < 0 || 2 * mode + 1 >= cov.rows()) {
        throw std::out_of_range("partial_transpose: mode out of range");
    }
    MatrixXd out = cov;
    out.row(2 * mode + 1) *= -1.0;
    out.col(2 * mode + 1) *= -1.0;
    return out;
}

void MeasurementChannel::validate(int dim) const {
    if (s.size() != dim) {
        throw std::invalid_argument("MeasurementChannel: observable has wrong dimension");
    }
    if (!s.allFinite() || s.isZero(0.0)) {
        throw std::invalid_argument("MeasurementChannel: observable must be finite and non-zero");
    }
    if (!std::isfinite(k) || k < 0.0) {
        throw std::invalid_argument("MeasurementChannel: strength k must be >= 0");
    }
    if (!(eta > 0.0 && eta <= 1.0)) {
        throw std::invalid_argument("MeasurementChannel: efficiency must lie in (0, 1]");
    }
}

ForceDrive ForceDrive::constant(Eigen::VectorXd coupling, double amplitude) {
    return ForceDrive{std::move(coupling), [amplitude](double) { return amplitude; }};
}

ForceDrive ForceDrive::sinusoid(Eigen::VectorXd coupling, double amplitude, double omega, double phase) {
    return ForceDrive{std::move(coupling),
                      [amplitude, omega, phase](double t) { return amplitude * std::sin(omega * t + phase); }};
}

MatrixXd backaction_diffusion(const LinearModel &model, const MeasurementChannel &channel) {
    channel.validate(model.dim());
    VectorXd kick = model.Omega() * channel.s;
    return model.hbar() * model.hbar() * channel.k * kick * kick.transpose();
}

MatrixXd riccati_rhs(const LinearModel &model, const std::vector<MeasurementChannel> &channels, const MatrixXd &V,
                     const MatrixXd &D_extra, const MatrixXd &damping) {
    MatrixXd A = damping.size() == 0 ? model.A() : MatrixXd(model.A() - damping);
    MatrixXd out = A * V + V * A.transpose();
    if (D_extra.size() != 0) {
        out += D_extra;
    }
    const double hbar2 = model.hbar() * model.hbar();
    for (const auto &c : channels) {
        if (c.k == 0.0) {
            continue;
        }
        VectorXd kick = model.Omega() * c.s;
        VectorXd Vs = V * c.s;
        out += hbar2 * c.k * kick * kick.transpose();
        out -= 4.0 * c.k * c.eta * Vs * Vs.transpose();
    }
    return out;
}

MatrixXd riccati_evolve(const LinearModel &model, const std::vector<MeasurementChannel> &channels,
                        const MatrixXd &V0, double T, const MatrixXd &D_extra, const RiccatiOptions &options) {
    check_channels(model, channels);
    if (V0.rows() != model.dim() || V0.cols() != model.dim()) {
        throw std::invalid_argument("riccati_evolve: V0 has wrong dimension");
    }
    if (!(T >= 0.0)) {
        throw std::invalid_argument("riccati_evolve: T must be >= 0");
    }
    MatrixXd V = V0;
    double t = 0.0;
    double h = std::min(options.initial_step, T);
    long steps = 0;
    while (t < T) {
        double remaining = T - t;
        double taken = adaptive_step(model, channels, V, D_extra, h, remaining, options);
        t = taken == remaining ? T : t + taken;
        if (++steps > options.max_steps || !V.allFinite() || V.norm() > options.divergence_norm) {
            throw RiccatiDivergence("riccati_evolve: covariance flow diverged", V, t);
        }
    }
    return V;
}

SteadyCovariance steady_covariance(const LinearModel &model, const std::vector<MeasurementChannel> &channels,
                                   const MatrixXd &D_extra, const std::optional<MatrixXd> &V0,
                                   const RiccatiOptions &options) {
    check_channels(model, channels);
    MatrixXd V = V0 ? *V0 : vacuum_covariance(model.n_modes(), model.hbar());
    double t = 0.0;
    double h = options.initial_step;
    long steps = 0;
    while (true) {
        double rate = riccati_rhs(model, channels, V, D_extra, options.damping).norm() / std::max(V.norm(), 1e-300);
        if (rate < options.stationary_tol) {
            return {V, t, steps, rate};
        }
        if (t >= options.horizon || steps >= options.max_steps) {
            throw RiccatiDivergence("steady_covariance: no stationary state within horizon (rate " +
                                        std::to_string(rate) + " at t = " + std::to_string(t) + ")",
                                    V, t);
        }
        t += adaptive_step(model, channels, V, D_extra, h, options.horizon, options);
        steps++;
        if (!V.allFinite() || V.norm() > options.divergence_norm) {
            throw RiccatiDivergence("steady_covariance: covariance flow diverged", V, t);
        }
    }
}

std::vector<MatrixXd> covariance_schedule(const LinearModel &model, const std::vector<MeasurementChannel> &channels,
                                          const MatrixXd &V0, double dt, long n_steps) {
    RiccatiOptions options;
    options.initial_step = dt;
    std::vector<MatrixXd> out;
    out.reserve(n_steps + 1);
    out.push_back(V0);
    for (long n = 0; n < n_steps; n++) {
        out.push_back(riccati_evolve(model, channels, out.back(), dt, {}, options));
    }
    return out;
}

namespace {

long step_count(double dt, double T) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("time step must be positive");
    }
    if (!(T >= dt)) {
        throw std::invalid_argument("duration must be at least one time step");
    }
    return std::lround(T / dt);
}

}  // namespace

Trajectory evolve_conditional(const LinearModel &model, const GaussianState &state0,
                              const std::vector<MeasurementChannel> &channels,
                              const std::optional<ForceDrive> &force, const EvolveOptions &options) {
    validate_state(state0, model);
    check_channels(model, channels);
    long n_steps = step_count(options.dt, options.T);
    return evolve_conditional(model, state0, channels, force, options,
                              covariance_schedule(model, channels, state0.cov, options.dt, n_steps));
}

Trajectory evolve_conditional(const LinearModel &model, const GaussianState &state0,
                              const std::vector<MeasurementChannel> &channels,
                              const std::optional<ForceDrive> &force, const EvolveOptions &options,
                              const std::vector<MatrixXd> &schedule) {
    validate_state(state0, model);
    check_channels(model, channels);
    const double dt = options.dt;
    long n_steps = step_count(dt, options.T);
    if (matrix_one_norm(model.A()) * dt > options.max_step_norm) {
        throw std::invalid_argument("evolve_conditional: step too large (||A|| dt > " +
                                    std::to_string(options.max_step_norm) + ")");
    }
    if (static_cast<long>(schedule.size()) != n_steps + 1) {
        throw std::invalid_argument("evolve_conditional: covariance schedule has wrong length");
    }
    if (force && force->coupling.size() != model.dim()) {
        throw std::invalid_argument("evolve_conditional: force coupling has wrong dimension");
    }

    const MatrixXd Phi = transfer_matrix(model, dt);
    Trajectory traj;
    traj.seed = options.seed;
    traj.dt = dt;
    traj.initial = state0;
    traj.times.reserve(n_steps + 1);
    traj.means.reserve(n_steps + 1);
    traj.records.assign(channels.size(), std::vector<double>(n_steps + 1, 0.0));

    VectorXd mu = state0.mean;
    VectorXd Phi_b;
    if (force) {
        Phi_b = Phi * force->coupling;
    }
    auto store_cov = [&](long n) {
        if (n == 0 || (options.cov_stride > 0 && n % options.cov_stride == 0)) {
            traj.cov_steps.push_back(n);
            traj.covs.push_back(schedule[n]);
        }
    };
    traj.times.push_back(0.0);
    traj.means.push_back(mu);
    store_cov(0);

    for (long n = 0; n < n_steps; n++) {
        const double t = n * dt;
        const MatrixXd &V = schedule[n];
        VectorXd update = mu;
        for (size_t c = 0; c < channels.size(); c++) {
            const auto &ch = channels[c];
            double signal = ch.s.dot(mu) * dt;
            if (ch.k == 0.0) {
                traj.records[c][n + 1] = signal;
                continue;
            }
            double rate = 4.0 * ch.k * ch.eta;
            double dW = options.noiseless ? 0.0 : std::sqrt(dt) * counter_normal(options.seed, c + 1, n);
            double dy = signal + dW / std::sqrt(rate);
            traj.records[c][n + 1] = dy;
            update += rate * (V * ch.s) * (dy - signal);
        }
        mu = Phi * update;
        if (force) {
            mu += 0.5 * dt * (Phi_b * (*force)(t) + force->coupling * (*force)((n + 1) * dt));
        }
        traj.times.push_back((n + 1) * dt);
        traj.means.push_back(mu);
        store_cov(n + 1);
    }
    return traj;
}

ForceEstimate estimate_force(const Trajectory &trajectory, const LinearModel &model,
                             const std::vector<MeasurementChannel> &channels, const ForceDrive &template_drive,
                             const std::vector<MatrixXd> *precomputed) {
    check_channels(model, channels);
    if (trajectory.records.size() != channels.size()) {
        throw std::invalid_argument("estimate_force: record count does not match channel count");
    }
    if (template_drive.coupling.size() != model.dim()) {
        throw std::invalid_argument("estimate_force: template coupling has wrong dimension");
    }
    const double dt = trajectory.dt;
    const long n_steps = static_cast<long>(trajectory.times.size()) - 1;
    std::vector<MatrixXd> owned;
    if (!precomputed) {
        owned = covariance_schedule(model, channels, trajectory.initial.cov, dt, n_steps);
        precomputed = &owned;
    }
    if (static_cast<long>(precomputed->size()) != n_steps + 1) {
        throw std::invalid_argument("estimate_force: covariance schedule has wrong length");
    }
    const std::vector<MatrixXd> &schedule = *precomputed;
    const MatrixXd Phi = transfer_matrix(model, dt);
    const VectorXd &b = template_drive.coupling;
    const VectorXd Phi_b = Phi * b;

    VectorXd mu0 = trajectory.initial.mean;
    VectorXd sens = VectorXd::Zero(model.dim());
    double numerator = 0.0;
    double information = 0.0;
    for (long n = 0; n < n_steps; n++) {
        const MatrixXd &V = schedule[n];
        VectorXd mu_update = mu0;
        VectorXd sens_update = sens;
        for (size_t c = 0; c < channels.size(); c++) {
            const auto &ch = channels[c];
            if (ch.k == 0.0) {
                continue;
            }
            double rate = 4.0 * ch.k * ch.eta;
            double h = ch.s.dot(sens) * dt;
            double nu0 = trajectory.records[c][n + 1] - ch.s.dot(mu0) * dt;
            numerator += rate * h * nu0 / dt;
            information += rate * h * h / dt;
            VectorXd gain = rate * (V * ch.s);
            mu_update += gain * nu0;
            sens_update -= gain * h;
        }
        mu0 = Phi * mu_update;
        sens = Phi * sens_update + 0.5 * dt * (Phi_b * template_drive(n * dt) + b * template_drive((n + 1) * dt));
    }
    if (!(information > 0.0)) {
        throw std::domain_error("estimate_force: zero Fisher information (template or coupling unobservable)");
    }
    return {numerator / information, 1.0 / std::sqrt(information), information};
}

double predicted_force_std(const LinearModel &model, const MatrixXd &cov0,
                           const std::vector<MeasurementChannel> &channels, const ForceDrive &template_drive,
                           double dt, double T) {
    check_channels(model, channels);
    long n_steps = step_count(dt, T);
    auto schedule = covariance_schedule(model, channels, cov0, dt, n_steps);
    const MatrixXd Phi = transfer_matrix(model, dt);
    const VectorXd &b = template_drive.coupling;
    const VectorXd Phi_b = Phi * b;
    VectorXd sens = VectorXd::Zero(model.dim());
    double information = 0.0;
    for (long n = 0; n < n_steps; n++) {
        VectorXd sens_update = sens;
        for (const auto &ch : channels) {
            if (ch.k == 0.0) {
                continue;
            }
            double rate = 4.0 * ch.k * ch.eta;
            double h = ch.s.dot(sens) * dt;
            information += rate * h * h / dt;
            sens_update -= rate * (schedule[n] * ch.s) * h;
        }
        sens = Phi * sens_update + 0.5 * dt * (Phi_b * template_drive(n * dt) + b * template_drive((n + 1) * dt));
    }
    if (!(information > 0.0)) {
        throw std::domain_error("predicted_force_std: zero Fisher information");
    }
    return 1.0 / std::sqrt(information);
}

}  // namespace qmfs
