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

#ifndef QMFS_CONDITIONAL_GAUSSIAN_H
#define QMFS_CONDITIONAL_GAUSSIAN_H

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qmfs/phase_space.h"

namespace qmfs {

/// Gaussian state of a linear model: mean vector and symmetric covariance.
struct GaussianState {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Smallest eigenvalue of the Hermitian matrix cov + i (hbar/2) Omega.
double physicality_margin(const Eigen::MatrixXd &cov, const Eigen::MatrixXd &Omega, double hbar);

/// cov + i (hbar/2) Omega >= -tol hbar.
bool is_physical(const Eigen::MatrixXd &cov, const Eigen::MatrixXd &Omega, double hbar, double tol = 1e-10);

/// Throws std::invalid_argument if the state has the wrong size, is not
/// symmetric to 1e-13 (relative) or violates the uncertainty principle.
void validate_state(const GaussianState &state, const LinearModel &model);

/// Symplectic eigenvalues of a covariance matrix, sorted ascending. A pure
/// Gaussian state has all of them equal to hbar/2.
Eigen::VectorXd symplectic_eigenvalues(const Eigen::MatrixXd &cov, const Eigen::MatrixXd &Omega);

/// Vacuum of every mode with reference scale m*omega per mode:
/// Var q = hbar / (2 m omega), Var p = hbar m omega / 2.
Eigen::MatrixXd vacuum_covariance(int n_modes, double hbar, const std::vector<double> &m_omega = {});

/// Partial transpose p_mode -> -p_mode applied to a covariance matrix.
Eigen::MatrixXd partial_transpose(const Eigen::MatrixXd &cov, int mode);

/// Continuous weak measurement of s.x with strength k and detection efficiency eta.
struct MeasurementChannel {
    Eigen::VectorXd s;
    double k = 0.0;
    double eta = 1.0;

    void validate(int dim) const;
};

/// External force F(t) entering dx/dt = ... + coupling * F(t).
struct ForceDrive {
    Eigen::VectorXd coupling;
    std::function<double(double)> waveform;

    static ForceDrive constant(Eigen::VectorXd coupling, double amplitude);
    /// amplitude * sin(omega t + phase)
    static ForceDrive sinusoid(Eigen::VectorXd coupling, double amplitude, double omega, double phase = 0.0);
    double operator()(double t) const {
        return waveform ? waveform(t) : 0.0;
    }
};

/// Measurement back-action diffusion D = hbar^2 k (Omega s)(Omega s)^T.
Eigen::MatrixXd backaction_diffusion(const LinearModel &model, const MeasurementChannel &channel);

/// Right-hand side of the conditional covariance flow
///   dV/dt = A V + V A^T + sum_c D_c + D_extra - sum_c 4 k_c eta_c (V s_c)(V s_c)^T,
/// with A replaced by A - damping when a damping matrix is given.
Eigen::MatrixXd riccati_rhs(const LinearModel &model, const std::vector<MeasurementChannel> &channels,
                            const Eigen::MatrixXd &V, const Eigen::MatrixXd &D_extra,
                            const Eigen::MatrixXd &damping = {});

struct RiccatiOptions {
    /// Local error tolerance of the step-doubling RK4 integrator (relative to ||V||).
    double step_tol = 1e-11;
    /// Stationarity: ||dV/dt|| < stationary_tol * ||V|| per unit time.
    double stationary_tol = 1e-12;
    double horizon = 1e6;
    long max_steps = 5'000'000;
    double initial_step = 1e-3;
    /// ||V|| beyond this is reported as divergence.
    double divergence_norm = 1e12;
    /// Optional user-supplied dissipation: the flow uses A - damping. Pairs with
    /// D_extra to describe a thermal bath; empty means none.
    Eigen::MatrixXd damping;
};

/// Covariance after integrating the Riccati flow for time T from V0.
Eigen::MatrixXd riccati_evolve(const LinearModel &model, const std::vector<MeasurementChannel> &channels,
                               const Eigen::MatrixXd &V0, double T, const Eigen::MatrixXd &D_extra = {},
                               const RiccatiOptions &options = {});

/// Raised when the covariance flow does not reach stationarity.
class RiccatiDivergence : public std::runtime_error {
   public:
    RiccatiDivergence(const std::string &what, Eigen::MatrixXd last, double time)
        : std::runtime_error(what), last_cov(std::move(last)), time(time) {
    }
    Eigen::MatrixXd last_cov;
    double time;
};

struct SteadyCovariance {
    Eigen::MatrixXd cov;
    double time;
    long steps;
    double final_rate;
};

/// Integrates the covariance flow to stationarity. Starts from V0 (vacuum
/// when omitted). Throws RiccatiDivergence with the last iterate on failure.
SteadyCovariance steady_covariance(const LinearModel &model, const std::vector<MeasurementChannel> &channels,
                                   const Eigen::MatrixXd &D_extra = {},
                                   const std::optional<Eigen::MatrixXd> &V0 = std::nullopt,
                                   const RiccatiOptions &options = {});

/// Conditional covariances V_0 .. V_n on a fixed grid of step dt.
std::vector<Eigen::MatrixXd> covariance_schedule(const LinearModel &model,
                                                 const std::vector<MeasurementChannel> &channels,
                                                 const Eigen::MatrixXd &V0, double dt, long n_steps);

struct Trajectory {
    std::vector<double> times;
    /// Conditional means at every time.
    std::vector<Eigen::VectorXd> means;
    /// Covariances at the times listed in cov_steps.
    std::vector<long> cov_steps;
    std::vector<Eigen::MatrixXd> covs;
    /// records[c][n] is the increment dy of channel c over the step ending at
    /// times[n]; records[c][0] = 0.
    std::vector<std::vector<double>> records;
    uint64_t seed = 0;
    double dt = 0.0;
    GaussianState initial;
};

struct EvolveOptions {
    double dt = 1e-3;
    double T = 1.0;
    uint64_t seed = 0;
    /// Store every cov_stride-th covariance (0: only the initial one).
    long cov_stride = 1;
    /// Zero Wiener increments (deterministic record).
    bool noiseless = false;
    /// ||A||_1 dt above this is rejected.
    double max_step_norm = 0.1;
};

/// Conditional-mean trajectory under continuous measurement.
///
/// Record: dy_c = s_c.mu dt + dW_c / sqrt(4 k_c eta_c). Mean update (innovation form):
///   mu <- Phi(dt) [mu + sum_c 4 k_c eta_c V s_c (dy_c - s_c.mu dt)] + force,
/// an Euler-Maruyama step for the noise with the exact linear propagator for the
/// drift and the trapezoid rule for the force. Channel c at step n draws its
/// Wiener increment from the counter stream (seed, c, n).
Trajectory evolve_conditional(const LinearModel &model, const GaussianState &state0,
                              const std::vector<MeasurementChannel> &channels,
                              const std::optional<ForceDrive> &force, const EvolveOptions &options);

/// Same as above with a precomputed covariance_schedule (shared across seeds).
Trajectory evolve_conditional(const LinearModel &model, const GaussianState &state0,
                              const std::vector<MeasurementChannel> &channels,
                              const std::optional<ForceDrive> &force, const EvolveOptions &options,
                              const std::vector<Eigen::MatrixXd> &schedule);

struct ForceEstimate {
    double amplitude;
    double posterior_std;
    double fisher_information;
};

/// Maximum-likelihood amplitude F0 of a force F0 * template(t) from a measurement
/// record, via the state augmented with F0 as a constant parameter under a flat
/// prior. The augmented Kalman filter is run in separated-bias form: the
/// F0-free filter gives innovations nu_0, and the sensitivity m = d mu / dF0
/// follows the same gain, so nu = nu_0 - F0 s.m dt and
///   F0_hat = sum 4 k eta (s.m dt) nu_0 / dt / I,  I = sum 4 k eta (s.m dt)^2 / dt.
/// The posterior std is 1/sqrt(I). Throws std::domain_error when I = 0.
/// `schedule`, when given, must be the covariance_schedule of the trajectory.
ForceEstimate estimate_force(const Trajectory &trajectory, const LinearModel &model,
                             const std::vector<MeasurementChannel> &channels, const ForceDrive &template_drive,
                             const std::vector<Eigen::MatrixXd> *schedule = nullptr);

/// Posterior std of the amplitude predicted by the augmented filter alone
/// (no data needed), on the same time grid as evolve_conditional.
double predicted_force_std(const LinearModel &model, const Eigen::MatrixXd &cov0,
                           const std::vector<MeasurementChannel> &channels, const ForceDrive &template_drive,
                           double dt, double T);

}  // namespace qmfs

#endif
