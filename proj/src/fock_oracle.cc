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

#include "qmfs/fock_oracle.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/KroneckerProduct>

namespace qmfs {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using cd = std::complex<double>;

MatrixXcd power(const MatrixXcd &x, int k) {
    MatrixXcd out = MatrixXcd::Identity(x.rows(), x.cols());
    for (int i = 0; i < k; i++) {
        out = out * x;
    }
    return out;
}

MatrixXcd sym_product(const MatrixXcd &a, const MatrixXcd &b) {
    return 0.5 * (a * b + b * a);
}

void check_hermitian(MatrixXcd &H, const char *what) {
    double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    double defect = (H - H.adjoint()).cwiseAbs().maxCoeff();
    if (defect > 1e-12 * scale) {
        throw std::runtime_error(std::string(what) + ": result is not Hermitian (defect " + std::to_string(defect) +
                                 ")");
    }
    H = 0.5 * (H + H.adjoint()).eval();
}

}  // namespace

void TruncationSpec::validate(int n_modes) const {
    if (n_levels < 2) {
        throw std::invalid_argument("TruncationSpec: need at least 2 levels per mode");
    }
    if (guard_levels < 0 || guard_levels >= n_levels) {
        throw std::invalid_argument("TruncationSpec: guard_levels out of range");
    }
    if (!(guard_fraction >= 0.0) || !std::isfinite(guard_fraction)) {
        throw std::invalid_argument("TruncationSpec: guard_fraction must be >= 0");
    }
    if (shell() < 0) {
        throw std::invalid_argument("TruncationSpec: empty test shell");
    }
    double dim = std::pow(static_cast<double>(n_levels), n_modes);
    if (dim > static_cast<double>(dimension_cap)) {
        throw std::length_error("TruncationSpec: " + std::to_string(n_levels) + "^" + std::to_string(n_modes) +
                                " exceeds the dimension cap " + std::to_string(dimension_cap));
    }
}

std::string TruncationSpec::describe() const {
    std::ostringstream os;
    os << "N=" << n_levels << "/mode, test shell: total excitation <= " << shell() << ", guard: top "
       << guard_levels << " levels, population <= " << guard_fraction;
    return os.str();
}

MatrixXcd ladder_q(int n_levels, double hbar, double scale) {
    MatrixXcd a = MatrixXcd::Zero(n_levels, n_levels);
    for (int i = 0; i + 1 < n_levels; i++) {
        a(i, i + 1) = std::sqrt(static_cast<double>(i + 1));
    }
    return std::sqrt(hbar / (2.0 * scale)) * (a + a.adjoint());
}

MatrixXcd ladder_p(int n_levels, double hbar, double scale) {
    MatrixXcd a = MatrixXcd::Zero(n_levels, n_levels);
    for (int i = 0; i + 1 < n_levels; i++) {
        a(i, i + 1) = std::sqrt(static_cast<double>(i + 1));
    }
    return cd(0.0, std::sqrt(hbar * scale / 2.0)) * (a.adjoint() - a);
}

MatrixXcd kron_modes(const std::vector<MatrixXcd> &locals) {
    if (locals.empty()) {
        throw std::invalid_argument("kron_modes: no factors");
    }
    MatrixXcd out = locals[0];
    for (size_t k = 1; k < locals.size(); k++) {
        out = Eigen::kroneckerProduct(out, locals[k]).eval();
    }
    return out;
}

FockSpace::FockSpace(int n_modes, const TruncationSpec &spec, double hbar, std::vector<double> scales)
    : n_modes_(n_modes), spec_(spec), hbar_(hbar) {
    if (n_modes < 1) {
        throw std::invalid_argument("FockSpace: need at least one mode");
    }
    if (!(hbar > 0.0) || !std::isfinite(hbar)) {
        throw std::invalid_argument("FockSpace: hbar must be positive");
    }
    spec.validate(n_modes);
    if (scales.empty()) {
        scales.assign(n_modes, 1.0);
    }
    if (static_cast<int>(scales.size()) != n_modes) {
        throw std::invalid_argument("FockSpace: need one reference scale per mode");
    }
    const int N = spec.n_levels;
    for (double s : scales) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw std::invalid_argument("FockSpace: reference scales must be positive");
        }
        q_.push_back(ladder_q(N, hbar, s));
        p_.push_back(ladder_p(N, hbar, s));
    }
    dim_ = 1;
    for (int k = 0; k < n_modes; k++) {
        dim_ *= N;
    }
    guard_.assign(dim_, false);
    for (long i = 0; i < dim_; i++) {
        int total = 0;
        for (int m = 0; m < n_modes; m++) {
            int n = level(i, m);
            total += n;
            if (n >= N - spec.guard_levels) {
                guard_[i] = true;
            }
        }
        if (total <= spec.shell()) {
            shell_.push_back(i);
        }
    }
}

MatrixXcd FockSpace::q(int mode) const {
    return embed({{mode, q_.at(mode)}});
}

MatrixXcd FockSpace::p(int mode) const {
    return embed({{mode, p_.at(mode)}});
}

MatrixXcd FockSpace::linear_combination(const Eigen::VectorXd &c) const {
    if (c.size() != 2 * n_modes_) {
        throw std::invalid_argument("FockSpace::linear_combination: coefficient vector has wrong size");
    }
    MatrixXcd out = MatrixXcd::Zero(dim_, dim_);
    for (int m = 0; m < n_modes_; m++) {
        if (c(2 * m) != 0.0 || c(2 * m + 1) != 0.0) {
            out += embed({{m, c(2 * m) * q_[m] + c(2 * m + 1) * p_[m]}});
        }
    }
    return out;
}

MatrixXcd FockSpace::embed(const std::vector<std::pair<int, MatrixXcd>> &locals) const {
    const int N = spec_.n_levels;
    std::vector<MatrixXcd> factors(n_modes_, MatrixXcd::Identity(N, N));
    for (const auto &[mode, op] : locals) {
        if (mode < 0 || mode >= n_modes_) {
            throw std::out_of_range("FockSpace::embed: mode out of range");
        }
        factors[mode] = factors[mode] * op;
    }
    return kron_modes(factors);
}

int FockSpace::level(long index, int mode) const {
    long stride = 1;
    for (int k = mode + 1; k < n_modes_; k++) {
        stride *= spec_.n_levels;
    }
    return static_cast<int>((index / stride) % spec_.n_levels);
}

MatrixXcd FockSpace::shell_basis() const {
    MatrixXcd X = MatrixXcd::Zero(dim_, static_cast<Eigen::Index>(shell_.size()));
    for (size_t k = 0; k < shell_.size(); k++) {
        X(shell_[k], k) = 1.0;
    }
    return X;
}

VectorXcd FockSpace::product_state(const std::vector<VectorXcd> &modes) const {
    if (static_cast<int>(modes.size()) != n_modes_) {
        throw std::invalid_argument("FockSpace::product_state: need one vector per mode");
    }
    VectorXcd out = modes[0];
    for (size_t k = 1; k < modes.size(); k++) {
        out = Eigen::kroneckerProduct(out, modes[k]).eval();
    }
    if (out.size() != dim_) {
        throw std::invalid_argument("FockSpace::product_state: mode vectors have wrong size");
    }
    return out;
}

VectorXcd coherent_state(int n_levels, cd alpha) {
    VectorXcd v(n_levels);
    cd c = 1.0;
    for (int n = 0; n < n_levels; n++) {
        v(n) = c;
        c *= alpha / std::sqrt(static_cast<double>(n + 1));
    }
    return v / v.norm();
}

FockSpace koopman_space(const PolyKoopman &pk, const TruncationSpec &spec) {
    pk.validate();
    double scale = std::abs(pk.m_scale) * pk.omega_scale;
    return FockSpace(2 * pk.M, spec, pk.hbar, std::vector<double>(2 * pk.M, scale));
}

namespace {

// Local factors of a monomial: Q_j^a on mode j, Pi_j^b on mode M + j.
std::vector<std::pair<int, MatrixXcd>> monomial_locals(const Monomial &m, const FockSpace &space, int M) {
    std::vector<std::pair<int, MatrixXcd>> locals;
    for (int j = 0; j < M; j++) {
        if (m.a[j] > 0) {
            locals.emplace_back(j, power(space.local_q(j), m.a[j]));
        }
        if (m.b[j] > 0) {
            locals.emplace_back(M + j, power(space.local_p(M + j), m.b[j]));
        }
    }
    return locals;
}

// Replaces the factor on `mode` by sym(x, factor), or inserts x if absent.
void symmetrize_with(std::vector<std::pair<int, MatrixXcd>> &locals, int mode, const MatrixXcd &x) {
    for (auto &[m, op] : locals) {
        if (m == mode) {
            op = sym_product(x, op);
            return;
        }
    }
    locals.emplace_back(mode, x);
}

}  // namespace

MatrixXcd polynomial_operator(const Polynomial &poly, const FockSpace &space, double t) {
    const int M = poly.n_pairs();
    if (space.n_modes() != 2 * M) {
        throw std::invalid_argument("polynomial_operator: space does not match the polynomial");
    }
    MatrixXcd out = MatrixXcd::Zero(space.dim(), space.dim());
    for (const auto &m : poly.terms()) {
        out += (m.coef * m.time(t)) * space.embed(monomial_locals(m, space, M));
    }
    return out;
}

MatrixXcd build_koopman_hamiltonian(const PolyKoopman &pk, const FockSpace &space, double t) {
    pk.validate();
    const int M = pk.M;
    if (space.n_modes() != 2 * M) {
        throw std::invalid_argument("build_koopman_hamiltonian: space does not match the model");
    }
    MatrixXcd H = MatrixXcd::Zero(space.dim(), space.dim());
    // 1/2 (P_j F + F P_j): only the factor on mode j changes, to sym(p, Q^a).
    for (int j = 0; j < M; j++) {
        for (const auto &m : pk.f[j].terms()) {
            auto locals = monomial_locals(m, space, M);
            symmetrize_with(locals, j, space.local_p(j));
            H += (m.coef * m.time(t)) * space.embed(locals);
        }
        for (const auto &m : pk.g[j].terms()) {
            auto locals = monomial_locals(m, space, M);
            symmetrize_with(locals, M + j, space.local_q(M + j));
            H += (m.coef * m.time(t)) * space.embed(locals);
        }
    }
    H += polynomial_operator(pk.h, space, t);
    check_hermitian(H, "build_koopman_hamiltonian");
    return H;
}

MatrixXcd quadratic_hamiltonian(const LinearModel &model, const FockSpace &space) {
    if (model.n_modes() != space.n_modes()) {
        throw std::invalid_argument("quadratic_hamiltonian: mode count mismatch");
    }
    const Eigen::MatrixXd &G = model.G();
    auto local = [&](int i) -> const MatrixXcd & {
        return i % 2 == 0 ? space.local_q(i / 2) : space.local_p(i / 2);
    };
    MatrixXcd H = MatrixXcd::Zero(space.dim(), space.dim());
    for (int i = 0; i < G.rows(); i++) {
        if (G(i, i) != 0.0) {
            H += 0.5 * G(i, i) * space.embed({{i / 2, local(i) * local(i)}});
        }
        for (int j = i + 1; j < G.cols(); j++) {
            if (G(i, j) == 0.0) {
                continue;
            }
            if (i / 2 == j / 2) {
                H += G(i, j) * space.embed({{i / 2, sym_product(local(i), local(j))}});
            } else {
                H += G(i, j) * space.embed({{i / 2, local(i)}, {j / 2, local(j)}});
            }
        }
    }
    check_hermitian(H, "quadratic_hamiltonian");
    return H;
}

std::string GuardReport::describe() const {
    std::ostringstream os;
    os << "guard population " << max_population << (trusted ? " <= " : " > ") << threshold
       << (trusted ? " (trusted)" : " (UNTRUSTED)");
    return os.str();
}

HeisenbergEvolver::HeisenbergEvolver(const FockSpace &space, const MatrixXcd &H) : space_(space) {
    if (H.rows() != space.dim() || H.cols() != space.dim()) {
        throw std::invalid_argument("HeisenbergEvolver: Hamiltonian has wrong dimension");
    }
    Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(H);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("HeisenbergEvolver: eigendecomposition failed");
    }
    energies_ = solver.eigenvalues();
    V_ = solver.eigenvectors();
}

namespace {

VectorXcd phases(const Eigen::VectorXd &E, double t, double hbar, double sign) {
    VectorXcd out(E.size());
    for (Eigen::Index k = 0; k < E.size(); k++) {
        out(k) = std::polar(1.0, sign * E(k) * t / hbar);
    }
    return out;
}

}  // namespace

MatrixXcd HeisenbergEvolver::heisenberg(const MatrixXcd &O, double t) const {
    VectorXcd d = phases(energies_, t, space_.hbar(), 1.0);
    MatrixXcd eig = V_.adjoint() * O * V_;
    eig = d.asDiagonal() * eig * d.conjugate().asDiagonal();
    return V_ * eig * V_.adjoint();
}

MatrixXcd HeisenbergEvolver::propagate(const MatrixXcd &X, double t) const {
    VectorXcd d = phases(energies_, t, space_.hbar(), -1.0);
    return V_ * (d.asDiagonal() * (V_.adjoint() * X));
}

GuardReport HeisenbergEvolver::guard(const std::vector<double> &times) const {
    GuardReport report;
    report.threshold = space_.spec().guard_fraction;
    MatrixXcd X = space_.shell_basis();
    const auto &mask = space_.guard_mask();
    for (double t : times) {
        MatrixXcd Y = propagate(X, t);
        for (Eigen::Index c = 0; c < Y.cols(); c++) {
            double pop = 0.0;
            for (long i = 0; i < space_.dim(); i++) {
                if (mask[i]) {
                    pop += std::norm(Y(i, c));
                }
            }
            report.max_population = std::max(report.max_population, pop);
        }
    }
    report.trusted = report.max_population <= report.threshold;
    return report;
}

HeisenbergEvolver::Prepared HeisenbergEvolver::prepare(const MatrixXcd &O) const {
    if (O.rows() != space_.dim() || O.cols() != space_.dim()) {
        throw std::invalid_argument("HeisenbergEvolver::prepare: operator has wrong dimension");
    }
    return {V_.adjoint() * O * V_};
}

MatrixXcd HeisenbergEvolver::apply(const Prepared &O, double t, const MatrixXcd &X) const {
    VectorXcd d = phases(energies_, t, space_.hbar(), 1.0);
    MatrixXcd Z = d.conjugate().asDiagonal() * (V_.adjoint() * X);
    Z = d.asDiagonal() * (O.eig * Z);
    return V_ * Z;
}

MatrixXcd HeisenbergEvolver::shell_image(const Prepared &O, double t) const {
    VectorXcd d = phases(energies_, t, space_.hbar(), 1.0);
    const auto &shell = space_.shell_states();
    MatrixXcd Z(space_.dim(), static_cast<Eigen::Index>(shell.size()));
    for (size_t k = 0; k < shell.size(); k++) {
        Z.col(k) = V_.row(shell[k]).adjoint();
    }
    Z = d.conjugate().asDiagonal() * Z;
    return d.asDiagonal() * (O.eig * Z);
}

HeisenbergResult heisenberg_op(const HeisenbergEvolver &evolver, const MatrixXcd &O, double t) {
    return {evolver.heisenberg(O, t), evolver.guard({t})};
}

double spectral_norm(const MatrixXcd &M) {
    if (M.size() == 0) {
        return 0.0;
    }
    return Eigen::JacobiSVD<MatrixXcd>(M).singularValues()(0);
}

double anti_hermitian_norm(const MatrixXcd &C) {
    if (C.size() == 0) {
        return 0.0;
    }
    MatrixXcd H = cd(0.0, 1.0) * C;
    Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(H, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixXcd shell_commutator(const HeisenbergEvolver &evolver, const HeisenbergEvolver::Prepared &A, double t,
                           const HeisenbergEvolver::Prepared &B, double tp) {
    MatrixXcd WA = evolver.shell_image(A, t);
    MatrixXcd WB = evolver.shell_image(B, tp);
    return WA.adjoint() * WB - WB.adjoint() * WA;
}

CommutatorResidual commutator_residual(const HeisenbergEvolver &evolver, const std::vector<MatrixXcd> &ops,
                                       const std::vector<double> &t_grid) {
    CommutatorResidual out;
    out.truncation = evolver.space().spec().describe();
    out.guard = evolver.guard(t_grid);
    std::vector<std::vector<MatrixXcd>> images(ops.size());
    for (size_t j = 0; j < ops.size(); j++) {
        auto prepared = evolver.prepare(ops[j]);
        for (double t : t_grid) {
            images[j].push_back(evolver.shell_image(prepared, t));
        }
    }
    const double hbar = evolver.space().hbar();
    for (size_t j = 0; j < ops.size(); j++) {
        for (size_t k = j; k < ops.size(); k++) {
            for (size_t a = 0; a < t_grid.size(); a++) {
                // [A(t), A(t')] is anti-symmetric in (t, t'): half the grid suffices.
                for (size_t b = (j == k ? a + 1 : 0); b < t_grid.size(); b++) {
                    const MatrixXcd &WA = images[j][a];
                    const MatrixXcd &WB = images[k][b];
                    double r = anti_hermitian_norm(WA.adjoint() * WB - WB.adjoint() * WA) / hbar;
                    if (r > out.max_residual || out.worst_j < 0) {
                        out.max_residual = r;
                        out.worst_j = static_cast<int>(j);
                        out.worst_k = static_cast<int>(k);
                        out.worst_t = t_grid[a];
                        out.worst_tp = t_grid[b];
                    }
                }
            }
        }
    }
    return out;
}

double oracle_agreement(const HeisenbergEvolver &evolver, const LinearModel &model, const ObservableSet &set,
                        const std::vector<double> &t_grid) {
    const FockSpace &space = evolver.space();
    if (model.dim() != 2 * space.n_modes() || set.dim() != model.dim()) {
        throw std::invalid_argument("oracle_agreement: model, set and space disagree in dimension");
    }
    std::vector<std::vector<MatrixXcd>> images(set.size());
    for (int j = 0; j < set.size(); j++) {
        auto prepared = evolver.prepare(space.linear_combination(set.S().row(j).transpose()));
        for (double t : t_grid) {
            images[j].push_back(evolver.shell_image(prepared, t));
        }
    }
    double worst = 0.0;
    for (size_t a = 0; a < t_grid.size(); a++) {
        for (size_t b = 0; b < t_grid.size(); b++) {
            Eigen::MatrixXcd K = two_time_commutator(model, set, t_grid[a], t_grid[b]);
            for (int j = 0; j < set.size(); j++) {
                for (int k = 0; k < set.size(); k++) {
                    const MatrixXcd &WA = images[j][a];
                    const MatrixXcd &WB = images[k][b];
                    MatrixXcd C = WA.adjoint() * WB - WB.adjoint() * WA;
                    C.diagonal().array() -= K(j, k);
                    worst = std::max(worst, anti_hermitian_norm(C) / space.hbar());
                }
            }
        }
    }
    return worst;
}

PiecewisePropagator::PiecewisePropagator(const PolyKoopman &pk, const FockSpace &space, double dt)
    : pk_(pk), space_(space), dt_(dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("PiecewisePropagator: dt must be positive");
    }
}

MatrixXcd PiecewisePropagator::unitary(double t0, double t1) const {
    if (!(t1 >= t0)) {
        throw std::invalid_argument("PiecewisePropagator: need t1 >= t0");
    }
    long n = std::max(1L, static_cast<long>(std::ceil((t1 - t0) / dt_ - 1e-12)));
    double h = (t1 - t0) / n;
    MatrixXcd U = MatrixXcd::Identity(space_.dim(), space_.dim());
    if (t1 == t0) {
        return U;
    }
    for (long k = 0; k < n; k++) {
        MatrixXcd H = build_koopman_hamiltonian(pk_, space_, t0 + (k + 0.5) * h);
        Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(H);
        VectorXcd d = phases(solver.eigenvalues(), h, space_.hbar(), -1.0);
        U = (solver.eigenvectors() * d.asDiagonal() * solver.eigenvectors().adjoint()) * U;
    }
    return U;
}

MatrixXcd PiecewisePropagator::heisenberg(const MatrixXcd &O, double t) const {
    MatrixXcd U = unitary(0.0, t);
    return U.adjoint() * O * U;
}

}  // namespace qmfs
