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
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace qmfs {

Eigen::MatrixXd symplectic_form(int n_modes) {
    if (n_modes < 1) {
        throw std::invalid_argument("symplectic_form: n_modes must be positive");
    }
    Eigen::MatrixXd Omega = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
    for (int k = 0; k < n_modes; k++) {
        Omega(2 * k, 2 * k + 1) = 1.0;
        Omega(2 * k + 1, 2 * k) = -1.0;
    }
    return Omega;
}

Eigen::MatrixXd build_drift(const Eigen::MatrixXd &G, const Eigen::MatrixXd &Omega) {
    if (G.rows() != G.cols() || Omega.rows() != Omega.cols() || G.rows() != Omega.rows()) {
        throw std::invalid_argument("build_drift: dimension mismatch between G and Omega");
    }
    if (G != G.transpose()) {
        throw std::invalid_argument("build_drift: G is not symmetric");
    }
    return Omega * G;
}

LinearModel::LinearModel(Eigen::MatrixXd G, double hbar, std::vector<Eigen::VectorXd> force_couplings)
    : hbar_(hbar), G_(std::move(G)), force_couplings_(std::move(force_couplings)) {
    if (G_.rows() == 0 || G_.rows() % 2 != 0) {
        throw std::invalid_argument("LinearModel: G must be 2n x 2n with n >= 1");
    }
    if (!(hbar_ > 0) || !std::isfinite(hbar_)) {
        throw std::invalid_argument("LinearModel: hbar must be positive");
    }
    if (!G_.allFinite()) {
        throw std::invalid_argument("LinearModel: G has non-finite entries");
    }
    n_modes_ = static_cast<int>(G_.rows() / 2);
    Omega_ = symplectic_form(n_modes_);
    A_ = build_drift(G_, Omega_);
    for (const auto &b : force_couplings_) {
        if (b.size() != G_.rows() || !b.allFinite()) {
            throw std::invalid_argument("LinearModel: force coupling has wrong size or non-finite entries");
        }
    }
}

ObservableSet::ObservableSet(Eigen::MatrixXd S, std::vector<std::string> labels)
    : S_(std::move(S)), labels_(std::move(labels)) {
    if (S_.rows() < 1) {
        throw std::invalid_argument("ObservableSet: need at least one observable");
    }
    if (labels_.empty()) {
        for (int r = 0; r < S_.rows(); r++) {
            labels_.push_back("O" + std::to_string(r));
        }
    }
    if (static_cast<Eigen::Index>(labels_.size()) != S_.rows()) {
        throw std::invalid_argument("ObservableSet: label count does not match row count");
    }
    for (int r = 0; r < S_.rows(); r++) {
        if (S_.row(r).isZero(0.0)) {
            throw std::invalid_argument("ObservableSet: observable '" + labels_[r] + "' is the zero row");
        }
    }
}

ObservableSet ObservableSet::subset(const std::vector<int> &rows) const {
    Eigen::MatrixXd S(rows.size(), S_.cols());
    std::vector<std::string> labels;
    for (size_t k = 0; k < rows.size(); k++) {
        if (rows[k] < 0 || rows[k] >= S_.rows()) {
            throw std::out_of_range("ObservableSet::subset: row index out of range");
        }
        S.row(k) = S_.row(rows[k]);
        labels.push_back(labels_[rows[k]]);
    }
    return ObservableSet(std::move(S), std::move(labels));
}

std::string ObservableSet::describe() const {
    std::ostringstream out;
    out << "{";
    for (size_t k = 0; k < labels_.size(); k++) {
        out << (k ? "," : "") << labels_[k];
    }
    out << "}";
    return out.str();
}

double matrix_one_norm(const Eigen::MatrixXd &M) {
    if (M.size() == 0) {
        return 0.0;
    }
    return M.cwiseAbs().colwise().sum().maxCoeff();
}

Eigen::MatrixXd transfer_matrix(const Eigen::MatrixXd &A, double t, double max_norm) {
    if (!std::isfinite(t)) {
        throw std::invalid_argument("transfer_matrix: non-finite time");
    }
    if (t == 0.0) {
        return Eigen::MatrixXd::Identity(A.rows(), A.cols());
    }
    double norm = matrix_one_norm(A) * std::abs(t);
    if (norm > max_norm) {
        throw std::domain_error("transfer_matrix: ||A t|| = " + std::to_string(norm) + " exceeds bound " +
                                std::to_string(max_norm));
    }
    Eigen::MatrixXd At = A * t;
    return At.exp();
}

Eigen::MatrixXd transfer_matrix(const LinearModel &model, double t, double max_norm) {
    return transfer_matrix(model.A(), t, max_norm);
}

Eigen::MatrixXcd two_time_commutator(const LinearModel &model, const ObservableSet &set, double t, double t_prime) {
    if (set.dim() != model.dim()) {
        throw std::invalid_argument("two_time_commutator: observable dimension does not match model");
    }
    Eigen::MatrixXd left = set.S() * transfer_matrix(model, t);
    Eigen::MatrixXd right = set.S() * transfer_matrix(model, t_prime);
    Eigen::MatrixXd real_part = left * model.Omega() * right.transpose();
    return std::complex<double>(0.0, model.hbar()) * real_part.cast<std::complex<double>>();
}

QmfsResult is_qmfs(const LinearModel &model, const ObservableSet &set, double tol) {
    if (set.dim() != model.dim()) {
        throw std::invalid_argument("is_qmfs: observable dimension does not match model");
    }
    const int n = model.dim();
    const double s_norm2 = set.S().squaredNorm();
    const double a_norm = model.A().norm();

    // Krylov rows S A^i for i = 0 .. 2n-1.
    std::vector<Eigen::MatrixXd> krylov;
    krylov.reserve(n);
    krylov.push_back(set.S());
    for (int i = 1; i < n; i++) {
        krylov.push_back(krylov.back() * model.A());
    }

    QmfsResult result{QmfsVerdict::kQmfs, 0.0, tol, std::nullopt};
    QmfsWitness best{0, 0, 0, 0, -1.0};
    for (int i = 0; i < n; i++) {
        Eigen::MatrixXd left = krylov[i] * model.Omega();
        for (int j = 0; j < n; j++) {
            Eigen::MatrixXd block = left * krylov[j].transpose();
            double scale = s_norm2 * std::pow(a_norm, i + j);
            for (int r = 0; r < block.rows(); r++) {
                for (int c = 0; c < block.cols(); c++) {
                    double v = std::abs(block(r, c));
                    double scaled = v == 0.0 ? 0.0 : v / scale;
                    if (scaled > best.scaled_residual) {
                        best = {i, j, r, c, scaled};
                    }
                }
            }
        }
    }
    result.max_scaled_residual = best.scaled_residual;
    if (best.scaled_residual > tol) {
        result.verdict = QmfsVerdict::kNotQmfs;
        result.witness = best;
    }
    return result;
}

double max_grid_commutator(const LinearModel &model, const ObservableSet &set, double t_max, int n) {
    if (n < 1) {
        throw std::invalid_argument("max_grid_commutator: grid size must be positive");
    }
    std::vector<Eigen::MatrixXd> rows;
    for (int a = 0; a < n; a++) {
        double t = n == 1 ? 0.0 : t_max * a / (n - 1);
        rows.push_back(set.S() * transfer_matrix(model, t));
    }
    double worst = 0.0;
    for (int a = 0; a < n; a++) {
        Eigen::MatrixXd left = rows[a] * model.Omega();
        for (int b = 0; b < n; b++) {
            Eigen::MatrixXd K = model.hbar() * left * rows[b].transpose();
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(K);
            worst = std::max(worst, svd.singularValues()(0));
        }
    }
    return worst;
}

}  // namespace qmfs
