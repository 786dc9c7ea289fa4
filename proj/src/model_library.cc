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
#include <set>
#include <stdexcept>

namespace qmfs {

namespace {

void check_oscillator_params(double m, double omega) {
    if (!std::isfinite(m) || m == 0.0) {
        throw std::invalid_argument("oscillator mass must be finite and non-zero");
    }
    if (!std::isfinite(omega) || !(omega > 0.0)) {
        throw std::invalid_argument("oscillator frequency must be positive");
    }
}

Eigen::VectorXd unit(int dim, int k) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    v(k) = 1.0;
    return v;
}

}  // namespace

bool is_canonical_transform(const Eigen::MatrixXd &T, double tol) {
    if (T.rows() != T.cols() || T.rows() % 2 != 0 || T.rows() == 0) {
        return false;
    }
    Eigen::MatrixXd Omega = symplectic_form(static_cast<int>(T.rows() / 2));
    return (T * Omega * T.transpose() - Omega).cwiseAbs().maxCoeff() <= tol;
}

LinearModel rebase(const LinearModel &model, const Eigen::MatrixXd &T) {
    if (T.rows() != model.dim() || T.cols() != model.dim()) {
        throw std::invalid_argument("rebase: transform has wrong dimension");
    }
    Eigen::MatrixXd Tinv = T.inverse();
    Eigen::MatrixXd G = Tinv.transpose() * model.G() * Tinv;
    G = 0.5 * (G + G.transpose()).eval();
    std::vector<Eigen::VectorXd> couplings;
    for (const auto &b : model.force_couplings()) {
        couplings.push_back(T * b);
    }
    return LinearModel(std::move(G), model.hbar(), std::move(couplings));
}

Eigen::MatrixXd pair_collective_transform() {
    Eigen::MatrixXd T(4, 4);
    // clang-format off
    T << 1.0, 0.0,  1.0,  0.0,   // Q
         0.0, 0.5,  0.0,  0.5,   // P
         0.5, 0.0, -0.5,  0.0,   // Phi
         0.0, 1.0,  0.0, -1.0;   // Pi
    // clang-format on
    return T;
}

ObservableSet basis_observables(const Eigen::MatrixXd &T, const std::vector<int> &rows,
                                const std::vector<std::string> &labels) {
    Eigen::MatrixXd S(rows.size(), T.cols());
    for (size_t k = 0; k < rows.size(); k++) {
        S.row(k) = T.row(rows[k]);
    }
    return ObservableSet(std::move(S), labels);
}

ModelBundle single_oscillator(double m, double omega, double hbar) {
    check_oscillator_params(m, omega);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(2, 2);
    G(0, 0) = m * omega * omega;
    G(1, 1) = 1.0 / m;
    ModelBundle bundle{LinearModel(G, hbar, {unit(2, 1)}), {}, {}, {}, {}, {}};
    bundle.named_bases["physical"] = Eigen::MatrixXd::Identity(2, 2);
    bundle.metadata = {{"m", m}, {"omega", omega}, {"hbar", hbar}};
    bundle.description = m > 0 ? "single harmonic oscillator" : "single negative-mass oscillator";
    bundle.observable_maps.emplace("q", ObservableSet(Eigen::MatrixXd(unit(2, 0).transpose()), {"q"}));
    return bundle;
}

ModelBundle oscillator_pair(double m, double omega, double hbar) {
    check_oscillator_params(m, omega);
    if (m < 0) {
        throw std::invalid_argument("oscillator_pair: m is the positive-oscillator mass and must be > 0");
    }
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(4, 4);
    G(0, 0) = m * omega * omega;
    G(1, 1) = 1.0 / m;
    G(2, 2) = -m * omega * omega;
    G(3, 3) = -1.0 / m;
    ModelBundle bundle{LinearModel(G, hbar, {unit(4, 1)}), {}, {}, {}, {}, {}};
    Eigen::MatrixXd T = pair_collective_transform();
    bundle.named_bases["physical"] = Eigen::MatrixXd::Identity(4, 4);
    bundle.named_bases["qmfs"] = T;
    bundle.qmfs_sets.push_back(basis_observables(T, {0, 3}, {"Q", "Pi"}));
    bundle.qmfs_sets.push_back(basis_observables(T, {2, 1}, {"Phi", "P"}));
    bundle.observable_maps.emplace("collective", basis_observables(T, {0, 1, 2, 3}, {"Q", "P", "Phi", "Pi"}));
    bundle.metadata = {{"m", m}, {"omega", omega}, {"hbar", hbar}};
    bundle.description = "positive-mass oscillator (q,p) paired with negative-mass oscillator (q',p')";
    return bundle;
}

ModelBundle sideband_model(double omega_mod, double hbar) {
    ModelBundle bundle = oscillator_pair(1.0, omega_mod, hbar);
    const Eigen::MatrixXd &T = bundle.named_bases.at("qmfs");
    double c = std::sqrt(omega_mod / hbar);
    Eigen::MatrixXd alpha1(2, 4);
    alpha1.row(0) = 0.5 * c * T.row(0);               // Re a1 ~ Q
    alpha1.row(1) = 0.5 * c / omega_mod * T.row(3);   // Im a1 ~ Pi / omega
    Eigen::MatrixXd alpha2(2, 4);
    alpha2.row(0) = c / omega_mod * T.row(1);         // Re a2 ~ P / omega
    alpha2.row(1) = -c * T.row(2);                    // Im a2 ~ -Phi
    bundle.observable_maps.emplace("alpha1", ObservableSet(alpha1, {"Re_alpha1", "Im_alpha1"}));
    bundle.observable_maps.emplace("alpha2", ObservableSet(alpha2, {"Re_alpha2", "Im_alpha2"}));
    bundle.metadata["omega_mod"] = omega_mod;
    bundle.description =
        "sideband pair in the modulation picture: blue sideband (q,p) positive mass, red sideband (q',p') "
        "negative mass; field E = E1 cos(Omega t) + E2 sin(Omega t), E_k ~ alpha_k + alpha_k^dagger";
    return bundle;
}

ModelBundle spin_pair_hp(double J0, double gamma_B0, double hbar) {
    if (!std::isfinite(J0) || !(J0 > 0.0)) {
        throw std::invalid_argument("spin_pair_hp: J0 must be positive");
    }
    if (!std::isfinite(gamma_B0) || !(gamma_B0 > 0.0)) {
        throw std::invalid_argument("spin_pair_hp: gamma_B0 must be positive");
    }
    ModelBundle bundle = oscillator_pair(1.0 / gamma_B0, gamma_B0, hbar);
    bundle.metadata = {{"J0", J0}, {"gamma_B0", gamma_B0}, {"hbar", hbar}, {"quadrature_scale", std::sqrt(hbar * J0)}};
    bundle.description =
        "Holstein-Primakoff spin pair: q = Jx/sqrt(hbar J0), p = Jy/sqrt(hbar J0), q' = J'x/sqrt(hbar J0), "
        "p' = -J'y/sqrt(hbar J0); H = (gamma B0/2)(q^2 + p^2 - q'^2 - p'^2)";
    return bundle;
}

ModelBundle build_named_model(const std::string &name, const std::map<std::string, double> &params) {
    static const std::set<std::string> known{"m", "omega", "hbar", "J0", "gamma_B0"};
    for (const auto &[key, value] : params) {
        if (!known.count(key)) {
            throw std::invalid_argument("unknown model parameter '" + key + "'");
        }
    }
    auto get = [&](const std::string &key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    double hbar = get("hbar", 1.0);
    if (name == "single") {
        return single_oscillator(get("m", 1.0), get("omega", 1.0), hbar);
    }
    if (name == "pair") {
        return oscillator_pair(get("m", 1.0), get("omega", 1.0), hbar);
    }
    if (name == "sideband") {
        return sideband_model(get("omega", 1.0), hbar);
    }
    if (name == "spin-hp") {
        return spin_pair_hp(get("J0", 16.0), get("gamma_B0", 1.0), hbar);
    }
    throw std::invalid_argument("unknown model '" + name + "' (expected single, pair, sideband or spin-hp)");
}

}  // namespace qmfs
