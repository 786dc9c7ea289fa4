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

#ifndef QMFS_MODEL_LIBRARY_H
#define QMFS_MODEL_LIBRARY_H

#include <map>
#include <string>
#include <vector>

#include "qmfs/phase_space.h"

namespace qmfs {

/// A concrete model together with the bases and observable sets that make
/// its subsystem structure explicit.
///
/// A basis matrix T maps physical coordinates to new ones, y = T x, so the rows
/// of T are the new coordinates written as observables of the physical ones.
struct ModelBundle {
    LinearModel model;
    std::map<std::string, Eigen::MatrixXd> named_bases;
    std::vector<ObservableSet> qmfs_sets;
    /// Extra labelled observable maps (for example the quadrature amplitudes).
    std::map<std::string, ObservableSet> observable_maps;
    std::map<std::string, double> metadata;
    std::string description;
};

/// True iff T Omega T^T = Omega to `tol` (absolute, entrywise).
bool is_canonical_transform(const Eigen::MatrixXd &T, double tol = 1e-13);

/// Model expressed in the coordinates y = T x: G' = T^-T G T^-1, b' = T b.
LinearModel rebase(const LinearModel &model, const Eigen::MatrixXd &T);

/// Rows of the transform from (q, p, q', p') to (Q, P, Phi, Pi):
/// Q = q + q', P = (p + p')/2, Phi = (q - q')/2, Pi = p - p'.
Eigen::MatrixXd pair_collective_transform();

/// Observable set picked from named rows of a basis matrix.
ObservableSet basis_observables(const Eigen::MatrixXd &T, const std::vector<int> &rows,
                                const std::vector<std::string> &labels);

/// H = p^2/2m + m omega^2 q^2 / 2. A negative mass inverts the whole Hamiltonian.
ModelBundle single_oscillator(double m, double omega, double hbar = 1.0);

/// Positive-mass oscillator (q, p) paired with a negative-mass oscillator
/// (q', p') of the same |m| and omega. Basis "qmfs" holds (Q, P, Phi, Pi);
/// the force coupling acts on p.
ModelBundle oscillator_pair(double m, double omega, double hbar = 1.0);

/// Blue/red sideband pair in the modulation picture (the m = 1 pair), with
/// observable maps "alpha1" = (Re a1, Im a1) and "alpha2" = (Re a2, Im a2):
///   a1 = (1/2) sqrt(omega/hbar) (Q + i Pi/omega),
///   a2 = sqrt(omega/hbar) (-i Phi + P/omega).
/// The field about the carrier is E = E1 cos(Omega t) + E2 sin(Omega t) with
/// E_k proportional to a_k + a_k^dagger; the carrier is metadata only.
ModelBundle sideband_model(double omega_mod, double hbar = 1.0);

/// Two oppositely polarized spin ensembles in the Holstein-Primakoff limit:
/// q = Jx/sqrt(hbar J0), p = Jy/sqrt(hbar J0), q' = J'x/sqrt(hbar J0),
/// p' = -J'y/sqrt(hbar J0), H = (gamma B0 / 2)(q^2 + p^2 - q'^2 - p'^2).
/// This is oscillator_pair(m = 1/(gamma B0), omega = gamma B0).
ModelBundle spin_pair_hp(double J0, double gamma_B0, double hbar = 1.0);

/// Builder lookup by CLI name: "single", "pair", "sideband", "spin-hp".
/// Recognised parameters: m, omega, hbar, J0, gamma_B0.
ModelBundle build_named_model(const std::string &name, const std::map<std::string, double> &params);

}  // namespace qmfs

#endif
