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

#include "qmfs/experiments.h"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "qmfs/conditional_gaussian.h"
#include "qmfs/counter_rng.h"
#include "qmfs/fock_oracle.h"
#include "qmfs/koopman_classical.h"
#include "qmfs/model_library.h"
#include "qmfs/spin_exact.h"
#include "qmfs/stroboscopic.h"

#ifndef QMFS_VERSION
#define QMFS_VERSION "0.0.0"
#endif

namespace qmfs {

const char *const kToolVersion = QMFS_VERSION;

using json = nlohmann::json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string sha256_hex(const std::string &data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; i++) {
        hex += fmt::format("{:02x}", digest[i]);
    }
    return hex;
}

void parallel_for(long n, int threads, const std::function<void(long)> &fn) {
    if (threads < 1) {
        throw std::invalid_argument("parallel_for: threads must be >= 1");
    }
    if (threads == 1 || n <= 1) {
        for (long i = 0; i < n; i++) {
            fn(i);
        }
        return;
    }
    std::atomic<long> next{0};
    std::mutex mu;
    long failed_index = -1;
    std::exception_ptr failure;
    auto worker = [&] {
        for (long i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (failed_index < 0 || i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<long>(threads, n); t++) {
        pool.emplace_back(worker);
    }
    for (auto &th : pool) {
        th.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

namespace {

std::string num(double x) {
    return fmt::format("{:.17g}", x);
}

// ---------------------------------------------------------------------------
// Configuration

json common_defaults() {
    return {{"seeds", {{"master", 1}, {"batch", 1}}}, {"tolerances", {{"scale", 1.0}}}};
}

json experiment_defaults(const std::string &name) {
    json d = common_defaults();
    const double two_pi = 2.0 * std::numbers::pi;
    if (name == "check") {
        d["model"] = {{"name", "pair"}, {"params", json::object()}};
        d["check"] = {{"t_max", two_pi}, {"grid", 20}, {"oracle_levels", 12}, {"oracle_grid", 6}};
    } else if (name == "simulate") {
        d["model"] = {{"name", "pair"}, {"params", json::object()}};
        d["integration"] = {{"dt", 1e-3}, {"T", 10.0}};
        d["seeds"]["batch"] = 4;
        d["channels"] = json::array();
        d["drive"] = {{"kind", "none"}, {"amplitude", 0.0}, {"omega", nullptr}, {"phase", 0.0}};
        d["simulate"] = {{"stride", 100}};
    } else if (name == "force") {
        d["model"] = {{"name", "pair"}, {"params", json::object()}};
        d["integration"] = {{"dt", 1e-3}, {"T", 10.0}};
        d["seeds"]["batch"] = 200;
        d["force"] = {{"k", {1.0}}, {"eta", 1.0}, {"amplitude", 0.0}, {"omega_drive", nullptr}};
    } else if (name == "koopman") {
        d["model"] = {{"name", "quadratic-drift"}, {"params", json::object()}};
        d["koopman"] = {{"model_file", nullptr},
                        {"levels", {10, 15, 20, 25}},
                        {"shell", 2},
                        {"t_max", 2.0},
                        {"n_times", 9},
                        {"alpha", {0.4, 0.0}},
                        {"beta", {0.0, 0.2}},
                        {"expectation_levels", 25},
                        {"expectation_tolerance_scale", 1e-3},
                        {"residual_tolerance", 1e-5}};
    } else if (name == "spin") {
        d["spin"] = {{"J0", {2, 4, 8, 16}}, {"gamma_B0", 1.0},     {"hbar", 1.0},         {"excitation", 1},
                     {"displacement", 0.4}, {"n_time_pairs", 5}, {"n_times", 25}, {"identity_tolerance", 1e-10}};
    } else if (name == "circuit") {
        d["circuit"] = {{"file", nullptr}, {"verify", false}, {"synthesize", nullptr}};
    } else {
        throw InputError("unknown experiment '" + name + "'");
    }
    return d;
}

bool same_kind(const json &a, const json &b) {
    if (a.is_number() && b.is_number()) {
        return true;
    }
    return a.type() == b.type();
}

// Overlays `over` onto `base`. Every key must already exist in `base`; values
// keep their type unless the default is null.
void merge_config(json &base, const json &over, const std::string &path) {
    if (!over.is_object()) {
        throw InputError("config " + (path.empty() ? std::string("root") : path) + " must be an object");
    }
    for (auto it = over.begin(); it != over.end(); ++it) {
        const std::string key_path = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) {
            throw InputError("unknown config key '" + key_path + "'");
        }
        json &slot = base[it.key()];
        if (key_path == "model.params") {
            if (!it.value().is_object()) {
                throw InputError("model.params must be an object");
            }
            for (auto p = it.value().begin(); p != it.value().end(); ++p) {
                if (!p.value().is_number()) {
                    throw InputError("model parameter '" + p.key() + "' must be a number");
                }
                slot[p.key()] = p.value();
            }
        } else if (slot.is_object()) {
            merge_config(slot, it.value(), key_path);
        } else if (slot.is_null() || same_kind(slot, it.value())) {
            slot = it.value();
        } else {
            throw InputError("config key '" + key_path + "' has the wrong type");
        }
    }
}

template <typename T>
T get(const json &cfg, const std::string &section, const std::string &key) {
    try {
        return cfg.at(section).at(key).get<T>();
    } catch (const json::exception &e) {
        throw InputError("config " + section + "." + key + ": " + e.what());
    }
}

double positive(double x, const std::string &what) {
    if (!std::isfinite(x) || !(x > 0.0)) {
        throw InputError(what + " must be positive");
    }
    return x;
}

std::map<std::string, double> model_params(const json &cfg) {
    std::map<std::string, double> params;
    for (auto it = cfg["model"]["params"].begin(); it != cfg["model"]["params"].end(); ++it) {
        params[it.key()] = it.value().get<double>();
    }
    return params;
}

ModelBundle load_model(const json &cfg) {
    try {
        return build_named_model(cfg["model"]["name"].get<std::string>(), model_params(cfg));
    } catch (const std::invalid_argument &e) {
        throw InputError(e.what());
    }
}

double param_or(const std::map<std::string, double> &p, const std::string &key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

// Reference scale m * omega of each mode for vacuum states and Fock spaces.
std::vector<double> mode_scales(const ModelBundle &bundle) {
    double scale = 1.0;
    auto m = bundle.metadata.find("m"), omega = bundle.metadata.find("omega");
    if (m != bundle.metadata.end() && omega != bundle.metadata.end()) {
        scale = std::abs(m->second) * omega->second;
    }
    return std::vector<double>(bundle.model.n_modes(), scale);
}

// Labelled physical coordinates plus any collective coordinates.
std::vector<std::pair<std::string, VectorXd>> labelled_observables(const ModelBundle &bundle) {
    std::vector<std::pair<std::string, VectorXd>> out;
    const int d = bundle.model.dim();
    for (int mode = 0; mode < bundle.model.n_modes(); mode++) {
        std::string prime(mode, '\'');
        out.emplace_back("q" + prime, VectorXd::Unit(d, 2 * mode));
        out.emplace_back("p" + prime, VectorXd::Unit(d, 2 * mode + 1));
    }
    auto collective = bundle.observable_maps.find("collective");
    if (collective != bundle.observable_maps.end()) {
        const ObservableSet &set = collective->second;
        for (int r = 0; r < set.size(); r++) {
            out.emplace_back(set.labels()[r], set.S().row(r).transpose());
        }
    }
    return out;
}

VectorXd observable_by_name(const ModelBundle &bundle, const json &spec) {
    const int d = bundle.model.dim();
    if (spec.is_string()) {
        for (const auto &[label, s] : labelled_observables(bundle)) {
            if (label == spec.get<std::string>()) {
                return s;
            }
        }
        throw InputError("unknown observable '" + spec.get<std::string>() + "'");
    }
    if (spec.is_array() && static_cast<int>(spec.size()) == d) {
        VectorXd s(d);
        for (int i = 0; i < d; i++) {
            if (!spec[i].is_number()) {
                throw InputError("observable coefficients must be numbers");
            }
            s(i) = spec[i].get<double>();
        }
        return s;
    }
    throw InputError("observable must be a label or " + std::to_string(d) + " coefficients");
}

// ---------------------------------------------------------------------------
// Reporting

struct Invariant {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    // "pass", "fail" or "info".
    std::string status;
    std::string detail;
};

struct Report {
    std::vector<Invariant> invariants;
    std::vector<std::string> artifacts;
    json results = json::object();

    void check_below(const std::string &name, double value, double tol, const std::string &detail = "") {
        invariants.push_back({name, value, tol, value < tol ? "pass" : "fail", detail});
    }
    void check_true(const std::string &name, bool ok, const std::string &detail = "") {
        invariants.push_back({name, ok ? 1.0 : 0.0, 0.0, ok ? "pass" : "fail", detail});
    }
    void info(const std::string &name, double value, const std::string &detail = "") {
        invariants.push_back({name, value, 0.0, "info", detail});
    }
    bool passed() const {
        for (const auto &inv : invariants) {
            if (inv.status == "fail") {
                return false;
            }
        }
        return true;
    }
};

class OutputDir {
   public:
    OutputDir(std::filesystem::path dir, Report &report) : dir_(std::move(dir)), report_(report) {
    }
    std::ofstream open(const std::string &name) {
        std::filesystem::create_directories(dir_);
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + (dir_ / name).string());
        }
        report_.artifacts.push_back(name);
        return out;
    }
    const std::filesystem::path &path() const {
        return dir_;
    }

   private:
    std::filesystem::path dir_;
    Report &report_;
};

bool strictly_decreasing(const std::vector<double> &v) {
    for (size_t i = 1; i < v.size(); i++) {
        if (!(v[i] < v[i - 1])) {
            return false;
        }
    }
    return true;
}

std::string set_name(const ObservableSet &set) {
    std::string s = "{";
    for (size_t i = 0; i < set.labels().size(); i++) {
        s += (i ? "," : "") + set.labels()[i];
    }
    return s + "}";
}

// ---------------------------------------------------------------------------
// Experiments

void run_check(const json &cfg, Report &report, OutputDir &dir, int) {
    ModelBundle bundle = load_model(cfg);
    const LinearModel &model = bundle.model;
    const double scale = cfg["tolerances"]["scale"].get<double>();
    const double t_max = positive(get<double>(cfg, "check", "t_max"), "check.t_max");
    const int grid = get<int>(cfg, "check", "grid");
    const int oracle_levels = get<int>(cfg, "check", "oracle_levels");
    const int oracle_grid = get<int>(cfg, "check", "oracle_grid");
    if (grid < 2 || oracle_grid < 2 || oracle_levels < 0) {
        throw InputError("check: grid sizes must be >= 2 and oracle_levels >= 0");
    }
    const double tol = kQmfsTolerance * scale;

    auto obs = labelled_observables(bundle);
    std::ofstream csv = dir.open("check.csv");
    csv << "set,verdict,max_scaled_residual,witness_i,witness_j,grid_max_over_hbar\n";
    for (size_t i = 0; i < obs.size(); i++) {
        for (size_t j = i + 1; j < obs.size(); j++) {
            MatrixXd S(2, model.dim());
            S.row(0) = obs[i].second.transpose();
            S.row(1) = obs[j].second.transpose();
            ObservableSet set(S, {obs[i].first, obs[j].first});
            QmfsResult r = is_qmfs(model, set, tol);
            double g = max_grid_commutator(model, set, t_max, grid) / model.hbar();
            csv << "\"" << set_name(set) << "\"," << (r.is_qmfs() ? "qmfs" : "not_qmfs") << ","
                << num(r.max_scaled_residual) << "," << (r.witness ? std::to_string(r.witness->i) : "") << ","
                << (r.witness ? std::to_string(r.witness->j) : "") << "," << num(g) << "\n";
        }
    }

    std::vector<double> t_grid, o_grid;
    for (int k = 0; k < grid; k++) {
        t_grid.push_back(t_max * k / (grid - 1));
    }
    for (int k = 0; k < oracle_grid; k++) {
        o_grid.push_back(t_max * k / (oracle_grid - 1));
    }
    std::optional<FockSpace> space;
    std::optional<HeisenbergEvolver> evolver;
    if (oracle_levels > 0) {
        TruncationSpec spec;
        spec.n_levels = oracle_levels;
        space.emplace(model.n_modes(), spec, model.hbar(), mode_scales(bundle));
        evolver.emplace(*space, quadratic_hamiltonian(model, *space));
    }
    for (const auto &set : bundle.qmfs_sets) {
        QmfsResult r = is_qmfs(model, set, tol);
        report.invariants.push_back({"qmfs " + set_name(set), r.max_scaled_residual, tol,
                                     r.is_qmfs() ? "pass" : "fail", "Krylov test"});
        report.check_below("grid commutator " + set_name(set),
                           max_grid_commutator(model, set, t_max, grid) / model.hbar(), tol,
                           fmt::format("{}x{} grid on [0, {}]", grid, grid, num(t_max)));
        if (evolver) {
            std::vector<Eigen::MatrixXcd> ops;
            for (int r2 = 0; r2 < set.size(); r2++) {
                ops.push_back(space->linear_combination(set.S().row(r2).transpose()));
            }
            CommutatorResidual res = commutator_residual(*evolver, ops, o_grid);
            report.check_below("oracle commutator " + set_name(set), res.max_residual, 1e-8 * scale,
                               space->spec().describe());
            report.info("oracle guard " + set_name(set), res.guard.max_population, res.guard.describe());
        }
    }
    if (bundle.qmfs_sets.empty()) {
        report.info("known qmfs sets", 0.0, "model has none");
    }
}

void run_simulate(const json &cfg, Report &report, OutputDir &dir, int threads) {
    ModelBundle bundle = load_model(cfg);
    const LinearModel &model = bundle.model;
    const double dt = positive(get<double>(cfg, "integration", "dt"), "integration.dt");
    const double T = positive(get<double>(cfg, "integration", "T"), "integration.T");
    const auto master = get<uint64_t>(cfg, "seeds", "master");
    const long batch = get<long>(cfg, "seeds", "batch");
    const long stride = get<long>(cfg, "simulate", "stride");
    const double scale = cfg["tolerances"]["scale"].get<double>();
    if (batch < 1 || stride < 1) {
        throw InputError("simulate: seeds.batch and simulate.stride must be >= 1");
    }

    std::vector<MeasurementChannel> channels;
    for (const auto &c : cfg["channels"]) {
        if (!c.is_object()) {
            throw InputError("channels must be objects");
        }
        for (auto it = c.begin(); it != c.end(); ++it) {
            if (it.key() != "observable" && it.key() != "k" && it.key() != "eta") {
                throw InputError("unknown channel key '" + it.key() + "'");
            }
        }
        if (!c.contains("observable")) {
            throw InputError("channel needs an observable");
        }
        channels.push_back({observable_by_name(bundle, c["observable"]), c.value("k", 1.0), c.value("eta", 1.0)});
    }
    if (channels.empty()) {
        VectorXd s = bundle.qmfs_sets.empty() ? VectorXd::Unit(model.dim(), 0)
                                              : VectorXd(bundle.qmfs_sets[0].S().row(0).transpose());
        channels.push_back({s, 1.0, 1.0});
    }
    for (const auto &c : channels) {
        try {
            c.validate(model.dim());
        } catch (const std::invalid_argument &e) {
            throw InputError(e.what());
        }
    }

    std::optional<ForceDrive> drive;
    const json &dj = cfg["drive"];
    const std::string kind = get<std::string>(cfg, "drive", "kind");
    const double amplitude = get<double>(cfg, "drive", "amplitude");
    const double omega = dj["omega"].is_null() ? param_or(model_params(cfg), "omega", 1.0) : dj["omega"].get<double>();
    if (kind == "constant") {
        drive = ForceDrive::constant(model.force_couplings().at(0), amplitude);
    } else if (kind == "sinusoid") {
        drive = ForceDrive::sinusoid(model.force_couplings().at(0), amplitude, omega, get<double>(cfg, "drive", "phase"));
    } else if (kind != "none") {
        throw InputError("drive.kind must be none, constant or sinusoid");
    }

    GaussianState state0{VectorXd::Zero(model.dim()),
                         vacuum_covariance(model.n_modes(), model.hbar(), mode_scales(bundle))};
    const long n_steps = std::lround(T / dt);
    std::vector<MatrixXd> schedule = covariance_schedule(model, channels, state0.cov, dt, n_steps);

    std::vector<Trajectory> trajectories(batch);
    parallel_for(batch, threads, [&](long i) {
        EvolveOptions opt;
        opt.dt = dt;
        opt.T = T;
        opt.seed = derive_seed(master, static_cast<uint64_t>(i));
        opt.cov_stride = 0;
        trajectories[i] = evolve_conditional(model, state0, channels, drive, opt, schedule);
    });

    auto labels = labelled_observables(bundle);
    std::ofstream traj_csv = dir.open("trajectories.csv");
    traj_csv << "trajectory,seed,t";
    for (int i = 0; i < model.dim(); i++) {
        traj_csv << "," << labels[i].first;
    }
    for (size_t c = 0; c < channels.size(); c++) {
        traj_csv << ",dy" << c;
    }
    traj_csv << "\n";
    for (long i = 0; i < batch; i++) {
        const Trajectory &tr = trajectories[i];
        for (size_t n = 0; n < tr.times.size(); n++) {
            if (n % stride != 0 && n + 1 != tr.times.size()) {
                continue;
            }
            traj_csv << i << "," << tr.seed << "," << num(tr.times[n]);
            for (int k = 0; k < model.dim(); k++) {
                traj_csv << "," << num(tr.means[n](k));
            }
            for (const auto &rec : tr.records) {
                traj_csv << "," << num(rec[n]);
            }
            traj_csv << "\n";
        }
    }
    std::ofstream cov_csv = dir.open("covariance.csv");
    cov_csv << "t";
    for (int i = 0; i < model.dim(); i++) {
        for (int j = i; j < model.dim(); j++) {
            cov_csv << ",V" << i << j;
        }
    }
    cov_csv << "\n";
    for (size_t n = 0; n < schedule.size(); n++) {
        if (n % stride != 0 && n + 1 != schedule.size()) {
            continue;
        }
        cov_csv << num(n * dt);
        for (int i = 0; i < model.dim(); i++) {
            for (int j = i; j < model.dim(); j++) {
                cov_csv << "," << num(schedule[n](i, j));
            }
        }
        cov_csv << "\n";
    }

    const MatrixXd &Vf = schedule.back();
    report.check_true("final covariance physical", is_physical(Vf, model.Omega(), model.hbar()),
                      fmt::format("physicality margin {}", num(physicality_margin(Vf, model.Omega(), model.hbar()))));
    MatrixXd D = MatrixXd::Zero(model.dim(), model.dim());
    for (const auto &c : channels) {
        D += backaction_diffusion(model, c);
    }
    for (const auto &set : bundle.qmfs_sets) {
        bool measured = false;
        for (const auto &c : channels) {
            for (int r = 0; r < set.size(); r++) {
                measured = measured || (set.S().row(r).transpose() - c.s).cwiseAbs().maxCoeff() == 0.0;
            }
        }
        if (measured) {
            double leak = (set.S() * D * set.S().transpose()).cwiseAbs().maxCoeff();
            report.check_below("back action on " + set_name(set), leak, 1e-14 * scale);
        }
    }
    report.results["final_covariance_det"] = Vf.determinant();
    report.results["trajectories"] = batch;
}

void run_force(const json &cfg, Report &report, OutputDir &dir, int threads) {
    const std::string name = cfg["model"]["name"].get<std::string>();
    if (name != "pair" && name != "single") {
        throw InputError("force: model must be pair or single");
    }
    auto params = model_params(cfg);
    for (const auto &[key, value] : params) {
        if (key != "m" && key != "omega" && key != "hbar") {
            throw InputError("force: unknown model parameter '" + key + "'");
        }
    }
    const double m = param_or(params, "m", 1.0), omega = param_or(params, "omega", 1.0),
                 hbar = param_or(params, "hbar", 1.0);
    const double dt = positive(get<double>(cfg, "integration", "dt"), "integration.dt");
    const double T = positive(get<double>(cfg, "integration", "T"), "integration.T");
    const auto master = get<uint64_t>(cfg, "seeds", "master");
    const long batch = get<long>(cfg, "seeds", "batch");
    const double eta = get<double>(cfg, "force", "eta");
    const double F0 = get<double>(cfg, "force", "amplitude");
    const json &od = cfg["force"]["omega_drive"];
    const double omega_drive = od.is_null() ? omega : od.get<double>();
    std::vector<double> ks;
    try {
        ks = cfg["force"]["k"].get<std::vector<double>>();
    } catch (const json::exception &) {
        throw InputError("force.k must be a list of numbers");
    }
    if (ks.empty() || batch < 0) {
        throw InputError("force: need at least one k and batch >= 0");
    }

    struct Setup {
        ModelBundle bundle;
        VectorXd s;
    };
    auto setup = [&](bool pair) {
        ModelBundle b = pair ? oscillator_pair(m, omega, hbar) : single_oscillator(m, omega, hbar);
        VectorXd s = pair ? VectorXd(b.named_bases.at("qmfs").row(0).transpose()) : VectorXd::Unit(2, 0);
        return Setup{b, s};
    };
    Setup primary = [&] {
        try {
            return setup(name == "pair");
        } catch (const std::invalid_argument &e) {
            throw InputError(e.what());
        }
    }();
    Setup partner = setup(name != "pair");
    const long n_steps = std::lround(T / dt);

    std::ofstream csv = dir.open("force.csv");
    csv << "k,eta,model,predicted_std,partner_predicted_std,ratio_pair_over_single,mc_mean,mc_std,z_std,z_mean\n";
    json rows = json::array();
    for (double k : ks) {
        std::vector<MeasurementChannel> channels{{primary.s, k, eta}};
        std::vector<MeasurementChannel> partner_channels{{partner.s, k, eta}};
        const LinearModel &model = primary.bundle.model;
        MatrixXd V0 = vacuum_covariance(model.n_modes(), hbar, std::vector<double>(model.n_modes(), m * omega));
        MatrixXd V0p = vacuum_covariance(partner.bundle.model.n_modes(), hbar,
                                         std::vector<double>(partner.bundle.model.n_modes(), m * omega));
        ForceDrive tmpl = ForceDrive::sinusoid(model.force_couplings()[0], 1.0, omega_drive);
        ForceDrive tmpl_p = ForceDrive::sinusoid(partner.bundle.model.force_couplings()[0], 1.0, omega_drive);
        double predicted, predicted_p;
        try {
            channels[0].validate(model.dim());
            predicted = predicted_force_std(model, V0, channels, tmpl, dt, T);
            predicted_p = predicted_force_std(partner.bundle.model, V0p, partner_channels, tmpl_p, dt, T);
        } catch (const std::invalid_argument &e) {
            throw InputError(e.what());
        }
        double ratio = name == "pair" ? predicted / predicted_p : predicted_p / predicted;

        double mc_mean = NAN, mc_std = NAN, z_std = NAN, z_mean = NAN;
        if (batch >= 2) {
            std::vector<MatrixXd> schedule = covariance_schedule(model, channels, V0, dt, n_steps);
            std::optional<ForceDrive> truth;
            if (F0 != 0.0) {
                truth = ForceDrive::sinusoid(model.force_couplings()[0], F0, omega_drive);
            }
            std::vector<double> estimates(batch);
            parallel_for(batch, threads, [&](long i) {
                EvolveOptions opt;
                opt.dt = dt;
                opt.T = T;
                opt.seed = derive_seed(master, static_cast<uint64_t>(i));
                opt.cov_stride = 0;
                Trajectory tr =
                    evolve_conditional(model, GaussianState{VectorXd::Zero(model.dim()), V0}, channels, truth, opt,
                                       schedule);
                estimates[i] = estimate_force(tr, model, channels, tmpl, &schedule).amplitude;
            });
            double sum = 0.0;
            for (double e : estimates) {
                sum += e;
            }
            mc_mean = sum / batch;
            double ss = 0.0;
            for (double e : estimates) {
                ss += (e - mc_mean) * (e - mc_mean);
            }
            mc_std = std::sqrt(ss / (batch - 1));
            z_std = (mc_std - predicted) / (predicted / std::sqrt(2.0 * (batch - 1)));
            z_mean = (mc_mean - F0) / (predicted / std::sqrt(static_cast<double>(batch)));
            std::string tag = fmt::format("{} k={}", name, num(k));
            report.check_below("mc std consistent " + tag, std::abs(z_std), 3.0,
                               fmt::format("{} seeds, |z| of sample std", batch));
            report.check_below("mc mean unbiased " + tag, std::abs(z_mean), 3.0,
                               fmt::format("{} seeds, |z| of sample mean", batch));
        }
        report.info(fmt::format("std ratio pair/single k={}", num(k)), ratio,
                    ratio < 1.0 ? "pair better" : "single better");
        csv << num(k) << "," << num(eta) << "," << name << "," << num(predicted) << "," << num(predicted_p) << ","
            << num(ratio) << "," << num(mc_mean) << "," << num(mc_std) << "," << num(z_std) << "," << num(z_mean)
            << "\n";
        rows.push_back({{"k", k}, {"predicted_std", predicted}, {"ratio_pair_over_single", ratio}});
    }
    report.results["force"] = rows;
}

PolyKoopman load_koopman(const json &cfg) {
    const json &file = cfg["koopman"]["model_file"];
    if (!file.is_null()) {
        std::ifstream in(file.get<std::string>());
        if (!in) {
            throw InputError("cannot read koopman model file '" + file.get<std::string>() + "'");
        }
        try {
            return poly_koopman_from_json(json::parse(in));
        } catch (const json::exception &e) {
            throw InputError(std::string("koopman model file: ") + e.what());
        } catch (const std::invalid_argument &e) {
            throw InputError(std::string("koopman model file: ") + e.what());
        }
    }
    auto params = model_params(cfg);
    for (const auto &[key, value] : params) {
        if (key != "m" && key != "omega" && key != "eps" && key != "hbar") {
            throw InputError("koopman: unknown model parameter '" + key + "'");
        }
    }
    const std::string name = cfg["model"]["name"].get<std::string>();
    const double m = param_or(params, "m", 1.0), omega = param_or(params, "omega", 1.0),
                 hbar = param_or(params, "hbar", 1.0);
    try {
        if (name == "harmonic") {
            return PolyKoopman::harmonic(m, omega, hbar);
        }
        if (name == "quadratic-drift") {
            return PolyKoopman::quadratic_drift(m, omega, param_or(params, "eps", 0.1), hbar);
        }
    } catch (const std::invalid_argument &e) {
        throw InputError(e.what());
    }
    throw InputError("koopman: model must be harmonic or quadratic-drift (or set koopman.model_file)");
}

std::complex<double> complex_from(const json &cfg, const std::string &key) {
    const json &v = cfg["koopman"][key];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw InputError("koopman." + key + " must be [re, im]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

void run_koopman(const json &cfg, Report &report, OutputDir &dir, int) {
    PolyKoopman pk = load_koopman(cfg);
    try {
        pk.validate();
    } catch (const std::invalid_argument &e) {
        throw InputError(e.what());
    }
    if (pk.is_time_dependent()) {
        throw InputError("koopman: time-dependent models are not supported by this command");
    }
    const double scale = cfg["tolerances"]["scale"].get<double>();
    const auto levels = cfg["koopman"]["levels"].get<std::vector<int>>();
    const int shell = get<int>(cfg, "koopman", "shell");
    const double t_max = positive(get<double>(cfg, "koopman", "t_max"), "koopman.t_max");
    const int n_times = get<int>(cfg, "koopman", "n_times");
    if (levels.empty() || n_times < 2) {
        throw InputError("koopman: need at least one truncation and two times");
    }
    std::vector<double> times;
    for (int k = 0; k < n_times; k++) {
        times.push_back(t_max * k / (n_times - 1));
    }

    std::ofstream csv = dir.open("koopman_residuals.csv");
    csv << "levels,shell,residual_over_hbar,worst_t,worst_t_prime,guard_population,trusted\n";
    std::vector<double> residuals;
    for (int N : levels) {
        TruncationSpec spec;
        spec.n_levels = N;
        spec.test_shell = shell;
        try {
            spec.validate(2 * pk.M);
        } catch (const std::exception &e) {
            throw InputError(std::string("koopman: ") + e.what());
        }
        FockSpace space = koopman_space(pk, spec);
        HeisenbergEvolver evolver(space, build_koopman_hamiltonian(pk, space));
        std::vector<Eigen::MatrixXcd> ops;
        for (int j = 0; j < pk.M; j++) {
            ops.push_back(space.q(j));
            ops.push_back(space.p(pk.M + j));
        }
        CommutatorResidual r = commutator_residual(evolver, ops, times);
        residuals.push_back(r.max_residual);
        csv << N << "," << shell << "," << num(r.max_residual) << "," << num(r.worst_t) << "," << num(r.worst_tp)
            << "," << num(r.guard.max_population) << "," << (r.guard.trusted ? 1 : 0) << "\n";
        report.info(fmt::format("guard population N={}", N), r.guard.max_population, r.guard.describe());
    }
    if (levels.size() > 1) {
        report.check_true("residual decreases with N", strictly_decreasing(residuals));
    }
    report.check_below(fmt::format("commutator residual N={}", levels.back()), residuals.back(),
                       get<double>(cfg, "koopman", "residual_tolerance") * scale, "{Q, Pi} on the test shell");

    if (pk.M == 1) {
        TruncationSpec spec;
        spec.n_levels = get<int>(cfg, "koopman", "expectation_levels");
        ExpectationComparison cmp = compare_coherent_expectation(
            pk, complex_from(cfg, "alpha"), complex_from(cfg, "beta"), times, spec,
            get<double>(cfg, "koopman", "expectation_tolerance_scale") * scale);
        std::ofstream ecsv = dir.open("koopman_expectation.csv");
        ecsv << "t,classical_mean_Q,oracle_mean_Q\n";
        for (size_t k = 0; k < times.size(); k++) {
            ecsv << num(times[k]) << "," << num(cmp.classical[k]) << "," << num(cmp.quantum[k]) << "\n";
        }
        report.check_below("classical mean matches oracle", cmp.max_abs_diff, cmp.tolerance,
                           fmt::format("tolerance {} x Var Q0 = {}", num(cmp.tolerance / cmp.var_q), num(cmp.var_q)));
        report.info("escaped quadrature weight", cmp.escaped_weight);
        report.info("expectation guard population", cmp.guard.max_population, cmp.guard.describe());
    } else {
        report.info("expectation comparison", 0.0, "skipped: single-pair models only");
    }
}

void run_spin(const json &cfg, Report &report, OutputDir &dir, int) {
    SpinSweepConfig sc;
    try {
        sc.J0 = cfg["spin"]["J0"].get<std::vector<double>>();
    } catch (const json::exception &) {
        throw InputError("spin.J0 must be a list of numbers");
    }
    sc.gamma_B0 = get<double>(cfg, "spin", "gamma_B0");
    sc.hbar = get<double>(cfg, "spin", "hbar");
    sc.excitation = get<int>(cfg, "spin", "excitation");
    sc.displacement = get<double>(cfg, "spin", "displacement");
    sc.n_time_pairs = get<int>(cfg, "spin", "n_time_pairs");
    sc.n_times = get<int>(cfg, "spin", "n_times");
    sc.seed = get<uint64_t>(cfg, "seeds", "master");
    const double scale = cfg["tolerances"]["scale"].get<double>();
    std::vector<SpinSweepRow> rows;
    try {
        rows = spin_sweep(sc);
    } catch (const std::invalid_argument &e) {
        throw InputError(e.what());
    } catch (const std::length_error &e) {
        throw InputError(e.what());
    }
    std::ofstream csv = dir.open("spin_sweep.csv");
    csv << "J0,residual_norm,low_excitation_norm,hp_deviation\n";
    double worst = 0.0;
    std::vector<double> low, hp;
    bool bound = true;
    for (const auto &r : rows) {
        csv << num(r.J0) << "," << num(r.residual_norm) << "," << num(r.low_excitation_norm) << ","
            << num(r.hp_deviation) << "\n";
        worst = std::max(worst, r.residual_norm);
        low.push_back(r.low_excitation_norm);
        hp.push_back(r.hp_deviation);
        bound = bound && r.low_excitation_norm <= 2.0 * sc.hbar * sc.excitation / r.J0 * (1 + 1e-12);
    }
    report.check_below("commutator identity residual", worst, get<double>(cfg, "spin", "identity_tolerance") * scale);
    report.check_true("low-excitation norm within 2 hbar n / J0", bound);
    if (rows.size() > 1) {
        report.check_true("low-excitation norm decreases with J0", strictly_decreasing(low));
        report.check_true("HP deviation decreases with J0", strictly_decreasing(hp));
    }
}

void run_circuit(const json &cfg, Report &report, OutputDir &dir, int) {
    const json &file = cfg["circuit"]["file"];
    const json &synth = cfg["circuit"]["synthesize"];
    const bool verify = get<bool>(cfg, "circuit", "verify");
    if (file.is_null() && synth.is_null()) {
        throw InputError("circuit: give --file and/or --synthesize");
    }
    auto read_file = [](const std::string &path) {
        std::ifstream in(path);
        if (!in) {
            throw InputError("cannot read '" + path + "'");
        }
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    if (!file.is_null()) {
        ReversibleCircuit c(1);
        try {
            c = parse_circuit(read_file(file.get<std::string>()));
        } catch (const std::invalid_argument &e) {
            throw InputError(e.what());
        }
        std::vector<BoolFunc> images;
        std::vector<std::string> names;
        for (int j = 0; j < c.n_bits(); j++) {
            images.push_back(propagate_z(c, j));
            names.push_back(fmt::format("z{}", j));
        }
        std::ofstream csv = dir.open("circuit_images.csv");
        write_truth_table_csv(csv, images, names);
        report.results["bits"] = c.n_bits();
        report.results["gates"] = c.gates().size();
        if (verify) {
            if (c.n_bits() > 8) {
                throw InputError("circuit --verify supports at most 8 bits");
            }
            report.check_below("dense oracle deviation", static_cast<double>(dense_oracle_check(c)), 0.5,
                               "exact integer arithmetic");
        }
    }
    if (!synth.is_null()) {
        std::vector<BoolFunc> targets;
        std::vector<std::string> names;
        try {
            std::istringstream in(read_file(synth.get<std::string>()));
            targets = read_truth_table_csv(in, &names);
        } catch (const std::invalid_argument &e) {
            throw InputError(e.what());
        }
        Synthesis s = build_classical_function(targets);
        std::ofstream out = dir.open("synthesized_circuit.txt");
        out << format_circuit(s.circuit);
        bool ok = true;
        for (size_t k = 0; k < targets.size(); k++) {
            ok = ok && restrict_to_inputs(propagate_z(s.circuit, s.output_bits[k]), s.n_inputs) == targets[k];
        }
        bool clean = true;
        for (int a = 0; a < s.n_ancillas; a++) {
            clean = clean && restrict_to_inputs(propagate_z(s.circuit, s.circuit.n_bits() - 1 - a), s.n_inputs) ==
                                 BoolFunc::constant(s.n_inputs, false);
        }
        report.check_true("synthesis round trip", ok, fmt::format("{} targets", targets.size()));
        report.check_true("ancillas returned to zero", clean, fmt::format("{} ancillas", s.n_ancillas));
        if (s.circuit.n_bits() <= 8) {
            report.check_below("synthesized dense oracle deviation", static_cast<double>(dense_oracle_check(s.circuit)),
                               0.5);
        }
        json outputs = json::object();
        for (size_t k = 0; k < targets.size(); k++) {
            outputs[names[k]] = s.output_bits[k];
        }
        report.results["synthesis"] = {{"bits", s.circuit.n_bits()},
                                       {"gates", s.circuit.gates().size()},
                                       {"ancillas", s.n_ancillas},
                                       {"output_bits", outputs}};
    }
}

using Runner = void (*)(const json &, Report &, OutputDir &, int);

struct Command {
    std::string name;
    std::string help;
    Runner run;
};

const std::vector<Command> &commands() {
    static const std::vector<Command> list{
        {"check", "QMFS verdicts and oracle commutator residuals for a built-in model", run_check},
        {"simulate", "seeded conditional-Gaussian trajectories under continuous measurement", run_simulate},
        {"force", "posterior force-amplitude std, analytic and Monte Carlo", run_force},
        {"koopman", "nonlinear Koopman pair: oracle residuals and classical flow comparison", run_koopman},
        {"spin", "exact spin-pair sweep over J0", run_spin},
        {"circuit", "Z images of a reversible circuit, dense verification, synthesis", run_circuit},
    };
    return list;
}

json load_config_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot read config '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error &e) {
        throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
}

}  // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"qmfs: experiments on quantum-mechanics-free subsystems"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string(kToolVersion));

    struct Flags {
        std::string config, out = "qmfs_out", model, model_file, file, synthesize;
        std::vector<std::string> params;
        uint64_t seed = 0;
        long batch = 0, stride = 0;
        double tol_scale = 1.0, dt = 0.0, T = 0.0, eta = 0.0, amplitude = 0.0;
        int threads = 1, oracle_levels = 0, shell = 0;
        std::vector<double> k, J0;
        std::vector<int> levels;
        bool verify = false;
    } f;

    std::map<std::string, CLI::App *> subs;
    std::map<std::string, std::map<std::string, CLI::Option *>> opts;
    for (const auto &cmd : commands()) {
        CLI::App *sub = app.add_subcommand(cmd.name, cmd.help);
        subs[cmd.name] = sub;
        auto &o = opts[cmd.name];
        o["config"] = sub->add_option("--config", f.config, "JSON config file");
        o["out"] = sub->add_option("--out", f.out, "output directory")->capture_default_str();
        o["seed"] = sub->add_option("--seed", f.seed, "master seed");
        o["batch"] = sub->add_option("--batch", f.batch, "number of seeded trajectories");
        o["tol-scale"] = sub->add_option("--tol-scale", f.tol_scale, "multiplier on every tolerance");
        o["threads"] = sub->add_option("--threads", f.threads, "worker threads for batches")->capture_default_str();
        const std::string &n = cmd.name;
        if (n == "check" || n == "simulate" || n == "force" || n == "koopman") {
            o["model"] = sub->add_option("--model", f.model, "model name");
            o["param"] = sub->add_option("--param", f.params, "model parameter key=value (repeatable)");
        }
        if (n == "simulate" || n == "force") {
            o["dt"] = sub->add_option("--dt", f.dt, "time step");
            o["T"] = sub->add_option("--T", f.T, "duration");
        }
        if (n == "check") {
            o["oracle-levels"] = sub->add_option("--oracle-levels", f.oracle_levels, "Fock levels per mode (0: off)");
        }
        if (n == "simulate") {
            o["stride"] = sub->add_option("--stride", f.stride, "write every n-th step");
        }
        if (n == "force") {
            o["k"] = sub->add_option("--k", f.k, "measurement strengths");
            o["eta"] = sub->add_option("--eta", f.eta, "detection efficiency");
            o["amplitude"] = sub->add_option("--amplitude", f.amplitude, "true force amplitude");
        }
        if (n == "koopman") {
            o["model-file"] = sub->add_option("--model-file", f.model_file, "PolyKoopman JSON file");
            o["levels"] = sub->add_option("--levels", f.levels, "Fock levels per mode, one run each");
            o["shell"] = sub->add_option("--shell", f.shell, "test shell");
        }
        if (n == "spin") {
            o["J0"] = sub->add_option("--J0", f.J0, "spin sizes");
        }
        if (n == "circuit") {
            o["file"] = sub->add_option("--file", f.file, "circuit text file");
            o["verify"] = sub->add_flag("--verify", f.verify, "dense-matrix verification");
            o["synthesize"] = sub->add_option("--synthesize", f.synthesize, "truth-table CSV to synthesize");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    std::string name;
    for (const auto &[n, sub] : subs) {
        if (sub->parsed()) {
            name = n;
        }
    }
    const Command &cmd = *std::find_if(commands().begin(), commands().end(), [&](const Command &c) { return c.name == name; });
    auto given = [&](const std::string &key) {
        auto it = opts[name].find(key);
        return it != opts[name].end() && it->second->count() > 0;
    };

    json cfg;
    try {
        cfg = experiment_defaults(name);
        if (given("config")) {
            json file = load_config_file(f.config);
            if (file.contains("experiment")) {
                if (file["experiment"] != name) {
                    throw InputError("config is for experiment '" + file["experiment"].dump() + "', not '" + name + "'");
                }
                file.erase("experiment");
            }
            merge_config(cfg, file, "");
        }
        if (given("seed")) cfg["seeds"]["master"] = f.seed;
        if (given("batch")) cfg["seeds"]["batch"] = f.batch;
        if (given("tol-scale")) cfg["tolerances"]["scale"] = f.tol_scale;
        if (given("model")) cfg["model"]["name"] = f.model;
        if (given("param")) {
            for (const auto &kv : f.params) {
                auto eq = kv.find('=');
                if (eq == std::string::npos) {
                    throw InputError("--param expects key=value, got '" + kv + "'");
                }
                try {
                    size_t used = 0;
                    std::string value = kv.substr(eq + 1);
                    double v = std::stod(value, &used);
                    if (used != value.size()) {
                        throw std::invalid_argument(value);
                    }
                    cfg["model"]["params"][kv.substr(0, eq)] = v;
                } catch (const std::logic_error &) {
                    throw InputError("--param value is not a number: '" + kv + "'");
                }
            }
        }
        if (given("dt")) cfg["integration"]["dt"] = f.dt;
        if (given("T")) cfg["integration"]["T"] = f.T;
        if (given("oracle-levels")) cfg["check"]["oracle_levels"] = f.oracle_levels;
        if (given("stride")) cfg["simulate"]["stride"] = f.stride;
        if (given("k")) cfg["force"]["k"] = f.k;
        if (given("eta")) cfg["force"]["eta"] = f.eta;
        if (given("amplitude")) cfg["force"]["amplitude"] = f.amplitude;
        if (given("model-file")) cfg["koopman"]["model_file"] = f.model_file;
        if (given("levels")) cfg["koopman"]["levels"] = f.levels;
        if (given("shell")) cfg["koopman"]["shell"] = f.shell;
        if (given("J0")) cfg["spin"]["J0"] = f.J0;
        if (given("file")) cfg["circuit"]["file"] = f.file;
        if (given("verify")) cfg["circuit"]["verify"] = f.verify;
        if (given("synthesize")) cfg["circuit"]["synthesize"] = f.synthesize;
        positive(cfg["tolerances"]["scale"].get<double>(), "tolerances.scale");
        if (f.threads < 1) {
            throw InputError("--threads must be >= 1");
        }
    } catch (const InputError &e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception &e) {
        err << "error: invalid config value: " << e.what() << "\n";
        return 2;
    }

    Report report;
    OutputDir dir(f.out, report);
    std::string abort_reason;
    try {
        cmd.run(cfg, report, dir, f.threads);
    } catch (const InputError &e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception &e) {
        err << "error: invalid config value: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        abort_reason = e.what();
        report.invariants.push_back({"computation completed", 0.0, 0.0, "fail", abort_reason});
    }

    json summary;
    summary["tool"] = "qmfs";
    summary["version"] = kToolVersion;
    summary["experiment"] = name;
    summary["config"] = cfg;
    summary["config_sha256"] = sha256_hex(cfg.dump());
    summary["seed_derivation"] =
        "trajectory i uses derive_seed(seeds.master, i); Wiener increment of channel c at step n is "
        "counter_normal(trajectory seed, c, n)";
    summary["tolerance_scale"] = cfg["tolerances"]["scale"];
    json invariants = json::array();
    json tolerances = json::object();
    for (const auto &inv : report.invariants) {
        invariants.push_back({{"name", inv.name},
                              {"value", inv.value},
                              {"tolerance", inv.tolerance},
                              {"status", inv.status},
                              {"detail", inv.detail}});
        if (inv.status != "info") {
            tolerances[inv.name] = inv.tolerance;
        }
        out << fmt::format("[{}] {}: {}", inv.status, inv.name, num(inv.value));
        if (inv.status != "info" && inv.tolerance != 0.0) {
            out << fmt::format(" (tolerance {})", num(inv.tolerance));
        }
        if (!inv.detail.empty()) {
            out << " " << inv.detail;
        }
        out << "\n";
    }
    summary["invariants"] = invariants;
    summary["tolerances"] = tolerances;
    summary["results"] = report.results;
    summary["artifacts"] = report.artifacts;
    summary["status"] = report.passed() ? "pass" : "fail";
    try {
        std::ofstream s = dir.open("summary.json");
        s << summary.dump(2) << "\n";
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    out << (report.passed() ? "PASS" : "FAIL") << " " << name << " -> " << (dir.path() / "summary.json").string()
        << "\n";
    return report.passed() ? 0 : 1;
}

}  // namespace qmfs
