#include "qdarwin/branch_model.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qdarwin/errors.hpp"
#include "qdarwin/rng.hpp"

namespace qdarwin {

BranchState::BranchState(std::vector<Complex> amplitudes, std::vector<Vector> system_states,
                         std::vector<std::vector<QubitKet>> env_states)
    : amplitudes_(std::move(amplitudes)),
      system_states_(std::move(system_states)),
      env_states_(std::move(env_states)) {
    const auto n = amplitudes_.size();
    if (n == 0) throw InvalidArgument("branch state needs at least one branch");
    if (system_states_.size() != n || env_states_.size() != n)
        throw InvalidArgument("branch count mismatch between amplitudes, system and environment kets");

    double norm2 = 0.0;
    for (auto a : amplitudes_) norm2 += std::norm(a);
    if (std::abs(std::sqrt(norm2) - 1.0) > 1e-9)
        throw InvalidArgument("branch amplitudes are not normalized");
    const double scale = 1.0 / std::sqrt(norm2);
    for (auto& a : amplitudes_) a *= scale;

    const auto dim = system_states_.front().size();
    for (std::size_t k = 0; k < n; ++k) {
        if (system_states_[k].size() != dim) throw InvalidArgument("system kets differ in dimension");
        for (std::size_t l = 0; l <= k; ++l) {
            const Complex ip = system_states_[l].dot(system_states_[k]);
            const double expected = (k == l) ? 1.0 : 0.0;
            if (std::abs(ip - expected) > 1e-10)
                throw InvalidArgument("system pointer states are not orthonormal");
        }
    }

    n_env_ = env_states_.front().size();
    for (auto& branch : env_states_) {
        if (branch.size() != n_env_) throw InvalidArgument("branches differ in environment size");
        for (auto& ket : branch) {
            const double nrm = ket.norm();
            if (std::abs(nrm - 1.0) > 1e-9) throw InvalidArgument("environment ket is not normalized");
            ket /= nrm;
        }
    }
}

std::size_t BranchState::system_dim() const noexcept {
    return static_cast<std::size_t>(system_states_.front().size());
}

// ---------------------------------------------------------------------------

void CouplingSet::validate() const {
    if (g.empty()) throw InvalidArgument("coupling set is empty");
    for (double gk : g) {
        if (!(gk > 0.0 && gk <= 1.0)) throw InvalidArgument("coupling " + std::to_string(gk) + " outside (0, 1]");
    }
    if (!std::isfinite(t)) throw InvalidArgument("evolution time is not finite");
}

double CouplingSet::mean_coupling() const {
    if (g.empty()) throw InvalidArgument("coupling set is empty");
    return std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
}

double CouplingSet::action() const { return t * mean_coupling(); }

CouplingSet CouplingSet::with_action(double a) const {
    CouplingSet out = *this;
    out.t = a / mean_coupling();
    return out;
}

Matrix Observable::matrix() const { return std::cos(mu) * pauli::z() + std::sin(mu) * pauli::x(); }

std::pair<Eigen::Vector2cd, Eigen::Vector2cd> Observable::eigenstates() const {
    const double c = std::cos(mu / 2.0);
    const double s = std::sin(mu / 2.0);
    return {Eigen::Vector2cd(c, s), Eigen::Vector2cd(-s, c)};
}

CouplingSet sample_couplings(std::size_t n_env, std::uint64_t seed) {
    if (n_env == 0) throw InvalidArgument("sample_couplings needs n_env >= 1");
    Rng rng(seed);
    CouplingSet out;
    out.g.resize(n_env);
    for (auto& gk : out.g) gk = rng.uniform_open_closed();
    return out;
}

Eigen::Vector2cd plus_state() {
    const double r = 1.0 / std::sqrt(2.0);
    return Eigen::Vector2cd(r, r);
}

BranchState ising_evolve(const CouplingSet& couplings, const Eigen::Vector2cd& initial_system) {
    couplings.validate();
    if (std::abs(initial_system.norm() - 1.0) > 1e-9)
        throw InvalidArgument("initial system state is not normalized");

    // exp(-i theta sigma_y)|0> = cos(theta)|0> + sin(theta)|1>; the sigma_z
    // eigenvalue of the branch sets the sign of theta.
    std::vector<Complex> amps;
    std::vector<Vector> sys;
    std::vector<std::vector<QubitKet>> env;
    for (int branch = 0; branch < 2; ++branch) {
        const Complex amp = initial_system(branch);
        if (std::abs(amp) == 0.0) continue;
        const double sign = branch == 0 ? 1.0 : -1.0;
        std::vector<QubitKet> kets;
        kets.reserve(couplings.g.size());
        for (double gk : couplings.g) {
            const double theta = gk * couplings.t;
            kets.emplace_back(std::cos(theta), sign * std::sin(theta));
        }
        Vector s = Vector::Zero(2);
        s(branch) = 1.0;
        amps.push_back(amp);
        sys.push_back(std::move(s));
        env.push_back(std::move(kets));
    }
    return BranchState(std::move(amps), std::move(sys), std::move(env));
}

Complex decoherence_factor(const BranchState& state, const SubsystemSet& subset,
                           std::pair<std::size_t, std::size_t> branch_pair) {
    const auto [k, l] = branch_pair;
    if (k == l) throw InvalidArgument("decoherence_factor needs two distinct branches");
    if (k >= state.n_branches() || l >= state.n_branches())
        throw InvalidArgument("branch index out of range");
    subset.check_within(state.n_env());
    Complex factor = 1.0;
    for (auto j : subset) factor *= state.env_overlap(k, l, j);
    return factor;
}

PureState to_dense(const BranchState& state, std::size_t max_subsystems) {
    const auto n_sub = state.n_env() + 1;
    if (n_sub > max_subsystems)
        throw NumericalGuard("dense expansion needs " + std::to_string(n_sub) +
                             " subsystems, limit is " + std::to_string(max_subsystems));
    std::vector<std::size_t> dims(n_sub, 2);
    dims[0] = state.system_dim();
    const auto env_dim = std::size_t{1} << state.n_env();
    Vector total = Vector::Zero(static_cast<Eigen::Index>(state.system_dim() * env_dim));
    for (std::size_t k = 0; k < state.n_branches(); ++k) {
        Vector record = Vector::Ones(1);
        for (std::size_t j = 0; j < state.n_env(); ++j) {
            const QubitKet& e = state.env_ket(k, j);
            Vector next(record.size() * 2);
            for (Eigen::Index i = 0; i < record.size(); ++i) {
                next(2 * i) = record(i) * e(0);
                next(2 * i + 1) = record(i) * e(1);
            }
            record = std::move(next);
        }
        const Vector& s = state.system_state(k);
        for (Eigen::Index a = 0; a < s.size(); ++a)
            total.segment(a * record.size(), record.size()) += state.amplitudes()[k] * s(a) * record;
    }
    return PureState(std::move(dims), std::move(total));
}

DensityOperator system_density(const BranchState& state) {
    const auto n = state.n_branches();
    const auto d = static_cast<Eigen::Index>(state.system_dim());
    Matrix rho = Matrix::Zero(d, d);
    const auto all = SubsystemSet::range(0, state.n_env());
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < n; ++l) {
            // coefficient of |s_k><s_l| carries <eps_l|eps_k>
            const Complex env = (k == l) ? Complex(1.0) : decoherence_factor(state, all, {l, k});
            rho += state.amplitudes()[k] * std::conj(state.amplitudes()[l]) * env *
                   state.system_state(k) * state.system_state(l).adjoint();
        }
    }
    return DensityOperator({state.system_dim()}, std::move(rho));
}

namespace {

// exp(-i theta sigma_z (x) sigma_y) = cos(theta) 1 - i sin(theta) sigma_z (x) sigma_y
Matrix ising_pair_unitary(double theta) {
    const Matrix zy = Eigen::kroneckerProduct(pauli::z(), pauli::y());
    return std::cos(theta) * Matrix::Identity(4, 4) - Complex(0.0, std::sin(theta)) * zy;
}

PureState dense_ising_state(const CouplingSet& couplings, const Eigen::Vector2cd& initial_system) {
    const auto n = couplings.g.size();
    std::vector<PureState> parts;
    parts.emplace_back(std::vector<std::size_t>{2}, Vector(initial_system));
    for (std::size_t j = 0; j < n; ++j) parts.push_back(PureState::basis({2}, 0));
    PureState psi = tensor_product(parts);
    for (std::size_t j = 0; j < n; ++j)
        psi = apply_unitary(psi, ising_pair_unitary(couplings.g[j] * couplings.t), SubsystemSet{0, j + 1});
    return psi;
}

}  // namespace

SieveResult predictability_sieve(const CouplingSet& couplings, std::span<const double> mu_grid,
                                 std::span<const double> t_grid, SieveBackend backend) {
    if (mu_grid.empty() || t_grid.empty()) throw InvalidArgument("predictability_sieve needs nonempty grids");
    CouplingSet c = couplings;
    c.t = 0.0;
    c.validate();

    SieveResult result;
    result.times.assign(t_grid.begin(), t_grid.end());
    for (double mu : mu_grid) {
        const auto initial = Observable{mu}.eigenstates().first;
        SieveTrajectory traj;
        traj.mu = mu;
        for (double t : t_grid) {
            c.t = t;
            double h = 0.0;
            if (backend == SieveBackend::branch) {
                h = von_neumann_entropy(system_density(ising_evolve(c, initial)));
            } else {
                h = entanglement_entropy(dense_ising_state(c, initial), SubsystemSet{0});
            }
            traj.entropy.push_back(h);
        }
        traj.score = std::accumulate(traj.entropy.begin(), traj.entropy.end(), 0.0) /
                     static_cast<double>(traj.entropy.size());
        result.trajectories.push_back(std::move(traj));
    }
    result.ranking.resize(mu_grid.size());
    std::iota(result.ranking.begin(), result.ranking.end(), std::size_t{0});
    std::stable_sort(result.ranking.begin(), result.ranking.end(), [&](auto a, auto b) {
        return result.trajectories[a].score < result.trajectories[b].score;
    });
    return result;
}

}  // namespace qdarwin
