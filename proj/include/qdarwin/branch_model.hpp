#pragma once

// Branching states sum_k psi_k |s_k> |e_k^(1)> ... |e_k^(N)>, stored per
// environment qubit so that every reduced quantity can be assembled from
// pairwise single-qubit overlaps in O(n^2 N) time.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qdarwin/quantum_core.hpp"

namespace qdarwin {

using QubitKet = Eigen::Vector2cd;

class BranchState {
public:
    /// `env_states[k][j]` is branch k's ket for environment qubit j.
    /// Amplitudes must be normalized (1e-9), system kets orthonormal
    /// (1e-10) and every environment ket normalized (1e-9); amplitudes and
    /// environment kets are renormalized exactly after the checks.
    BranchState(std::vector<Complex> amplitudes, std::vector<Vector> system_states,
                std::vector<std::vector<QubitKet>> env_states);

    std::size_t n_branches() const noexcept { return amplitudes_.size(); }
    std::size_t n_env() const noexcept { return n_env_; }
    std::size_t system_dim() const noexcept;

    const std::vector<Complex>& amplitudes() const noexcept { return amplitudes_; }
    const Vector& system_state(std::size_t k) const { return system_states_.at(k); }
    const QubitKet& env_ket(std::size_t k, std::size_t j) const { return env_states_.at(k).at(j); }

    /// <e_k^(j) | e_l^(j)>
    Complex env_overlap(std::size_t k, std::size_t l, std::size_t j) const {
        return env_ket(k, j).dot(env_ket(l, j));
    }

private:
    std::vector<Complex> amplitudes_;
    std::vector<Vector> system_states_;
    std::vector<std::vector<QubitKet>> env_states_;
    std::size_t n_env_ = 0;
};

/// Couplings g_k of H = sum_k g_k sigma_z^S (x) sigma_y^(k) and the
/// evolution time t.
struct CouplingSet {
    std::vector<double> g;
    double t = 0.0;

    /// Throws InvalidArgument unless every g_k lies in (0, 1] and t is finite.
    void validate() const;

    double mean_coupling() const;

    /// a = t * mean(g)
    double action() const;

    /// Same couplings, time chosen so that action() == a.
    CouplingSet with_action(double a) const;
};

/// sigma(mu) = cos(mu) sigma_z + sin(mu) sigma_x, mu in [0, pi/2].
struct Observable {
    double mu = 0.0;

    Matrix matrix() const;

    /// Eigenvectors for eigenvalues +1 and -1, in that order.
    std::pair<Eigen::Vector2cd, Eigen::Vector2cd> eigenstates() const;
};

/// g_k uniform on (0, 1], deterministic per seed; t = 0.
CouplingSet sample_couplings(std::size_t n_env, std::uint64_t seed);

/// Evolves initial_system (x) |0...0> under the Ising coupling. Branches
/// follow the sigma_z eigenstates; a branch with zero amplitude is dropped,
/// so a pointer-state input yields a single-branch product state.
BranchState ising_evolve(const CouplingSet& couplings, const Eigen::Vector2cd& initial_system);

/// (|0> + |1>)/sqrt(2)
Eigen::Vector2cd plus_state();

/// prod_{j in subset} <e_k^(j) | e_l^(j)> over environment qubits.
Complex decoherence_factor(const BranchState& state, const SubsystemSet& subset,
                           std::pair<std::size_t, std::size_t> branch_pair);

/// Literal expansion to a dense state. Subsystem 0 is the system, subsystem
/// j+1 is environment qubit j.
PureState to_dense(const BranchState& state, std::size_t max_subsystems = kDenseSubsystemLimit);

/// Reduced state of the system, assembled from branch overlaps.
DensityOperator system_density(const BranchState& state);

enum class SieveBackend { branch, dense };

struct SieveTrajectory {
    double mu = 0.0;
    std::vector<double> entropy;  ///< H_S in bits at each time of the grid
    double score = 0.0;           ///< mean of `entropy` over the grid
};

struct SieveResult {
    std::vector<double> times;
    std::vector<SieveTrajectory> trajectories;  ///< in candidate order
    std::vector<std::size_t> ranking;           ///< candidate indices, ascending score
};

/// Starts S in the +1 eigenstate of sigma(mu) for each candidate, evolves
/// with the given couplings over t_grid (couplings.t is ignored) and ranks
/// candidates by the entropy they produce.
SieveResult predictability_sieve(const CouplingSet& couplings, std::span<const double> mu_grid,
                                 std::span<const double> t_grid,
                                 SieveBackend backend = SieveBackend::branch);

}  // namespace qdarwin
