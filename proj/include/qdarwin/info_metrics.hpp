#pragma once

// Information diagnostics of branching states: mutual information between
// the system and environment fragments, partial-information curves,
// redundancy, and observable-resolved (Shannon) information.
//
// Von Neumann quantities go through a Gram-matrix route: with kept-part
// branch vectors K_k and discarded-part overlaps, the reduced state is
// V A V^dagger with A_kl = psi_k psi_l^* <R_l|R_k>, and its nonzero spectrum
// equals that of G^(1/2) A G^(1/2) with G_kl = <K_k|K_l>. Everything is an
// n x n problem regardless of the environment size.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qdarwin/branch_model.hpp"
#include "qdarwin/quantum_core.hpp"

namespace qdarwin {

/// Outcome enumeration limit for Shannon information.
inline constexpr std::size_t kShannonFragmentLimit = 20;

/// Environment qubit indices forming one fragment.
class FragmentSpec {
public:
    FragmentSpec(SubsystemSet indices, std::size_t n_env);

    static FragmentSpec empty(std::size_t n_env) { return FragmentSpec({}, n_env); }
    static FragmentSpec whole(std::size_t n_env) { return FragmentSpec(SubsystemSet::range(0, n_env), n_env); }

    const SubsystemSet& indices() const noexcept { return indices_; }
    std::size_t size() const noexcept { return indices_.size(); }
    std::size_t n_env() const noexcept { return n_env_; }
    double fraction() const noexcept;

    /// The rest of the environment.
    FragmentSpec complement() const;

private:
    SubsystemSet indices_;
    std::size_t n_env_;
};

struct PipPoint {
    std::size_t m = 0;
    double f = 0.0;
    double mean = 0.0;    ///< averaged I(S:F) in bits
    double stddev = 0.0;  ///< sample standard deviation in bits
};

struct PipCurve {
    std::vector<PipPoint> points;  ///< m = 0 ... N
    double plateau = 0.0;          ///< H_S in bits
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

struct RedundancyResult {
    double delta = 0.1;
    double m_delta = 0.0;  ///< fragment size at threshold (possibly fractional)
    double f_delta = 0.0;
    double R_delta = 0.0;
    bool interpolated = false;
};

/// Nonzero spectrum (descending, clipped, summing to 1) of the reduced state
/// on the system (if keep_system) together with the fragment.
std::vector<double> reduced_spectrum(const BranchState& state, bool keep_system,
                                     const FragmentSpec& fragment);

double reduced_entropy(const BranchState& state, bool keep_system, const FragmentSpec& fragment);

/// I(S:F) = H_S + H_F - H_SF in bits.
double mutual_information(const BranchState& state, const FragmentSpec& fragment);

/// Dense counterpart for an arbitrary pure state; `system` and `fragment`
/// are disjoint subsystem sets of the register.
double mutual_information(const PureState& state, const SubsystemSet& system,
                          const SubsystemSet& fragment);

/// Averages I(S:F) over n_samples uniformly random m-subsets for every
/// m = 0 ... N. Sample s of size m draws from derive_seed(seed, m, s), so the
/// curve is independent of `threads`.
PipCurve pip_curve(const BranchState& state, std::size_t n_samples, std::uint64_t seed,
                   std::size_t threads = 1);

/// Smallest fragment size whose mean value reaches `target`, interpolated
/// linearly in m between bracketing sizes m-1 >= 1 and m. Sizes below one
/// qubit are not resolvable, so a curve that already meets the target at
/// m = 1 yields exactly 1. `mean_by_size[m]` is the value at size m.
std::optional<double> threshold_size(std::span<const double> mean_by_size, double target,
                                     bool* interpolated = nullptr);

/// R_delta from a von Neumann curve: threshold (1 - delta) * plateau.
RedundancyResult redundancy_from_curve(const PipCurve& curve, double delta);

/// Throws InvalidArgument if delta is outside (0, 1) or H_S <= 1e-6.
RedundancyResult redundancy(const BranchState& state, double delta, std::size_t n_samples,
                            std::uint64_t seed, std::size_t threads = 1);

/// PIP of Haar-random states on n_system + n_env qubits (system first),
/// averaged over states and fragments; plateau is the mean H_S.
PipCurve haar_pip(std::size_t n_system_qubits, std::size_t n_env_qubits, std::size_t n_states,
                  std::size_t n_fragment_samples, std::uint64_t seed, std::size_t threads = 1);

/// How fragment qubits are measured for observable-resolved information.
struct MeasurementScheme {
    enum class Kind { per_qubit_optimal, random_bases };
    Kind kind = Kind::per_qubit_optimal;
    std::uint64_t seed = 0;

    static MeasurementScheme per_qubit_optimal() { return {}; }
    static MeasurementScheme random_bases(std::uint64_t seed) { return {Kind::random_bases, seed}; }

    /// Unitary whose columns are the measurement basis for qubit j.
    ///
    /// per_qubit_optimal: eigenbasis of |psi_0|^2 |e_0><e_0| - |psi_1|^2 |e_1><e_1|
    /// (minimum-error discrimination of the two branch kets); computational
    /// basis for a single branch; more than two branches is rejected.
    /// random_bases: Haar-random basis drawn from derive_seed(seed, j), so a
    /// qubit keeps its basis across fragments.
    Eigen::Matrix2cd basis(const BranchState& state, std::size_t j) const;
};

/// Shannon entropy of sigma(mu) outcomes on the reduced system state.
double observable_entropy(const BranchState& state, double mu);

/// Shannon mutual information between sigma(mu) outcomes on S and
/// product-basis outcomes on the fragment, from exact joint probabilities.
/// Throws NumericalGuard above kShannonFragmentLimit qubits.
double shannon_mi_observable(const BranchState& state, double mu, const FragmentSpec& fragment,
                             const MeasurementScheme& scheme = MeasurementScheme::per_qubit_optimal());

struct RidgeRow {
    double mu = 0.0;
    double action = 0.0;
    double R_delta = 0.0;  ///< 0 when no searched fragment reaches the threshold
    double f_delta = 0.0;  ///< NaN when not reached
    double m_delta = 0.0;
    double H_mu = 0.0;     ///< Shannon entropy of sigma(mu) on S
    bool reached = false;
};

struct RidgeOptions {
    double delta = 0.1;
    std::size_t n_samples = 50;
    std::uint64_t seed = 0;
    std::size_t max_fragment = 16;  ///< clamped to N and kShannonFragmentLimit
    MeasurementScheme scheme = MeasurementScheme::per_qubit_optimal();
    std::size_t threads = 1;
};

/// Shannon-based redundancy over an (action, mu) grid. The system starts in
/// (|0>+|1>)/sqrt(2); for each action a the couplings are rescaled to
/// t = a / mean(g). The threshold is (1 - delta) * observable_entropy, and
/// fragment sizes 1 ... max_fragment are searched. Rows are ordered by
/// action, then mu.
std::vector<RidgeRow> redundancy_ridge(const CouplingSet& couplings, std::span<const double> action_grid,
                                       std::span<const double> mu_grid, const RidgeOptions& options);

}  // namespace qdarwin
