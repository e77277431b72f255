#pragma once

// Dense statevector and density-operator algebra.
//
// Index convention (shared by every module): subsystem 0 is the leftmost
// tensor factor, i.e. the most significant digit of an amplitude index.
// |q0 q1 ... q(n-1)> sits at index sum_i q_i * prod_{j>i} d_j, so
// |0> (x) |1> on two qubits is amplitude index 1 and |1> (x) |0> is index 2.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qdarwin/rng.hpp"

namespace qdarwin {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

/// Largest subsystem count the dense routines accept by default.
inline constexpr std::size_t kDenseSubsystemLimit = 26;

/// Eigenvalues below this are treated as an upstream bug, not rounding.
inline constexpr double kNegativeEigenvalueLimit = -1e-10;

/// Ordered list of distinct subsystem positions.
class SubsystemSet {
public:
    SubsystemSet() = default;
    SubsystemSet(std::initializer_list<std::size_t> indices);
    explicit SubsystemSet(std::vector<std::size_t> indices);

    /// {first, first+1, ..., last-1}
    static SubsystemSet range(std::size_t first, std::size_t last);

    const std::vector<std::size_t>& indices() const noexcept { return indices_; }
    std::size_t size() const noexcept { return indices_.size(); }
    bool empty() const noexcept { return indices_.empty(); }
    bool contains(std::size_t index) const noexcept;

    /// Positions in [0, n) not in this set, ascending.
    SubsystemSet complement(std::size_t n) const;

    /// Throws InvalidArgument if any index is >= n.
    void check_within(std::size_t n) const;

    auto begin() const noexcept { return indices_.begin(); }
    auto end() const noexcept { return indices_.end(); }

private:
    std::vector<std::size_t> indices_;
};

/// Normalized pure state over a register of subsystems with given dimensions.
class PureState {
public:
    /// Validates the length against prod(dims) and the norm against 1 (1e-9),
    /// then renormalizes exactly.
    PureState(std::vector<std::size_t> dims, Vector amplitudes);

    /// n-qubit state; n is inferred from the amplitude count.
    static PureState qubits(Vector amplitudes);
    static PureState basis(std::vector<std::size_t> dims, std::size_t index);

    const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    std::size_t num_subsystems() const noexcept { return dims_.size(); }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(amplitudes_.size()); }
    const Vector& amplitudes() const noexcept { return amplitudes_; }
    Complex operator[](std::size_t i) const { return amplitudes_(static_cast<Eigen::Index>(i)); }

private:
    std::vector<std::size_t> dims_;
    Vector amplitudes_;
};

/// Hermitian, unit-trace, positive semidefinite operator.
class DensityOperator {
public:
    /// Validates hermiticity and trace (1e-10), symmetrizes, and checks the
    /// spectrum against kNegativeEigenvalueLimit.
    DensityOperator(std::vector<std::size_t> dims, Matrix matrix);

    static DensityOperator from_pure(const PureState& state);

    const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
    const Matrix& matrix() const noexcept { return matrix_; }

    /// Eigenvalues in descending order, clipped at zero.
    std::vector<double> eigenvalues() const;

private:
    std::vector<std::size_t> dims_;
    Matrix matrix_;
};

/// Amplitude-index offsets of every joint configuration of `part`, with the
/// first listed subsystem most significant.
std::vector<std::size_t> index_offsets(std::span<const std::size_t> dims,
                                       const SubsystemSet& part);

std::size_t joint_dimension(std::span<const std::size_t> dims, const SubsystemSet& part);

/// Amplitudes arranged as a (dim part) x (dim complement) matrix.
Matrix bipartite_matrix(const PureState& state, const SubsystemSet& part);

PureState tensor_product(std::span<const PureState> parts,
                         std::size_t max_subsystems = kDenseSubsystemLimit);

bool is_unitary(const Matrix& u, double tol = 1e-10);

/// Applies u to the joint space of `targets` (in the listed order).
PureState apply_unitary(const PureState& state, const Matrix& u, const SubsystemSet& targets);

DensityOperator partial_trace(const PureState& state, const SubsystemSet& keep);
DensityOperator partial_trace(const DensityOperator& rho, const SubsystemSet& keep);

/// Entropy in bits of a spectrum. Entries below kNegativeEigenvalueLimit
/// throw NumericalGuard; the rest are clipped at 0 and renormalized.
double spectrum_entropy(std::span<const double> eigenvalues);

double von_neumann_entropy(const DensityOperator& rho);

/// Entropy of the reduced state on `part`, computed on whichever side of the
/// cut is smaller.
double entanglement_entropy(const PureState& state, const SubsystemSet& part);

/// Squared Schmidt coefficients across the cut, descending.
std::vector<double> schmidt_spectrum(const PureState& state, const SubsystemSet& part);

/// Shannon entropy in bits. Entries must be >= -1e-12 and sum to 1 within
/// 1e-9; the vector is renormalized before use.
double shannon_entropy(std::span<const double> probabilities);

Complex overlap(const PureState& a, const PureState& b);

/// Haar-random pure state on num_qubits qubits.
PureState haar_random_state(std::size_t num_qubits, std::uint64_t seed);
PureState haar_random_state(std::vector<std::size_t> dims, std::uint64_t seed);

/// Haar-random unitary (QR of a complex Ginibre matrix with phase fix).
Matrix haar_random_unitary(std::size_t dim, Rng& rng);

namespace pauli {
Matrix identity();
Matrix x();
Matrix y();
Matrix z();
}  // namespace pauli

}  // namespace qdarwin
