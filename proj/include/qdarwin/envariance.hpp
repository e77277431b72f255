#pragma once

// Repeatable copying, envariance and the finegraining route to Born's rule.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qdarwin/quantum_core.hpp"

namespace qdarwin {

enum class CopyVerdict { unsuccessful_copy, orthogonal_ok, violation };

std::string_view to_string(CopyVerdict verdict);

/// Classifies a candidate record against <u|v> = <u|v><e_u|e_v>.
/// Consistent when |uv (1 - euv)| <= 1e-10: euv = 1 is an unsuccessful copy,
/// otherwise uv = 0 means orthogonal states with a record. Anything else is
/// a violation.
CopyVerdict repeatability_constraint(Complex uv, Complex euv);

struct CopyReport {
    Complex uv;
    double fidelity_u = 0.0;  ///< <u| rho_S |u> after copying u
    double fidelity_v = 0.0;
    bool system_unperturbed = false;     ///< both fidelities are 1 within 1e-9
    std::optional<Complex> euv;          ///< <e_u|e_v> when the system is unperturbed
    std::optional<CopyVerdict> verdict;  ///< when the system is unperturbed
    bool repeatability_failure = false;  ///< copying disturbed the system

    /// A record distinguishing non-orthogonal states without disturbing them.
    bool faithful_copy_of_nonorthogonal() const;
};

/// Runs `copier` (unitary on S (x) E, S first) on |u>|e0> and |v>|e0>.
CopyReport verify_copy_map(const Vector& u, const Vector& v, const Matrix& copier, const Vector& e0);

struct SchmidtForm {
    std::vector<double> coefficients;  ///< descending, zero coefficients dropped
    std::vector<Vector> left_basis;    ///< on `cut`, in its listed order
    std::vector<Vector> right_basis;   ///< on the complement, ascending order
    std::vector<std::size_t> dims;     ///< dimensions of the whole register
    SubsystemSet cut;

    PureState reconstruct() const;
};

SchmidtForm schmidt(const PureState& state, const SubsystemSet& cut);

struct EnvarianceResult {
    bool envariant = false;
    std::optional<Matrix> witness;  ///< u_E on the complement of the cut
    double fidelity = 0.0;          ///< |<Psi| (1 (x) u_E)(u_S (x) 1) |Psi>| for the witness
};

/// Looks for u_E on the complement with (1 (x) u_E)(u_S (x) 1)|Psi> equal to
/// |Psi> up to a global phase (1e-9 in fidelity). u_S is undoable this way
/// exactly when it maps the Schmidt support of the cut onto itself and
/// commutes with the Schmidt coefficients there; the witness is then built
/// in the Schmidt basis of the complement.
EnvarianceResult is_envariant(const PureState& state, const Matrix& u_s, const SubsystemSet& cut);

/// Uniform probabilities over Schmidt branches, established by checking that
/// every pair of branches can be swapped envariantly. Throws InvalidArgument
/// ("not equiprobable; finegrain first") if coefficients differ by > 1e-10.
std::vector<double> equiprobability(const PureState& state, const SubsystemSet& cut);

struct Rational {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    Rational reduced() const;
    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num * b.den == b.num * a.den;
    }
};

/// Branch weights m_k / M with positive integers m_k summing to M.
struct RationalAmplitudeSpec {
    std::vector<std::uint64_t> numerators;
    std::uint64_t denominator = 1;

    void validate() const;
};

struct FinegrainResult {
    std::optional<PureState> extended;  ///< S (x) E (x) C, present on the dense route
    std::vector<Rational> probabilities;
    std::size_t fine_branches = 0;
    std::size_t ancilla_dim = 0;
};

/// Builds sum_k sqrt(m_k/M)|s_k>|eps_k>, extends it with an ancilla C of
/// dimension max(m_k) through a controlled shift |f_kj>|0'> -> |f_kj>|j'>,
/// where eps_k = sum_j |f_kj>/sqrt(m_k) over orthonormal f_kj, checks that
/// the (S C)|E cut has M equal Schmidt coefficients and that every pair of
/// fine branches is envariantly swappable, then counts fine branches per
/// outcome. Needs orthonormal kets and an environment of dimension >= M.
FinegrainResult finegrain(const RationalAmplitudeSpec& spec, std::span<const Vector> system_kets,
                          std::span<const Vector> env_kets);

/// Same construction on branch labels only (system ket k, ancilla j,
/// environment ket f_kj all distinct basis states), for M beyond what a
/// dense register can hold.
FinegrainResult finegrain_by_counting(const RationalAmplitudeSpec& spec);

/// Rational weights approximating |psi_k|^2 with a shared denominator at
/// most max_denominator: continued-fraction convergents when their common
/// denominator fits, otherwise largest-remainder rounding on max_denominator.
/// Zero weights are returned as numerator 0.
RationalAmplitudeSpec rational_weights(std::span<const Complex> amplitudes, std::uint64_t max_denominator);

struct BornResult {
    std::vector<double> probabilities;
    std::vector<Rational> exact;
    bool dense_verified = false;  ///< finegraining ran on a dense register
};

/// Probabilities of the branches of sum_k psi_k |k>|k>, obtained by
/// finegraining rational approximations of the weights to equiprobability.
/// Within 1 / max_denominator of |psi_k|^2 in each entry.
BornResult born_via_envariance(std::span<const Complex> amplitudes, std::uint64_t max_denominator);

}  // namespace qdarwin
