#include "qdarwin/quantum_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qdarwin/errors.hpp"

namespace qdarwin {

namespace {

std::size_t product(std::span<const std::size_t> dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

std::vector<double> descending_eigenvalues(const Matrix& hermitian) {
    if (hermitian.rows() == 0) return {};
    Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalGuard("eigenvalue solver did not converge");
    const auto& ev = solver.eigenvalues();
    std::vector<double> out(ev.data(), ev.data() + ev.size());
    std::sort(out.begin(), out.end(), std::greater<>{});
    for (double v : out) {
        if (v < kNegativeEigenvalueLimit)
            throw NumericalGuard("negative eigenvalue " + std::to_string(v) + " in density operator");
    }
    for (double& v : out) v = std::max(v, 0.0);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// SubsystemSet

SubsystemSet::SubsystemSet(std::initializer_list<std::size_t> indices)
    : SubsystemSet(std::vector<std::size_t>(indices)) {}

SubsystemSet::SubsystemSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
    auto sorted = indices_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw InvalidArgument("subsystem set contains a repeated index");
}

SubsystemSet SubsystemSet::range(std::size_t first, std::size_t last) {
    std::vector<std::size_t> v;
    for (std::size_t i = first; i < last; ++i) v.push_back(i);
    return SubsystemSet(std::move(v));
}

bool SubsystemSet::contains(std::size_t index) const noexcept {
    return std::find(indices_.begin(), indices_.end(), index) != indices_.end();
}

SubsystemSet SubsystemSet::complement(std::size_t n) const {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < n; ++i)
        if (!contains(i)) v.push_back(i);
    return SubsystemSet(std::move(v));
}

void SubsystemSet::check_within(std::size_t n) const {
    for (auto i : indices_) {
        if (i >= n)
            throw InvalidArgument("subsystem index " + std::to_string(i) + " out of range for " +
                                  std::to_string(n) + " subsystems");
    }
}

// ---------------------------------------------------------------------------
// PureState

PureState::PureState(std::vector<std::size_t> dims, Vector amplitudes)
    : dims_(std::move(dims)), amplitudes_(std::move(amplitudes)) {
    if (dims_.empty()) throw InvalidArgument("state needs at least one subsystem");
    if (std::any_of(dims_.begin(), dims_.end(), [](auto d) { return d == 0; }))
        throw InvalidArgument("subsystem dimension must be positive");
    if (product(dims_) != static_cast<std::size_t>(amplitudes_.size()))
        throw InvalidArgument("amplitude count " + std::to_string(amplitudes_.size()) +
                              " does not match product of dimensions " +
                              std::to_string(product(dims_)));
    const double norm = amplitudes_.norm();
    if (std::abs(norm - 1.0) > 1e-9)
        throw InvalidArgument("state is not normalized (norm " + std::to_string(norm) + ")");
    amplitudes_ /= norm;
}

PureState PureState::qubits(Vector amplitudes) {
    auto size = static_cast<std::size_t>(amplitudes.size());
    std::size_t n = 0;
    while ((std::size_t{1} << n) < size) ++n;
    if ((std::size_t{1} << n) != size || n == 0)
        throw InvalidArgument("qubit register needs 2^n amplitudes with n >= 1");
    return PureState(std::vector<std::size_t>(n, 2), std::move(amplitudes));
}

PureState PureState::basis(std::vector<std::size_t> dims, std::size_t index) {
    const auto dim = product(dims);
    if (index >= dim) throw InvalidArgument("basis index out of range");
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim));
    v(static_cast<Eigen::Index>(index)) = 1.0;
    return PureState(std::move(dims), std::move(v));
}

// ---------------------------------------------------------------------------
// DensityOperator

DensityOperator::DensityOperator(std::vector<std::size_t> dims, Matrix matrix)
    : dims_(std::move(dims)), matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols()) throw InvalidArgument("density matrix must be square");
    if (product(dims_) != static_cast<std::size_t>(matrix_.rows()))
        throw InvalidArgument("density matrix size does not match dimensions");
    const double scale = std::max(1.0, matrix_.cwiseAbs().maxCoeff());
    if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw InvalidArgument("density matrix is not Hermitian");
    const Complex tr = matrix_.trace();
    if (std::abs(tr - 1.0) > 1e-10) throw InvalidArgument("density matrix trace is not 1");
    matrix_ = 0.5 * (matrix_ + matrix_.adjoint()).eval();
    descending_eigenvalues(matrix_);
}

DensityOperator DensityOperator::from_pure(const PureState& state) {
    const Vector& a = state.amplitudes();
    return DensityOperator(state.dims(), a * a.adjoint());
}

std::vector<double> DensityOperator::eigenvalues() const { return descending_eigenvalues(matrix_); }

// ---------------------------------------------------------------------------
// index helpers

std::vector<std::size_t> index_offsets(std::span<const std::size_t> dims,
                                       const SubsystemSet& part) {
    part.check_within(dims.size());
    std::vector<std::size_t> stride(dims.size(), 1);
    for (std::size_t i = dims.size(); i-- > 1;) stride[i - 1] = stride[i] * dims[i];

    std::vector<std::size_t> offsets{0};
    for (auto s : part) {
        std::vector<std::size_t> next;
        next.reserve(offsets.size() * dims[s]);
        for (auto base : offsets)
            for (std::size_t digit = 0; digit < dims[s]; ++digit) next.push_back(base + digit * stride[s]);
        offsets = std::move(next);
    }
    return offsets;
}

std::size_t joint_dimension(std::span<const std::size_t> dims, const SubsystemSet& part) {
    std::size_t d = 1;
    for (auto s : part) d *= dims[s];
    return d;
}

Matrix bipartite_matrix(const PureState& state, const SubsystemSet& part) {
    const auto keep = index_offsets(state.dims(), part);
    const auto rest = index_offsets(state.dims(), part.complement(state.num_subsystems()));
    Matrix m(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(rest.size()));
    const Vector& a = state.amplitudes();
    for (std::size_t j = 0; j < rest.size(); ++j)
        for (std::size_t i = 0; i < keep.size(); ++i)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                a(static_cast<Eigen::Index>(keep[i] + rest[j]));
    return m;
}

// ---------------------------------------------------------------------------
// operations

PureState tensor_product(std::span<const PureState> parts, std::size_t max_subsystems) {
    if (parts.empty()) throw InvalidArgument("tensor_product of an empty list");
    std::vector<std::size_t> dims;
    for (const auto& p : parts) dims.insert(dims.end(), p.dims().begin(), p.dims().end());
    if (dims.size() > max_subsystems)
        throw NumericalGuard("tensor product would have " + std::to_string(dims.size()) +
                             " subsystems, limit is " + std::to_string(max_subsystems));
    Vector acc = parts.front().amplitudes();
    for (std::size_t k = 1; k < parts.size(); ++k) {
        const Vector& b = parts[k].amplitudes();
        Vector next(acc.size() * b.size());
        for (Eigen::Index i = 0; i < acc.size(); ++i) next.segment(i * b.size(), b.size()) = acc(i) * b;
        acc = std::move(next);
    }
    return PureState(std::move(dims), std::move(acc));
}

bool is_unitary(const Matrix& u, double tol) {
    if (u.rows() != u.cols()) return false;
    const Matrix diff = u.adjoint() * u - Matrix::Identity(u.rows(), u.cols());
    return diff.cwiseAbs().maxCoeff() <= tol;
}

PureState apply_unitary(const PureState& state, const Matrix& u, const SubsystemSet& targets) {
    targets.check_within(state.num_subsystems());
    if (targets.empty()) throw InvalidArgument("apply_unitary needs at least one target");
    const auto dim = joint_dimension(state.dims(), targets);
    if (static_cast<std::size_t>(u.rows()) != dim || static_cast<std::size_t>(u.cols()) != dim)
        throw InvalidArgument("operator is " + std::to_string(u.rows()) + "x" + std::to_string(u.cols()) +
                              " but targets span dimension " + std::to_string(dim));
    if (!is_unitary(u)) throw InvalidArgument("operator is not unitary within 1e-10");

    const auto keep = index_offsets(state.dims(), targets);
    const auto rest = index_offsets(state.dims(), targets.complement(state.num_subsystems()));
    const Vector& in = state.amplitudes();
    Vector out(in.size());
    Vector local(static_cast<Eigen::Index>(dim));
    for (auto base : rest) {
        for (std::size_t i = 0; i < dim; ++i) local(static_cast<Eigen::Index>(i)) = in(static_cast<Eigen::Index>(base + keep[i]));
        const Vector mapped = u * local;
        for (std::size_t i = 0; i < dim; ++i) out(static_cast<Eigen::Index>(base + keep[i])) = mapped(static_cast<Eigen::Index>(i));
    }
    return PureState(state.dims(), std::move(out));
}

namespace {

std::vector<std::size_t> dims_of(std::span<const std::size_t> dims, const SubsystemSet& part) {
    std::vector<std::size_t> out;
    for (auto s : part) out.push_back(dims[s]);
    return out;
}

}  // namespace

DensityOperator partial_trace(const PureState& state, const SubsystemSet& keep) {
    if (keep.empty()) throw InvalidArgument("partial_trace needs a nonempty keep set");
    keep.check_within(state.num_subsystems());
    const Matrix m = bipartite_matrix(state, keep);
    return DensityOperator(dims_of(state.dims(), keep), m * m.adjoint());
}

DensityOperator partial_trace(const DensityOperator& rho, const SubsystemSet& keep) {
    if (keep.empty()) throw InvalidArgument("partial_trace needs a nonempty keep set");
    keep.check_within(rho.dims().size());
    const auto k = index_offsets(rho.dims(), keep);
    const auto r = index_offsets(rho.dims(), keep.complement(rho.dims().size()));
    const auto n = static_cast<Eigen::Index>(k.size());
    Matrix out = Matrix::Zero(n, n);
    const Matrix& m = rho.matrix();
    for (auto base : r)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                out(i, j) += m(static_cast<Eigen::Index>(base + k[static_cast<std::size_t>(i)]),
                               static_cast<Eigen::Index>(base + k[static_cast<std::size_t>(j)]));
    return DensityOperator(dims_of(rho.dims(), keep), std::move(out));
}

double spectrum_entropy(std::span<const double> eigenvalues) {
    double total = 0.0;
    for (double v : eigenvalues) {
        if (v < kNegativeEigenvalueLimit)
            throw NumericalGuard("negative eigenvalue " + std::to_string(v) + " in spectrum");
        total += std::max(v, 0.0);
    }
    if (total <= 0.0) throw NumericalGuard("spectrum has zero total weight");
    double h = 0.0;
    for (double v : eigenvalues) {
        const double p = std::max(v, 0.0) / total;
        if (p > 0.0) h -= p * std::log2(p);
    }
    return std::max(h, 0.0);
}

double von_neumann_entropy(const DensityOperator& rho) {
    const auto ev = rho.eigenvalues();
    return spectrum_entropy(ev);
}

std::vector<double> schmidt_spectrum(const PureState& state, const SubsystemSet& part) {
    part.check_within(state.num_subsystems());
    if (part.empty() || part.size() == state.num_subsystems()) return {1.0};
    const Matrix m = bipartite_matrix(state, part);
    if (m.rows() <= m.cols()) return descending_eigenvalues(m * m.adjoint());
    return descending_eigenvalues(m.adjoint() * m);
}

double entanglement_entropy(const PureState& state, const SubsystemSet& part) {
    const auto spectrum = schmidt_spectrum(state, part);
    return spectrum_entropy(spectrum);
}

double shannon_entropy(std::span<const double> probabilities) {
    if (probabilities.empty()) throw InvalidArgument("empty probability vector");
    double total = 0.0;
    for (double p : probabilities) {
        if (p < -1e-12) throw InvalidArgument("negative probability " + std::to_string(p));
        total += std::max(p, 0.0);
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw InvalidArgument("probabilities sum to " + std::to_string(total) + ", not 1");
    double h = 0.0;
    for (double p : probabilities) {
        const double q = std::max(p, 0.0) / total;
        if (q > 0.0) h -= q * std::log2(q);
    }
    return std::max(h, 0.0);
}

Complex overlap(const PureState& a, const PureState& b) {
    if (a.dims() != b.dims()) throw InvalidArgument("overlap of states with different dimensions");
    return a.amplitudes().dot(b.amplitudes());
}

PureState haar_random_state(std::vector<std::size_t> dims, std::uint64_t seed) {
    if (dims.empty()) throw InvalidArgument("haar_random_state needs at least one subsystem");
    if (dims.size() > kDenseSubsystemLimit) throw NumericalGuard("haar_random_state exceeds dense limit");
    Rng rng(seed);
    const auto dim = static_cast<Eigen::Index>(product(dims));
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double re = rng.normal();
        const double im = rng.normal();
        v(i) = Complex(re, im);
    }
    v.normalize();
    return PureState(std::move(dims), std::move(v));
}

PureState haar_random_state(std::size_t num_qubits, std::uint64_t seed) {
    if (num_qubits == 0) throw InvalidArgument("haar_random_state needs num_qubits >= 1");
    return haar_random_state(std::vector<std::size_t>(num_qubits, 2), seed);
}

Matrix haar_random_unitary(std::size_t dim, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(dim);
    Matrix g(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double re = rng.normal();
            const double im = rng.normal();
            g(i, j) = Complex(re, im);
        }
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Complex d = r(i, i);
        const double mag = std::abs(d);
        if (mag > 0.0) q.col(i) *= d / mag;
    }
    return q;
}

namespace pauli {
Matrix identity() { return Matrix::Identity(2, 2); }
Matrix x() {
    Matrix m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}
Matrix y() {
    Matrix m(2, 2);
    m << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
    return m;
}
Matrix z() {
    Matrix m(2, 2);
    m << 1.0, 0.0, 0.0, -1.0;
    return m;
}
}  // namespace pauli

}  // namespace qdarwin
