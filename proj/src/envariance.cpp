#include "qdarwin/envariance.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "qdarwin/errors.hpp"

namespace qdarwin {

namespace {

constexpr double kSchmidtCutoff = 1e-12;
constexpr double kPhaseFidelityTol = 1e-9;

// dense finegraining bounds: register size and number of fine branches
constexpr std::size_t kDenseFinegrainDim = 4096;
constexpr std::uint64_t kDenseFinegrainBranches = 32;

void check_orthonormal(std::span<const Vector> kets, const char* what) {
    if (kets.empty()) throw InvalidArgument(std::string(what) + ": no kets given");
    for (std::size_t k = 0; k < kets.size(); ++k) {
        if (kets[k].size() != kets[0].size()) throw InvalidArgument(std::string(what) + ": kets differ in dimension");
        for (std::size_t l = 0; l <= k; ++l) {
            const double expected = (k == l) ? 1.0 : 0.0;
            if (std::abs(kets[l].dot(kets[k]) - expected) > 1e-10)
                throw InvalidArgument(std::string(what) + ": kets are not orthonormal");
        }
    }
}

Matrix closest_unitary(const Matrix& t) {
    Eigen::JacobiSVD<Matrix> svd(t, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().adjoint();
}

}  // namespace

// ---------------------------------------------------------------------------
// repeatability

std::string_view to_string(CopyVerdict verdict) {
    switch (verdict) {
        case CopyVerdict::unsuccessful_copy: return "unsuccessful-copy";
        case CopyVerdict::orthogonal_ok: return "orthogonal-ok";
        case CopyVerdict::violation: return "violation";
    }
    return "unknown";
}

CopyVerdict repeatability_constraint(Complex uv, Complex euv) {
    if (std::abs(uv) > 1.0 + 1e-9 || std::abs(euv) > 1.0 + 1e-9)
        throw InvalidArgument("overlaps must have modulus at most 1");
    if (std::abs(uv * (1.0 - euv)) > 1e-10) return CopyVerdict::violation;
    if (std::abs(1.0 - euv) <= 1e-10) return CopyVerdict::unsuccessful_copy;
    return CopyVerdict::orthogonal_ok;
}

bool CopyReport::faithful_copy_of_nonorthogonal() const {
    return system_unperturbed && euv && std::abs(uv) > 1e-6 && std::abs(*euv) < 1.0 - 1e-6;
}

CopyReport verify_copy_map(const Vector& u, const Vector& v, const Matrix& copier, const Vector& e0) {
    const auto ds = static_cast<std::size_t>(u.size());
    const auto de = static_cast<std::size_t>(e0.size());
    if (v.size() != u.size()) throw InvalidArgument("u and v differ in dimension");
    if (!is_unitary(copier)) throw InvalidArgument("copier is not unitary within 1e-10");
    if (static_cast<std::size_t>(copier.rows()) != ds * de)
        throw InvalidArgument("copier dimension does not match system (x) environment");

    const PureState env({de}, e0);
    auto run = [&](const Vector& ket, double& fidelity) {
        const PureState parts[] = {PureState({ds}, ket), env};
        const PureState out = apply_unitary(tensor_product(parts), copier, SubsystemSet{0, 1});
        const Matrix rho = partial_trace(out, SubsystemSet{0}).matrix();
        fidelity = std::real(ket.dot(rho * ket));
        // (<ket| (x) 1)|out>
        const Matrix m = bipartite_matrix(out, SubsystemSet{0});
        return Vector(m.transpose() * ket.conjugate());
    };

    CopyReport report;
    report.uv = u.dot(v);
    const Vector eu = run(u, report.fidelity_u);
    const Vector ev = run(v, report.fidelity_v);
    report.system_unperturbed = report.fidelity_u >= 1.0 - 1e-9 && report.fidelity_v >= 1.0 - 1e-9;
    report.repeatability_failure = !report.system_unperturbed;
    if (report.system_unperturbed) {
        report.euv = eu.normalized().dot(ev.normalized());
        report.verdict = repeatability_constraint(report.uv, *report.euv);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Schmidt decomposition

PureState SchmidtForm::reconstruct() const {
    const auto keep = index_offsets(dims, cut);
    const auto rest = index_offsets(dims, cut.complement(dims.size()));
    const auto total = std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
    Vector amps = Vector::Zero(static_cast<Eigen::Index>(total));
    for (std::size_t k = 0; k < coefficients.size(); ++k)
        for (std::size_t b = 0; b < rest.size(); ++b)
            for (std::size_t a = 0; a < keep.size(); ++a)
                amps(static_cast<Eigen::Index>(keep[a] + rest[b])) +=
                    coefficients[k] * left_basis[k](static_cast<Eigen::Index>(a)) *
                    right_basis[k](static_cast<Eigen::Index>(b));
    return PureState(dims, std::move(amps));
}

SchmidtForm schmidt(const PureState& state, const SubsystemSet& cut) {
    cut.check_within(state.num_subsystems());
    const Matrix m = bipartite_matrix(state, cut);
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SchmidtForm form;
    form.dims = state.dims();
    form.cut = cut;
    const auto& sv = svd.singularValues();
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        if (sv(k) <= kSchmidtCutoff) continue;
        form.coefficients.push_back(sv(k));
        form.left_basis.emplace_back(svd.matrixU().col(k));
        form.right_basis.emplace_back(svd.matrixV().col(k).conjugate());
    }
    return form;
}

// ---------------------------------------------------------------------------
// envariance

EnvarianceResult is_envariant(const PureState& state, const Matrix& u_s, const SubsystemSet& cut) {
    const auto n_sub = state.num_subsystems();
    cut.check_within(n_sub);
    const auto rest = cut.complement(n_sub);
    if (cut.empty() || rest.empty()) throw InvalidArgument("envariance needs a proper bipartition");
    const auto d_cut = joint_dimension(state.dims(), cut);
    if (static_cast<std::size_t>(u_s.rows()) != d_cut || static_cast<std::size_t>(u_s.cols()) != d_cut)
        throw InvalidArgument("u_S does not match the dimension of the cut");
    if (!is_unitary(u_s)) throw InvalidArgument("u_S is not unitary within 1e-10");

    const SchmidtForm form = schmidt(state, cut);
    const auto k = static_cast<Eigen::Index>(form.coefficients.size());
    const auto d_rest = static_cast<Eigen::Index>(form.right_basis.front().size());
    Matrix left(static_cast<Eigen::Index>(d_cut), k);
    Matrix right(d_rest, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        left.col(i) = form.left_basis[static_cast<std::size_t>(i)];
        right.col(i) = form.right_basis[static_cast<std::size_t>(i)];
    }

    EnvarianceResult result;
    const Matrix mapped = u_s * left;
    const Matrix t = left.adjoint() * mapped;
    if ((mapped - left * t).cwiseAbs().maxCoeff() > 1e-9) return result;  // leaves the Schmidt support

    const Vector c = Eigen::Map<const Eigen::VectorXd>(form.coefficients.data(), k).cast<Complex>();
    const Matrix commutator = t * c.asDiagonal() - c.asDiagonal() * t;
    if (commutator.cwiseAbs().maxCoeff() > 1e-9) return result;

    const Matrix tu = closest_unitary(t);
    Matrix u_e = right * tu.conjugate() * right.adjoint() +
                 (Matrix::Identity(d_rest, d_rest) - right * right.adjoint());
    u_e = closest_unitary(u_e);

    const PureState phi = apply_unitary(apply_unitary(state, u_s, cut), u_e, rest);
    result.fidelity = std::abs(overlap(state, phi));
    if (result.fidelity >= 1.0 - kPhaseFidelityTol) {
        result.envariant = true;
        result.witness = std::move(u_e);
    }
    return result;
}

std::vector<double> equiprobability(const PureState& state, const SubsystemSet& cut) {
    const SchmidtForm form = schmidt(state, cut);
    const auto n = form.coefficients.size();
    for (double c : form.coefficients)
        if (std::abs(c - form.coefficients.front()) > 1e-10)
            throw InvalidArgument("not equiprobable; finegrain first");

    const auto d = form.left_basis.front().size();
    const Matrix identity = Matrix::Identity(d, d);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const Vector& la = form.left_basis[a];
            const Vector& lb = form.left_basis[b];
            const Matrix swap = identity - la * la.adjoint() - lb * lb.adjoint() + la * lb.adjoint() + lb * la.adjoint();
            if (!is_envariant(state, swap, cut).envariant)
                throw NumericalGuard("branch swap " + std::to_string(a) + "<->" + std::to_string(b) +
                                     " is not envariant despite equal coefficients");
        }
    }
    // all branches are interchangeable, and their probabilities sum to one
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// finegraining and Born's rule

Rational Rational::reduced() const {
    if (den == 0) throw InvalidArgument("rational with zero denominator");
    const auto g = std::gcd(num, den);
    if (g == 0) return {0, 1};
    return {num / g, den / g};
}

void RationalAmplitudeSpec::validate() const {
    if (numerators.empty()) throw InvalidArgument("finegrain spec has no branches");
    if (denominator == 0) throw InvalidArgument("finegrain denominator must be positive");
    std::uint64_t total = 0;
    for (auto m : numerators) {
        if (m == 0) throw InvalidArgument("finegrain numerators must be positive");
        total += m;
    }
    if (total != denominator)
        throw InvalidArgument("finegrain numerators sum to " + std::to_string(total) + ", not " +
                              std::to_string(denominator));
}

FinegrainResult finegrain(const RationalAmplitudeSpec& spec, std::span<const Vector> system_kets,
                          std::span<const Vector> env_kets) {
    spec.validate();
    const auto n = spec.numerators.size();
    if (system_kets.size() != n || env_kets.size() != n)
        throw InvalidArgument("finegrain needs one system and one environment ket per branch");
    check_orthonormal(system_kets, "system kets");
    check_orthonormal(env_kets, "environment kets");
    const auto big_m = spec.denominator;
    const auto d_s = static_cast<std::size_t>(system_kets[0].size());
    const auto d_e = static_cast<std::size_t>(env_kets[0].size());
    if (d_e < big_m)
        throw InvalidArgument("environment of dimension " + std::to_string(d_e) + " cannot hold " +
                              std::to_string(big_m) + " fine branches");
    const auto d_c = static_cast<std::size_t>(*std::max_element(spec.numerators.begin(), spec.numerators.end()));
    if (d_s * d_e * d_c > kDenseFinegrainDim || big_m > kDenseFinegrainBranches)
        throw NumericalGuard("finegrained register too large for the dense route");

    // Orthonormal subspaces, one per branch, each containing eps_k with
    // dimension m_k; extra directions come from the computational basis.
    std::vector<Vector> used(env_kets.begin(), env_kets.end());
    std::vector<std::vector<Vector>> span_of(n);
    for (std::size_t k = 0; k < n; ++k) span_of[k].push_back(env_kets[k]);
    std::size_t next_basis = 0;
    for (std::size_t k = 0; k < n; ++k) {
        while (span_of[k].size() < spec.numerators[k]) {
            if (next_basis >= d_e) throw NumericalGuard("ran out of environment directions while finegraining");
            Vector cand = Vector::Zero(static_cast<Eigen::Index>(d_e));
            cand(static_cast<Eigen::Index>(next_basis++)) = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& w : used) cand -= w * w.dot(cand);
            if (cand.norm() < 1e-8) continue;
            cand.normalize();
            used.push_back(cand);
            span_of[k].push_back(cand);
        }
    }

    // f_kj = sum_l w^(jl) h_l / sqrt(m_k), w = exp(2 pi i / m_k), h_0 = eps_k
    std::vector<std::vector<Vector>> fine(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto m = span_of[k].size();
        for (std::size_t j = 0; j < m; ++j) {
            Vector f = Vector::Zero(static_cast<Eigen::Index>(d_e));
            for (std::size_t l = 0; l < m; ++l) {
                const double angle = 2.0 * std::numbers::pi * static_cast<double>(j * l) / static_cast<double>(m);
                f += std::polar(1.0, angle) * span_of[k][l];
            }
            fine[k].push_back(f / std::sqrt(static_cast<double>(m)));
        }
    }

    // sum_k sqrt(m_k/M) |s_k>|eps_k>|0'>
    const std::vector<std::size_t> dims{d_s, d_e, d_c};
    Vector amps = Vector::Zero(static_cast<Eigen::Index>(d_s * d_e * d_c));
    Vector ancilla0 = Vector::Zero(static_cast<Eigen::Index>(d_c));
    ancilla0(0) = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double w = std::sqrt(static_cast<double>(spec.numerators[k]) / static_cast<double>(big_m));
        const Vector env_anc = Eigen::kroneckerProduct(env_kets[k], ancilla0);
        amps += w * Eigen::kroneckerProduct(system_kets[k], env_anc).eval();
    }
    const PureState initial(dims, std::move(amps));

    // controlled shift: |f_kj><f_kj| (x) X^j, identity off the fine subspace
    const auto d_ec = static_cast<Eigen::Index>(d_e * d_c);
    Matrix shift = Matrix::Zero(static_cast<Eigen::Index>(d_c), static_cast<Eigen::Index>(d_c));
    for (std::size_t c = 0; c < d_c; ++c) shift(static_cast<Eigen::Index>((c + 1) % d_c), static_cast<Eigen::Index>(c)) = 1.0;
    Matrix projector_sum = Matrix::Zero(static_cast<Eigen::Index>(d_e), static_cast<Eigen::Index>(d_e));
    Matrix controlled = Matrix::Zero(d_ec, d_ec);
    for (std::size_t k = 0; k < n; ++k) {
        Matrix power = Matrix::Identity(static_cast<Eigen::Index>(d_c), static_cast<Eigen::Index>(d_c));
        for (const auto& f : fine[k]) {
            const Matrix proj = f * f.adjoint();
            projector_sum += proj;
            controlled += Eigen::kroneckerProduct(proj, power);
            power = (shift * power).eval();
        }
    }
    const Matrix rest = Matrix::Identity(static_cast<Eigen::Index>(d_e), static_cast<Eigen::Index>(d_e)) - projector_sum;
    controlled += Eigen::kroneckerProduct(rest, Matrix::Identity(static_cast<Eigen::Index>(d_c), static_cast<Eigen::Index>(d_c)));
    const PureState extended = apply_unitary(initial, controlled, SubsystemSet{1, 2});

    // (S C) | E must now be an equal-coefficient Schmidt state with M terms
    const SubsystemSet sc{0, 2};
    const SchmidtForm form = schmidt(extended, sc);
    const double expected = 1.0 / std::sqrt(static_cast<double>(big_m));
    if (form.coefficients.size() != big_m)
        throw NumericalGuard("finegrained state has " + std::to_string(form.coefficients.size()) +
                             " Schmidt terms, expected " + std::to_string(big_m));
    for (double c : form.coefficients)
        if (std::abs(c - expected) > 1e-10) throw NumericalGuard("finegrained Schmidt coefficients are not equal");
    equiprobability(extended, sc);

    // count fine branches |s_k, j'> present in the extended state
    const Matrix m = bipartite_matrix(extended, sc);  // rows: s * d_c + c
    FinegrainResult result;
    result.ancilla_dim = d_c;
    std::uint64_t counted = 0;
    for (std::size_t k = 0; k < n; ++k) {
        std::uint64_t count = 0;
        for (std::size_t j = 0; j < d_c; ++j) {
            Vector env_part = Vector::Zero(m.cols());
            for (std::size_t a = 0; a < d_s; ++a)
                env_part += std::conj(system_kets[k](static_cast<Eigen::Index>(a))) *
                            m.row(static_cast<Eigen::Index>(a * d_c + j)).transpose();
            const double weight = env_part.norm();
            if (std::abs(weight - expected) <= 1e-9)
                ++count;
            else if (weight > 1e-9)
                throw NumericalGuard("fine branch with unexpected weight");
        }
        counted += count;
        result.probabilities.push_back(Rational{count, big_m}.reduced());
    }
    if (counted != big_m) throw NumericalGuard("fine-branch count does not match the denominator");
    result.fine_branches = counted;
    result.extended = extended;
    return result;
}

FinegrainResult finegrain_by_counting(const RationalAmplitudeSpec& spec) {
    spec.validate();
    const auto big_m = spec.denominator;
    const double expected = 1.0 / std::sqrt(static_cast<double>(big_m));
    FinegrainResult result;
    result.ancilla_dim = static_cast<std::size_t>(*std::max_element(spec.numerators.begin(), spec.numerators.end()));
    // fine branch (k, j) carries sqrt(m_k/M) / sqrt(m_k); labels are distinct
    // basis states on S C and on E, so the decomposition is Schmidt
    std::uint64_t counted = 0;
    for (auto m : spec.numerators) {
        const double coefficient =
            std::sqrt(static_cast<double>(m) / static_cast<double>(big_m)) / std::sqrt(static_cast<double>(m));
        if (std::abs(coefficient - expected) > 1e-10) throw NumericalGuard("fine branches are not equal-weight");
        counted += m;
        result.probabilities.push_back(Rational{m, big_m}.reduced());
    }
    if (counted != big_m) throw NumericalGuard("fine-branch count does not match the denominator");
    result.fine_branches = counted;
    return result;
}

namespace {

struct Convergent {
    std::uint64_t num = 0;
    std::uint64_t den = 1;
};

Convergent best_convergent(double p, std::uint64_t max_den) {
    std::uint64_t h_prev = 1, h_prev2 = 0;
    std::uint64_t k_prev = 0, k_prev2 = 1;
    Convergent best{0, 1};
    double x = p;
    for (int iter = 0; iter < 64; ++iter) {
        const double a_real = std::floor(x);
        if (a_real > 1e15) break;
        const auto a = static_cast<std::uint64_t>(a_real);
        const std::uint64_t h = a * h_prev + h_prev2;
        const std::uint64_t k = a * k_prev + k_prev2;
        if (k > max_den) break;
        best = {h, k};
        if (std::abs(p - static_cast<double>(h) / static_cast<double>(k)) <= 1e-12) break;
        const double frac = x - a_real;
        if (frac < 1e-15) break;
        x = 1.0 / frac;
        h_prev2 = h_prev;
        h_prev = h;
        k_prev2 = k_prev;
        k_prev = k;
    }
    return best;
}

}  // namespace

RationalAmplitudeSpec rational_weights(std::span<const Complex> amplitudes, std::uint64_t max_denominator) {
    const auto n = amplitudes.size();
    if (n == 0) throw InvalidArgument("no amplitudes given");
    if (max_denominator < n) throw InvalidArgument("max_denominator is smaller than the number of branches");
    std::vector<double> p(n);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) total += (p[k] = std::norm(amplitudes[k]));
    if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("amplitudes are not normalized");
    for (auto& x : p) x /= total;

    RationalAmplitudeSpec spec;
    std::vector<Convergent> conv(n);
    std::uint64_t common = 1;
    bool fits = true;
    for (std::size_t k = 0; k < n && fits; ++k) {
        conv[k] = best_convergent(p[k], max_denominator);
        common = std::lcm(common, conv[k].den);
        fits = common <= max_denominator;
    }
    if (fits) {
        std::uint64_t sum = 0;
        for (std::size_t k = 0; k < n; ++k) {
            spec.numerators.push_back(conv[k].num * (common / conv[k].den));
            sum += spec.numerators.back();
        }
        spec.denominator = common;
        fits = sum == common;
    }
    if (!fits) {
        // largest remainder on the full denominator
        const auto big_m = max_denominator;
        spec.numerators.assign(n, 0);
        std::vector<std::pair<double, std::size_t>> remainder;
        std::uint64_t assigned = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const double scaled = p[k] * static_cast<double>(big_m);
            spec.numerators[k] = static_cast<std::uint64_t>(std::floor(scaled));
            assigned += spec.numerators[k];
            remainder.emplace_back(scaled - std::floor(scaled), k);
        }
        std::stable_sort(remainder.begin(), remainder.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t i = 0; assigned < big_m; ++i, ++assigned) ++spec.numerators[remainder[i % n].second];
        spec.denominator = big_m;
    }
    std::uint64_t g = spec.denominator;
    for (auto m : spec.numerators) g = std::gcd(g, m);
    for (auto& m : spec.numerators) m /= g;
    spec.denominator /= g;
    return spec;
}

BornResult born_via_envariance(std::span<const Complex> amplitudes, std::uint64_t max_denominator) {
    const RationalAmplitudeSpec weights = rational_weights(amplitudes, max_denominator);
    const auto n = weights.numerators.size();

    RationalAmplitudeSpec positive;
    std::vector<std::size_t> index_of;
    for (std::size_t k = 0; k < n; ++k) {
        if (weights.numerators[k] == 0) continue;
        positive.numerators.push_back(weights.numerators[k]);
        index_of.push_back(k);
    }
    positive.denominator = weights.denominator;

    const auto branches = positive.numerators.size();
    const auto big_m = positive.denominator;
    const auto d_c = *std::max_element(positive.numerators.begin(), positive.numerators.end());

    BornResult result;
    FinegrainResult fine;
    if (big_m <= kDenseFinegrainBranches && branches * big_m * d_c <= kDenseFinegrainDim) {
        // sum_k psi_k |k>|eps_k> with eps_k the first basis vectors of an M-dim E
        std::vector<Vector> sys(branches, Vector::Zero(static_cast<Eigen::Index>(branches)));
        std::vector<Vector> env(branches, Vector::Zero(static_cast<Eigen::Index>(big_m)));
        for (std::size_t k = 0; k < branches; ++k) {
            sys[k](static_cast<Eigen::Index>(k)) = 1.0;
            env[k](static_cast<Eigen::Index>(k)) = 1.0;
        }
        fine = finegrain(positive, sys, env);
        result.dense_verified = true;
    } else {
        fine = finegrain_by_counting(positive);
    }

    result.exact.assign(n, Rational{0, 1});
    for (std::size_t i = 0; i < branches; ++i) result.exact[index_of[i]] = fine.probabilities[i];
    for (const auto& r : result.exact) result.probabilities.push_back(r.value());
    return result;
}

}  // namespace qdarwin
