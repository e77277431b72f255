#include "qdarwin/info_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qdarwin/errors.hpp"
#include "qdarwin/parallel.hpp"
#include "qdarwin/rng.hpp"

namespace qdarwin {

namespace {

constexpr std::uint64_t kHaarStateStream = 0x48414152ULL;  // "HAAR"

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(std::span<const double> v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<bool> membership(const FragmentSpec& fragment) {
    std::vector<bool> in(fragment.n_env(), false);
    for (auto j : fragment.indices()) in[j] = true;
    return in;
}

/// Square root of a Hermitian PSD matrix; small negative eigenvalues clipped.
Matrix psd_sqrt(const Matrix& g) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(g);
    if (solver.info() != Eigen::Success) throw NumericalGuard("Gram eigensolver did not converge");
    Eigen::VectorXd ev = solver.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < kNegativeEigenvalueLimit) throw NumericalGuard("Gram matrix is not positive semidefinite");
        ev(i) = std::sqrt(std::max(ev(i), 0.0));
    }
    return solver.eigenvectors() * ev.asDiagonal() * solver.eigenvectors().adjoint();
}

std::vector<double> normalized_spectrum(const Matrix& hermitian) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalGuard("eigensolver did not converge");
    std::vector<double> ev(solver.eigenvalues().data(), solver.eigenvalues().data() + solver.eigenvalues().size());
    double total = 0.0;
    for (double& v : ev) {
        if (v < kNegativeEigenvalueLimit) throw NumericalGuard("reduced state has a negative eigenvalue");
        v = std::max(v, 0.0);
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw NumericalGuard("reduced state trace drifted from 1");
    for (double& v : ev) v /= total;
    std::sort(ev.begin(), ev.end(), std::greater<>{});
    return ev;
}

}  // namespace

// ---------------------------------------------------------------------------
// FragmentSpec

FragmentSpec::FragmentSpec(SubsystemSet indices, std::size_t n_env)
    : indices_(std::move(indices)), n_env_(n_env) {
    if (n_env_ == 0) throw InvalidArgument("fragment needs an environment of at least one subsystem");
    indices_.check_within(n_env_);
}

double FragmentSpec::fraction() const noexcept {
    return static_cast<double>(indices_.size()) / static_cast<double>(n_env_);
}

FragmentSpec FragmentSpec::complement() const { return FragmentSpec(indices_.complement(n_env_), n_env_); }

// ---------------------------------------------------------------------------
// von Neumann quantities

std::vector<double> reduced_spectrum(const BranchState& state, bool keep_system, const FragmentSpec& fragment) {
    if (fragment.n_env() != state.n_env()) throw InvalidArgument("fragment addresses a different environment size");
    if (!keep_system && fragment.size() == 0) return {1.0};

    const auto n = static_cast<Eigen::Index>(state.n_branches());
    const auto in_fragment = membership(fragment);
    const auto& psi = state.amplitudes();

    // A_kl = psi_k psi_l^* <R_l|R_k>,  G_kl = <K_k|K_l>
    Matrix a(n, n);
    Matrix g(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = 0; l < n; ++l) {
            const auto ku = static_cast<std::size_t>(k);
            const auto lu = static_cast<std::size_t>(l);
            Complex discarded = 1.0;
            Complex kept = 1.0;
            if (k != l) {
                for (std::size_t j = 0; j < state.n_env(); ++j) {
                    if (in_fragment[j])
                        kept *= state.env_overlap(ku, lu, j);
                    else
                        discarded *= state.env_overlap(lu, ku, j);
                }
                // orthonormal pointer states: <s_l|s_k> = delta_kl
                if (keep_system)
                    kept = 0.0;
                else
                    discarded = 0.0;
            }
            a(k, l) = psi[ku] * std::conj(psi[lu]) * discarded;
            g(k, l) = kept;
        }
    }
    const Matrix root = psd_sqrt(g);
    Matrix m = root * a * root;
    m = 0.5 * (m + m.adjoint()).eval();
    return normalized_spectrum(m);
}

double reduced_entropy(const BranchState& state, bool keep_system, const FragmentSpec& fragment) {
    const auto spectrum = reduced_spectrum(state, keep_system, fragment);
    return spectrum_entropy(spectrum);
}

double mutual_information(const BranchState& state, const FragmentSpec& fragment) {
    if (fragment.size() == 0) return 0.0;
    const double hs = reduced_entropy(state, true, FragmentSpec::empty(state.n_env()));
    const double hf = reduced_entropy(state, false, fragment);
    const double hsf = reduced_entropy(state, true, fragment);
    return hs + hf - hsf;
}

double mutual_information(const PureState& state, const SubsystemSet& system, const SubsystemSet& fragment) {
    system.check_within(state.num_subsystems());
    fragment.check_within(state.num_subsystems());
    std::vector<std::size_t> joint = system.indices();
    for (auto j : fragment) {
        if (system.contains(j)) throw InvalidArgument("system and fragment overlap");
        joint.push_back(j);
    }
    if (fragment.empty()) return 0.0;
    const double hs = entanglement_entropy(state, system);
    const double hf = entanglement_entropy(state, fragment);
    const double hsf = entanglement_entropy(state, SubsystemSet(std::move(joint)));
    return hs + hf - hsf;
}

// ---------------------------------------------------------------------------
// partial-information curves

PipCurve pip_curve(const BranchState& state, std::size_t n_samples, std::uint64_t seed, std::size_t threads) {
    if (n_samples == 0) throw InvalidArgument("pip_curve needs n_samples >= 1");
    const auto n_env = state.n_env();
    const auto sizes = n_env + 1;
    std::vector<double> values(sizes * n_samples, 0.0);
    parallel_for(values.size(), threads, [&](std::size_t idx) {
        const auto m = idx / n_samples;
        const auto s = idx % n_samples;
        if (m == 0) return;
        Rng rng(derive_seed(seed, m, s));
        const FragmentSpec fragment(SubsystemSet(rng.subset(n_env, m)), n_env);
        values[idx] = mutual_information(state, fragment);
    });

    PipCurve curve;
    curve.n_samples = n_samples;
    curve.seed = seed;
    curve.plateau = reduced_entropy(state, true, FragmentSpec::empty(n_env));
    for (std::size_t m = 0; m < sizes; ++m) {
        std::span<const double> row(values.data() + m * n_samples, n_samples);
        const double mean = mean_of(row);
        curve.points.push_back({m, static_cast<double>(m) / static_cast<double>(n_env), mean, stddev_of(row, mean)});
    }
    return curve;
}

std::optional<double> threshold_size(std::span<const double> mean_by_size, double target, bool* interpolated) {
    if (interpolated) *interpolated = false;
    for (std::size_t m = 1; m < mean_by_size.size(); ++m) {
        if (mean_by_size[m] < target) continue;
        if (m == 1 || mean_by_size[m] == target) return static_cast<double>(m);
        const double lo = mean_by_size[m - 1];
        const double hi = mean_by_size[m];
        if (interpolated) *interpolated = true;
        return static_cast<double>(m - 1) + (target - lo) / (hi - lo);
    }
    return std::nullopt;
}

RedundancyResult redundancy_from_curve(const PipCurve& curve, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
    if (curve.plateau <= 1e-6) throw InvalidArgument("no classical information to be redundant (H_S ~ 0)");
    if (curve.points.size() < 2) throw InvalidArgument("curve has no fragment sizes");
    std::vector<double> means;
    for (const auto& p : curve.points) means.push_back(p.mean);
    RedundancyResult r;
    r.delta = delta;
    const auto m = threshold_size(means, (1.0 - delta) * curve.plateau, &r.interpolated);
    if (!m) throw NumericalGuard("partial-information curve never reaches (1 - delta) H_S");
    const auto n_env = static_cast<double>(curve.points.size() - 1);
    r.m_delta = *m;
    r.f_delta = *m / n_env;
    r.R_delta = 1.0 / r.f_delta;
    return r;
}

RedundancyResult redundancy(const BranchState& state, double delta, std::size_t n_samples, std::uint64_t seed,
                            std::size_t threads) {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
    const double hs = reduced_entropy(state, true, FragmentSpec::empty(state.n_env()));
    if (hs <= 1e-6) throw InvalidArgument("no classical information to be redundant (H_S ~ 0)");
    return redundancy_from_curve(pip_curve(state, n_samples, seed, threads), delta);
}

PipCurve haar_pip(std::size_t n_system_qubits, std::size_t n_env_qubits, std::size_t n_states,
                  std::size_t n_fragment_samples, std::uint64_t seed, std::size_t threads) {
    if (n_system_qubits == 0 || n_env_qubits == 0) throw InvalidArgument("haar_pip needs system and environment qubits");
    if (n_states == 0 || n_fragment_samples == 0) throw InvalidArgument("haar_pip needs positive sample counts");
    const auto total = n_system_qubits + n_env_qubits;
    if (total > kDenseSubsystemLimit)
        throw NumericalGuard("haar_pip on " + std::to_string(total) + " qubits exceeds the dense limit");

    const auto system = SubsystemSet::range(0, n_system_qubits);
    const auto sizes = n_env_qubits + 1;
    const auto per_state = sizes * n_fragment_samples;
    std::vector<double> values(n_states * per_state, 0.0);
    std::vector<double> hs(n_states, 0.0);

    parallel_for(n_states, threads, [&](std::size_t i) {
        const auto psi = haar_random_state(total, derive_seed(seed, kHaarStateStream, i));
        hs[i] = entanglement_entropy(psi, system);
        for (std::size_t m = 1; m < sizes; ++m) {
            for (std::size_t s = 0; s < n_fragment_samples; ++s) {
                Rng rng(derive_seed(seed, m, s));
                auto picks = rng.subset(n_env_qubits, m);
                for (auto& p : picks) p += n_system_qubits;
                values[i * per_state + m * n_fragment_samples + s] =
                    mutual_information(psi, system, SubsystemSet(std::move(picks)));
            }
        }
    });

    PipCurve curve;
    curve.n_samples = n_states * n_fragment_samples;
    curve.seed = seed;
    curve.plateau = mean_of(hs);
    std::vector<double> row(n_states * n_fragment_samples);
    for (std::size_t m = 0; m < sizes; ++m) {
        for (std::size_t i = 0; i < n_states; ++i)
            for (std::size_t s = 0; s < n_fragment_samples; ++s)
                row[i * n_fragment_samples + s] = values[i * per_state + m * n_fragment_samples + s];
        const double mean = mean_of(row);
        curve.points.push_back({m, static_cast<double>(m) / static_cast<double>(n_env_qubits), mean,
                                stddev_of(row, mean)});
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Shannon (observable-resolved) information

Eigen::Matrix2cd MeasurementScheme::basis(const BranchState& state, std::size_t j) const {
    if (j >= state.n_env()) throw InvalidArgument("environment qubit index out of range");
    if (kind == Kind::random_bases) {
        Rng rng(derive_seed(seed, j));
        return haar_random_unitary(2, rng);
    }
    if (state.n_branches() == 1) return Eigen::Matrix2cd::Identity();
    if (state.n_branches() != 2)
        throw InvalidArgument("per-qubit-optimal measurement is defined for two branches only");
    const auto& psi = state.amplitudes();
    const QubitKet& e0 = state.env_ket(0, j);
    const QubitKet& e1 = state.env_ket(1, j);
    const Eigen::Matrix2cd diff = std::norm(psi[0]) * e0 * e0.adjoint() - std::norm(psi[1]) * e1 * e1.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> solver(diff);
    return solver.eigenvectors();
}

double observable_entropy(const BranchState& state, double mu) {
    if (state.system_dim() != 2) throw InvalidArgument("sigma(mu) needs a two-level system");
    const Matrix rho = system_density(state).matrix();
    const auto [up, down] = Observable{mu}.eigenstates();
    const double p0 = std::real(Vector(up).dot(rho * Vector(up)));
    const double p1 = std::real(Vector(down).dot(rho * Vector(down)));
    const double p[] = {p0, p1};
    return shannon_entropy(p);
}

namespace {

struct OutcomeAccumulator {
    double h_joint = 0.0;
    double h_fragment = 0.0;
    double p_system[2] = {0.0, 0.0};

    static double plogp(double p) {
        if (p < -1e-12) throw NumericalGuard("negative outcome probability " + std::to_string(p));
        return p > 0.0 ? -p * std::log2(p) : 0.0;
    }

    void add(double p0, double p1) {
        h_joint += plogp(p0) + plogp(p1);
        h_fragment += plogp(p0 + p1);
        p_system[0] += std::max(p0, 0.0);
        p_system[1] += std::max(p1, 0.0);
    }
};

}  // namespace

double shannon_mi_observable(const BranchState& state, double mu, const FragmentSpec& fragment,
                             const MeasurementScheme& scheme) {
    if (state.system_dim() != 2) throw InvalidArgument("sigma(mu) needs a two-level system");
    if (fragment.n_env() != state.n_env()) throw InvalidArgument("fragment addresses a different environment size");
    if (fragment.size() > kShannonFragmentLimit)
        throw NumericalGuard("fragment of " + std::to_string(fragment.size()) + " qubits exceeds the outcome limit of " +
                             std::to_string(kShannonFragmentLimit));
    if (fragment.size() == 0) return 0.0;

    const auto n = state.n_branches();
    const auto pairs = n * n;
    const auto in_fragment = membership(fragment);
    const auto& psi = state.amplitudes();
    const auto [up, down] = Observable{mu}.eigenstates();
    const Eigen::Vector2cd outcomes[2] = {up, down};

    // coef[i][k*n+l] = psi_k psi_l^* <v_i|s_k> <s_l|v_i> <R_l|R_k>
    std::vector<Complex> coef[2];
    for (int i = 0; i < 2; ++i) {
        coef[i].resize(pairs);
        for (std::size_t k = 0; k < n; ++k) {
            const Complex ck = Vector(outcomes[i]).dot(state.system_state(k));
            for (std::size_t l = 0; l < n; ++l) {
                const Complex cl = Vector(outcomes[i]).dot(state.system_state(l));
                Complex rest = 1.0;
                for (std::size_t j = 0; j < state.n_env(); ++j)
                    if (!in_fragment[j]) rest *= state.env_overlap(l, k, j);
                coef[i][k * n + l] = psi[k] * std::conj(psi[l]) * ck * std::conj(cl) * rest;
            }
        }
    }

    // amp[q][b][k] = <b_q|e_k^(q)>
    const auto m = fragment.size();
    std::vector<std::vector<std::vector<Complex>>> amp(m);
    for (std::size_t q = 0; q < m; ++q) {
        const auto j = fragment.indices().indices()[q];
        const Eigen::Matrix2cd b = scheme.basis(state, j);
        amp[q].assign(2, std::vector<Complex>(n));
        for (int outcome = 0; outcome < 2; ++outcome)
            for (std::size_t k = 0; k < n; ++k) amp[q][outcome][k] = b.col(outcome).dot(state.env_ket(k, j));
    }

    // depth-first enumeration of fragment outcomes with running pair products
    std::vector<std::vector<Complex>> level(m + 1, std::vector<Complex>(pairs));
    std::fill(level[0].begin(), level[0].end(), Complex(1.0));
    OutcomeAccumulator acc;
    std::vector<int> choice(m, -1);
    std::size_t depth = 0;
    while (true) {
        if (depth == m) {
            double p[2];
            for (int i = 0; i < 2; ++i) {
                Complex s = 0.0;
                for (std::size_t kl = 0; kl < pairs; ++kl) s += coef[i][kl] * level[m][kl];
                p[i] = s.real();
            }
            acc.add(p[0], p[1]);
            if (m == 0) break;
            --depth;
            continue;
        }
        if (++choice[depth] > 1) {
            choice[depth] = -1;
            if (depth == 0) break;
            --depth;
            continue;
        }
        const auto& a = amp[depth][static_cast<std::size_t>(choice[depth])];
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t l = 0; l < n; ++l)
                level[depth + 1][k * n + l] = level[depth][k * n + l] * a[k] * std::conj(a[l]);
        ++depth;
    }

    const double h_system = OutcomeAccumulator::plogp(acc.p_system[0]) + OutcomeAccumulator::plogp(acc.p_system[1]);
    return h_system + acc.h_fragment - acc.h_joint;
}

std::vector<RidgeRow> redundancy_ridge(const CouplingSet& couplings, std::span<const double> action_grid,
                                       std::span<const double> mu_grid, const RidgeOptions& options) {
    if (action_grid.empty() || mu_grid.empty()) throw InvalidArgument("redundancy_ridge needs nonempty grids");
    if (!(options.delta > 0.0 && options.delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
    if (options.n_samples == 0) throw InvalidArgument("redundancy_ridge needs n_samples >= 1");
    couplings.validate();
    const auto n_env = couplings.g.size();
    const auto max_m = std::min({options.max_fragment, n_env, kShannonFragmentLimit});

    // the same fragments are used for every (action, mu) cell
    std::vector<std::vector<FragmentSpec>> fragments(max_m + 1);
    for (std::size_t m = 1; m <= max_m; ++m)
        for (std::size_t s = 0; s < options.n_samples; ++s) {
            Rng rng(derive_seed(options.seed, m, s));
            fragments[m].emplace_back(SubsystemSet(rng.subset(n_env, m)), n_env);
        }

    std::vector<RidgeRow> rows;
    for (double a : action_grid) {
        const auto state = ising_evolve(couplings.with_action(a), plus_state());
        for (double mu : mu_grid) {
            RidgeRow row;
            row.mu = mu;
            row.action = a;
            row.f_delta = std::numeric_limits<double>::quiet_NaN();
            row.H_mu = observable_entropy(state, mu);
            if (row.H_mu > 1e-6) {
                const double target = (1.0 - options.delta) * row.H_mu;
                std::vector<double> means{0.0};
                std::vector<double> samples(options.n_samples);
                for (std::size_t m = 1; m <= max_m; ++m) {
                    parallel_for(options.n_samples, options.threads, [&](std::size_t s) {
                        samples[s] = shannon_mi_observable(state, mu, fragments[m][s], options.scheme);
                    });
                    means.push_back(mean_of(samples));
                    if (const auto hit = threshold_size(means, target)) {
                        row.reached = true;
                        row.m_delta = *hit;
                        row.f_delta = *hit / static_cast<double>(n_env);
                        row.R_delta = 1.0 / row.f_delta;
                        break;
                    }
                }
            }
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace qdarwin
