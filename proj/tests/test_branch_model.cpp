#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracle.hpp"
#include "qdarwin/branch_model.hpp"
#include "qdarwin/errors.hpp"

using namespace qdarwin;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Vector2cd zero_ket() { return {1.0, 0.0}; }
Eigen::Vector2cd one_ket() { return {0.0, 1.0}; }

Vector as_vector(const Eigen::Vector2cd& v) { return Vector(v); }

CouplingSet fixed(std::vector<double> g, double t) {
    CouplingSet c;
    c.g = std::move(g);
    c.t = t;
    return c;
}

}  // namespace

TEST(BranchState, Validation) {
    const double r = 1.0 / std::sqrt(2.0);
    std::vector<std::vector<QubitKet>> env{{zero_ket()}, {one_ket()}};
    EXPECT_NO_THROW(BranchState({r, r}, {as_vector(zero_ket()), as_vector(one_ket())}, env));
    EXPECT_THROW(BranchState({1.0, 1.0}, {as_vector(zero_ket()), as_vector(one_ket())}, env), InvalidArgument);
    EXPECT_THROW(BranchState({r, r}, {as_vector(zero_ket()), as_vector(plus_state())}, env), InvalidArgument);
    std::vector<std::vector<QubitKet>> ragged{{zero_ket()}, {}};
    EXPECT_THROW(BranchState({r, r}, {as_vector(zero_ket()), as_vector(one_ket())}, ragged), InvalidArgument);
    std::vector<std::vector<QubitKet>> unnormalized{{zero_ket()}, {QubitKet(1.0, 1.0)}};
    EXPECT_THROW(BranchState({r, r}, {as_vector(zero_ket()), as_vector(one_ket())}, unnormalized), InvalidArgument);
}

TEST(Couplings, SampleRangeAndDeterminism) {
    const auto a = sample_couplings(100, 3);
    const auto b = sample_couplings(100, 3);
    EXPECT_EQ(a.g, b.g);
    for (double g : a.g) {
        EXPECT_GT(g, 0.0);
        EXPECT_LE(g, 1.0);
    }
    EXPECT_THROW(sample_couplings(0, 1), InvalidArgument);
}

TEST(Couplings, UniformMean) {
    const auto c = sample_couplings(10000, 17);
    EXPECT_NEAR(c.mean_coupling(), 0.5, 0.02);
}

TEST(Couplings, ActionRoundTrip) {
    const auto c = sample_couplings(30, 4).with_action(1.7);
    EXPECT_NEAR(c.action(), 1.7, 1e-12);
    EXPECT_NEAR(c.action(), c.t * c.mean_coupling(), 1e-12);
    CouplingSet bad = fixed({0.5, 0.0}, 1.0);
    EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Observable, Eigenstates) {
    for (double mu : {0.0, 0.3, kPi / 4, kPi / 2}) {
        const Observable o{mu};
        const Matrix m = o.matrix();
        EXPECT_LT((m - m.adjoint()).norm(), 1e-15);
        const auto [plus, minus] = o.eigenstates();
        EXPECT_LT((m * Vector(plus) - Vector(plus)).norm(), 1e-14);
        EXPECT_LT((m * Vector(minus) + Vector(minus)).norm(), 1e-14);
    }
}

TEST(IsingEvolve, ZeroTimeIsProduct) {
    const auto s = ising_evolve(fixed({0.3, 0.9}, 0.0), plus_state());
    ASSERT_EQ(s.n_branches(), 2U);
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_LT((s.env_ket(0, j) - zero_ket()).norm(), 1e-15);
        EXPECT_LT((s.env_ket(1, j) - zero_ket()).norm(), 1e-15);
    }
    const auto rho = system_density(s);
    EXPECT_NEAR(von_neumann_entropy(rho), 0.0, 1e-12);
}

TEST(IsingEvolve, QuarterTurnGivesOrthogonalRecords) {
    const auto s = ising_evolve(fixed({1.0}, kPi / 4), plus_state());
    const double r = 1.0 / std::sqrt(2.0);
    EXPECT_LT((s.env_ket(0, 0) - QubitKet(r, r)).norm(), 1e-15);
    EXPECT_LT((s.env_ket(1, 0) - QubitKet(r, -r)).norm(), 1e-15);
    EXPECT_NEAR(std::abs(s.env_overlap(0, 1, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(decoherence_factor(s, {0}, {0, 1})), 0.0, 1e-15);
}

TEST(IsingEvolve, MatchesMatrixExponential) {
    Rng rng(8);
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
        const auto c = sample_couplings(4, trial).with_action(0.3 + rng.uniform() * 2.0);
        Eigen::Vector2cd psi0(rng.normal(), Complex(rng.normal(), rng.normal()));
        psi0.normalize();
        const auto dense = to_dense(ising_evolve(c, psi0));
        const auto want = oracle::ising_dense(c.g, c.t, Vector(psi0));
        // both are exact up to rounding; there is no global phase freedom here
        EXPECT_LT((dense.amplitudes() - want).norm(), 1e-10);
    }
}

TEST(IsingEvolve, EvolutionComposes) {
    const auto c = sample_couplings(5, 2);
    const auto full = to_dense(ising_evolve(fixed(c.g, 1.3), plus_state()));
    // U(t2) applied to the dense result at t1
    const auto half = oracle::ising_dense(c.g, 0.5, Vector(plus_state()));
    oracle::Mat h = oracle::Mat::Zero(64, 64);
    for (std::size_t k = 0; k < 5; ++k) h += c.g[k] * oracle::embed(oracle::pz(), 0, 6) * oracle::embed(oracle::py(), k + 1, 6);
    const oracle::Vec composed = (oracle::C(0, -0.8) * h).exp() * half;
    EXPECT_LT((full.amplitudes() - composed).norm(), 1e-10);
}

TEST(IsingEvolve, PointerStatesStayProduct) {
    const auto c = sample_couplings(12, 5).with_action(3.0);
    for (const auto& init : {zero_ket(), one_ket()}) {
        const auto s = ising_evolve(c, init);
        EXPECT_EQ(s.n_branches(), 1U);
        EXPECT_NEAR(von_neumann_entropy(system_density(s)), 0.0, 1e-12);
    }
}

TEST(DecoherenceFactor, EmptyMonotoneAndErrors) {
    const auto s = ising_evolve(sample_couplings(10, 6).with_action(1.0), plus_state());
    EXPECT_EQ(decoherence_factor(s, {}, {0, 1}), Complex(1.0));
    std::vector<std::size_t> grow;
    double last = 1.0;
    for (std::size_t j = 0; j < 10; ++j) {
        grow.push_back(j);
        const double now = std::abs(decoherence_factor(s, SubsystemSet(grow), {0, 1}));
        EXPECT_LE(now, last + 1e-15);
        last = now;
    }
    EXPECT_THROW(decoherence_factor(s, {0}, {1, 1}), InvalidArgument);
}

TEST(SystemDensity, OffDiagonalIsDecoherenceFactor) {
    Eigen::Vector2cd psi0(0.6, Complex(0.0, 0.8));
    const auto s = ising_evolve(sample_couplings(7, 9).with_action(0.7), psi0);
    const auto rho = system_density(s);
    const Complex gamma = decoherence_factor(s, SubsystemSet::range(0, 7), {0, 1});
    const Complex want = s.amplitudes()[0] * std::conj(s.amplitudes()[1]) * std::conj(gamma);
    EXPECT_LT(std::abs(rho.matrix()(0, 1) - want), 1e-12);
    const auto dense = partial_trace(to_dense(s), {0});
    EXPECT_LT((rho.matrix() - dense.matrix()).norm(), 1e-10);
}

TEST(ToDense, NormAndGuard) {
    const auto s = ising_evolve(sample_couplings(9, 1).with_action(1.0), plus_state());
    EXPECT_NEAR(to_dense(s).amplitudes().norm(), 1.0, 1e-10);
    EXPECT_THROW(to_dense(s, 5), NumericalGuard);
}

TEST(ToDense, OrthogonalRecordsGiveGhz) {
    const auto s = ising_evolve(fixed({1.0, 1.0, 1.0}, kPi / 4), plus_state());
    const auto d = to_dense(s);
    // |0>|+++> + |1>|---> is GHZ up to a local Hadamard on each env qubit
    const auto spec = schmidt_spectrum(d, {0});
    EXPECT_NEAR(spec[0], 0.5, 1e-14);
    EXPECT_NEAR(spec[1], 0.5, 1e-14);
    EXPECT_NEAR(entanglement_entropy(d, {1}), 1.0, 1e-12);
}

TEST(Sieve, PointerCandidateStaysPure) {
    const auto c = sample_couplings(10, 3);
    const std::vector<double> mus{0.0, kPi / 8, kPi / 4, kPi / 2};
    std::vector<double> times;
    for (int i = 0; i <= 10; ++i) times.push_back(0.3 * i);
    const auto r = predictability_sieve(c, mus, times);
    for (double h : r.trajectories[0].entropy) EXPECT_EQ(h, 0.0);
    EXPECT_EQ(r.ranking.front(), 0U);
}

TEST(Sieve, DenseAndBranchBackendsAgree) {
    const auto c = sample_couplings(8, 4);
    const std::vector<double> mus{0.0, 0.2, 0.7, kPi / 2};
    const std::vector<double> times{0.0, 0.5, 1.5, 3.0};
    const auto b = predictability_sieve(c, mus, times, SieveBackend::branch);
    const auto d = predictability_sieve(c, mus, times, SieveBackend::dense);
    for (std::size_t i = 0; i < mus.size(); ++i)
        for (std::size_t k = 0; k < times.size(); ++k)
            EXPECT_NEAR(b.trajectories[i].entropy[k], d.trajectories[i].entropy[k], 1e-10);
    EXPECT_EQ(b.ranking, d.ranking);
}

TEST(Sieve, ComplementaryObservableDecoheresFully) {
    const auto c = sample_couplings(8, 11);
    const std::vector<double> mus{kPi / 2};
    const std::vector<double> times{8.0 / c.mean_coupling()};
    const auto r = predictability_sieve(c, mus, times, SieveBackend::dense);
    EXPECT_GT(r.trajectories[0].entropy[0], 0.9);
}

TEST(Sieve, RankingMonotoneInMu) {
    const auto c = sample_couplings(8, 2);
    std::vector<double> mus;
    for (int i = 0; i <= 12; ++i) mus.push_back(kPi / 2 * i / 12.0);
    std::vector<double> times;
    for (int i = 0; i <= 20; ++i) times.push_back(0.1 * i / c.mean_coupling());
    const auto r = predictability_sieve(c, mus, times, SieveBackend::dense);
    for (std::size_t i = 0; i < mus.size(); ++i) EXPECT_EQ(r.ranking[i], i);
}

TEST(Sieve, EmptyGridRejected) {
    const auto c = sample_couplings(3, 1);
    const std::vector<double> none;
    const std::vector<double> one{0.0};
    EXPECT_THROW(predictability_sieve(c, none, one), InvalidArgument);
    EXPECT_THROW(predictability_sieve(c, one, none), InvalidArgument);
}
