#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "oracle.hpp"
#include "qdarwin/branch_model.hpp"
#include "qdarwin/errors.hpp"
#include "qdarwin/info_metrics.hpp"

using namespace qdarwin;

namespace {

constexpr double kPi = std::numbers::pi;

/// (|0>|0...0> + |1>|1...1>)/sqrt(2): every env qubit is a perfect record.
BranchState perfect_record(std::size_t n) {
    const double r = 1.0 / std::sqrt(2.0);
    std::vector<std::vector<QubitKet>> env(2);
    for (std::size_t j = 0; j < n; ++j) {
        env[0].emplace_back(1.0, 0.0);
        env[1].emplace_back(0.0, 1.0);
    }
    Vector s0 = Vector::Zero(2), s1 = Vector::Zero(2);
    s0(0) = 1.0;
    s1(1) = 1.0;
    return BranchState({r, r}, {s0, s1}, env);
}

std::vector<std::size_t> bits_of(std::size_t mask, std::size_t n) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
        if (mask >> j & 1U) out.push_back(j);
    return out;
}

std::vector<std::size_t> shifted(const std::vector<std::size_t>& v) {
    std::vector<std::size_t> out;
    for (auto x : v) out.push_back(x + 1);
    return out;
}

}  // namespace

TEST(FragmentSpec, Basics) {
    const FragmentSpec f({1, 3}, 5);
    EXPECT_DOUBLE_EQ(f.fraction(), 0.4);
    EXPECT_EQ(f.complement().indices().indices(), (std::vector<std::size_t>{0, 2, 4}));
    EXPECT_THROW(FragmentSpec({5}, 5), InvalidArgument);
    EXPECT_EQ(FragmentSpec::whole(4).size(), 4U);
}

TEST(ReducedSpectrum, TrivialCases) {
    const auto s = perfect_record(3);
    const auto a = reduced_spectrum(s, true, FragmentSpec::empty(3));
    ASSERT_EQ(a.size(), 2U);
    EXPECT_NEAR(a[0], 0.5, 1e-15);
    EXPECT_NEAR(a[1], 0.5, 1e-15);
    const auto b = reduced_spectrum(ising_evolve(sample_couplings(6, 1).with_action(1.0), plus_state()), true,
                                    FragmentSpec::whole(6));
    ASSERT_GE(b.size(), 1U);
    EXPECT_NEAR(b[0], 1.0, 1e-12);
}

TEST(ReducedSpectrum, MatchesDenseOracle) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto s = ising_evolve(sample_couplings(8, seed).with_action(0.8), plus_state());
        const auto psi = to_dense(s).amplitudes();
        Rng rng(seed);
        const auto frag = rng.subset(8, 3);
        for (bool keep_system : {false, true}) {
            auto keep = shifted(frag);
            if (keep_system) keep.insert(keep.begin(), 0);
            Eigen::SelfAdjointEigenSolver<oracle::Mat> es(oracle::reduce(psi, keep, 9));
            std::vector<double> want;
            for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) want.push_back(es.eigenvalues()(i));
            std::sort(want.rbegin(), want.rend());
            const auto got = reduced_spectrum(s, keep_system, FragmentSpec(SubsystemSet(frag), 8));
            for (std::size_t i = 0; i < want.size(); ++i)
                EXPECT_NEAR(i < got.size() ? got[i] : 0.0, want[i], 1e-10);
        }
    }
}

TEST(MutualInformation, KnownValues) {
    CouplingSet c;
    c.g = {1.0};
    c.t = kPi / 4;
    const auto s = ising_evolve(c, plus_state());
    EXPECT_NEAR(mutual_information(s, FragmentSpec::whole(1)), 2.0, 1e-12);
    EXPECT_NEAR(mutual_information(s, FragmentSpec::empty(1)), 0.0, 1e-15);
}

TEST(MutualInformation, WholeEnvironmentIsTwiceSystemEntropy) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Eigen::Vector2cd psi0(0.8, Complex(0.36, 0.48));
        const auto s = ising_evolve(sample_couplings(30, seed).with_action(0.2 + 0.3 * seed), psi0);
        const double hs = reduced_entropy(s, true, FragmentSpec::empty(30));
        EXPECT_NEAR(mutual_information(s, FragmentSpec::whole(30)), 2.0 * hs, 1e-9);
    }
}

TEST(MutualInformation, BranchPathMatchesDenseOracleOnAllFragments) {
    const std::size_t n = 6;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Eigen::Vector2cd psi0(std::sqrt(0.3), Complex(0.0, std::sqrt(0.7)));
        const auto s = ising_evolve(sample_couplings(n, seed).with_action(0.9), psi0);
        const auto psi = to_dense(s).amplitudes();
        for (std::size_t mask = 0; mask < (std::size_t(1) << n); ++mask) {
            const auto frag = bits_of(mask, n);
            const double got = mutual_information(s, FragmentSpec(SubsystemSet(frag), n));
            const double want = frag.empty() ? 0.0 : oracle::mutual_information(psi, {0}, shifted(frag), n + 1);
            EXPECT_NEAR(got, want, 1e-10) << "mask " << mask;
        }
    }
}

TEST(MutualInformation, DenseOverloadMatchesOracle) {
    const auto s = haar_random_state(6, 4);
    EXPECT_NEAR(mutual_information(s, {0, 1}, {3, 5}), oracle::mutual_information(s.amplitudes(), {0, 1}, {3, 5}, 6),
                1e-10);
    EXPECT_THROW(mutual_information(s, {0, 1}, {1, 5}), InvalidArgument);
}

TEST(MutualInformation, ThreeBranchStateMatchesDense) {
    // qutrit system with three branches and non-orthogonal records
    const double a = 1.0 / std::sqrt(3.0);
    std::vector<Vector> sys;
    for (int k = 0; k < 3; ++k) sys.push_back(Vector::Unit(3, k));
    Rng rng(2);
    std::vector<std::vector<QubitKet>> env(3);
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 4; ++j) env[k].push_back(haar_random_unitary(2, rng).col(0));
    const BranchState s({a, Complex(0, a), -a}, sys, env);
    const auto d = to_dense(s);
    for (std::size_t mask = 1; mask < 16; ++mask) {
        std::vector<std::size_t> frag = bits_of(mask, 4);
        const double want = mutual_information(d, {0}, SubsystemSet(shifted(frag)));
        EXPECT_NEAR(mutual_information(s, FragmentSpec(SubsystemSet(frag), 4)), want, 1e-10);
    }
}

TEST(PipCurve, PerfectRecordBruteForce) {
    const auto s = perfect_record(10);
    for (std::size_t mask = 1; mask < 1024; ++mask) {
        const auto frag = bits_of(mask, 10);
        const double want = frag.size() == 10 ? 2.0 : 1.0;
        EXPECT_NEAR(mutual_information(s, FragmentSpec(SubsystemSet(frag), 10)), want, 1e-12);
    }
    const auto curve = pip_curve(s, 20, 5);
    ASSERT_EQ(curve.points.size(), 11U);
    EXPECT_EQ(curve.points[0].mean, 0.0);
    for (std::size_t m = 1; m <= 9; ++m) EXPECT_NEAR(curve.points[m].mean, 1.0, 1e-12);
    EXPECT_NEAR(curve.points[10].mean, 2.0, 1e-12);
    EXPECT_NEAR(curve.plateau, 1.0, 1e-12);
}

TEST(PipCurve, ComplementaryPairsSumToTwiceEntropy) {
    const auto s = ising_evolve(sample_couplings(50, 3).with_action(1.0), plus_state());
    const double hs = reduced_entropy(s, true, FragmentSpec::empty(50));
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const FragmentSpec f(SubsystemSet(rng.subset(50, 1 + rng.below(49))), 50);
        EXPECT_NEAR(mutual_information(s, f) + mutual_information(s, f.complement()), 2.0 * hs, 1e-9);
    }
}

TEST(PipCurve, DeterministicAndThreadIndependent) {
    const auto s = ising_evolve(sample_couplings(20, 1).with_action(1.0), plus_state());
    const auto a = pip_curve(s, 15, 99, 1);
    const auto b = pip_curve(s, 15, 99, 4);
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t m = 0; m < a.points.size(); ++m) {
        EXPECT_EQ(a.points[m].mean, b.points[m].mean);
        EXPECT_EQ(a.points[m].stddev, b.points[m].stddev);
    }
    EXPECT_THROW(pip_curve(s, 0, 1), InvalidArgument);
}

TEST(PipCurve, MonotoneInExpectation) {
    const auto s = ising_evolve(sample_couplings(40, 8).with_action(1.0), plus_state());
    const auto c = pip_curve(s, 100, 3);
    for (std::size_t m = 1; m < c.points.size(); ++m) EXPECT_GE(c.points[m].mean, c.points[m - 1].mean - 0.02);
}

TEST(ThresholdSize, InterpolationRules) {
    bool interp = false;
    const std::vector<double> curve{0.0, 0.5, 0.8, 1.0};
    auto m = threshold_size(curve, 0.9, &interp);
    ASSERT_TRUE(m);
    EXPECT_NEAR(*m, 2.5, 1e-15);
    EXPECT_TRUE(interp);
    m = threshold_size(curve, 0.8, &interp);
    EXPECT_NEAR(*m, 2.0, 1e-15);
    EXPECT_FALSE(interp);
    m = threshold_size(curve, 0.3, &interp);
    EXPECT_NEAR(*m, 1.0, 1e-15);
    EXPECT_FALSE(threshold_size(curve, 1.5));
}

TEST(Redundancy, PerfectRecord) {
    const auto r = redundancy(perfect_record(10), 0.1, 10, 1);
    EXPECT_NEAR(r.f_delta, 0.1, 1e-12);
    EXPECT_NEAR(r.R_delta, 10.0, 1e-12);
    EXPECT_NEAR(r.R_delta * r.f_delta, 1.0, 1e-12);
}

TEST(Redundancy, DeltaNearOneGivesSmallestFraction) {
    const auto s = ising_evolve(sample_couplings(30, 2).with_action(1.0), plus_state());
    const auto r = redundancy(s, 1.0 - 1e-9, 20, 1);
    EXPECT_NEAR(r.f_delta, 1.0 / 30.0, 1e-12);
    EXPECT_NEAR(r.R_delta, 30.0, 1e-9);
}

TEST(Redundancy, Errors) {
    const auto pointer = ising_evolve(sample_couplings(10, 2).with_action(1.0), Eigen::Vector2cd(1.0, 0.0));
    EXPECT_THROW(redundancy(pointer, 0.1, 10, 1), InvalidArgument);
    EXPECT_THROW(redundancy(perfect_record(4), 0.0, 10, 1), InvalidArgument);
    EXPECT_THROW(redundancy(perfect_record(4), 1.0, 10, 1), InvalidArgument);
}

TEST(Redundancy, InterpolatedBetweenSizes) {
    const auto s = ising_evolve(sample_couplings(50, 1).with_action(1.0), plus_state());
    const auto curve = pip_curve(s, 50, 4);
    const auto r = redundancy_from_curve(curve, 0.1);
    const double target = 0.9 * curve.plateau;
    const auto lo = static_cast<std::size_t>(std::floor(r.m_delta));
    EXPECT_LT(curve.points[lo].mean, target + 1e-12);
    EXPECT_GE(curve.points[lo + (r.interpolated ? 1 : 0)].mean, target - 1e-12);
    EXPECT_NEAR(r.R_delta, 1.0 / r.f_delta, 1e-12);
}

TEST(HaarPip, PurityEndpointAndAntisymmetry) {
    const auto c = haar_pip(1, 7, 5, 10, 3);
    ASSERT_EQ(c.points.size(), 8U);
    EXPECT_NEAR(c.points.back().mean, 2.0 * c.plateau, 1e-9);
    EXPECT_EQ(c.points.front().mean, 0.0);
    const auto s = haar_random_state(8, 12);
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto f = rng.subset(7, 1 + rng.below(6));
        const auto fs = SubsystemSet(shifted(f));
        const auto rest = FragmentSpec(SubsystemSet(f), 7).complement();
        const double hs = entanglement_entropy(s, {0});
        EXPECT_NEAR(mutual_information(s, {0}, fs) + mutual_information(s, {0}, SubsystemSet(shifted(rest.indices().indices()))),
                    2.0 * hs, 1e-9);
    }
}

TEST(HaarPip, SmallFragmentsCarryLittle) {
    const auto c = haar_pip(1, 11, 10, 20, 7);
    for (std::size_t m = 1; m <= 3; ++m) EXPECT_LT(c.points[m].mean, 0.1);
    EXPECT_GT(c.points[11].mean, 1.9);
}

TEST(HaarPip, GuardAndThreads) {
    EXPECT_THROW(haar_pip(1, 30, 1, 1, 1), NumericalGuard);
    const auto a = haar_pip(1, 5, 4, 6, 2, 1);
    const auto b = haar_pip(1, 5, 4, 6, 2, 3);
    for (std::size_t m = 0; m < a.points.size(); ++m) EXPECT_EQ(a.points[m].mean, b.points[m].mean);
}

TEST(MeasurementScheme, OptimalBasisDiagonalizesHelstromOperator) {
    Eigen::Vector2cd psi0(0.6, 0.8);
    const auto s = ising_evolve(sample_couplings(5, 3).with_action(0.7), psi0);
    const auto scheme = MeasurementScheme::per_qubit_optimal();
    for (std::size_t j = 0; j < 5; ++j) {
        const Eigen::Matrix2cd b = scheme.basis(s, j);
        EXPECT_LT((b.adjoint() * b - Eigen::Matrix2cd::Identity()).norm(), 1e-12);
        const Eigen::Matrix2cd gamma = std::norm(s.amplitudes()[0]) * s.env_ket(0, j) * s.env_ket(0, j).adjoint() -
                                       std::norm(s.amplitudes()[1]) * s.env_ket(1, j) * s.env_ket(1, j).adjoint();
        const Eigen::Matrix2cd d = b.adjoint() * gamma * b;
        EXPECT_LT(std::abs(d(0, 1)), 1e-12);
    }
}

TEST(MeasurementScheme, RandomBasesStablePerQubit) {
    const auto s = perfect_record(4);
    const auto scheme = MeasurementScheme::random_bases(5);
    EXPECT_EQ(scheme.basis(s, 2), scheme.basis(s, 2));
    EXPECT_NE(scheme.basis(s, 2), scheme.basis(s, 3));
}

TEST(ShannonMi, TrivialCases) {
    const auto s = perfect_record(5);
    EXPECT_NEAR(shannon_mi_observable(s, 0.0, FragmentSpec({2}, 5)), 1.0, 1e-12);
    EXPECT_NEAR(shannon_mi_observable(s, 0.0, FragmentSpec::empty(5)), 0.0, 1e-15);
    EXPECT_NEAR(observable_entropy(s, 0.0), 1.0, 1e-15);
}

TEST(ShannonMi, MatchesDenseOracle) {
    const std::size_t n = 6;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        Eigen::Vector2cd psi0(std::sqrt(0.35), Complex(0.0, std::sqrt(0.65)));
        const auto s = ising_evolve(sample_couplings(n, seed).with_action(0.4 + 0.4 * seed), psi0);
        const auto psi = to_dense(s).amplitudes();
        for (const auto& scheme : {MeasurementScheme::per_qubit_optimal(), MeasurementScheme::random_bases(seed)}) {
            for (double mu : {0.0, 0.4, kPi / 4, kPi / 2}) {
                const auto [plus, minus] = Observable{mu}.eigenstates();
                oracle::Mat bs(2, 2);
                bs.col(0) = plus;
                bs.col(1) = minus;
                for (std::size_t mask : {1UL, 6UL, 21UL, 63UL}) {
                    const auto frag = bits_of(mask, n);
                    std::vector<oracle::Mat> bf;
                    for (auto j : frag) bf.push_back(scheme.basis(s, j));
                    const double want = oracle::shannon_mi(psi, n + 1, bs, shifted(frag), bf);
                    const double got = shannon_mi_observable(s, mu, FragmentSpec(SubsystemSet(frag), n), scheme);
                    EXPECT_NEAR(got, want, 1e-10) << "mu " << mu << " mask " << mask;
                }
            }
        }
    }
}

TEST(ShannonMi, ComplementaryObservableLearnsLittle) {
    const auto s = ising_evolve(sample_couplings(50, 1).with_action(1.0), plus_state());
    Rng rng(3);
    for (std::size_t m : {1U, 3U, 6U, 10U}) {
        const FragmentSpec f(SubsystemSet(rng.subset(50, m)), 50);
        EXPECT_LE(shannon_mi_observable(s, kPi / 2, f), 0.05);
    }
}

TEST(ShannonMi, Guard) {
    const auto s = perfect_record(25);
    EXPECT_THROW(shannon_mi_observable(s, 0.0, FragmentSpec(SubsystemSet::range(0, 21), 25)), NumericalGuard);
}

TEST(Ridge, PeakedAtPointerObservable) {
    const auto c = sample_couplings(50, 1);
    RidgeOptions opt;
    opt.n_samples = 10;
    opt.seed = 2;
    const std::vector<double> actions{1.0};
    const std::vector<double> mus{0.0, kPi / 8, kPi / 4, kPi / 2};
    const auto rows = redundancy_ridge(c, actions, mus, opt);
    ASSERT_EQ(rows.size(), 4U);
    EXPECT_TRUE(rows[0].reached);
    EXPECT_GE(rows[0].R_delta, 5.0);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].R_delta, rows[0].R_delta);
}

TEST(Ridge, NoInteractionMeansNoRidge) {
    const auto c = sample_couplings(10, 1);
    RidgeOptions opt;
    opt.n_samples = 3;
    const std::vector<double> actions{0.0};
    const std::vector<double> mus{0.0, kPi / 4};
    for (const auto& row : redundancy_ridge(c, actions, mus, opt)) {
        EXPECT_FALSE(row.reached);
        EXPECT_EQ(row.R_delta, 0.0);
        EXPECT_TRUE(std::isnan(row.f_delta));
    }
}

TEST(Ridge, RejectsBadOptions) {
    const auto c = sample_couplings(5, 1);
    RidgeOptions opt;
    opt.delta = 1.5;
    const std::vector<double> one{1.0};
    EXPECT_THROW(redundancy_ridge(c, one, one, opt), InvalidArgument);
    EXPECT_THROW(redundancy_ridge(c, {}, one, RidgeOptions{}), InvalidArgument);
}
