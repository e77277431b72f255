#include "qdarwin/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <system_error>

#include "qdarwin/branch_model.hpp"
#include "qdarwin/envariance.hpp"
#include "qdarwin/info_metrics.hpp"
#include "qdarwin/qbm_analytic.hpp"
#include "qdarwin/quantum_core.hpp"
#include "qdarwin/rng.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#ifndef QDARWIN_VERSION
#define QDARWIN_VERSION "0.0.0"
#endif

namespace qdarwin::experiment {

namespace fs = std::filesystem;

namespace {

// seed streams; changing any of these changes every published output
constexpr std::uint64_t kCouplingStream = 1;
constexpr std::uint64_t kFragmentStream = 2;
constexpr std::uint64_t kHaarStream = 3;
constexpr std::uint64_t kBasisStream = 4;
constexpr std::uint64_t kCopierStream = 5;

constexpr std::size_t kCliDenseQubits = 20;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::string exact_number(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

template <typename T>
bool parse_integer(const std::string& text, T& out) {
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

bool parse_double(const std::string& text, double& out) {
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

bool parse_list(const std::string& text, std::vector<double>& out) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        const auto t = trim(item);
        if (t.empty()) continue;
        if (!parse_double(t, v)) return false;
        values.push_back(v);
    }
    out = std::move(values);
    return true;
}

std::string join_list(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += exact_number(values[i]);
    }
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

std::vector<double> mu_grid_of(const ExperimentConfig& c) {
    return c.mu_grid.empty() ? linspace(0.0, std::numbers::pi / 2.0, 13) : c.mu_grid;
}

std::vector<double> f_grid_of(const ExperimentConfig& c) {
    if (!c.f_grid.empty()) return c.f_grid;
    std::vector<double> f;
    for (int i = 1; i <= 19; ++i) f.push_back(0.05 * i);
    return f;
}

bool is_known_experiment(std::string_view name) {
    return std::find(kExperimentNames.begin(), kExperimentNames.end(), name) != kExperimentNames.end();
}

std::string experiment_list() {
    std::string out;
    for (auto n : kExperimentNames) {
        if (!out.empty()) out += ", ";
        out += n;
    }
    return out;
}

}  // namespace

std::string_view version() { return QDARWIN_VERSION; }

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error([&] {
          std::string msg = "invalid configuration:";
          for (const auto& d : diagnostics) msg += " [" + d.field + "] " + d.message + ";";
          return msg;
      }()),
      diagnostics_(std::move(diagnostics)) {}

// ---------------------------------------------------------------------------
// configuration

KeyValues parse_key_values(std::string_view text) {
    KeyValues out;
    std::vector<Diagnostic> errors;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            errors.push_back({"line " + std::to_string(lineno), "expected `key = value`"});
            continue;
        }
        auto key = trim(std::string_view(body).substr(0, eq));
        std::replace(key.begin(), key.end(), '-', '_');
        if (key.empty()) {
            errors.push_back({"line " + std::to_string(lineno), "empty key"});
            continue;
        }
        out.emplace_back(std::move(key), trim(std::string_view(body).substr(eq + 1)));
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return out;
}

std::vector<Diagnostic> apply_key_values(const KeyValues& pairs, ExperimentConfig& c) {
    std::vector<Diagnostic> diags;
    auto bad = [&](const std::string& key, const std::string& value, const char* expected) {
        diags.push_back({key, "cannot parse `" + value + "` as " + expected});
    };
    for (const auto& [raw_key, value] : pairs) {
        std::string key = raw_key;
        std::replace(key.begin(), key.end(), '-', '_');
        auto count = [&](std::size_t& field) {
            if (!parse_integer(value, field)) bad(key, value, "a nonnegative integer");
        };
        auto real = [&](double& field) {
            if (!parse_double(value, field)) bad(key, value, "a number");
        };
        auto list = [&](std::vector<double>& field) {
            if (!parse_list(value, field)) bad(key, value, "a comma-separated list of numbers");
        };
        if (key == "experiment") c.experiment = value;
        else if (key == "n_env") count(c.n_env);
        else if (key == "action") real(c.action);
        else if (key == "mu_grid") list(c.mu_grid);
        else if (key == "a_grid") list(c.a_grid);
        else if (key == "t_grid") list(c.t_grid);
        else if (key == "f_grid") list(c.f_grid);
        else if (key == "delta") real(c.delta);
        else if (key == "n_samples") count(c.n_samples);
        else if (key == "seed") {
            if (!parse_integer(value, c.seed)) bad(key, value, "a 64-bit unsigned integer");
        } else if (key == "output_path") c.output_path = value;
        else if (key == "output_format") c.output_format = value;
        else if (key == "n_system") count(c.n_system);
        else if (key == "n_states") count(c.n_states);
        else if (key == "max_fragment") count(c.max_fragment);
        else if (key == "scheme") c.scheme = value;
        else if (key == "backend") c.backend = value;
        else if (key == "h_s") real(c.h_s);
        else if (key == "squeeze") real(c.squeeze);
        else if (key == "max_denominator") {
            if (!parse_integer(value, c.max_denominator)) bad(key, value, "a positive integer");
        } else if (key == "threads") count(c.threads);
        else diags.push_back({key, "unknown configuration key"});
    }
    return diags;
}

KeyValues to_key_values(const ExperimentConfig& c) {
    return {
        {"experiment", c.experiment},
        {"n_env", std::to_string(c.n_env)},
        {"action", exact_number(c.action)},
        {"mu_grid", join_list(c.mu_grid)},
        {"a_grid", join_list(c.a_grid)},
        {"t_grid", join_list(c.t_grid)},
        {"f_grid", join_list(c.f_grid)},
        {"delta", exact_number(c.delta)},
        {"n_samples", std::to_string(c.n_samples)},
        {"seed", std::to_string(c.seed)},
        {"output_path", c.output_path},
        {"output_format", c.output_format},
        {"n_system", std::to_string(c.n_system)},
        {"n_states", std::to_string(c.n_states)},
        {"max_fragment", std::to_string(c.max_fragment)},
        {"scheme", c.scheme},
        {"backend", c.backend},
        {"h_s", exact_number(c.h_s)},
        {"squeeze", exact_number(c.squeeze)},
        {"max_denominator", std::to_string(c.max_denominator)},
        {"threads", std::to_string(c.threads)},
    };
}

std::vector<Diagnostic> validate(const ExperimentConfig& c) {
    std::vector<Diagnostic> d;
    if (!is_known_experiment(c.experiment)) {
        d.push_back({"experiment", "unknown experiment `" + c.experiment + "`; expected one of: " + experiment_list()});
        return d;
    }
    if (c.output_format != "csv" && c.output_format != "json")
        d.push_back({"output_format", "must be csv or json"});
    if (c.n_samples == 0) d.push_back({"n_samples", "must be positive"});

    const auto& e = c.experiment;
    const bool ising = e == "pip" || e == "redundancy" || e == "ridge" || e == "sieve";
    if ((ising || e == "haar-pip") && c.n_env == 0) d.push_back({"n_env", "must be positive"});
    if ((e == "pip" || e == "redundancy") && !(std::isfinite(c.action) && c.action >= 0.0))
        d.push_back({"action", "must be a finite nonnegative number"});

    if (e == "qbm") {
        if (!(c.delta > 0.0 && c.delta <= 1.0)) d.push_back({"delta", "must lie in (0, 1]"});
        if (!(c.h_s >= 0.0 && std::isfinite(c.h_s))) d.push_back({"h_s", "must be a finite nonnegative entropy"});
        if (!(c.squeeze >= 1.0 && std::isfinite(c.squeeze))) d.push_back({"squeeze", "must be >= 1"});
        for (double f : c.f_grid)
            if (!(f > 0.0 && f < 1.0)) {
                d.push_back({"f_grid", "fractions must lie strictly inside (0, 1)"});
                break;
            }
    } else if (!(c.delta > 0.0 && c.delta < 1.0)) {
        d.push_back({"delta", "must lie in (0, 1)"});
    }

    if (e == "haar-pip") {
        if (c.n_system == 0) d.push_back({"n_system", "must be positive"});
        if (c.n_states == 0) d.push_back({"n_states", "must be positive"});
        if (c.n_system + c.n_env > kCliDenseQubits)
            d.push_back({"n_env", "n_system + n_env exceeds the dense limit of " + std::to_string(kCliDenseQubits)});
    }
    if (e == "ridge" || e == "sieve") {
        for (double mu : c.mu_grid)
            if (!(mu >= 0.0 && mu <= std::numbers::pi / 2.0 + 1e-12)) {
                d.push_back({"mu_grid", "angles must lie in [0, pi/2]"});
                break;
            }
        for (double a : c.a_grid)
            if (!(a >= 0.0 && std::isfinite(a))) {
                d.push_back({"a_grid", "actions must be finite and nonnegative"});
                break;
            }
    }
    if (e == "ridge") {
        if (c.max_fragment == 0 || c.max_fragment > kShannonFragmentLimit)
            d.push_back({"max_fragment", "must lie in [1, " + std::to_string(kShannonFragmentLimit) + "]"});
        if (c.scheme != "per-qubit-optimal" && c.scheme != "random-bases")
            d.push_back({"scheme", "must be per-qubit-optimal or random-bases"});
    }
    if (e == "sieve") {
        if (c.backend != "branch" && c.backend != "dense") d.push_back({"backend", "must be branch or dense"});
        if (c.backend == "dense" && c.n_env + 1 > kCliDenseQubits)
            d.push_back({"n_env", "dense sieve exceeds the dense limit of " + std::to_string(kCliDenseQubits)});
        for (double t : c.t_grid)
            if (!(t >= 0.0 && std::isfinite(t))) {
                d.push_back({"t_grid", "times must be finite and nonnegative"});
                break;
            }
    }
    if (e == "envariance" && c.max_denominator < 2) d.push_back({"max_denominator", "must be at least 2"});
    return d;
}

// ---------------------------------------------------------------------------
// experiments

namespace {

void add_pip_rows(Table& table, const PipCurve& curve) {
    table.columns = {"m", "f", "I_mean_bits", "I_stddev_bits", "H_S_bits"};
    for (const auto& p : curve.points)
        table.rows.push_back({static_cast<std::int64_t>(p.m), p.f, p.mean, p.stddev, curve.plateau});
}

CouplingSet ising_couplings(const ExperimentConfig& c, ExperimentOutput& out) {
    const auto seed = derive_seed(c.seed, kCouplingStream);
    out.seeds["couplings"] = seed;
    return sample_couplings(c.n_env, seed);
}

ExperimentOutput run_pip(const ExperimentConfig& c) {
    ExperimentOutput out;
    const auto couplings = ising_couplings(c, out).with_action(c.action);
    const auto state = ising_evolve(couplings, plus_state());
    const auto seed = derive_seed(c.seed, kFragmentStream);
    out.seeds["fragments"] = seed;
    const auto curve = pip_curve(state, c.n_samples, seed, c.threads);
    add_pip_rows(out.table, curve);
    out.summary["H_S_bits"] = curve.plateau;
    out.summary["time"] = couplings.t;
    out.summary["mean_coupling"] = couplings.mean_coupling();
    if (curve.plateau > 1e-6) {
        const auto r = redundancy_from_curve(curve, c.delta);
        out.summary["R_delta"] = r.R_delta;
        out.summary["f_delta"] = r.f_delta;
    }
    return out;
}

ExperimentOutput run_haar_pip(const ExperimentConfig& c) {
    ExperimentOutput out;
    const auto seed = derive_seed(c.seed, kHaarStream);
    out.seeds["haar"] = seed;
    const auto curve = haar_pip(c.n_system, c.n_env, c.n_states, c.n_samples, seed, c.threads);
    add_pip_rows(out.table, curve);
    out.summary["mean_H_S_bits"] = curve.plateau;
    return out;
}

ExperimentOutput run_redundancy(const ExperimentConfig& c) {
    ExperimentOutput out;
    const auto couplings = ising_couplings(c, out).with_action(c.action);
    const auto state = ising_evolve(couplings, plus_state());
    const auto seed = derive_seed(c.seed, kFragmentStream);
    out.seeds["fragments"] = seed;
    const auto r = redundancy(state, c.delta, c.n_samples, seed, c.threads);
    const double hs = reduced_entropy(state, true, FragmentSpec::empty(c.n_env));
    out.table.columns = {"n_env", "action", "delta", "m_delta", "f_delta", "R_delta", "interpolated", "H_S_bits"};
    out.table.rows.push_back({static_cast<std::int64_t>(c.n_env), c.action, c.delta, r.m_delta, r.f_delta,
                              r.R_delta, r.interpolated, hs});
    return out;
}

ExperimentOutput run_ridge(const ExperimentConfig& c) {
    ExperimentOutput out;
    const auto couplings = ising_couplings(c, out);
    RidgeOptions opt;
    opt.delta = c.delta;
    opt.n_samples = c.n_samples;
    opt.seed = derive_seed(c.seed, kFragmentStream);
    opt.max_fragment = c.max_fragment;
    opt.threads = c.threads;
    out.seeds["fragments"] = opt.seed;
    if (c.scheme == "random-bases") {
        opt.scheme = MeasurementScheme::random_bases(derive_seed(c.seed, kBasisStream));
        out.seeds["bases"] = opt.scheme.seed;
    }
    const auto actions = c.a_grid.empty() ? std::vector<double>{0.25, 0.5, 1.0} : c.a_grid;
    const auto mus = mu_grid_of(c);
    const auto rows = redundancy_ridge(couplings, actions, mus, opt);
    out.table.columns = {"mu", "action", "R_delta", "f_delta"};
    nlohmann::json not_reached = nlohmann::json::array();
    for (const auto& r : rows) {
        out.table.rows.push_back({r.mu, r.action, r.R_delta, r.f_delta});
        if (!r.reached) not_reached.push_back({{"mu", r.mu}, {"action", r.action}, {"H_mu_bits", r.H_mu}});
    }
    out.summary["threshold_not_reached"] = not_reached;
    out.summary["max_fragment_searched"] = std::min({c.max_fragment, c.n_env, kShannonFragmentLimit});
    return out;
}

ExperimentOutput run_sieve(const ExperimentConfig& c) {
    ExperimentOutput out;
    const auto couplings = ising_couplings(c, out);
    std::vector<double> times = c.t_grid;
    if (times.empty()) {
        const auto actions = c.a_grid.empty() ? linspace(0.0, 2.0, 21) : c.a_grid;
        for (double a : actions) times.push_back(a / couplings.mean_coupling());
    }
    const auto mus = mu_grid_of(c);
    const auto result = predictability_sieve(couplings, mus, times,
                                             c.backend == "dense" ? SieveBackend::dense : SieveBackend::branch);
    out.table.columns = {"mu", "t", "H_S_bits"};
    for (const auto& traj : result.trajectories)
        for (std::size_t i = 0; i < times.size(); ++i) out.table.rows.push_back({traj.mu, times[i], traj.entropy[i]});
    nlohmann::json ranking = nlohmann::json::array();
    for (auto idx : result.ranking)
        ranking.push_back({{"mu", result.trajectories[idx].mu}, {"score", result.trajectories[idx].score}});
    out.summary["ranking"] = ranking;
    return out;
}

Vector basis_ket(std::size_t dim, std::size_t i) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim));
    v(static_cast<Eigen::Index>(i)) = 1.0;
    return v;
}

/// One randomized copier trial; true when it contradicts the repeatability
/// constraint (a violation verdict or a faithful copy of non-orthogonal kets).
bool copier_counterexample(std::uint64_t seed) {
    Rng rng(seed);
    auto random_ket = [&] { return Vector(haar_random_unitary(2, rng).col(0)); };
    const auto kind = rng.below(3);
    Matrix copier;
    Vector u = random_ket();
    Vector v = random_ket();
    if (kind == 0) {
        copier = haar_random_unitary(4, rng);
    } else {
        // controlled-W: leaves pointer states |0>, |1> untouched
        const Matrix w0 = haar_random_unitary(2, rng);
        const Matrix w1 = haar_random_unitary(2, rng);
        copier = Matrix::Zero(4, 4);
        copier.topLeftCorner(2, 2) = w0;
        copier.bottomRightCorner(2, 2) = w1;
        if (kind == 2) {
            u = basis_ket(2, 0);
            v = rng.below(2) == 0 ? basis_ket(2, 1) : Vector(std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform()) * u);
        }
    }
    const auto report = verify_copy_map(u, v, copier, basis_ket(2, 0));
    return report.faithful_copy_of_nonorthogonal() || (report.verdict && *report.verdict == CopyVerdict::violation);
}

ExperimentOutput run_envariance(const ExperimentConfig& c) {
    ExperimentOutput out;
    out.table.columns = {"check", "passed", "value"};
    auto row = [&](std::string name, bool passed, double value) {
        out.table.rows.push_back({std::move(name), passed, value});
    };

    // sqrt(2/3)|0>|+> + sqrt(1/3)|2>|2> on a 3-level S and E
    const double r2 = 1.0 / std::sqrt(2.0);
    const Vector plus = r2 * (basis_ket(3, 0) + basis_ket(3, 1));
    const Vector box_amps = std::sqrt(2.0 / 3.0) * Eigen::kroneckerProduct(basis_ket(3, 0), plus).eval() +
                            std::sqrt(1.0 / 3.0) * Eigen::kroneckerProduct(basis_ket(3, 2), basis_ket(3, 2)).eval();
    const PureState box({3, 3}, box_amps);

    const Vector sys[] = {basis_ket(3, 0), basis_ket(3, 2)};
    const Vector env[] = {plus, basis_ket(3, 2)};
    const auto fine = finegrain(RationalAmplitudeSpec{{2, 1}, 3}, sys, env);
    row("box_finegrain_p0", fine.probabilities[0] == Rational{2, 3}, fine.probabilities[0].value());
    row("box_finegrain_p2", fine.probabilities[1] == Rational{1, 3}, fine.probabilities[1].value());

    const auto form = schmidt(box, SubsystemSet{0});
    row("box_schmidt_leading", form.coefficients.size() == 2 &&
                                   std::abs(form.coefficients[0] - std::sqrt(2.0 / 3.0)) < 1e-10,
        form.coefficients.front());

    Matrix phase = Matrix::Identity(3, 3);
    phase(0, 0) = std::polar(1.0, 0.7);
    const auto phase_result = is_envariant(box, phase, SubsystemSet{0});
    row("phase_envariance", phase_result.envariant, phase_result.fidelity);

    Matrix swap = Matrix::Zero(3, 3);
    swap(0, 2) = swap(2, 0) = swap(1, 1) = 1.0;
    const auto swap_result = is_envariant(box, swap, SubsystemSet{0});
    row("unequal_swap_not_envariant", !swap_result.envariant, swap_result.fidelity);

    Vector bell_amps = Vector::Zero(4);
    bell_amps(0) = bell_amps(3) = r2;
    const auto p_bell = equiprobability(PureState::qubits(bell_amps), SubsystemSet{0});
    row("bell_equiprobability", p_bell.size() == 2 && p_bell[0] == 0.5, p_bell[0]);

    const Complex amps[] = {0.6, 0.8};
    const auto born = born_via_envariance(amps, c.max_denominator);
    const double err = std::max(std::abs(born.probabilities[0] - 0.36), std::abs(born.probabilities[1] - 0.64));
    row("born_0.6_0.8_max_error", err <= 1.0 / static_cast<double>(c.max_denominator), err);

    const auto seed = derive_seed(c.seed, kCopierStream);
    out.seeds["copier_trials"] = seed;
    std::int64_t counterexamples = 0;
    for (std::size_t i = 0; i < c.n_samples; ++i) counterexamples += copier_counterexample(derive_seed(seed, i));
    row("copier_trials_counterexamples", counterexamples == 0, static_cast<double>(counterexamples));
    return out;
}

ExperimentOutput run_qbm(const ExperimentConfig& c) {
    ExperimentOutput out;
    const QbmParams params{c.h_s, EntropyUnit::bits, c.squeeze, c.delta};
    const auto curve = qbm_mutual_information(params, f_grid_of(c));
    out.table.columns = {"f", "I_bits", "clamped"};
    for (const auto& p : curve.points) out.table.rows.push_back({p.f, p.value, p.clamped});
    out.tag = std::string(curve.tag);
    out.summary["R_delta"] = qbm_redundancy(params);
    out.summary["tag"] = out.tag;
    return out;
}

}  // namespace

ExperimentOutput execute(const ExperimentConfig& c) {
    if (auto diags = validate(c); !diags.empty()) throw ConfigError(std::move(diags));
    const auto& e = c.experiment;
    if (e == "pip") return run_pip(c);
    if (e == "haar-pip") return run_haar_pip(c);
    if (e == "redundancy") return run_redundancy(c);
    if (e == "ridge") return run_ridge(c);
    if (e == "sieve") return run_sieve(c);
    if (e == "envariance") return run_envariance(c);
    return run_qbm(c);
}

// ---------------------------------------------------------------------------
// rendering

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0.0) return "0";  // also folds -0
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 12);
    return std::string(buf, end);
}

namespace {

std::string csv_cell(const Cell& cell) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) return format_number(v);
            else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
            else if constexpr (std::is_same_v<T, bool>) return v ? "1" : "0";
            else return v;
        },
        cell);
}

std::string json_cell(const Cell& cell) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) return std::isfinite(v) ? format_number(v) : "null";
            else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
            else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
            else return nlohmann::json(v).dump();
        },
        cell);
}

std::string header_comment(const ExperimentConfig& c, const ExperimentOutput& o) {
    std::string line = "# qdarwin " + std::string(version()) + " experiment=" + c.experiment +
                       " seed=" + std::to_string(c.seed);
    if (!o.tag.empty()) line += " tag=" + o.tag;
    return line;
}

}  // namespace

std::string render_csv(const ExperimentConfig& c, const ExperimentOutput& o) {
    std::string out = header_comment(c, o) + "\n";
    for (std::size_t i = 0; i < o.table.columns.size(); ++i) out += (i ? "," : "") + o.table.columns[i];
    out += "\n";
    for (const auto& row : o.table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
        out += "\n";
    }
    return out;
}

std::string render_json(const ExperimentConfig& c, const ExperimentOutput& o) {
    std::string out = "{\n";
    out += "  \"tool\": \"qdarwin\",\n";
    out += "  \"version\": " + nlohmann::json(std::string(version())).dump() + ",\n";
    out += "  \"experiment\": " + nlohmann::json(c.experiment).dump() + ",\n";
    out += "  \"seed\": " + std::to_string(c.seed) + ",\n";
    if (!o.tag.empty()) out += "  \"tag\": " + nlohmann::json(o.tag).dump() + ",\n";
    out += "  \"columns\": " + nlohmann::json(o.table.columns).dump() + ",\n";
    out += "  \"rows\": [";
    for (std::size_t r = 0; r < o.table.rows.size(); ++r) {
        out += r ? ",\n    [" : "\n    [";
        for (std::size_t i = 0; i < o.table.rows[r].size(); ++i) out += (i ? ", " : "") + json_cell(o.table.rows[r][i]);
        out += "]";
    }
    out += o.table.rows.empty() ? "],\n" : "\n  ],\n";
    out += "  \"summary\": " + o.summary.dump() + "\n}\n";
    return out;
}

std::string resolve_output_path(const ExperimentConfig& c) {
    if (!c.output_path.empty()) return c.output_path;
    fs::path dir = ".";
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) dir = env;
    return (dir / (c.experiment + "." + c.output_format)).string();
}

// ---------------------------------------------------------------------------
// run

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << content;
    f.close();
    if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream ss;
    ss.imbue(std::locale::classic());
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

}  // namespace

RunResult run(const ExperimentConfig& config) {
    if (auto diags = validate(config); !diags.empty()) throw ConfigError(std::move(diags));
    ExperimentConfig c = config;
    c.output_path = resolve_output_path(config);

    const auto started = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentOutput output = execute(c);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path out_path = c.output_path;
    const fs::path manifest_path = out_path.string() + ".manifest.json";
    const fs::path out_tmp = out_path.string() + ".partial";
    const fs::path manifest_tmp = manifest_path.string() + ".partial";

    nlohmann::json manifest;
    manifest["tool"] = "qdarwin";
    manifest["version"] = std::string(version());
    manifest["experiment"] = c.experiment;
    nlohmann::json echo = nlohmann::json::object();
    for (const auto& [k, v] : to_key_values(c)) echo[k] = v;
    manifest["config"] = echo;
    manifest["seeds"] = output.seeds;
    manifest["output"] = out_path.string();
    manifest["started_utc"] = utc_timestamp(started);
    manifest["wall_clock_seconds"] = elapsed;
    manifest["summary"] = output.summary;

    try {
        if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
        write_file(out_tmp, c.output_format == "json" ? render_json(c, output) : render_csv(c, output));
        write_file(manifest_tmp, manifest.dump(2) + "\n");
        fs::rename(out_tmp, out_path);
        fs::rename(manifest_tmp, manifest_path);
    } catch (...) {
        std::error_code ec;
        fs::remove(out_tmp, ec);
        fs::remove(manifest_tmp, ec);
        fs::remove(out_path, ec);
        throw;
    }
    return {out_path.string(), manifest_path.string(), std::move(output)};
}

ExperimentConfig config_from_manifest(const nlohmann::json& manifest) {
    if (!manifest.contains("config") || !manifest["config"].is_object())
        throw ConfigError(std::vector<Diagnostic>{{"manifest", "missing `config` object"}});
    KeyValues pairs;
    for (const auto& [k, v] : manifest["config"].items()) {
        if (!v.is_string()) throw ConfigError(std::vector<Diagnostic>{{k, "manifest values must be strings"}});
        pairs.emplace_back(k, v.get<std::string>());
    }
    ExperimentConfig c;
    if (auto diags = apply_key_values(pairs, c); !diags.empty()) throw ConfigError(std::move(diags));
    return c;
}

}  // namespace qdarwin::experiment
