#pragma once

// Experiment orchestration behind the command-line tool: configuration,
// validation, execution and deterministic CSV/JSON emission with a run
// manifest.

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

namespace qdarwin::experiment {

inline constexpr std::array<std::string_view, 7> kExperimentNames = {
    "pip", "haar-pip", "redundancy", "ridge", "sieve", "envariance", "qbm"};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "QDARWIN_OUTPUT_DIR";

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

std::string_view version();

struct ExperimentConfig {
    std::string experiment = "pip";
    std::size_t n_env = 50;
    double action = 1.0;
    std::vector<double> mu_grid;  ///< empty: 13 points on [0, pi/2]
    std::vector<double> a_grid;   ///< empty: {0.25, 0.5, 1} (ridge), 0..2 step 0.1 (sieve)
    std::vector<double> t_grid;   ///< sieve only; empty: derived from a_grid
    std::vector<double> f_grid;   ///< qbm only; empty: 0.05..0.95 step 0.05
    double delta = 0.1;
    std::size_t n_samples = 200;
    std::uint64_t seed = 1;
    std::string output_path;      ///< empty: $QDARWIN_OUTPUT_DIR/<experiment>.<format>
    std::string output_format = "csv";
    std::size_t n_system = 1;     ///< haar-pip
    std::size_t n_states = 20;    ///< haar-pip
    std::size_t max_fragment = 16;             ///< ridge
    std::string scheme = "per-qubit-optimal";  ///< ridge: or "random-bases"
    std::string backend = "branch";            ///< sieve: or "dense"
    double h_s = 1.0;                          ///< qbm, bits
    double squeeze = 10.0;                     ///< qbm
    std::uint64_t max_denominator = 10000;     ///< envariance
    std::size_t threads = 1;                   ///< 0 = hardware concurrency
};

struct Diagnostic {
    std::string field;
    std::string message;
};

/// Ordered key/value pairs as read from a config file or flags.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<Diagnostic> diagnostics);
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

/// Parses `key = value` lines; `#` starts a comment, '-' in keys reads as '_'.
/// Malformed lines become diagnostics in the thrown ConfigError.
KeyValues parse_key_values(std::string_view text);

/// Applies pairs in order (later wins). Unknown keys and unparsable values
/// are reported, not thrown.
std::vector<Diagnostic> apply_key_values(const KeyValues& pairs, ExperimentConfig& config);

/// Canonical echo of every field, suitable for apply_key_values.
KeyValues to_key_values(const ExperimentConfig& config);

/// Empty iff a run would start.
std::vector<Diagnostic> validate(const ExperimentConfig& config);

using Cell = std::variant<double, std::int64_t, bool, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

struct ExperimentOutput {
    Table table;
    nlohmann::json summary = nlohmann::json::object();
    std::map<std::string, std::uint64_t> seeds;  ///< per-metric seeds
    std::string tag;                             ///< e.g. analytic-approximation
};

/// Runs the computation without touching the filesystem. Throws ConfigError
/// for an invalid config; module errors propagate.
ExperimentOutput execute(const ExperimentConfig& config);

/// 12 significant digits, locale-independent.
std::string format_number(double value);

std::string render_csv(const ExperimentConfig& config, const ExperimentOutput& output);
std::string render_json(const ExperimentConfig& config, const ExperimentOutput& output);

std::string resolve_output_path(const ExperimentConfig& config);

struct RunResult {
    std::string output_path;
    std::string manifest_path;
    ExperimentOutput output;
};

/// Validates, executes, writes the output file and `<output>.manifest.json`.
/// Nothing is left behind when any step fails.
RunResult run(const ExperimentConfig& config);

/// Rebuilds the config recorded in a manifest.
ExperimentConfig config_from_manifest(const nlohmann::json& manifest);

}  // namespace qdarwin::experiment
