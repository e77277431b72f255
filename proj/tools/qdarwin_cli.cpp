// qdarwin: run one experiment and write its table plus a manifest.
//
//   qdarwin <experiment> [--config PATH] [--seed N] [--n-env N] [--action X]
//           [--delta X] [--out PATH] [--format csv|json] [--set key=value ...]
//   qdarwin rerun <manifest.json> [--out PATH]

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qdarwin/errors.hpp"
#include "qdarwin/experiment.hpp"

namespace ex = qdarwin::experiment;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ex::ConfigError(std::vector<ex::Diagnostic>{{"config", "cannot read " + path}});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_diagnostics(const ex::ConfigError& e) {
    std::cerr << "qdarwin: configuration error\n";
    for (const auto& d : e.diagnostics()) std::cerr << "  " << d.field << ": " << d.message << "\n";
}

int run_config(const ex::ExperimentConfig& config, bool validate_only) {
    if (auto diags = ex::validate(config); !diags.empty()) throw ex::ConfigError(std::move(diags));
    if (validate_only) {
        std::cout << "ok: " << config.experiment << " -> " << ex::resolve_output_path(config) << "\n";
        return ex::kExitOk;
    }
    const auto result = ex::run(config);
    std::cout << result.output_path << "\n";
    return ex::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum Darwinism experiments"};
    app.set_version_flag("--version", std::string(ex::version()));
    app.require_subcommand(0, 1);

    std::string experiment;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_env;
    std::optional<std::string> action;
    std::optional<std::string> delta;
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::optional<std::size_t> threads;
    std::vector<std::string> sets;
    bool validate_only = false;

    app.add_option("experiment", experiment, "pip, haar-pip, redundancy, ridge, sieve, envariance or qbm");
    app.add_option("--config,-c", config_path, "key = value file");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--n-env", n_env, "environment qubits");
    app.add_option("--action", action, "a = t * mean(g)");
    app.add_option("--delta", delta, "information deficit");
    app.add_option("--out,-o", out, "output file");
    app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--threads", threads, "worker threads (0 = all cores)");
    app.add_option("--set", sets, "extra key=value overrides")->allow_extra_args(false);
    app.add_flag("--validate-only", validate_only, "check the configuration and exit");

    auto* rerun = app.add_subcommand("rerun", "repeat a run from its manifest");
    std::string manifest_path;
    std::optional<std::string> rerun_out;
    rerun->add_option("manifest", manifest_path, "manifest written by a previous run")->required();
    rerun->add_option("--out,-o", rerun_out, "output file (default: the recorded one)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ex::kExitOk : ex::kExitConfig;
    }

    try {
        if (*rerun) {
            const auto manifest = nlohmann::json::parse(read_file(manifest_path));
            auto config = ex::config_from_manifest(manifest);
            if (rerun_out) config.output_path = *rerun_out;
            return run_config(config, false);
        }

        ex::ExperimentConfig config;
        ex::KeyValues pairs;
        if (!config_path.empty()) pairs = ex::parse_key_values(read_file(config_path));
        if (!experiment.empty()) pairs.emplace_back("experiment", experiment);
        if (seed) pairs.emplace_back("seed", std::to_string(*seed));
        if (n_env) pairs.emplace_back("n_env", std::to_string(*n_env));
        if (action) pairs.emplace_back("action", *action);
        if (delta) pairs.emplace_back("delta", *delta);
        if (out) pairs.emplace_back("output_path", *out);
        if (format) pairs.emplace_back("output_format", *format);
        if (threads) pairs.emplace_back("threads", std::to_string(*threads));
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ex::ConfigError(std::vector<ex::Diagnostic>{{s, "--set expects key=value"}});
            pairs.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        if (experiment.empty() && config_path.empty()) {
            std::cerr << app.help();
            return ex::kExitConfig;
        }
        if (auto diags = ex::apply_key_values(pairs, config); !diags.empty()) throw ex::ConfigError(std::move(diags));
        return run_config(config, validate_only);
    } catch (const ex::ConfigError& e) {
        print_diagnostics(e);
        return ex::kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "qdarwin: unreadable manifest: " << e.what() << "\n";
        return ex::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "qdarwin: " << e.what() << "\n";
        return ex::kExitNumerical;
    }
}
