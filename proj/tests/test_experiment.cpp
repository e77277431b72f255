#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qdarwin/experiment.hpp"

namespace ex = qdarwin::experiment;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("qdarwin_test_" + std::to_string(::getpid()) + "_" +
                                             ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

bool has_field(const std::vector<ex::Diagnostic>& d, const std::string& field) {
    for (const auto& x : d)
        if (x.field == field) return true;
    return false;
}

int run_cli(const std::string& args) {
    const int status = std::system((std::string(QDARWIN_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParseKeyValues) {
    const auto kv = ex::parse_key_values("# comment\nexperiment = ridge\n n-env=20  # trailing\n\nmu_grid = 0, 0.5,1\n");
    ASSERT_EQ(kv.size(), 3U);
    EXPECT_EQ(kv[1].first, "n_env");
    EXPECT_EQ(kv[1].second, "20");
    ex::ExperimentConfig c;
    EXPECT_TRUE(ex::apply_key_values(kv, c).empty());
    EXPECT_EQ(c.experiment, "ridge");
    EXPECT_EQ(c.n_env, 20U);
    EXPECT_EQ(c.mu_grid, (std::vector<double>{0.0, 0.5, 1.0}));
    EXPECT_THROW(ex::parse_key_values("no equals sign"), ex::ConfigError);
}

TEST(Config, LaterPairsWin) {
    ex::ExperimentConfig c;
    EXPECT_TRUE(ex::apply_key_values({{"seed", "3"}, {"seed", "9"}}, c).empty());
    EXPECT_EQ(c.seed, 9U);
}

TEST(Config, BadValuesAndKeysReported) {
    ex::ExperimentConfig c;
    const auto d = ex::apply_key_values({{"n_env", "-3"}, {"delta", "abc"}, {"colour", "red"}}, c);
    EXPECT_EQ(d.size(), 3U);
    EXPECT_TRUE(has_field(d, "n_env"));
    EXPECT_TRUE(has_field(d, "delta"));
    EXPECT_TRUE(has_field(d, "colour"));
}

TEST(Validate, WellFormedIsEmpty) {
    for (auto name : ex::kExperimentNames) {
        ex::ExperimentConfig c;
        c.experiment = std::string(name);
        if (name == "haar-pip") c.n_env = 10;
        EXPECT_TRUE(ex::validate(c).empty()) << name;
    }
}

TEST(Validate, SingleDiagnostics) {
    ex::ExperimentConfig c;
    c.n_env = 0;
    auto d = ex::validate(c);
    ASSERT_EQ(d.size(), 1U);
    EXPECT_EQ(d[0].field, "n_env");

    c = {};
    c.experiment = "pipp";
    d = ex::validate(c);
    ASSERT_EQ(d.size(), 1U);
    EXPECT_NE(d[0].message.find("haar-pip"), std::string::npos);

    c = {};
    c.experiment = "ridge";
    c.delta = 1.5;
    d = ex::validate(c);
    ASSERT_EQ(d.size(), 1U);
    EXPECT_EQ(d[0].field, "delta");
}

TEST(Validate, QbmAllowsDeltaOne) {
    ex::ExperimentConfig c;
    c.experiment = "qbm";
    c.delta = 1.0;
    EXPECT_TRUE(ex::validate(c).empty());
    c.f_grid = {0.0, 0.5};
    EXPECT_TRUE(has_field(ex::validate(c), "f_grid"));
}

TEST(Config, EchoRoundTrips) {
    ex::ExperimentConfig c;
    c.experiment = "ridge";
    c.mu_grid = {0.0, 0.1 + 0.2, 1.0 / 3.0};
    c.action = 0.1 + 0.7;
    c.seed = 18446744073709551615ULL;
    ex::ExperimentConfig back;
    EXPECT_TRUE(ex::apply_key_values(ex::to_key_values(c), back).empty());
    EXPECT_EQ(back.mu_grid, c.mu_grid);
    EXPECT_EQ(back.action, c.action);
    EXPECT_EQ(back.seed, c.seed);
    EXPECT_EQ(ex::to_key_values(back), ex::to_key_values(c));
}

TEST(Format, TwelveSignificantDigits) {
    EXPECT_EQ(ex::format_number(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(ex::format_number(2.0), "2");
    EXPECT_EQ(ex::format_number(-0.0), "0");
    EXPECT_EQ(ex::format_number(std::nan("")), "nan");
    EXPECT_EQ(ex::format_number(1.5e-20), "1.5e-20");
}

TEST(Execute, QbmMatchesAnalyticExamples) {
    ex::ExperimentConfig c;
    c.experiment = "qbm";
    c.h_s = 1.0;
    c.squeeze = 10.0;
    c.f_grid = {0.5};
    c.delta = 1.0;
    const auto out = ex::execute(c);
    const auto csv = ex::render_csv(c, out);
    EXPECT_NE(csv.find("tag=analytic-approximation"), std::string::npos);
    EXPECT_NE(csv.find("f,I_bits,clamped\n0.5,1,0\n"), std::string::npos);
    EXPECT_EQ(out.summary["R_delta"].get<double>(), 100.0);
}

TEST(Execute, CsvSchemas) {
    const std::pair<const char*, const char*> cases[] = {
        {"pip", "m,f,I_mean_bits,I_stddev_bits,H_S_bits"},
        {"ridge", "mu,action,R_delta,f_delta"},
        {"sieve", "mu,t,H_S_bits"},
        {"qbm", "f,I_bits,clamped"},
    };
    for (const auto& [name, header] : cases) {
        ex::ExperimentConfig c;
        c.experiment = name;
        c.n_env = 8;
        c.n_samples = 3;
        c.seed = 4;
        c.mu_grid = {0.0, 0.5};
        c.a_grid = {1.0};
        c.max_fragment = 4;
        const auto csv = ex::render_csv(c, ex::execute(c));
        std::istringstream in(csv);
        std::string first, second;
        std::getline(in, first);
        std::getline(in, second);
        EXPECT_EQ(first.rfind("# qdarwin " + std::string(ex::version()) + " experiment=" + name + " seed=4", 0), 0U);
        EXPECT_EQ(second, header);
    }
}

TEST(Execute, EnvarianceChecksAllPass) {
    ex::ExperimentConfig c;
    c.experiment = "envariance";
    c.n_samples = 50;
    const auto out = ex::execute(c);
    ASSERT_FALSE(out.table.rows.empty());
    for (const auto& row : out.table.rows) EXPECT_TRUE(std::get<bool>(row[1])) << std::get<std::string>(row[0]);
}

TEST(Execute, ThreadCountDoesNotChangeOutput) {
    ex::ExperimentConfig c;
    c.experiment = "pip";
    c.n_env = 20;
    c.n_samples = 10;
    const auto serial = ex::render_csv(c, ex::execute(c));
    c.threads = 3;
    EXPECT_EQ(ex::render_csv(c, ex::execute(c)), serial);
}

TEST(Run, ByteIdenticalReruns) {
    TempDir tmp;
    ex::ExperimentConfig c;
    c.experiment = "pip";
    c.n_env = 50;
    c.action = 1.0;
    c.seed = 7;
    c.n_samples = 20;
    c.output_path = (tmp.path() / "a.csv").string();
    const auto first = ex::run(c);
    c.output_path = (tmp.path() / "b.csv").string();
    ex::run(c);
    EXPECT_EQ(slurp(tmp.path() / "a.csv"), slurp(tmp.path() / "b.csv"));
    EXPECT_TRUE(fs::exists(first.manifest_path));

    const auto manifest = nlohmann::json::parse(slurp(first.manifest_path));
    EXPECT_EQ(manifest["version"], std::string(ex::version()));
    EXPECT_TRUE(manifest["seeds"].contains("couplings"));
    EXPECT_TRUE(manifest.contains("wall_clock_seconds"));
    auto again = ex::config_from_manifest(manifest);
    again.output_path = (tmp.path() / "c.csv").string();
    ex::run(again);
    EXPECT_EQ(slurp(tmp.path() / "a.csv"), slurp(tmp.path() / "c.csv"));
}

TEST(Run, JsonOutput) {
    TempDir tmp;
    ex::ExperimentConfig c;
    c.experiment = "ridge";
    c.n_env = 6;
    c.n_samples = 2;
    c.mu_grid = {0.0, 1.0};
    c.a_grid = {0.0};
    c.output_format = "json";
    c.output_path = (tmp.path() / "r.json").string();
    ex::run(c);
    const auto j = nlohmann::json::parse(slurp(c.output_path));
    EXPECT_EQ(j["columns"], nlohmann::json({"mu", "action", "R_delta", "f_delta"}));
    ASSERT_EQ(j["rows"].size(), 2U);
    EXPECT_TRUE(j["rows"][0][3].is_null());  // ridge absent without interaction
}

TEST(Run, DefaultOutputDirectoryFromEnvironment) {
    TempDir tmp;
    ::setenv(ex::kOutputDirEnv, tmp.path().c_str(), 1);
    ex::ExperimentConfig c;
    c.experiment = "qbm";
    const auto r = ex::run(c);
    ::unsetenv(ex::kOutputDirEnv);
    EXPECT_EQ(fs::path(r.output_path), tmp.path() / "qbm.csv");
    EXPECT_TRUE(fs::exists(r.output_path));
}

TEST(Run, NothingLeftBehindOnFailure) {
    TempDir tmp;
    ex::ExperimentConfig c;
    c.experiment = "redundancy";
    c.action = 0.0;  // no decoherence: redundancy refuses H_S = 0
    c.n_env = 5;
    c.output_path = (tmp.path() / "r.csv").string();
    EXPECT_ANY_THROW(ex::run(c));
    EXPECT_TRUE(fs::is_empty(tmp.path()));
}

TEST(Run, InvalidConfigThrowsBeforeWriting) {
    TempDir tmp;
    ex::ExperimentConfig c;
    c.experiment = "ridge";
    c.delta = 1.5;
    c.output_path = (tmp.path() / "x.csv").string();
    try {
        ex::run(c);
        FAIL() << "expected ConfigError";
    } catch (const ex::ConfigError& e) {
        EXPECT_TRUE(has_field(e.diagnostics(), "delta"));
    }
    EXPECT_TRUE(fs::is_empty(tmp.path()));
}

TEST(Cli, ExitCodes) {
    TempDir tmp;
    const auto out = (tmp.path() / "q.csv").string();
    EXPECT_EQ(run_cli("qbm --out " + out), 0);
    EXPECT_TRUE(fs::exists(out));
    EXPECT_EQ(run_cli("ridge --delta 1.5 --out " + out), 2);
    EXPECT_EQ(run_cli("nosuch"), 2);
    EXPECT_EQ(run_cli("pip --bogus-flag"), 2);
    EXPECT_EQ(run_cli("redundancy --action 0 --n-env 5 --out " + (tmp.path() / "r.csv").string()), 3);
    EXPECT_FALSE(fs::exists(tmp.path() / "r.csv"));
}

TEST(Cli, ConfigFileFlagsWinAndRerun) {
    TempDir tmp;
    const auto cfg = tmp.path() / "run.cfg";
    std::ofstream(cfg) << "experiment = pip\nn_env = 12\nn_samples = 4\nseed = 3\n";
    const auto a = (tmp.path() / "a.csv").string();
    const auto b = (tmp.path() / "b.csv").string();
    ASSERT_EQ(run_cli("--config " + cfg.string() + " --seed 5 --out " + a), 0);
    EXPECT_NE(slurp(a).find("seed=5"), std::string::npos);
    ASSERT_EQ(run_cli("rerun " + a + ".manifest.json --out " + b), 0);
    EXPECT_EQ(slurp(a), slurp(b));
}
