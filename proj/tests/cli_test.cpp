#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

using namespace collapse;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("collapse_cli_test_" + std::string(info->name()));
        fs::remove_all(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int invoke(std::vector<std::string> args, const fs::path& out_dir) {
        args.push_back("--out=" + out_dir.string());
        out_.str("");
        err_.str("");
        return cli::run(args, out_, err_);
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream s;
        s << f.rdbuf();
        return s.str();
    }

    static std::string first_line(const fs::path& p) {
        std::ifstream f(p);
        std::string line;
        std::getline(f, line);
        return line;
    }

    fs::path dir_;
    std::ostringstream out_;
    std::ostringstream err_;
};

}  // namespace

TEST(CliConfig, overrides_follow_dotted_keys) {
    auto config = cli::default_config();
    cli::apply_override(config, "n_sites", "12");
    cli::apply_override(config, "sweep.n_list", "[4,8]");
    cli::apply_override(config, "noise_kind", "bernoulli");
    EXPECT_EQ(config["n_sites"], 12);
    EXPECT_EQ(config["sweep"]["n_list"], nlohmann::json::array({4, 8}));
    EXPECT_EQ(cli::sim_params_from(config).noise_kind, NoiseKind::Bernoulli);
}

TEST(CliConfig, unknown_keys_and_bad_values_are_config_errors) {
    auto config = cli::default_config();
    EXPECT_THROW(cli::apply_override(config, "nsites", "3"), cli::ConfigError);
    EXPECT_THROW(cli::apply_override(config, "sweep.bogus", "3"), cli::ConfigError);
    EXPECT_THROW(cli::apply_override(config, "sweep", "3"), cli::ConfigError);
    cli::apply_override(config, "dt", "-1");
    EXPECT_THROW(cli::sim_params_from(config), cli::ConfigError);
    config = cli::default_config();
    cli::apply_override(config, "noise_kind", "cauchy");
    EXPECT_THROW(cli::sim_params_from(config), cli::ConfigError);
}

TEST(CliConfig, default_params) {
    const SimParams p = cli::sim_params_from(cli::default_config());
    EXPECT_EQ(p.n_sites, 4u);
    EXPECT_EQ(p.dt, 0.04);
    EXPECT_EQ(p.delta, 0.01);
    EXPECT_FALSE(p.t_max.has_value());
    EXPECT_EQ(p.noise_kind, NoiseKind::Normal);
}

TEST(CliFormat, seventeen_significant_digits) {
    EXPECT_EQ(cli::format_number(0.1), "0.10000000000000001");
    EXPECT_EQ(cli::format_number(2.0), "2");
    EXPECT_EQ(std::stod(cli::format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST_F(CliTest, exit_codes) {
    EXPECT_EQ(invoke({"trajectory", "--bogus=1"}, dir_), cli::kExitConfigError);
    EXPECT_EQ(invoke({"trajectory", "--record_path=false"}, dir_), cli::kExitConfigError);
    EXPECT_EQ(invoke({"sweep", "--realizations=0"}, dir_), cli::kExitConfigError);
    EXPECT_EQ(invoke({"trajectory", "stray"}, dir_), cli::kExitConfigError);
    EXPECT_EQ(invoke({"nosuchcommand"}, dir_), cli::kExitConfigError);
    EXPECT_EQ(invoke({"trajectory", "--config=/nonexistent/config.json"}, dir_), cli::kExitConfigError);
    EXPECT_EQ(invoke({"trajectory"}, dir_), cli::kExitOk);
}

TEST_F(CliTest, strict_check_passes_when_bound_holds) {
    EXPECT_EQ(invoke({"check", "--n_sites=4", "--realizations=200", "--check.strict=true"}, dir_),
              cli::kExitOk);
    const auto doc = nlohmann::json::parse(slurp(dir_ / "check.json"));
    EXPECT_TRUE(doc["all_satisfied"].get<bool>());
}

TEST_F(CliTest, csv_headers) {
    ASSERT_EQ(invoke({"trajectory", "--n_sites=3"}, dir_), cli::kExitOk);
    EXPECT_EQ(first_line(dir_ / "trajectory.csv"), "t,U1,U2,U3");
    ASSERT_EQ(invoke({"sweep", "--realizations=50", "--sweep.n_list=[4,8,16]", "--sweep.initial_step=true"},
                     dir_),
              cli::kExitOk);
    EXPECT_EQ(first_line(dir_ / "sweep.csv"), "N,mean_time,stderr,realizations,exceeded");
    EXPECT_TRUE(fs::exists(dir_ / "fit.json"));
    EXPECT_TRUE(fs::exists(dir_ / "initial_step.csv"));
    ASSERT_EQ(invoke({"bayes", "--realizations=100"}, dir_), cli::kExitOk);
    EXPECT_EQ(first_line(dir_ / "bayes.csv"), "site,weight,count,frequency,binomial_stderr,z_score");
    ASSERT_EQ(invoke({"bloch", "--realizations=20", "--bloch.twin_steps=50"}, dir_), cli::kExitOk);
    EXPECT_TRUE(fs::exists(dir_ / "bloch.json"));
    ASSERT_EQ(invoke({"check", "--realizations=50"}, dir_), cli::kExitOk);
    EXPECT_TRUE(fs::exists(dir_ / "check.csv"));
}

TEST_F(CliTest, trajectory_rows_round_trip_and_stay_normalized) {
    ASSERT_EQ(invoke({"trajectory", "--n_sites=5"}, dir_), cli::kExitOk);
    std::ifstream f(dir_ / "trajectory.csv");
    std::string line;
    std::getline(f, line);
    std::size_t rows = 0;
    while (std::getline(f, line)) {
        std::stringstream s(line);
        std::string cell;
        std::getline(s, cell, ',');
        double total = 0.0;
        while (std::getline(s, cell, ',')) {
            EXPECT_EQ(cli::format_number(std::stod(cell)), cell);
            total += std::stod(cell);
        }
        // sum U = sum V - N = 2 - N
        EXPECT_NEAR(total, 2.0 - 5.0, 1e-8);
        ++rows;
    }
    EXPECT_GT(rows, 1u);
    const auto doc = nlohmann::json::parse(slurp(dir_ / "trajectory.json"));
    EXPECT_EQ(doc["schema_version"], cli::kSchemaVersion);
}

TEST_F(CliTest, outputs_are_byte_identical_across_thread_counts) {
    const std::vector<std::vector<std::string>> commands{
        {"sweep", "--realizations=150", "--sweep.n_list=[4,8,16]"},
        {"bayes", "--realizations=500"},
        {"bloch", "--realizations=130", "--bloch.twin_steps=100"},
        {"check", "--realizations=130"},
    };
    for (const auto& cmd : commands) {
        auto one = cmd;
        one.push_back("--threads=1");
        auto four = cmd;
        four.push_back("--threads=4");
        ASSERT_EQ(invoke(one, dir_ / "a"), cli::kExitOk) << err_.str();
        ASSERT_EQ(invoke(four, dir_ / "b"), cli::kExitOk) << err_.str();
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dir_ / "a")) {
        const fs::path twin = dir_ / "b" / entry.path().filename();
        ASSERT_TRUE(fs::exists(twin));
        EXPECT_EQ(slurp(entry.path()), slurp(twin)) << entry.path().filename();
        ++compared;
    }
    EXPECT_GE(compared, 8u);
}

TEST_F(CliTest, config_file_is_merged) {
    fs::create_directories(dir_);
    const fs::path config = dir_ / "run.json";
    std::ofstream(config) << R"({"n_sites": 6, "trajectory": {"index": 3}})";
    ASSERT_EQ(invoke({"trajectory", "--config=" + config.string()}, dir_ / "out"), cli::kExitOk);
    EXPECT_EQ(first_line(dir_ / "out" / "trajectory.csv"), "t,U1,U2,U3,U4,U5,U6");
    std::ofstream(config) << R"({"n_sites": 6, "unknown": 1})";
    EXPECT_EQ(invoke({"trajectory", "--config=" + config.string()}, dir_ / "out"), cli::kExitConfigError);
}
