#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "koopman/io.hpp"

using namespace koopman;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("koopman_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    int run(const std::string& args) const {
        const std::string cmd = std::string(KOOPMAN_CLI) + " " + args + " > " + path("stdout.txt") + " 2> " + path("stderr.txt");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream os(path(name));
        os << text;
    }

    std::string read(const std::string& name) const {
        std::ifstream is(path(name));
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }

    std::size_t lines(const std::string& name) const {
        const auto text = read(name);
        return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    }

    fs::path dir_;
};

const char* kSmallDuffing = R"({"sweep": [{"kind": "polynomial", "values": [2, 3]}], "test": {"count": 8}})";

} // namespace

TEST_F(Cli, SimulateMatchesLibrary) {
    ASSERT_EQ(run("simulate --system duffing --x0 1.5,0 --dt 0.2 --steps 50 --out " + path("sim.csv")), 0);
    std::ifstream is(path("sim.csv"));
    const auto t = read_trajectories_csv(is);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0].states, simulate(duffing_field(), Eigen::Vector2d(1.5, 0), 0.2, 50).states);
}

TEST_F(Cli, SimulateRejectsBadInput) {
    EXPECT_EQ(run("simulate --system duffing --x0 1,2,3 --out " + path("a.csv")), 2);
    EXPECT_EQ(run("simulate --system pendulum --x0 1,2 --out " + path("a.csv")), 2);
    EXPECT_NE(run("simulate --x0 1,2"), 0);
}

TEST_F(Cli, FitThenPredict) {
    ASSERT_EQ(run("simulate --system duffing --x0 1.5,0.5 --dt 0.2 --steps 50 --out " + path("sim.csv")), 0);
    ASSERT_EQ(run("fit --data " + path("sim.csv") + " --dict '{\"kind\":\"polynomial\",\"max_order\":3}' --out " +
                  path("model.json")),
              0);
    ASSERT_EQ(run("predict --model " + path("model.json") + " --x0 1.2,0.1 --steps 10 --out " + path("pred.csv")), 0);

    std::ifstream is(path("sim.csv"));
    const auto data = read_trajectories_csv(is);
    const auto model = fit(build_snapshot_pairs(data), Dictionary::polynomial(2, 3));
    std::ifstream ps(path("pred.csv"));
    const auto pred = read_trajectories_csv(ps);
    ASSERT_EQ(pred[0].size(), 11u);
    EXPECT_EQ(pred[0].states, predict_trajectory(model, Eigen::Vector2d(1.2, 0.1), 10).states);
}

TEST_F(Cli, FitRejectsBadDictionary) {
    ASSERT_EQ(run("simulate --system duffing --x0 1.5,0.5 --dt 0.2 --steps 20 --out " + path("sim.csv")), 0);
    EXPECT_EQ(run("fit --data " + path("sim.csv") + " --dict '{\"kind\":\"spline\"}' --out " + path("m.json")), 2);
    EXPECT_EQ(run("fit --data " + path("missing.csv") + " --dict '{\"kind\":\"rbf\",\"n_centers\":5}' --out " +
                  path("m.json")),
              2);
}

TEST_F(Cli, AugmentDoublesStates) {
    ASSERT_EQ(run("simulate --system lorenz --x0 1,0,0 --dt 0.02 --steps 100 --out " + path("lz.csv")), 0);
    write("action.json", R"({"actions": [[[1,0,0],[0,1,0],[0,0,1]], [[-1,0,0],[0,-1,0],[0,0,1]]]})");
    ASSERT_EQ(run("augment --data " + path("lz.csv") + " --action " + path("action.json") + " --out " + path("aug.csv")), 0);
    std::ifstream is(path("aug.csv"));
    const auto trajs = read_trajectories_csv(is);
    ASSERT_EQ(trajs.size(), 2u);
    EXPECT_EQ(trajs[0].size(), 101u);
    EXPECT_EQ(trajs[1].states[7], lorenz_action().apply(trajs[0].states[7]));
}

TEST_F(Cli, BasinGrid) {
    ASSERT_EQ(run("basin --grid 5 --domain -2,2 --out " + path("basin.csv")), 0);
    EXPECT_EQ(lines("basin.csv"), 26u);
    const auto text = read("basin.csv");
    EXPECT_NE(text.find("2,2,2\n"), std::string::npos);
    EXPECT_NE(text.find("-2,-2,1\n"), std::string::npos);
    ASSERT_EQ(run("basin --grid 3 --oracle --out " + path("oracle.csv")), 0);
    EXPECT_EQ(lines("oracle.csv"), 10u);
}

TEST_F(Cli, BenchDuffingWritesRows) {
    write("cfg.json", kSmallDuffing);
    ASSERT_EQ(run("bench duffing --config " + path("cfg.json") + " --out " + path("d.csv")), 0);
    EXPECT_EQ(lines("d.csv"), 5u);
    EXPECT_EQ(read("d.csv").substr(0, 54), "method,dict_kind,hyperparam,mse,n_train_pairs,diverged");
}

TEST_F(Cli, BenchIsDeterministicAndSeedable) {
    write("cfg.json", kSmallDuffing);
    ASSERT_EQ(run("bench duffing --config " + path("cfg.json") + " --out " + path("a.csv")), 0);
    ASSERT_EQ(run("bench duffing --config " + path("cfg.json") + " --out " + path("b.csv")), 0);
    ASSERT_EQ(run("bench duffing --config " + path("cfg.json") + " --seed 5 --out " + path("c.csv")), 0);
    EXPECT_EQ(read("a.csv"), read("b.csv"));
    EXPECT_NE(read("a.csv"), read("c.csv"));
}

TEST_F(Cli, BenchConfigErrorsExitWithTwo) {
    write("bad.json", "{ not json");
    EXPECT_EQ(run("bench duffing --config " + path("bad.json") + " --out " + path("x.csv")), 2);
    write("typo.json", R"({"seeed": 3})");
    EXPECT_EQ(run("bench duffing --config " + path("typo.json") + " --out " + path("x.csv")), 2);
    EXPECT_EQ(run("bench duffing --config " + path("absent.json") + " --out " + path("x.csv")), 2);
    EXPECT_EQ(run("bench pendulum --out " + path("x.csv")), 2);
}

TEST_F(Cli, BenchLorenzWritesSweepTables) {
    write("cfg.json", R"({"lorenz": {"dictionary": {"kind": "rbf", "n_centers": 30}, "sweep_centers": [20, 30], "horizon": 10}})");
    const int code = run("bench lorenz --config " + path("cfg.json") + " --out " + path("lz.csv") + " --check");
    EXPECT_TRUE(code == 0 || code == 3) << code;
    EXPECT_EQ(lines("lz.csv"), 11u);
    EXPECT_EQ(read("lz_rbf30.csv"), read("lz.csv"));
    EXPECT_EQ(lines("lz_rbf20.csv"), 11u);
    // The summary names every cell, marking deviations.
    const auto out = read("stdout.txt");
    EXPECT_NE(out.find("rbf 20"), std::string::npos);
    EXPECT_NE(out.find("points: raw 501, augmented 1002, half augmented 502"), std::string::npos);
    EXPECT_EQ(code == 3, out.find("deviation") != std::string::npos);
}
