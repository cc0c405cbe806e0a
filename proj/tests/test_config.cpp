#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rdcontrol/config.hpp"
#include "rdcontrol/experiment.hpp"

using namespace rdcontrol;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(RDCONTROL_TEST_TMP) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string key_of(const std::string& text) {
    try {
        validate_config(parse(text));
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<none>";
}

}  // namespace

TEST(Config, ParsesAllSections) {
    const ExperimentConfig c = parse(R"(
# comment
[experiment]
kind = control-local
output = somewhere
seed = 9
[domain]
length = 2
n = 81
omega = 0.6, 1.4
[time]
horizon = 0.5
steps = 50
[system]
d = 1 2 3 4
target = 1 2 4 2
j = 2
[hum]
epsilon = 1e-5
t1 = 0.1
t2 = 0.4
[fixed_point]
max_iterations = 12
[plot]
fields = u1, h2
times = 0 0.5
)");
    EXPECT_EQ(c.kind, ExperimentKind::control_local);
    EXPECT_EQ(c.output, "somewhere");
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.points, 81u);
    EXPECT_DOUBLE_EQ(c.omega.b, 1.4);
    EXPECT_EQ(c.steps, 50u);
    EXPECT_EQ(c.j, 2);
    EXPECT_DOUBLE_EQ(c.target[2], 4.0);
    EXPECT_DOUBLE_EQ(c.local.hum.epsilon, 1e-5);
    EXPECT_DOUBLE_EQ(c.local.hum.window.a, 0.1);
    EXPECT_EQ(c.local.fixed_point.max_outer_iterations, 12);
    EXPECT_EQ(c.plot_fields, (std::vector<std::string>{"u1", "h2"}));
    // the initial value defaults to the target
    EXPECT_DOUBLE_EQ(c.initial.value[1], 2.0);
}

TEST(Config, ErrorsNameTheKey) {
    EXPECT_EQ(key_of("[experiment]\nkind = simulate\n[domain]\npoints = 3\n"), "domain.points");
    EXPECT_EQ(key_of("[experiment]\nkind = simulate\n[system]\nd = 1 -2 3 4\n"), "system.d");
    EXPECT_EQ(key_of("[experiment]\nkind = simulate\n[system]\nd = 1 2 3\n"), "system.d");
    EXPECT_EQ(key_of("[experiment]\nkind = simulate\n[time]\nsteps = ten\n"), "time.steps");
    EXPECT_EQ(key_of("[experiment]\nkind = bake\n"), "experiment.kind");
    EXPECT_EQ(key_of("[domain]\nn = 11\n"), "experiment.kind");
    EXPECT_EQ(key_of("[experiment]\nkind = simulate\n[hum]\nepsilon = 0\n"), "hum.epsilon");
    EXPECT_EQ(key_of("[experiment]\nkind = kalman\n[system]\ntarget = 1 2 3 4\n"), "system.target");
    EXPECT_EQ(key_of("[experiment]\nkind = control-global\n[system]\nj = 2\n"), "system.j");
    EXPECT_EQ(key_of("[experiment]\nkind = simulate\n[plot]\nfields = h1\ntimes = 0\n"), "plot.fields");
    EXPECT_EQ(key_of("[experiment]\nkind = control-local\n[system]\nj = 2\n[initial]\nvalue = 1 1 1.5 1\n"), "initial");
    EXPECT_EQ(key_of("[experiment]\nkind = simulate\n"), "<none>");
}

TEST(Config, InitialStates) {
    ExperimentConfig c = parse("[experiment]\nkind = simulate\n[domain]\nn = 21\n[initial]\ntype = bump\n"
                               "value = 1 2 3 4\namplitude = 0.5\ncomponents = 2\n");
    const Domain1D dom = c.domain();
    const StateField u = initial_state(c, dom);
    EXPECT_DOUBLE_EQ(u[0][0], 1.0);
    EXPECT_DOUBLE_EQ(u[1][0], 2.5);
    EXPECT_DOUBLE_EQ(u[1].back(), 1.5);
    EXPECT_NEAR(mean(dom, u[1]), 2.0, 1e-14);

    const fs::path dir = scratch("initial_file");
    {
        std::ofstream f(dir / "u0.csv");
        f << "x,u1,u2,u3,u4\n";
        for (std::size_t i = 0; i < dom.size(); ++i) f << dom.x(i) << ",1,2," << i << ",4\n";
    }
    c.initial.type = InitialType::file;
    c.initial.file = (dir / "u0.csv").string();
    const StateField v = initial_state(c, dom);
    EXPECT_DOUBLE_EQ(v[2][7], 7.0);
    c.points = 41;
    EXPECT_THROW(initial_state(c, c.domain()), ConfigError);
}

TEST(Experiment, SimulateWritesOutputsAndConservesMass) {
    ExperimentConfig c = parse("[experiment]\nkind = simulate\n[domain]\nn = 31\n[time]\nsteps = 50\n"
                               "[system]\nd = 1 2 3 4\n[initial]\ntype = bump\namplitude = 0.3\nshape = gaussian\n"
                               "[plot]\nfields = u1 u4\ntimes = 0 0.5\n");
    c.output = scratch("simulate").string();
    validate_config(c);
    const RunOutcome r = run_experiment(c);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.summary.get("status"), "ok");
    EXPECT_LE(std::stod(r.summary.get("mass_drift_u3u4")), 1e-10);
    for (const char* f : {"summary", "trajectory.csv", "diagnostics.csv", "snapshot_0.csv", "snapshot_1.csv"})
        EXPECT_TRUE(fs::exists(fs::path(c.output) / f)) << f;
    EXPECT_EQ(slurp(fs::path(c.output) / "trajectory.csv").substr(0, 15), "t,x,u1,u2,u3,u4");
}

TEST(Experiment, RunsAreByteIdentical) {
    ExperimentConfig c = parse("[experiment]\nkind = observability\nseed = 5\n[domain]\nn = 21\n[time]\nsteps = 40\n"
                               "[system]\nd = 1 2 3 4\n[observability]\ntrials = 3\n");
    c.output = scratch("repeat_a").string();
    (void)run_experiment(c);
    const std::string a = slurp(fs::path(c.output) / "diagnostics.csv");
    c.output = scratch("repeat_b").string();
    (void)run_experiment(c);
    EXPECT_EQ(a, slurp(fs::path(c.output) / "diagnostics.csv"));
    EXPECT_FALSE(a.empty());
}

TEST(Experiment, KalmanAtReturnTarget) {
    ExperimentConfig c = parse("[experiment]\nkind = kalman\n[system]\nd = 1 2 3 4\ntarget = 0 1 0 0\n[kalman]\nk_max = 8\n");
    c.output = scratch("kalman").string();
    const RunOutcome r = run_experiment(c);
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.summary.get("controllable"), "false");
}

TEST(Experiment, RuntimeFailureGivesExitOne) {
    ExperimentConfig c = parse("[experiment]\nkind = control-local\n[domain]\nn = 31\n[time]\nsteps = 60\n"
                               "[system]\nd = 1 2 3 4\n[initial]\ntype = bump\namplitude = 0.05\n"
                               "[fixed_point]\nmax_iterations = 1\n");
    c.output = scratch("failure").string();
    validate_config(c);
    const RunOutcome r = run_experiment(c);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_EQ(r.summary.get("status"), "failed");
}

TEST(Plotdata, SnapshotAtZeroReproducesInitialState) {
    const Domain1D dom = Domain1D::unit(21);
    StateField u0(dom.size());
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < dom.size(); ++i) u0[k][i] = 0.1 * static_cast<double>(k) + dom.x(i) * dom.x(i);
    const Trajectory t = simulate_nonlinear(dom, u0, TimeGrid(1.0, 10), DiffusionVector(), Controls(10, 1, dom.size()));
    TrajectoryTable tab;
    tab.control_count = 1;
    tab.append(0.0, t, dom.size());
    const fs::path dir = scratch("plot");
    const auto files = emit_plotdata(dom, tab, {"u3", "h1"}, {0.0}, dir);
    ASSERT_EQ(files.size(), 1u);
    std::ifstream in(files[0]);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,x,u3,h1");
    for (std::size_t i = 0; i < dom.size(); ++i) {
        std::getline(in, line);
        std::istringstream row(line);
        std::string tt, x, u3, h1;
        std::getline(row, tt, ',');
        std::getline(row, x, ',');
        std::getline(row, u3, ',');
        std::getline(row, h1, ',');
        EXPECT_EQ(std::stod(tt), 0.0);
        EXPECT_EQ(std::stod(u3), u0[2][i]);
    }
    EXPECT_THROW(emit_plotdata(dom, tab, {"h4"}, {0.0}, dir), std::invalid_argument);
    EXPECT_THROW(emit_plotdata(dom, tab, {"u1"}, {2.0}, dir), std::invalid_argument);
}
