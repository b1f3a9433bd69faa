#include <gtest/gtest.h>

#include <sys/wait.h>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "rifling/cli.hpp"

using namespace rifling;
using namespace rifling::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("rifling_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string error_path(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

int run_binary(const std::string& args) {
    const int status = std::system((std::string(RIFLING_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Quantity, UnitsConvertToInternal) {
    EXPECT_NEAR(parse_quantity("4.1 MHz", Dimension::Frequency, "x"), units::mhz(4.1), 1e-12);
    EXPECT_NEAR(parse_quantity("950 kHz", Dimension::Frequency, "x"), units::mhz(0.95), 1e-12);
    EXPECT_NEAR(parse_quantity("2 rad/us", Dimension::Frequency, "x"), 2.0, 0);
    EXPECT_NEAR(parse_quantity("1132 ns", Dimension::Time, "x"), 1.132, 1e-15);
    EXPECT_NEAR(parse_quantity("1e6 1/s", Dimension::Rate, "x"), 1.0, 1e-15);
    EXPECT_NEAR(parse_quantity("0.5 pi", Dimension::Angle, "x"), std::numbers::pi / 2, 1e-15);
    EXPECT_NEAR(parse_quantity("-90 deg", Dimension::Angle, "x"), -std::numbers::pi / 2, 1e-15);
    EXPECT_NEAR(parse_quantity("+3 us", Dimension::Time, "x"), 3.0, 0);
}

TEST(Quantity, MalformedStringsReportTheKey) {
    for (const char* bad : {"4.1 Mhzz", "4.1", "MHz", "4.1x MHz", "", "4.1 ns", "nan MHz"}) {
        try {
            parse_quantity(bad, Dimension::Frequency, "params.qubits[0].chi");
            ADD_FAILURE() << bad;
        } catch (const ConfigError& e) {
            EXPECT_EQ(e.path(), "params.qubits[0].chi") << bad;
        }
    }
}

TEST(FormatNumber, ShortestRoundTrip) {
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(-0.0), "0");
    EXPECT_EQ(format_number(1e-300), "1e-300");
    EXPECT_EQ(format_number(NAN), "nan");
    EXPECT_EQ(format_axis(units::to_mhz(units::mhz(2.0))), "2");
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int k = 0; k < 1000; ++k) {
        const double v = u(rng);
        const std::string s = format_number(v);
        double back = 0;
        std::from_chars(s.data(), s.data() + s.size(), back);
        EXPECT_EQ(back, v);
    }
}

TEST(Config, EveryPresetParses) {
    for (const auto& p : all_presets()) {
        const RunConfig c = parse_config(p.config);
        EXPECT_EQ(c.hash.size(), 16u) << p.name;
        EXPECT_EQ(c.output, p.name);
    }
    EXPECT_THROW(find_preset("fig99"), ConfigError);
}

TEST(Config, Fig2bAxes) {
    const RunConfig c = parse_config(find_preset("fig2b").config);
    EXPECT_EQ(c.experiment, Experiment::Spectroscopy);
    const auto& s = std::get<SweepConfig>(c.protocol);
    EXPECT_NEAR(units::to_mhz(s.detuning.front()), -15.0, 1e-12);
    EXPECT_NEAR(units::to_mhz(s.detuning.back()), 15.0, 1e-12);
    EXPECT_NEAR(units::to_mhz(s.axis.front()), 0.0, 1e-12);
    EXPECT_NEAR(units::to_mhz(s.axis.back()), 120.0, 1e-12);
    EXPECT_EQ(c.params.qubits[0].n_levels, 3u);
}

TEST(Config, Fig3cSetpoints) {
    const RunConfig c = parse_config(find_preset("fig3c").config);
    const auto& r = std::get<RabiCurveConfig>(c.protocol);
    EXPECT_EQ(r.photons, (std::vector<double>{0.0, 0.13, 2.1, 6.8}));
    EXPECT_NEAR(r.options.t_max, 8.0, 1e-12);
}

TEST(Config, StrictKeysAndPaths) {
    json j = find_preset("steady-state").config;
    j["params"]["qubits"][0]["chii"] = "1 MHz";
    EXPECT_EQ(error_path(j), "params.qubits[0].chii");

    j = find_preset("steady-state").config;
    j["params"]["qubits"][0]["chi"] = "4.1 Mhzz";
    EXPECT_EQ(error_path(j), "params.qubits[0].chi");

    j = find_preset("steady-state").config;
    j["params"]["qubits"][0]["chi"] = 4.1;  // bare number, no unit
    EXPECT_EQ(error_path(j), "params.qubits[0].chi");

    j = find_preset("steady-state").config;
    j["params"]["resonator"].erase("kappa");  // no silent default for rates
    EXPECT_EQ(error_path(j), "params.resonator.kappa");

    j = find_preset("fig2b").config;
    j["ramsey"] = json::object();  // section of another experiment
    EXPECT_EQ(error_path(j), "ramsey");

    j = find_preset("fig2b").config;
    j["spectroscopy"]["detuning"]["step"] = "0.7 MHz";
    EXPECT_EQ(error_path(j), "spectroscopy.detuning");

    j = find_preset("fig2b").config;
    j["experiment"] = "spectroscopie";
    EXPECT_EQ(error_path(j), "experiment");
}

TEST(Config, GridForms) {
    json j = find_preset("dressed").config;
    j["dressed"]["rabi"] = {{"start", "0 MHz"}, {"stop", "10 MHz"}, {"step", "2.5 MHz"}};
    auto d = std::get<DressedConfig>(parse_config(j).protocol);
    ASSERT_EQ(d.rabi.size(), 5u);
    EXPECT_NEAR(units::to_mhz(d.rabi[3]), 7.5, 1e-12);

    j["dressed"]["rabi"] = {{"start", "1 MHz"}, {"stop", "100 MHz"}, {"count", 3}, {"spacing", "log"}};
    d = std::get<DressedConfig>(parse_config(j).protocol);
    EXPECT_NEAR(units::to_mhz(d.rabi[1]), 10.0, 1e-9);

    j["dressed"]["rabi"] = {"1 MHz", "3 MHz"};
    d = std::get<DressedConfig>(parse_config(j).protocol);
    EXPECT_EQ(d.rabi.size(), 2u);
}

TEST(Run, SteadyStateArtifacts) {
    const fs::path dir = scratch_dir("ss");
    const RunConfig c = parse_config(find_preset("steady-state").config);
    const RunOutcome o = run(c, dir);
    EXPECT_EQ(o.exit_code, kExitOk);
    const json j = json::parse(slurp(dir / "steady_state.json"));
    EXPECT_EQ(j["config_hash"], c.hash);
    EXPECT_NEAR(j["photons"].get<double>(), std::pow(1.0 / 1000.0, 2), 1e-9);  // eps = kappa/1000 on resonance
    const std::string manifest = slurp(dir / "manifest.txt");
    EXPECT_NE(manifest.find("config_hash " + c.hash), std::string::npos);
    EXPECT_NE(manifest.find("wall_time_s "), std::string::npos);
    EXPECT_NE(manifest.find("toolkit_version "), std::string::npos);
    fs::remove_all(dir);
}

TEST(Run, CsvHeadersAndByteDeterminism) {
    json j = find_preset("fig2c").config;
    j["spectroscopy"]["detuning"]["count"] = 31;
    const RunConfig c = parse_config(j);
    const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
    run(c, a);
    RunConfig c1 = c;
    c1.workers = 1;
    run(c1, b);
    for (const char* f : {"sweep.csv", "peaks.csv", "summary.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    const std::string csv = slurp(a / "sweep.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "Omega_R/2pi [MHz],delta_omega_r/2pi [MHz],|<a>| [normalized],error");
    EXPECT_NE(slurp(a / "summary.json").find(c.hash), std::string::npos);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Run, PartialFailureExitCode) {
    json j = find_preset("fig3c").config;
    j["rabi-curve"]["rabi"] = {"0.01 MHz", "10 MHz"};  // first point: under one period in 1 us
    j["rabi-curve"]["photons"] = {0};
    j["rabi-curve"]["t_max"] = "1000 ns";
    const fs::path dir = scratch_dir("partial");
    const RunOutcome o = run(parse_config(j), dir);
    EXPECT_EQ(o.failures, 1u);
    EXPECT_EQ(o.exit_code, kExitPartial);
    const std::string csv = slurp(dir / "rabi_curve.csv");
    EXPECT_NE(csv.find("fewer than two oscillation periods"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Binary, ExitCodes) {
    const fs::path dir = scratch_dir("bin");
    json j = find_preset("steady-state").config;
    j["output"] = (dir / "out").string();
    std::ofstream(dir / "good.json") << j.dump();
    j["params"]["qubits"][0]["chi"] = "4.1 Mhzz";
    std::ofstream(dir / "bad.json") << j.dump();
    std::ofstream(dir / "broken.json") << "{ not json";

    EXPECT_EQ(run_binary("validate " + (dir / "good.json").string()), 0);
    EXPECT_EQ(run_binary("run " + (dir / "good.json").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "steady_state.json"));
    EXPECT_EQ(run_binary("validate " + (dir / "bad.json").string()), 2);
    EXPECT_EQ(run_binary("run " + (dir / "bad.json").string()), 2);
    EXPECT_EQ(run_binary("run " + (dir / "broken.json").string()), 2);
    EXPECT_EQ(run_binary("run " + (dir / "missing.json").string()), 2);
    EXPECT_EQ(run_binary("presets list"), 0);
    EXPECT_EQ(run_binary("presets emit fig2b"), 0);
    EXPECT_EQ(run_binary("presets emit nope"), 2);
    EXPECT_EQ(run_binary("frobnicate"), 2);

    // Fock capacity exhausted: solver-class failure
    j = find_preset("steady-state").config;
    j["params"]["resonator"]["drive_amp"] = "50 MHz";
    j["output"] = (dir / "cap").string();
    std::ofstream(dir / "cap.json") << j.dump();
    EXPECT_EQ(run_binary("run " + (dir / "cap.json").string()), 3);
    fs::remove_all(dir);
}
