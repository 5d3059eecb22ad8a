#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cylflow/commands.hpp"
#include "support.hpp"

using namespace cylflow;
using namespace cyltest;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = CYLFLOW_SOURCE_DIR;

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() /
                ("cylflow_" + std::string(info->name()) + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

const char* kMinimal = R"({
  "schema_version": 1,
  "spec": {"n": 2, "R": 1.0, "d": 2.0},
  "grid": {"nz": 17},
  "dt": 0.01,
  "t_end": 0.5,
  "initial": {"modes": [{"l": 0, "m": 1, "amplitude": 0.01}]}
})";

TEST(Config, ParsesMinimalAndDefaults) {
    const ExperimentConfig ec = parse_config_text(kMinimal);
    EXPECT_EQ(ec.flow.spec, (CylinderSpec{2, 1.0, 2.0}));
    EXPECT_EQ(ec.flow.nz, 17);
    EXPECT_FALSE(ec.flow.ntheta.has_value());
    EXPECT_EQ(ec.flow.scheme, Scheme::imex1);
    ASSERT_EQ(ec.flow.initial.modes.size(), 1u);
    EXPECT_EQ(ec.flow.initial.modes[0].index, (ModeIndex{0, 1, 1}));
    EXPECT_FALSE(ec.flow.renormalize_volume);
    EXPECT_EQ(ec.window()[0], 0.125);
}

TEST(Config, JsonRoundTrip) {
    const ExperimentConfig ec = load_config((kSource / "configs/tilted_full.json").string());
    const ExperimentConfig back = parse_config(to_json(ec));
    EXPECT_EQ(to_json(back), to_json(ec));
    EXPECT_EQ(back.flow.initial.cylinder, ec.flow.initial.cylinder);
}

TEST(Config, RejectsBadInput) {
    const auto bad = [](const std::string& text) { EXPECT_THROW(parse_config_text(text), ConfigError) << text; };
    bad("{not json");
    bad("[]");
    std::string s = kMinimal;
    bad(std::string(s).replace(s.find("\"dt\""), 4, "\"dtt\""));
    bad(std::string(s).replace(s.find("\"nz\": 17"), 8, "\"nz\": 17, \"nx\": 3"));
    bad(std::string(s).replace(s.find("\"l\": 0"), 6, "\"l\": 0, \"q\": 1"));
    bad(std::string(s).replace(s.find("\"schema_version\": 1"), 19, "\"schema_version\": 2"));
    bad(std::string(s).replace(s.find("0.01,"), 5, "\"x\","));
    bad(std::string(s).replace(s.find("\"R\": 1.0"), 8, "\"R\": -1.0"));
    bad(std::string(s).replace(s.find("\"nz\": 17"), 8, "\"nz\": 17, \"ntheta\": 8").replace(s.find("\"n\": 2"), 6,
                                                                                            "\"n\": 3"));
    bad(std::string(s).replace(s.find("\"t_end\": 0.5"), 12, "\"t_end\": 0.001"));
    bad(std::string(s).replace(s.find("0.01}"), 4, "-1.5"));
    bad(std::string(s).replace(s.find("\"dt\": 0.01,"), 11, ""));
}

TEST(Csv, FormatAndRead) {
    EXPECT_EQ(format_real(0.1), "0.10000000000000001");
    EXPECT_EQ(std::stod(format_real(pi)), pi);
    std::stringstream ss("# a=1\n# b = x\nt,v\n0,1.5\n1,2.5\n");
    const CsvTable t = read_csv(ss);
    EXPECT_EQ(t.comments.at("a"), "1");
    EXPECT_EQ(t.column("v"), (std::vector<double>{1.5, 2.5}));
    EXPECT_THROW(t.column("w"), InvalidArgument);
    std::stringstream mixed("v,status\n1,ok\n");
    const CsvTable m = read_csv(mixed);
    EXPECT_EQ(m.text("status")[0], "ok");
    EXPECT_THROW(m.column("status"), InvalidArgument);
    std::stringstream bad("t,v\n0,1\n1\n");
    EXPECT_THROW(read_csv(bad), InvalidArgument);
}

TEST(Snapshot, RoundTripIsExact) {
    const Grid g = make_grid({2, 1.0, 2.0}, 9, 8);
    std::mt19937_64 gen(1);
    const Field f = random_bandlimited(g, gen, 4, 3, 0.01);
    std::stringstream ss;
    write_snapshot(ss, f, 1.25);
    const LoadedSnapshot s = read_snapshot(ss);
    EXPECT_EQ(s.t, 1.25);
    EXPECT_TRUE(s.rho.grid().same_layout(g));
    EXPECT_EQ(s.rho.values(), f.values());
}

TEST(Spectrum, TableAndHeaders) {
    std::ostringstream out, err;
    ASSERT_EQ(cmd_spectrum({{2, 1.0, 2.0}, 2, 2, std::nullopt}, out, err), 0);
    std::stringstream in(out.str());
    const CsvTable t = read_csv(in);
    ASSERT_EQ(t.column("l").size(), 9u);
    for (size_t i = 0; i < 9; ++i)
        if (t.column("l")[i] == 1 && t.column("m")[i] == 0) {
            EXPECT_EQ(t.column("lambda")[i], 0.0);
            EXPECT_EQ(t.column("multiplicity")[i], 2);
        }
    EXPECT_EQ(t.comments.at("kernel_dimension"), "3");

    std::ostringstream out2;
    ASSERT_EQ(cmd_spectrum({{2, 1.0, pi}, 1, 1, std::nullopt}, out2, err), 0);
    std::stringstream in2(out2.str());
    const CsvTable t2 = read_csv(in2);
    EXPECT_NEAR(std::stod(t2.comments.at("critical_radius")), 1.0, 1e-15);
    EXPECT_EQ(t2.comments.at("spectral_gap"), "none");
    EXPECT_EQ(out2.str().find("# spectral_gap=#"), std::string::npos);

    std::ostringstream out3;
    ASSERT_EQ(cmd_spectrum({{3, 1.0, 1.0}, 4, 4, std::nullopt}, out3, err), 0);
    std::stringstream in3(out3.str());
    const CsvTable t3 = read_csv(in3);
    for (size_t i = 0; i < t3.column("l").size(); ++i) {
        const int l = static_cast<int>(t3.column("l")[i]), m = static_cast<int>(t3.column("m")[i]);
        if ((l == 0 && m == 0) || (l == 1 && m == 0)) continue;
        EXPECT_LT(t3.column("lambda")[i], 0.0);
    }
}

TEST(Spectrum, InvalidSpecExits2) {
    std::ostringstream out, err;
    EXPECT_EQ(cmd_spectrum({{2, -1.0, 2.0}, 2, 2, std::nullopt}, out, err), 2);
    EXPECT_FALSE(err.str().empty());
}

TEST(Simulate, StableBundledConfig) {
    TempDir dir;
    std::ostringstream out, err;
    ASSERT_EQ(cmd_simulate({(kSource / "configs/stable_axisym.json").string(), dir.path().string(), {}}, out, err), 0)
        << err.str();
    const auto manifest = nlohmann::json::parse(slurp(dir.path() / "manifest.json"));
    EXPECT_EQ(manifest["termination"], "completed");
    EXPECT_LE(manifest["final"]["dist"].get<double>(), 1e-6);
    for (const char* key : {"code_version", "config", "started", "finished", "termination", "outputs"})
        EXPECT_TRUE(manifest.contains(key)) << key;
    for (const auto& p : manifest["outputs"]) EXPECT_TRUE(fs::exists(p.get<std::string>())) << p;
    // The config echo parses back to the same experiment.
    EXPECT_EQ(to_json(parse_config(manifest["config"])), manifest["config"]);

    const CsvTable t = read_csv_file((dir.path() / "diagnostics.csv").string());
    EXPECT_EQ(t.header, diagnostics_columns(2));
    const LoadedSnapshot last = [&] {
        std::ifstream in(dir.path() / "final_state.txt");
        return read_snapshot(in);
    }();
    EXPECT_EQ(last.t, 10.0);
}

TEST(Simulate, UnstableBundledConfigTerminates) {
    TempDir dir;
    std::ostringstream out, err;
    ASSERT_EQ(cmd_simulate({(kSource / "configs/unstable_R_below_star.json").string(), dir.path().string(), {}}, out,
                           err),
              0);
    const auto manifest = nlohmann::json::parse(slurp(dir.path() / "manifest.json"));
    const std::string term = manifest["termination"];
    EXPECT_TRUE(term == "blowup" || term == "axis_touched") << term;
    EXPECT_FALSE(manifest["message"].get<std::string>().empty());
    for (const auto& p : manifest["outputs"]) EXPECT_TRUE(fs::exists(p.get<std::string>()));
}

TEST(Simulate, MalformedConfigLeavesNoOutputs) {
    TempDir dir;
    spit(dir.path() / "bad.json", "{\"schema_version\": 1, \"spec\": ");
    std::ostringstream out, err;
    const fs::path target = dir.path() / "out";
    EXPECT_EQ(cmd_simulate({(dir.path() / "bad.json").string(), target.string(), {}}, out, err), 2);
    EXPECT_FALSE(fs::exists(target));
    spit(dir.path() / "unknown.json", std::string(kMinimal).replace(1, 0, "\"colour\": 1,"));
    EXPECT_EQ(cmd_simulate({(dir.path() / "unknown.json").string(), target.string(), {}}, out, err), 2);
    EXPECT_FALSE(fs::exists(target));
    EXPECT_NE(err.str().find("colour"), std::string::npos);
    EXPECT_EQ(cmd_simulate({(dir.path() / "missing.json").string(), target.string(), {}}, out, err), 2);
}

TEST(Simulate, DeterministicOutputs) {
    TempDir dir;
    std::string cfg = R"({"schema_version": 1, "spec": {"n": 2, "R": 1.0, "d": 2.0}, "grid": {"nz": 17, "ntheta": 8},
      "dt": 0.01, "t_end": 0.3, "initial": {"random": {"amplitude": 0.001, "max_l": 2, "max_m": 3}}, "seed": 5})";
    spit(dir.path() / "r.json", cfg);
    std::ostringstream out, err;
    ASSERT_EQ(cmd_simulate({(dir.path() / "r.json").string(), (dir.path() / "a").string(), {}}, out, err), 0);
    ASSERT_EQ(cmd_simulate({(dir.path() / "r.json").string(), (dir.path() / "b").string(), {}}, out, err), 0);
    ASSERT_EQ(cmd_simulate({(dir.path() / "r.json").string(), (dir.path() / "c").string(), 6}, out, err), 0);
    const std::string a = slurp(dir.path() / "a/diagnostics.csv");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir.path() / "b/diagnostics.csv"));
    EXPECT_NE(a, slurp(dir.path() / "c/diagnostics.csv"));
}

TEST(DecayFitCommand, SyntheticCsv) {
    TempDir dir;
    std::ostringstream csv;
    csv << "t,stable_norm\n";
    for (int i = 0; i <= 200; ++i) csv << format_real(0.01 * i) << ',' << format_real(std::exp(-2.0 * 0.01 * i)) << '\n';
    spit(dir.path() / "d.csv", csv.str());
    std::ostringstream out, err;
    ASSERT_EQ(cmd_decay_fit({(dir.path() / "d.csv").string(), 0.2, 1.8, "stable_norm"}, out, err), 0);
    std::stringstream in(out.str());
    const CsvTable t = read_csv(in);
    EXPECT_NEAR(t.column("rate")[0], 2.0, 1e-6);
    EXPECT_EQ(t.column("decaying")[0], 1.0);
    EXPECT_EQ(cmd_decay_fit({(dir.path() / "d.csv").string(), 0.2, 1.8, "nope"}, out, err), 2);
    EXPECT_EQ(cmd_decay_fit({(dir.path() / "d.csv").string(), 0.2, 0.25, "stable_norm"}, out, err), 2);
}

TEST(Stationary, BranchAtThreshold) {
    std::ostringstream out, err;
    ASSERT_EQ(cmd_stationary({{2, 1.0, pi}, 0.05, 10, 33, std::nullopt}, out, err), 0) << err.str();
    std::stringstream in(out.str());
    const CsvTable t = read_csv(in);
    EXPECT_EQ(t.comments.at("status"), "complete");
    ASSERT_EQ(t.column("a").size(), 10u);
    for (double r : t.column("residual_inf")) EXPECT_LE(r, 1e-10);
    for (size_t i = 0; i < 10; ++i) EXPECT_LT(t.column("min_r")[i], t.column("max_r")[i]);
}

TEST(Stationary, EmptyBranchAwayFromThreshold) {
    std::ostringstream out, err;
    ASSERT_EQ(cmd_stationary({{2, 1.5, pi}, 0.05, 10, 33, std::nullopt}, out, err), 0);
    std::stringstream in(out.str());
    const CsvTable t = read_csv(in);
    EXPECT_EQ(t.comments.at("status"), "empty_branch");
    EXPECT_TRUE(t.column("a").empty());
}

TEST(Sweep, ThresholdSignChange) {
    TempDir dir;
    SweepArgs args;
    args.config_path = (kSource / "configs/threshold_base.json").string();
    args.parameter = SweepParameter::R;
    args.values = {0.8, 0.9, 1.1, 1.2};
    args.out_dir = dir.path().string();
    args.threads = 2;
    std::ostringstream out, err;
    ASSERT_EQ(cmd_sweep(args, out, err), 0) << err.str();
    const CsvTable t = read_csv_file((dir.path() / "sweep.csv").string());
    EXPECT_EQ(t.comments.at("parameter"), "R");
    const auto& rate = t.column("rate");
    ASSERT_EQ(rate.size(), 4u);
    EXPECT_LT(rate[0], 0.0);
    EXPECT_LT(rate[1], 0.0);
    EXPECT_GT(rate[2], 0.0);
    EXPECT_GT(rate[3], 0.0);
    for (int i = 2; i < 4; ++i) {
        const double gap = spectral_gap({2, args.values[i], pi});
        EXPECT_NEAR(rate[i], gap, 0.1 * gap);
    }
    for (int i = 0; i < 4; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "run_%03d", i);
        EXPECT_TRUE(fs::exists(dir.path() / name / "manifest.json"));
    }
}

TEST(Sweep, RowFailuresDoNotStopTheSweep) {
    TempDir dir;
    SweepArgs args;
    args.config_path = (kSource / "configs/threshold_base.json").string();
    args.values = {-1.0, 1.2};
    args.out_dir = dir.path().string();
    std::ostringstream out, err;
    ASSERT_EQ(cmd_sweep(args, out, err), 0);
    std::stringstream in(out.str());
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    ASSERT_EQ(lines.size(), 4u);
    EXPECT_NE(lines[2].find("error"), std::string::npos);
    EXPECT_NE(lines[3].find(",ok"), std::string::npos);
}

TEST(Sweep, SingleValueMatchesSimulatePlusFit) {
    TempDir dir;
    const std::string cfg = (kSource / "configs/threshold_base.json").string();
    SweepArgs args;
    args.config_path = cfg;
    args.parameter = SweepParameter::amplitude;
    args.values = {0.001};
    args.out_dir = (dir.path() / "sweep").string();
    std::ostringstream out, err;
    ASSERT_EQ(cmd_sweep(args, out, err), 0);
    ASSERT_EQ(cmd_simulate({cfg, (dir.path() / "sim").string(), {}}, out, err), 0);
    EXPECT_EQ(slurp(dir.path() / "sweep/run_000/diagnostics.csv"), slurp(dir.path() / "sim/diagnostics.csv"));
    const ExperimentConfig ec = load_config(cfg);
    std::ostringstream fit_out;
    ASSERT_EQ(cmd_decay_fit({(dir.path() / "sim/diagnostics.csv").string(), ec.window()[0], ec.window()[1], "stable_norm"},
                            fit_out, err),
              0);
    std::stringstream f(fit_out.str());
    const CsvTable sweep = read_csv_file((dir.path() / "sweep/sweep.csv").string());
    EXPECT_EQ(read_csv(f).column("rate")[0], sweep.column("rate")[0]);
}

// The installed executable: argument parsing and exit codes.
int run_cli(const std::string& args) {
    const std::string cmd = std::string(CYLFLOW_BIN) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Executable, ExitCodes) {
    TempDir dir;
    EXPECT_EQ(run_cli("spectrum --n 2 --R 1 --d 2 --l-max 2 --m-max 2"), 0);
    EXPECT_EQ(run_cli("spectrum --n 2 --R -1 --d 2"), 2);
    EXPECT_EQ(run_cli("spectrum --n 2 --d 2"), 2);
    EXPECT_EQ(run_cli("no-such-command"), 2);
    EXPECT_EQ(run_cli("simulate --config " + (dir.path() / "missing.json").string()), 2);
    EXPECT_EQ(run_cli("stationary --n 2 --d 3.141592653589793 --a-max 0.01 --steps 2 --out " + dir.path().string()), 0);
    EXPECT_TRUE(fs::exists(dir.path() / "branch.csv"));
    EXPECT_EQ(run_cli("--version"), 0);
}

} // namespace
