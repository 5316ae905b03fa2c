#include "hlift/runner.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hlift;
namespace fs = std::filesystem;

namespace {

class RunnerTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("hlift_runner_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        ctx_.out_dir = dir_ / "out";
        ctx_.log = &log_;
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write_config(const std::string& name, const std::string& text) {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p.string();
    }
    static std::string read(const fs::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
    nlohmann::json read_json(const std::string& name) const { return nlohmann::json::parse(read(ctx_.out_dir / name)); }

    fs::path dir_;
    std::ostringstream log_;
    RunContext ctx_;
};

const char* kLinear = R"(
[problem]
kind = linear
matrix = [[1, 2, 0, -1], [0, 1, 3, 0.5]]
u0 = [0.1, 0.2, -0.3, 0.4]
[path]
target = [1, -1]
)";

const char* kSphere = R"(
[problem]
kind = builtin
map = sphere
dim = 2
u0 = [1, 0]
[path]
target = [0]
)";

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_F(RunnerTest, LinearLiftExitsZeroWithTinyResidual) {
    const std::string cfg = write_config("lin.ini", kLinear);
    EXPECT_EQ(run_from_file(Subcommand::Lift, cfg, ctx_), exit_code::kOk);
    const auto rep = read_json("report.json");
    EXPECT_EQ(rep["status"], "Reached");
    EXPECT_LE(rep["final_residual"].get<double>(), 1e-10);
    EXPECT_TRUE(rep.contains("integral_abs_g"));
    EXPECT_TRUE(rep.contains("bound_check_max"));
    EXPECT_TRUE(rep.contains("total_variation_norm_u"));
}

TEST_F(RunnerTest, SphereCriticalValueExitsTwo) {
    const std::string cfg = write_config("sph.ini", kSphere);
    EXPECT_EQ(run_from_file(Subcommand::Lift, cfg, ctx_), exit_code::kSingularTerminal);
    const auto rep = read_json("report.json");
    EXPECT_EQ(rep["status"], "SingularTerminal");
    EXPECT_NEAR(rep["integral_abs_g"].get<double>(), 1.0, 0.05);
}

TEST_F(RunnerTest, MalformedConfigExitsOneWithoutArtifacts) {
    const std::string cfg = write_config("bad.ini", "[problem]\nkind = builtin\nmap = sphere\n[solver]\ntol_ode = -1\n");
    EXPECT_EQ(run_from_file(Subcommand::Lift, cfg, ctx_), exit_code::kSetup);
    EXPECT_FALSE(fs::exists(ctx_.out_dir));
    EXPECT_NE(log_.str().find("solver.tol_ode"), std::string::npos);
    EXPECT_EQ(run_from_file(Subcommand::Lift, (dir_ / "missing.ini").string(), ctx_), exit_code::kSetup);
}

TEST_F(RunnerTest, SetupErrorsExitOneWithoutArtifacts) {
    // Anchor off the path start.
    const std::string bad_anchor = write_config("a.ini", std::string(kSphere) + "\n");
    RunConfig c = load_config(bad_anchor);
    c.problem.u0 = Vector::Zero(2);  // singular start
    EXPECT_EQ(run_lift(c, ctx_), exit_code::kSetup);
    c.problem.u0.reset();
    c.path.target.reset();
    EXPECT_EQ(run_lift(c, ctx_), exit_code::kSetup);
    EXPECT_FALSE(fs::exists(ctx_.out_dir));
}

TEST_F(RunnerTest, OtherTerminationsExitThree) {
    const std::string cfg = write_config("fold.ini", R"(
[problem]
kind = builtin
map = fold
u0 = [0.4, 0]
[path]
target = [-0.16, 0.3]
)");
    EXPECT_EQ(run_from_file(Subcommand::Lift, cfg, ctx_), exit_code::kOtherTermination);
    EXPECT_EQ(read_json("report.json")["status"], "SingularInterior");
}

TEST_F(RunnerTest, TraceCsvSchemaAndParseBack) {
    const std::string cfg = write_config("brockett.ini", R"(
[problem]
kind = endpoint
system = brockett
x0 = [0, 0, 0]
T = 1
segments = 6
u0 = [1, 1]
[path]
target = [0.5, -0.3, 0.2]
[output]
csv = traces/brockett.csv
)");
    ASSERT_EQ(run_from_file(Subcommand::Lift, cfg, ctx_), exit_code::kOk);
    const std::string text = read(ctx_.out_dir / "traces/brockett.csv");
    const auto rows = parse_csv(text);
    ASSERT_GE(rows.size(), 3u);
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "s,lambda_1,lambda_2,lambda_3,a_1,h,f,g,norm_u,norm_dudS,residual,step_size,flags");
    const auto& report = read_json("report.json");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        ASSERT_EQ(rows[r].size(), 13u) << "row " << r;
        for (std::size_t c = 0; c + 1 < rows[r].size(); ++c) {
            std::size_t used = 0;
            (void)std::stod(rows[r][c], &used);
            EXPECT_EQ(used, rows[r][c].size());
        }
    }
    EXPECT_DOUBLE_EQ(std::stod(rows.back()[0]), 1.0);
    // 17 significant digits round-trip exactly.
    EXPECT_EQ(std::stod(rows.back()[10]), report["final_residual"].get<double>());
}

TEST(TraceCsv, SingularRowsLeaveGEmpty) {
    ContinuationReport rep;
    LiftState st;
    st.spectrum.lambdas = Vector::Zero(1);
    st.diagnostics.a = Vector::Constant(1, -1.0);
    st.diagnostics.singular = true;
    st.flag_bits = flags::kSingular;
    rep.trace.push_back(st);
    const std::string csv = trace_csv(rep, 1);
    const auto rows = parse_csv(csv);
    ASSERT_EQ(rows.size(), 2u);
    ASSERT_EQ(rows[1].size(), 11u);
    EXPECT_EQ(rows[0][5], "g");
    EXPECT_EQ(rows[1][5], "");
    EXPECT_EQ(rows[1][10], flags::to_string(flags::kSingular));
}

TEST_F(RunnerTest, LiftIsDeterministic) {
    const std::string cfg = write_config("sph.ini", kSphere);
    ASSERT_EQ(run_from_file(Subcommand::Lift, cfg, ctx_), exit_code::kSingularTerminal);
    const std::string first = read(ctx_.out_dir / "trace.csv");
    const std::string first_report = read(ctx_.out_dir / "report.json");
    ASSERT_EQ(run_from_file(Subcommand::Lift, cfg, ctx_), exit_code::kSingularTerminal);
    EXPECT_EQ(read(ctx_.out_dir / "trace.csv"), first);
    EXPECT_EQ(read(ctx_.out_dir / "report.json"), first_report);
}

TEST_F(RunnerTest, CheckSphereAndSeedDeterminism) {
    const std::string cfg = write_config("sph.ini", std::string(kSphere) + "[check]\nxi_c = 1\nxi_p = 1\n");
    EXPECT_EQ(run_from_file(Subcommand::Check, cfg, ctx_, 7), exit_code::kOk);
    const auto rep = read_json("check_report.json");
    EXPECT_NEAR(rep["K_est"].get<double>(), 2.0, 1e-3);
    EXPECT_NEAR(rep["C_est"].get<double>(), 2.0, 1e-3);
    EXPECT_EQ(rep["seed"], 7);
    const std::string first = read(ctx_.out_dir / "check_report.json");
    const std::string shells = read(ctx_.out_dir / "shells.csv");
    EXPECT_EQ(shells.substr(0, shells.find('\n')),
              "radius,samples,singular,degenerate_phi,C_max,K_min,xi_margin_min,lambda2_min,max_inverse_gramian");
    EXPECT_EQ(run_from_file(Subcommand::Check, cfg, ctx_, 7), exit_code::kOk);
    EXPECT_EQ(read(ctx_.out_dir / "check_report.json"), first);
    EXPECT_EQ(read(ctx_.out_dir / "shells.csv"), shells);
}

TEST_F(RunnerTest, CheckLinearCoercivityFalsified) {
    const std::string cfg = write_config("lin.ini", std::string(kLinear) + "[check]\nconditions = eq1_2\n");
    EXPECT_EQ(run_from_file(Subcommand::Check, cfg, ctx_), exit_code::kFalsified);
    const auto rep = read_json("check_report.json");
    EXPECT_DOUBLE_EQ(rep["K_est"].get<double>(), 0.0);
    EXPECT_EQ(rep["conditions"]["eq1_2"]["result"], "falsified");
    EXPECT_EQ(rep["conditions"]["eq2"]["result"], "not requested");
}

TEST_F(RunnerTest, ValidateBuiltinProblems) {
    const std::vector<std::string> configs{
        kLinear,
        kSphere,
        "[problem]\nkind = builtin\nmap = fold\n",
        "[problem]\nkind = builtin\nmap = sphere\ndim = 3\nweights = [0.5, 2, 1]\n",
        "[problem]\nkind = endpoint\nsystem = brockett\nx0 = [0,0,0]\nT = 1\nsegments = 5\n",
        "[problem]\nkind = endpoint\nsystem = unicycle\nx0 = [0,0,0.3]\nT = 2\nsegments = 4\n",
        "[problem]\nkind = endpoint\nsystem = single_integrator\ndim = 2\nx0 = [0,0]\nT = 1\nsegments = 3\n",
        "[problem]\nkind = endpoint\nsystem = lti\nx0 = [1,0]\nT = 1\nsegments = 4\nA = [[0,1],[-1,-0.2]]\nB = [[0],[1]]\n",
        "[problem]\nkind = endpoint\nsystem = single_integrator\ndim = 3\nx0 = [0,0,0]\nT = 1\nsegments = 1\n",
        "[problem]\nkind = endpoint\nsystem = lti\nx0 = [1,0]\nT = 1\nsegments = 1\nA = [[0,1],[-1,-0.2]]\nB = [[1,0],[0,1]]\n",
    };
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const std::string cfg = write_config("v" + std::to_string(i) + ".ini", configs[i]);
        EXPECT_EQ(run_from_file(Subcommand::Validate, cfg, ctx_), exit_code::kOk) << configs[i] << log_.str();
    }
}

TEST_F(RunnerTest, ValidateRejectsNegativeWeightsAtConstruction) {
    const std::string cfg = write_config("w.ini", "[problem]\nkind = builtin\nmap = sphere\nweights = [1, -2]\n");
    EXPECT_EQ(run_from_file(Subcommand::Validate, cfg, ctx_), exit_code::kSetup);
}

TEST_F(RunnerTest, ValidateRejectsUnderdeterminedDiscretization) {
    // One segment of a two-input, three-state system cannot be a submersion.
    const std::string cfg =
        write_config("b.ini", "[problem]\nkind = endpoint\nsystem = brockett\nx0 = [0,0,0]\nT = 1\nsegments = 1\n");
    EXPECT_EQ(run_from_file(Subcommand::Validate, cfg, ctx_), exit_code::kSetup);
    EXPECT_NE(log_.str().find("codomain dimension"), std::string::npos);
    EXPECT_EQ(log_.str().find("ConfigurationError: ConfigurationError"), std::string::npos);
}

TEST(Validate, DetectsBrokenJacobian) {
    // A map whose Jacobian is off by a factor must fail with the identity named.
    class Broken final : public MapOracle {
    public:
        Broken() : MapOracle(2, 1, Vector::Ones(2)) {}
        [[nodiscard]] std::string name() const override { return "broken"; }

    protected:
        Vector do_eval(const Vector& u) const override { return Vector::Constant(1, u[0] * u[1]); }
        Matrix do_jacobian(const Vector& u) const override {
            Matrix j(1, 2);
            j << 1.1 * u[1], u[0];
            return j;
        }
    };
    const ValidationResult res = validate_oracle(Broken(), Vector::Ones(2), 1);
    EXPECT_FALSE(res.pass);
    EXPECT_NE(res.first_failure.find("Jacobian"), std::string::npos);
}

TEST(Registry, ListsAllBuiltins) {
    std::ostringstream out;
    list_problems(out);
    for (const char* name : {"sphere", "fold", "linear", "single_integrator", "lti", "brockett", "unicycle"}) {
        EXPECT_NE(out.str().find(name), std::string::npos) << name;
    }
}

TEST(WriteAtomic, LeavesNoTemporaryBehind) {
    const fs::path dir = fs::temp_directory_path() / "hlift_atomic";
    fs::remove_all(dir);
    write_atomic(dir / "a/b.txt", "hello\n");
    EXPECT_TRUE(fs::exists(dir / "a/b.txt"));
    EXPECT_FALSE(fs::exists(dir / "a/b.txt.tmp"));
    fs::remove_all(dir);
}
