#include "hlift/config.hpp"

#include <gtest/gtest.h>

using namespace hlift;

namespace {

const char* kMinimalEndpoint = R"(
[problem]
kind = endpoint
system = brockett
x0 = [0, 0, 0]
T = 1
segments = 20

[path]
target = [0.5, -0.3, 0.2]
)";

std::string error_of(const std::string& text) {
    try {
        (void)parse_config(text);
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(ParseConfig, MinimalEndpointFillsDefaults) {
    const RunConfig cfg = parse_config(kMinimalEndpoint);
    EXPECT_EQ(cfg.problem.kind, ProblemKind::Endpoint);
    EXPECT_EQ(cfg.problem.system, "brockett");
    EXPECT_EQ(cfg.problem.segments, 20);
    EXPECT_EQ(cfg.problem.nodes_per_segment, 8);
    EXPECT_DOUBLE_EQ(cfg.problem.T, 1.0);
    ASSERT_TRUE(cfg.path.target.has_value());
    EXPECT_DOUBLE_EQ((*cfg.path.target)[1], -0.3);
    EXPECT_EQ(cfg.path.kind, PathKind::Line);
    EXPECT_DOUBLE_EQ(cfg.solver.rtol, 1e-8);
    EXPECT_DOUBLE_EQ(cfg.solver.atol, 1e-10);
    EXPECT_TRUE(cfg.solver.correction);
    EXPECT_DOUBLE_EQ(cfg.solver.terminal_window, 1e-3);
    EXPECT_EQ(cfg.output.csv, "trace.csv");
}

TEST(ParseConfig, NegativeTolOdeNamesTheKey) {
    const std::string text = std::string(kMinimalEndpoint) + "[solver]\ntol_ode = -1\n";
    EXPECT_NE(error_of(text).find("solver.tol_ode"), std::string::npos);
}

TEST(ParseConfig, XiPowerAboveOneCitesDivergence) {
    const std::string text = std::string(kMinimalEndpoint) + "[check]\nxi_p = 1.5\n";
    try {
        (void)parse_config(text);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidXi);
        EXPECT_NE(std::string(e.what()).find("p <= 1"), std::string::npos);
    }
}

TEST(ParseConfig, RejectsUnknownKeysAndSections) {
    EXPECT_NE(error_of(std::string(kMinimalEndpoint) + "[solver]\nds_inti = 0.1\n").find("solver.ds_inti"), std::string::npos);
    EXPECT_NE(error_of(std::string(kMinimalEndpoint) + "[extras]\na = 1\n").find("[extras]"), std::string::npos);
}

TEST(ParseConfig, MissingRequiredKey) {
    EXPECT_NE(error_of("[problem]\nkind = endpoint\nsystem = brockett\nT = 1\nsegments = 2\n").find("problem.x0"),
              std::string::npos);
    EXPECT_NE(error_of("[path]\ntarget = [1]\n").find("problem.kind"), std::string::npos);
}

TEST(ParseConfig, TypeMismatchAndInvalidEnum) {
    EXPECT_NE(error_of("[problem]\nkind = builtin\nmap = sphere\n[solver]\nds_init = fast\n").find("solver.ds_init"),
              std::string::npos);
    EXPECT_NE(error_of("[problem]\nkind = builtin\nmap = torus\n").find("problem.map"), std::string::npos);
    EXPECT_NE(error_of("[problem]\nkind = builtin\nmap = sphere\n[solver]\ncorrection = maybe\n").find("solver.correction"),
              std::string::npos);
    EXPECT_NE(error_of("[problem]\nkind = linear\nmatrix = [[1, 2], [3]]\n").find("problem.matrix"), std::string::npos);
    EXPECT_NE(error_of("[problem]\nkind = builtin\nmap = sphere\n[check]\nper_radius = 2.5\n").find("check.per_radius"),
              std::string::npos);
}

TEST(ParseConfig, TargetLengthMustMatchCodomain) {
    EXPECT_NE(error_of("[problem]\nkind = builtin\nmap = fold\n[path]\ntarget = [1]\n").find("path.target"),
              std::string::npos);
}

TEST(ParseConfig, SegmentsAndWeightsValidated) {
    EXPECT_NE(error_of("[problem]\nkind = endpoint\nsystem = brockett\nx0 = [0,0,0]\nT = 1\nsegments = 0\n")
                  .find("problem.segments"),
              std::string::npos);
    EXPECT_NE(error_of("[problem]\nkind = builtin\nmap = sphere\nweights = [1, -1]\n").find("problem.weights"),
              std::string::npos);
}

TEST(ParseConfig, CommentsBooleansListsAndPolyline) {
    const RunConfig cfg = parse_config(R"(
# leading comment
[problem]
kind = linear          ; trailing comment
matrix = [[1, 0, 2], [0, 1, 1]]
[path]
kind = polyline
waypoints = [[1, 1], [2, 0]]
target = [0, 0]
[solver]
correction = off
max_steps = 50
[check]
radii = [1, 3]
conditions = eq1_2, growth
seed = 42
C_max = 3.5
)");
    EXPECT_EQ(cfg.problem.matrix.rows(), 2);
    EXPECT_EQ(cfg.problem.matrix(0, 2), 2.0);
    EXPECT_EQ(cfg.path.kind, PathKind::Polyline);
    EXPECT_EQ(cfg.path.waypoints.size(), 2u);
    EXPECT_FALSE(cfg.solver.correction);
    EXPECT_EQ(cfg.solver.max_steps, 50);
    EXPECT_EQ(cfg.plan.radii.size(), 2u);
    EXPECT_EQ(cfg.check.conditions, (std::set<std::string>{"eq1_2", "growth"}));
    EXPECT_EQ(cfg.plan.seed, 42u);
    ASSERT_TRUE(cfg.check.C_max.has_value());
    EXPECT_DOUBLE_EQ(*cfg.check.C_max, 3.5);
}

TEST(ParseConfig, LtiNeedsConsistentMatrices) {
    const std::string base = "[problem]\nkind = endpoint\nsystem = lti\nx0 = [1, 0]\nT = 1\nsegments = 4\n";
    EXPECT_NE(error_of(base).find("problem.A"), std::string::npos);
    EXPECT_NE(error_of(base + "A = [[0, 1], [-1, 0]]\nB = [[1]]\n").find("problem.B"), std::string::npos);
    EXPECT_NO_THROW((void)parse_config(base + "A = [[0, 1], [-1, 0]]\nB = [[0], [1]]\n"));
}

TEST(ParseConfig, MalformedLines) {
    EXPECT_NE(error_of("[problem]\nkind builtin\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("kind = builtin\n").find("outside of a section"), std::string::npos);
    EXPECT_NE(error_of("[problem]\nkind = builtin\nkind = linear\n").find("duplicate"), std::string::npos);
}
