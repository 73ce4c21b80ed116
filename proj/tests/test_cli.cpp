#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "desx/cli.hpp"

using namespace desx;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = DESX_SOURCE_DIR;
const std::string kCli = DESX_CLI_PATH;

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("desx_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string& name, const std::string& text) const {
        const auto p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    // Runs the CLI with the given arguments and returns its exit status.
    int run(const std::string& args, const std::string& env = "") const {
        const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + kCli + "' " + args + " >/dev/null 2>&1";
        const int raw = std::system(cmd.c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    }

    fs::path dir_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST(ConfigParsing, KeysCommentsAndLists) {
    const auto c = cli::parse_config("# header\nkind = alpha\np = [2.5, 4]  # trailing\n\nb = 2\n");
    EXPECT_EQ(c.get("kind"), "alpha");
    EXPECT_EQ(cli::get_list(c, "p"), (std::vector<double>{2.5, 4.0}));
    EXPECT_EQ(cli::get_number(c, "b"), 2.0);
    EXPECT_EQ(c.order, (std::vector<std::string>{"kind", "p", "b"}));
}

TEST(ConfigParsing, RejectsDuplicatesAndMalformedLines) {
    EXPECT_THROW(cli::parse_config("a = 1\na = 2\n"), Error);
    EXPECT_THROW(cli::parse_config("just words\n"), Error);
    EXPECT_THROW(cli::get_number(cli::parse_config("a = x\n"), "a"), Error);
}

TEST(ConfigParsing, SpaceExpressions) {
    EXPECT_EQ(cli::parse_space("lp(3, inf)").dim(), 3);
    const auto sum = cli::parse_space("sum(4, lp(2, inf), lp(3, 2))");
    EXPECT_EQ(sum.dim(), 5);
    Vector x = Vector::Zero(5);
    x[0] = 1.0;
    EXPECT_DOUBLE_EQ(sum.eval(x), 1.0);
    const auto poly = cli::parse_space("polytope(2, [1, 1, 1, -1])");
    EXPECT_NEAR(poly.eval(Vector::Unit(2, 0)), 1.0, 1e-12);
    EXPECT_THROW(cli::parse_space("lp(3)"), Error);
    EXPECT_THROW(cli::parse_space("ball(3, 2)"), Error);
}

TEST(Execute, UnknownKindIsAValidationError) {
    const auto o = cli::execute(cli::parse_config("kind = teleport\nseed = 1\n"));
    EXPECT_EQ(o.status, cli::Status::validation_error);
}

TEST_F(CliTest, AlphaRowMatchesClosedForm) {
    write("a.cfg", "kind = alpha\np = [4]\nb = [2]\nseed = 0\n");
    ASSERT_EQ(run("run a.cfg"), 0);
    const auto rows = lines(slurp(dir_ / "a.csv"));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], "p,b,alpha,lower,upper,argmax_s");
    std::vector<double> cells;
    std::istringstream row(rows[1]);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(std::stod(cell));
    ASSERT_EQ(cells.size(), 6u);
    EXPECT_EQ(cells[0], 4.0);
    EXPECT_EQ(cells[1], 2.0);
    EXPECT_NEAR(cells[2], 2.0 / std::sqrt(3.0), 1e-9);
    EXPECT_NEAR(cells[3], 2.0 / (2.0 * std::sqrt(2.0) - 1.0), 1e-12);
    EXPECT_EQ(cells[4], 2.0);
    EXPECT_TRUE(fs::exists(dir_ / "a.csv.manifest"));
}

TEST_F(CliTest, MveeOfCubeIsScaledIdentity) {
    ASSERT_EQ(run("run '" + (kSource / "configs/mvee_linf3.cfg").string() + "' --out m.csv"), 0);
    const auto rows = lines(slurp(dir_ / "m.csv"));
    ASSERT_EQ(rows.size(), 10u);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::istringstream row(rows[i]);
        std::string r, c, a;
        std::getline(row, r, ',');
        std::getline(row, c, ',');
        std::getline(row, a, ',');
        EXPECT_NEAR(std::stod(a), r == c ? 1.0 / 3.0 : 0.0, 1e-6) << rows[i];
    }
    const auto manifest = slurp(dir_ / "m.csv.manifest");
    EXPECT_NE(manifest.find("status = ok"), std::string::npos);
    EXPECT_NE(manifest.find("config.space = lp(3, inf)"), std::string::npos);
    EXPECT_NE(manifest.find("heuristic = 0"), std::string::npos);
}

TEST_F(CliTest, RerunsAreByteIdentical) {
    for (const char* name : {"des_scan_l3.cfg", "duality_l4.cfg", "perturbation_l4.cfg"}) {
        const auto cfg = (kSource / "configs" / name).string();
        ASSERT_EQ(run("run '" + cfg + "' --out one.csv"), 0) << name;
        ASSERT_EQ(run("run '" + cfg + "' --out two.csv --threads 3"), 0) << name;
        EXPECT_EQ(slurp(dir_ / "one.csv"), slurp(dir_ / "two.csv")) << name;
    }
}

TEST_F(CliTest, MalformedConfigWritesNothing) {
    write("bad.cfg", "kind = mvee\nspace = lp(3\nseed = 1\n");
    EXPECT_EQ(run("run bad.cfg"), 2);
    EXPECT_FALSE(fs::exists(dir_ / "bad.csv"));
    EXPECT_FALSE(fs::exists(dir_ / "bad.csv.manifest"));
    write("noseed.cfg", "kind = mvee\nspace = lp(3, 2)\n");
    EXPECT_EQ(run("run noseed.cfg"), 2);
    EXPECT_EQ(run("run missing.cfg"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(CliTest, SeedFlagAndEnvironmentOverride) {
    write("e.cfg", "kind = eta\nspace = lp(4, 3)\nsubspace_dim = 2\nseed = 1\n");
    ASSERT_EQ(run("run e.cfg --out s1.csv"), 0);
    ASSERT_EQ(run("run e.cfg --out s7.csv --seed 7"), 0);
    ASSERT_EQ(run("run e.cfg --out env.csv", "DESX_SEED=7"), 0);
    ASSERT_EQ(run("run e.cfg --out flag.csv --seed 1", "DESX_SEED=7"), 0);
    EXPECT_NE(slurp(dir_ / "s1.csv"), slurp(dir_ / "s7.csv"));
    EXPECT_EQ(slurp(dir_ / "s7.csv"), slurp(dir_ / "env.csv"));
    EXPECT_EQ(slurp(dir_ / "s1.csv"), slurp(dir_ / "flag.csv"));
}

TEST_F(CliTest, SweepMatchesSingleRuns) {
    const auto cfg = kSource / "configs";
    ASSERT_EQ(run("run '" + (cfg / "sum_p1.cfg").string() + "' --out p1.csv"), 0);
    ASSERT_EQ(run("run '" + (cfg / "sum_p4.cfg").string() + "' --out p4.csv"), 0);
    ASSERT_EQ(run("sweep '" + (cfg / "sum_sweep.list").string() + "' --out all.csv --threads 2"), 0);
    const auto p1 = lines(slurp(dir_ / "p1.csv"));
    const auto p4 = lines(slurp(dir_ / "p4.csv"));
    auto expected = p1;
    expected.insert(expected.end(), p4.begin() + 1, p4.end());
    EXPECT_EQ(lines(slurp(dir_ / "all.csv")), expected);
    const auto manifest = slurp(dir_ / "all.csv.manifest");
    EXPECT_NE(manifest.find("members = 2"), std::string::npos);
    EXPECT_NE(manifest.find("member.1.config.p = 4"), std::string::npos);
}

TEST_F(CliTest, SweepRejectsEmptyListsAndMixedKinds) {
    write("empty.list", "# nothing here\n\n");
    EXPECT_EQ(run("sweep empty.list"), 2);
    write("a.cfg", "kind = alpha\np = [4]\nb = [2]\nseed = 0\n");
    write("m.cfg", "kind = mvee\nspace = lp(2, 2)\nseed = 0\n");
    write("mixed.list", "a.cfg\nm.cfg\n");
    EXPECT_EQ(run("sweep mixed.list"), 2);
    EXPECT_FALSE(fs::exists(dir_ / "mixed.csv"));
}

TEST_F(CliTest, NonConvergenceWritesManifestOnly) {
    write("nc.cfg", "kind = mvee\nspace = lp(4, 3)\nseed = 1\nmax_iter = 2\nmax_rounds = 1\n");
    EXPECT_EQ(run("run nc.cfg"), 3);
    EXPECT_FALSE(fs::exists(dir_ / "nc.csv"));
    const auto manifest = slurp(dir_ / "nc.csv.manifest");
    EXPECT_NE(manifest.find("status = non-convergence"), std::string::npos);
    EXPECT_NE(manifest.find("diagnostic."), std::string::npos);
}
