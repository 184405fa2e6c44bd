#include "reqc/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

using namespace reqc;
namespace fs = std::filesystem;

namespace {

std::optional<RunConfig> parse(std::vector<std::string> args) {
  args.insert(args.begin(), "reqc_cli");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  return parse_config(static_cast<int>(argv.size()), argv.data());
}

std::string conf_path() { return std::string(REQC_DATA_DIR) + "/../configs/nominal.conf"; }

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("reqc_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(REQC_CLI_PATH) + " " + args + " 2>/dev/null";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Config, Defaults) {
  const auto c = parse({"leakage"});
  ASSERT_TRUE(c);
  EXPECT_EQ(c->command, "leakage");
  EXPECT_TRUE(c->apply_2pi);
  EXPECT_EQ(c->omega0, 4.0);
  EXPECT_EQ(c->points, 301u);
  EXPECT_EQ(c->output_path(), "leakage.csv");
}

TEST(Config, FileMatchesBuiltInDefaults) {
  const auto a = parse({"cphase-surface"});
  const auto b = parse({"cphase-surface", "--config", conf_path()});
  ASSERT_TRUE(a && b);
  EXPECT_EQ(*a, *b);
}

TEST(Config, FlagOverridesFile) {
  const auto c = parse({"leakage", "--config", conf_path(), "--omega0", "8"});
  ASSERT_TRUE(c);
  EXPECT_EQ(c->omega0, 8.0);
  const auto d = parse({"leakage", "--omega0=8", "--config", conf_path()});
  EXPECT_EQ(d->omega0, 8.0);
}

// 2 pi applied exactly once, on the way into experiment configs
TEST(Config, TwoPiAppliedOnce) {
  const auto c = parse({"cphase-surface", "--delta-c", "0.1"});
  ASSERT_TRUE(c);
  EXPECT_EQ(c->delta_c, 0.1);
  EXPECT_NEAR(c->sweep().delta_c, 0.2 * pi, 1e-15);
  EXPECT_NEAR(c->pulse().omega0, 8.0 * pi, 1e-15);
  EXPECT_NEAR(c->pulse().beta, 1.28 * 2 * pi, 1e-14);
  EXPECT_NEAR(c->sweep().blockade.delta_dd, 40.0 * pi, 1e-12);
  const auto b = parse({"cphase-surface", "--bare-units"});
  EXPECT_FALSE(b->apply_2pi);
  EXPECT_EQ(b->sweep().delta_c, 0.1);
  EXPECT_EQ(b->pulse().omega0, 4.0);
}

TEST(Config, EchoRoundTrip) {
  const auto c = parse({"lifetime-sweep", "--te-list", "100,2000", "--no-refocus", "--dt-count", "7", "--alpha",
                        "0.123456789012345678", "-o", "x.json", "--format", "json"});
  ASSERT_TRUE(c);
  RunConfig back;
  apply_config_text(back, echo_config(*c));
  EXPECT_EQ(back, *c);
  EXPECT_EQ(c->te_list, (std::vector<double>{100, 2000}));
  EXPECT_FALSE(c->refocus);
}

TEST(Config, BooleanFlags) {
  EXPECT_TRUE(parse({"cphase-surface", "--with-decay"})->decay);
  EXPECT_TRUE(parse({"cphase-surface", "--decay"})->decay);
  EXPECT_FALSE(parse({"cphase-surface", "--decay", "false"})->decay);
  EXPECT_THROW(parse({"cphase-surface", "--with-decay", "--no-decay"}), UsageError);
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse({"cphase-surface", "--bogus", "1"}), ConfigError);
  EXPECT_THROW(parse({"cphase-surface", "--omega0", "abc"}), ConfigError);
  EXPECT_THROW(parse({"nonsense"}), UsageError);
  EXPECT_THROW(parse({"leakage", "--points", "50"}), ConfigError);
  EXPECT_THROW(parse({"cphase-surface", "--psi-in", "1,1,0,0"}), ConfigError);
  RunConfig c;
  EXPECT_THROW(apply_config_text(c, "unknown_key = 3\n"), UsageError);
  EXPECT_THROW(apply_config_text(c, "omega0 4\n"), UsageError);
  EXPECT_THROW(apply_config_text(c, "dc_count = -3\n"), UsageError);
  EXPECT_NO_THROW(apply_config_text(c, "# comment\n\nomega0 = 5 # trailing\n"));
  EXPECT_EQ(c.omega0, 5.0);
}

TEST(Config, HelpReturnsNothing) {
  std::string help;
  const char* argv[] = {"reqc_cli", "--help"};
  EXPECT_FALSE(parse_config(2, argv, &help));
  EXPECT_NE(help.find("cphase-surface"), std::string::npos);
}

TEST(Output, CsvNumberFormat) {
  EXPECT_EQ(format_csv_number(0.5), "0.5");
  EXPECT_EQ(format_csv_number(-0.0), "0");
  EXPECT_EQ(format_csv_number(std::nan("")), "nan");
  EXPECT_EQ(format_csv_number(1.0 / 3.0), "0.333333333333");
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("--help >/dev/null"), kExitOk);
  EXPECT_EQ(cli("frobnicate"), kExitUsage);
  EXPECT_EQ(cli("leakage --omega0 -1"), kExitUsage);
  EXPECT_EQ(cli("leakage --tol nope"), kExitUsage);
}

TEST(Cli, LeakageSchema) {
  const auto d = scratch("leak");
  ASSERT_EQ(cli("leakage --points 201 -o " + (d / "l.csv").string()), kExitOk);
  const auto ls = lines(slurp(d / "l.csv"));
  ASSERT_EQ(ls.size(), 202u);
  EXPECT_EQ(ls[0], "t_us,p_leak_numeric,p_leak_perturbative");
  const auto meta = nlohmann::json::parse(slurp(d / "l.csv.meta.json"));
  EXPECT_EQ(meta["config_keys"]["apply_2pi"], "true");
  EXPECT_NEAR(meta["resolved_rad_per_us"]["delta_opt"].get<double>(), 0.2 * pi, 1e-12);
  EXPECT_NEAR(meta["resolved_rad_per_us"]["omega0"].get<double>(), 8 * pi, 1e-12);
  EXPECT_EQ(meta["exit_code"], 0);
  // 2 pi is not applied twice when the echoed config is fed back in
  std::ofstream(d / "echo.conf") << meta["config"].get<std::string>();
  ASSERT_EQ(cli("--config " + (d / "echo.conf").string() + " -o " + (d / "l2.csv").string()), kExitOk);
  EXPECT_EQ(slurp(d / "l.csv"), slurp(d / "l2.csv"));
}

TEST(Cli, SurfaceSchemaAndDeterminism) {
  const auto d = scratch("surf");
  const std::string grid = " --dc-count 2 --dt-count 1 --dt-min 0 --dt-max 0 ";
  ASSERT_EQ(cli("cphase-surface" + grid + "-o " + (d / "a.csv").string()), kExitOk);
  ASSERT_EQ(cli("cphase-surface" + grid + "--jobs 2 -o " + (d / "b.csv").string()), kExitOk);
  const auto a = slurp(d / "a.csv");
  EXPECT_EQ(a, slurp(d / "b.csv"));
  const auto ls = lines(a);
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_EQ(ls[0], "delta_c,delta_t,fidelity");
  EXPECT_EQ(ls[1].rfind("-0.03,0,", 0), 0u) << ls[1];
  const auto meta = nlohmann::json::parse(slurp(d / "a.csv.meta.json"));
  EXPECT_EQ(meta["u0_checksum"].get<std::string>().size(), 16u);
}

TEST(Cli, LifetimeRows) {
  const auto d = scratch("life");
  ASSERT_EQ(cli("lifetime-sweep --dt-count 2 --te-list 100,1000000 --format json -o " + (d / "l.json").string()),
            kExitOk);
  const auto j = nlohmann::json::parse(slurp(d / "l.json"));
  EXPECT_EQ(j["columns"], (nlohmann::json{"te_us", "delta_t", "fidelity"}));
  EXPECT_EQ(j["data"]["fidelity"].size(), 4u);
  EXPECT_EQ(j["data"]["te_us"][3], 1000000);
}

TEST(Cli, ProgramDump) {
  const auto d = scratch("dump");
  ASSERT_EQ(cli("program-dump --table robust_cphase -o " + (d / "p.txt").string()), kExitOk);
  const auto text = slurp(d / "p.txt");
  EXPECT_NE(text.find("24 target"), std::string::npos);
  EXPECT_NE(text.find("17 target g1:pi"), std::string::npos);
}
