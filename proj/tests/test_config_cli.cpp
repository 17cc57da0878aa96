// Config parsing, tabular writers, and the sllnlab binary end to end.
//
// The CLI tests need the built binary; its path comes from the
// SLLNLAB_BIN_PATH compile definition (set by the build) or the SLLNLAB_BIN
// environment variable, whichever is available.

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "slln/common.hpp"
#include "slln/config.hpp"
#include "slln/lattice_field.hpp"
#include "slln/report.hpp"

namespace fs = std::filesystem;
using namespace slln;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  EXPECT_TRUE(in) << "missing " << p;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, ParsesSectionsAndTypes) {
  const Config c = Config::from_string(
      "# comment\n"
      "top = 7\n"
      "[stable]\n"
      "alpha = 1.5\n"
      "thetas = 0.25, 0.5, 1, 2\n"
      "sizes = 4,8,16\n"
      "label = unit sphere\n"
      "fast = yes\n"
      "; another comment\n"
      "[run]\n"
      "threads = 2\n");
  EXPECT_EQ(c.get_int("top", 0), 7);
  EXPECT_DOUBLE_EQ(c.get_double("stable.alpha", 0.0), 1.5);
  EXPECT_EQ(c.get_doubles("stable.thetas", {}), (std::vector<double>{0.25, 0.5, 1.0, 2.0}));
  EXPECT_EQ(c.get_ints("stable.sizes", {}), (std::vector<std::int64_t>{4, 8, 16}));
  EXPECT_EQ(c.get_string("stable.label", ""), "unit sphere");
  EXPECT_TRUE(c.get_bool("stable.fast", false));
  EXPECT_EQ(c.get_int("run.threads", 0), 2);
  EXPECT_EQ(c.get_int("run.absent", 41), 41);
  EXPECT_FALSE(c.has("run.absent"));
}

TEST(Config, OverridesFoldInAndManifestIsCanonical) {
  Config a = Config::from_string("[field]\nd = 2\nsigma = 1\n");
  a.apply_override("field.sigma=2.5");
  a.apply_override("run.seed=9");

  // The same effective state reached in a different order.
  Config b = Config::from_string("[run]\nseed = 9\n");
  b.apply_override("field.d=2");
  b.apply_override("field.sigma=2.5");

  EXPECT_EQ(a.manifest(), b.manifest());
  EXPECT_NE(a.manifest().find("field.sigma = 2.5\n"), std::string::npos);
  for (char ch : a.manifest()) EXPECT_NE(ch, '\r');
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(Config::from_string("alpha\n"), std::runtime_error);
  EXPECT_THROW(Config::from_string("[broken\nk = 1\n"), std::runtime_error);
  Config c;
  EXPECT_THROW(c.apply_override("no-equals-sign"), std::runtime_error);
  c.set("k", "not-a-number");
  EXPECT_THROW(c.get_int("k", 0), std::runtime_error);
  EXPECT_THROW(c.get_bool("k", false), std::runtime_error);
}

TEST(CsvWriter, QuotesAndTerminatesRows) {
  CsvWriter w({"name", "value"});
  w.row({"plain", cell(1.5)});
  w.row({"with,comma", "say \"hi\""});
  EXPECT_EQ(w.str(),
            "name,value\n"
            "plain,1.5\n"
            "\"with,comma\",\"say \"\"hi\"\"\"\n");
  EXPECT_THROW(w.row({"too", "many", "cells"}), std::invalid_argument);
}

TEST(SummaryWriter, FormatsAndChecksums) {
  SummaryWriter s;
  s.kv("label", "demo");
  s.kv("value", 0.5);
  s.kv("count", std::int64_t{12});
  s.kv("ok", true);
  EXPECT_EQ(s.str(), "label = demo\nvalue = 0.5\ncount = 12\nok = true\n");
  EXPECT_EQ(s.checksum(), fnv1a64(s.str()));
}

// --- end-to-end CLI ----------------------------------------------------------

class Cli : public ::testing::Test {
 protected:
  static std::string binary() {
#ifdef SLLNLAB_BIN_PATH
    if (fs::exists(SLLNLAB_BIN_PATH)) return SLLNLAB_BIN_PATH;
#endif
    const char* env = std::getenv("SLLNLAB_BIN");
    return env ? env : "";
  }

  void SetUp() override {
    if (binary().empty()) GTEST_SKIP() << "sllnlab binary not found";
    dir_ = fs::temp_directory_path() / "sllnlab-cli-test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  void TearDown() override {
    if (!dir_.empty()) fs::remove_all(dir_);
  }

  // Runs the binary, captures stdout+stderr, returns the exit code.
  int run(const std::vector<std::string>& args, std::string* output = nullptr) {
    std::string cmd = "'" + binary() + "'";
    for (const auto& a : args) {
      cmd += " '" + a + "'";
    }
    cmd += " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    EXPECT_NE(pipe, nullptr);
    std::string out;
    char buf[4096];
    std::size_t got = 0;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
    const int status = pclose(pipe);
    if (output) *output = out;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string out(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, UsageErrorsExitTwo) {
  std::string text;
  EXPECT_EQ(run({}, &text), 2);
  EXPECT_EQ(run({"frobnicate"}, &text), 2);
  EXPECT_EQ(run({"simulate", "--no-such-flag"}, &text), 2);
  EXPECT_EQ(run({"check-conditions"}, &text), 2);
  EXPECT_NE(text.find("conditions.check"), std::string::npos);
  EXPECT_EQ(run({"--help"}, &text), 0);
}

TEST_F(Cli, PaperSuiteListsWithoutRunning) {
  std::string text;
  EXPECT_EQ(run({"paper-suite", "--list"}, &text), 0);
  EXPECT_NE(text.find("sampler-law"), std::string::npos);
  EXPECT_NE(text.find("thread-determinism"), std::string::npos);
  EXPECT_TRUE(fs::is_empty(dir_));
}

TEST_F(Cli, SimulateIsDeterministicAcrossRunsAndThreads) {
  const std::vector<std::string> base = {"simulate",
                                         "--seed",
                                         "9",
                                         "--set",
                                         "field.generator=iid-gaussian",
                                         "--set",
                                         "field.d=1",
                                         "--set",
                                         "field.shape=64"};
  auto with_out = [&](const std::string& sub, const std::string& threads) {
    std::vector<std::string> args = base;
    args.insert(args.end(), {"--out", out(sub), "--threads", threads});
    return args;
  };
  ASSERT_EQ(run(with_out("a", "1")), 0);
  ASSERT_EQ(run(with_out("b", "1")), 0);
  ASSERT_EQ(run(with_out("c", "8")), 0);

  EXPECT_EQ(read_file(dir_ / "a" / "field.bin"), read_file(dir_ / "b" / "field.bin"));
  EXPECT_EQ(read_file(dir_ / "a" / "field.bin"), read_file(dir_ / "c" / "field.bin"));
  EXPECT_EQ(read_file(dir_ / "a" / "summary.txt"), read_file(dir_ / "b" / "summary.txt"));
  EXPECT_EQ(read_file(dir_ / "a" / "summary.txt"), read_file(dir_ / "c" / "summary.txt"));
  EXPECT_EQ(read_file(dir_ / "a" / "manifest.txt").size(), read_file(dir_ / "b" / "manifest.txt").size());

  const LatticeField f = read_field_binary((dir_ / "a" / "field.bin").string());
  EXPECT_EQ(f.d(), 1);
  EXPECT_EQ(f.shape(), MultiIndex{64});
  EXPECT_EQ(f.origin(), MultiIndex{1});
  EXPECT_EQ(f.size(), 64);
}

TEST_F(Cli, SimulateRefusesOversizedFields) {
  std::string text;
  EXPECT_EQ(run({"simulate", "--out", out("big"), "--set", "field.d=2", "--set",
                 "field.shape=100000,100000"},
                &text),
            3);
  EXPECT_NE(text.find("field.max_bytes"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "big" / "field.bin"));
}

TEST_F(Cli, ExpectationsDriveTheExitCode) {
  const std::vector<std::string> base = {"check-conditions", "--set", "conditions.check=corollary",
                                         "--set", "conditions.phi0=power 1.1",
                                         "--set", "conditions.n_max=20"};
  std::vector<std::string> good = base;
  good.insert(good.end(), {"--out", out("good"), "--set", "conditions.expect=converges"});
  std::vector<std::string> bad = base;
  bad.insert(bad.end(), {"--out", out("bad"), "--set", "conditions.expect=diverges"});
  std::string text;
  EXPECT_EQ(run(good, &text), 0);
  EXPECT_NE(text.find("expectation_verdict = met"), std::string::npos);
  EXPECT_EQ(run(bad, &text), 1);
  EXPECT_NE(text.find("expectation_verdict = FAILED"), std::string::npos);
}

TEST_F(Cli, ZeroFieldSllnSmokeTest) {
  std::string text;
  EXPECT_EQ(run({"slln", "--out", out("zero"), "--set", "field.generator=zero", "--set", "field.d=2",
                 "--set", "slln.shell_cap=4", "--set", "slln.ref_shell=1", "--set", "slln.replicates=2"},
                &text),
            0);
  EXPECT_NE(text.find("median_cap = 0\n"), std::string::npos);
  EXPECT_NE(text.find("decay_met = true"), std::string::npos);
}

TEST_F(Cli, ConstantMomentIsExact) {
  // E|X|^p for the constant sampler is known exactly, so a tight tolerance
  // passes and a wrong target fails.
  const std::vector<std::string> base = {"estimate-moments", "--set", "estimate.kind=abs",
                                         "--set", "estimate.law=constant",
                                         "--set", "estimate.value=2",
                                         "--set", "estimate.p=2",
                                         "--set", "estimate.replicates=16",
                                         "--set", "estimate.expect_tol=1e-12"};
  std::vector<std::string> good = base;
  good.insert(good.end(), {"--out", out("m1"), "--set", "estimate.expect_value=4"});
  std::vector<std::string> bad = base;
  bad.insert(bad.end(), {"--out", out("m2"), "--set", "estimate.expect_value=5"});
  EXPECT_EQ(run(good), 0);
  EXPECT_EQ(run(bad), 1);

  const std::string csv = read_file(dir_ / "m1" / "moments.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "p,value,std_error,replicates,heavy_tail_unstable");
  EXPECT_NE(csv.find("2,4,0,16,false"), std::string::npos);
}

TEST_F(Cli, ToeplitzRowSumsStayBelowOne) {
  std::string text;
  EXPECT_EQ(run({"toeplitz", "--out", out("t"), "--set", "toeplitz.phi0=power 1", "--set",
                 "toeplitz.transform=decay"},
                &text),
            0);
  EXPECT_NE(text.find("expectation_row_sums = met"), std::string::npos);
  EXPECT_NE(text.find("tail_sup_decreasing_per_doubling = true"), std::string::npos);
  const std::string rows = read_file(dir_ / "t" / "rows.csv");
  EXPECT_EQ(rows.substr(0, rows.find('\n')), "n0,row_sum,closed_form,gap");
}

TEST_F(Cli, ManifestIsPureAndEchoesDefaults) {
  std::ofstream cfg(dir_ / "cond.cfg");
  cfg << "[conditions]\ncheck = corollary\nphi0 = power 1.1\nexpect = converges\n";
  cfg.close();

  ASSERT_EQ(run({"check-conditions", "--config", (dir_ / "cond.cfg").string(), "--out", out("r1")}), 0);
  ASSERT_EQ(run({"check-conditions", "--config", (dir_ / "cond.cfg").string(), "--out", out("r1")}), 0);
  const std::string m = read_file(dir_ / "r1" / "manifest.txt");

  // Consulted defaults appear with their resolved values.
  EXPECT_NE(m.find("conditions.n_max = 8\n"), std::string::npos);
  EXPECT_NE(m.find("conditions.p = 1\n"), std::string::npos);
  EXPECT_NE(m.find("run.seed = 1\n"), std::string::npos);
  EXPECT_NE(m.find("conditions.expect = converges\n"), std::string::npos);

  // Same file, same overrides, fresh process: identical manifest bytes.
  ASSERT_EQ(run({"check-conditions", "--config", (dir_ / "cond.cfg").string(), "--out", out("r1"),
                 "--set", "conditions.expect=converges"}),
            0);
  EXPECT_EQ(read_file(dir_ / "r1" / "manifest.txt"), m);
}

TEST_F(Cli, PaperSuiteReportsCorruptedToleranceAsFailure) {
  // Shrunk budgets keep this fast; the zeroed tolerance must turn criterion 1
  // into a reported failure and the whole run into exit 1.
  std::string text;
  EXPECT_EQ(run({"paper-suite", "--out", out("suite"), "--set", "suite.ecf_tol=0",
                 "--set", "suite.ecf_draws=2000", "--set", "suite.law_replicates=100",
                 "--set", "suite.scaling_replicates=1000", "--set", "suite.dichotomy_replicates=100",
                 "--set", "suite.slln_replicates=2", "--set", "suite.recursion_replicates=100",
                 "--set", "suite.toeplitz_configs=20"},
                &text),
            1);
  EXPECT_NE(text.find("FAIL  criterion 1  sampler-law"), std::string::npos);
  EXPECT_NE(text.find("all_passed = false"), std::string::npos);
  const std::string csv = read_file(dir_ / "suite" / "suite.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,name,passed,detail");
  EXPECT_NE(csv.find("1,sampler-law,false"), std::string::npos);
}
