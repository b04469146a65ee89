#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun falconn(const std::string& args) {
  const std::string cmd = std::string(FALCONN_CLI) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[256];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("falconn_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

TEST(Monitor, ConstantTraceSatisfies) {
  const fs::path d = scratch("monitor_ok");
  write(d / "t.csv", "time,y_y\n0,1\n0.5,1\n1,1\n");
  const CliRun r = falconn("monitor --trace " + (d / "t.csv").string() + " --spec 'G[0,1](y > 0)'");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "1.000000\n");
}

TEST(Monitor, ViolationExitsOne) {
  const fs::path d = scratch("monitor_bad");
  write(d / "t.csv", "time,y_y\n0,1\n0.5,-0.25\n1,1\n");
  const CliRun r = falconn("monitor --trace " + (d / "t.csv").string() + " --spec 'G[0,1](y > 0)'");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.out, "-0.250000\n");
}

TEST(Monitor, MalformedSpecExitsTwo) {
  const fs::path d = scratch("monitor_parse");
  write(d / "t.csv", "time,y_y\n0,1\n1,1\n");
  EXPECT_EQ(falconn("monitor --trace " + (d / "t.csv").string() + " --spec 'G[0,1](y >'").code, 2);
  EXPECT_EQ(falconn("monitor --trace " + (d / "t.csv").string() + " --spec 'G[0,1](z > 0)'").code, 2);
  EXPECT_EQ(falconn("monitor --spec 'G[0,1](y > 0)'").code, 2);
  EXPECT_EQ(falconn("").code, 2);
}

TEST(Simulate, WritesTraceWithManifest) {
  const fs::path d = scratch("simulate");
  write(d / "in.csv", "time,u_Ref\n0,1\n2,-1\n4,-1\n");
  const CliRun r = falconn("simulate --plant LinearSecondOrder --input " + (d / "in.csv").string() +
                        " --out " + (d / "out.csv").string());
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(d / "out.csv"));
  EXPECT_TRUE(fs::exists(d / "out.json"));
  const CliRun m = falconn("monitor --trace " + (d / "out.csv").string() + " --spec 'G[0,4](abs(Pos) < 100)'");
  EXPECT_EQ(m.code, 0);
  EXPECT_EQ(falconn("simulate --plant NoSuchPlant --input " + (d / "in.csv").string() +
                    " --out " + (d / "x.csv").string()).code,
            2);
}

TEST(Falsify, EndToEnd) {
  const fs::path d = scratch("falsify");
  write(d / "run.toml",
        "plant = \"LinearSecondOrder\"\nspec = \"G[0,10](abs(Pos) < 2)\"\nbudget = 10\nseed = 2\n");
  const CliRun r = falconn("falsify --config " + (d / "run.toml").string() + " --out " +
                        (d / "run").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("outcome falsified"), std::string::npos) << r.out;
  for (const char* f : {"config.toml", "dataset.json", "iterations.jsonl", "timings.jsonl",
                        "result.json", "run.log"}) {
    EXPECT_TRUE(fs::exists(d / "run" / f)) << f;
  }
  write(d / "bad.toml", "plant = \"LinearSecondOrder\"\nbudget = -1\n");
  EXPECT_EQ(falconn("falsify --config " + (d / "bad.toml").string()).code, 2);
}

TEST(Falsify, ExhaustedBudgetExitsThree) {
  const fs::path d = scratch("exhaust");
  write(d / "run.toml",
        "plant = \"LinearSecondOrder\"\nspec = \"G[0,10](abs(Pos) < 100)\"\nbudget = 1\n");
  const CliRun r = falconn("falsify --config " + (d / "run.toml").string() + " --out " +
                        (d / "run").string());
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("outcome budget-exhausted"), std::string::npos) << r.out;
}

}  // namespace
