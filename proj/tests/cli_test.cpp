#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "fixtures.hpp"
#include "visreplay/replay.hpp"

namespace visreplay {
namespace {

namespace fs = testing::fs;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "visreplay");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

// A small session with a walk, recorded to a script; shared by the tests
// below to keep them fast.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir();
    const std::string d = dir_->path().string();
    ASSERT_EQ(run({"synth", "--out", d + "/hi", "--width", "540", "--height", "1158", "--serial", "HI",
                   "--events", "8", "--walk-seed", "4"})
                  .code,
              cli::kOk);
    ASSERT_EQ(run({"synth", "--out", d + "/lo", "--width", "360", "--height", "772", "--serial", "LO"}).code,
              cli::kOk);
    const Outcome r = run({"record", "--session", d + "/hi", "--events", d + "/hi/events.xml", "--out",
                       d + "/scripts", "--timestamp", "1700000000"});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    script_ = d + "/scripts/HI-20231114T221320Z";
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static std::string path(const std::string& rel) { return (dir_->path() / rel).string(); }

  static testing::TempDir* dir_;
  static std::string script_;
};

testing::TempDir* Pipeline::dir_ = nullptr;
std::string Pipeline::script_;

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"bogus"}).code, cli::kUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
  EXPECT_EQ(run({"replay", "--script", "s", "--session", "a", "--report", "r", "--gamma", "1.5"}).code,
            cli::kUsage);
  EXPECT_EQ(run({"replay", "--script", "s", "--session", "a", "--report", "r", "--delta", "0"}).code,
            cli::kUsage);
  EXPECT_EQ(run({"--config", "/nonexistent/c.xml", "report", "--in", "x"}).code, cli::kUsage);
}

TEST(Cli, BadConfigFile) {
  testing::TempDir dir;
  spit(dir / "c.xml", "<config gamma=\"2\"/>");
  const Outcome r = run({"--config", (dir / "c.xml").string(), "report", "--in", "x"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("gamma"), std::string::npos);
}

TEST(Cli, MissingInputsFail) {
  testing::TempDir dir;
  EXPECT_EQ(run({"report", "--in", (dir / "none.xml").string()}).code, cli::kFailure);
  EXPECT_EQ(run({"record", "--session", (dir / "none").string(), "--events", "e", "--out", "o"}).code,
            cli::kFailure);
}

TEST_F(Pipeline, ReplayWritesReports) {
  const Outcome r = run({"replay", "--script", script_, "--session", path("hi"), "--session", path("lo"),
                     "--report", path("r_hi.xml"), "--report", path("r_lo.xml")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const ReplayReport hi = report_from_xml(slurp(path("r_hi.xml")));
  const ReplayReport lo = report_from_xml(slurp(path("r_lo.xml")));
  EXPECT_EQ(hi.device, "HI");
  EXPECT_EQ(lo.device, "LO");
  EXPECT_EQ(hi.total_steps, 8u);
  EXPECT_DOUBLE_EQ(replay_accuracy(hi), 1.0);
  EXPECT_NE(r.out.find("effective config"), std::string::npos);
  EXPECT_NE(r.out.find("total"), std::string::npos);
}

TEST_F(Pipeline, MismatchedReportCount) {
  EXPECT_EQ(run({"replay", "--script", script_, "--session", path("hi"), "--session", path("lo"),
                 "--report", path("only.xml")})
                .code,
            cli::kUsage);
}

TEST_F(Pipeline, RecordAndReplayAreReproducible) {
  const Outcome r = run({"record", "--session", path("hi"), "--events", path("hi/events.xml"), "--out",
                     path("again"), "--timestamp", "1700000000"});
  ASSERT_EQ(r.code, cli::kOk);
  const fs::path a = script_, b = path("again/HI-20231114T221320Z");
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const fs::path other = b / fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path();
    ++files;
  }
  EXPECT_GT(files, 8u);

  for (const char* name : {"x1.xml", "x2.xml"}) {
    ASSERT_EQ(run({"replay", "--script", script_, "--session", path("lo"), "--report", path(name)}).code,
              cli::kOk);
  }
  EXPECT_EQ(slurp(path("x1.xml")), slurp(path("x2.xml")));
}

TEST_F(Pipeline, CharacterizeAndMatch) {
  Outcome r = run({"characterize", "--screen", path("hi/home.png"), "--out", path("home_layout.xml")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const LayoutMap m = layout_from_xml(slurp(path("home_layout.xml")));
  EXPECT_FALSE(m.entries.empty());
  EXPECT_NE(r.out.find(std::to_string(m.entries.size()) + " widgets"), std::string::npos);

  r = run({"match", "--widget", script_ + "/000/widget.png", "--screen", path("hi/home.png"), "--out",
           path("cands.xml")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(slurp(path("cands.xml")).find("<candidate"), std::string::npos);
}

ReplayReport hand_report(std::string device, std::size_t total, std::vector<std::array<bool, 3>> flags) {
  ReplayReport r;
  r.script_id = "S-20231114T221320Z";
  r.device = std::move(device);
  r.total_steps = total;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    StepOutcome o;
    o.index = i;
    o.op = "tap";
    o.image_ok = flags[i][0];
    o.layout_ok = flags[i][1];
    o.success = o.final_ok = flags[i][2];
    r.outcomes.push_back(o);
  }
  return r;
}

TEST(Cli, ReportMergesByHand) {
  testing::TempDir dir;
  // A: 4 steps; I ok on 2, L ok on 3, F ok on 3 (both, layout only, neither).
  spit(dir / "a.xml", report_to_xml(hand_report("A", 4, {{true, true, true}, {false, true, true},
                                                         {false, false, true}, {true, true, false}})));
  // B: 2 steps, aborted after one: I ok, F ok (image only).
  spit(dir / "b.xml", report_to_xml(hand_report("B", 2, {{true, false, true}})));
  const Outcome r = run({"report", "--in", (dir / "a.xml").string(), "--in", (dir / "b.xml").string(), "--out",
                     (dir / "t.txt").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::istringstream table(slurp(dir / "t.txt"));
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(table, line);) {
    std::istringstream in(line);
    rows.emplace_back(std::istream_iterator<std::string>(in), std::istream_iterator<std::string>());
  }
  using Row = std::vector<std::string>;
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1], (Row{"S-20231114T221320Z", "A", "4", "50.00", "75.00", "75.00", "1", "0", "1", "1"}));
  EXPECT_EQ(rows[2], (Row{"S-20231114T221320Z", "B", "2", "50.00", "0.00", "50.00", "0", "1", "0", "0"}));
  // Total: 6 steps, I 3/6, L 3/6, F 4/6.
  EXPECT_EQ(rows[3], (Row{"total", "6", "50.00", "50.00", "66.67", "1", "1", "1", "1"}));
}

}  // namespace
}  // namespace visreplay
