#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"
#include "ddopt/io.hpp"
#include "ddopt/sequence.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ddopt;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("ddopt_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args, const fs::path& out = {}) {
    args.insert(args.begin(), {"ddopt", "--out-dir", (out.empty() ? dir_ : out).string()});
    return cli::main_entry(args);
  }
  std::string slurp(const fs::path& p) const { return io::read_text_file(p); }
  fs::path write(const std::string& name, const std::string& text) const {
    io::write_text_file(dir_ / name, text);
    return dir_ / name;
  }

  fs::path dir_;
};

TEST_F(Cli, SimulateWritesReportAndManifest) {
  ASSERT_EQ(run({"simulate", "--seq", "xy4", "--model", "ideal", "--J", "1e-3", "--beta", "1e-6", "--tau-d", "0.1"}), 0);
  const json r = io::read_json_file(dir_ / "simulate.json");
  EXPECT_GT(r.at("D").get<double>(), 0.0);
  EXPECT_LT(r.at("D").get<double>(), 1e-6);
  EXPECT_NEAR(r.at("tau_c").get<double>(), 0.4, 1e-15);
  EXPECT_NEAR(r.at("dimensionless").at("J_tau_d").get<double>(), 1e-4, 1e-18);
  const io::RunManifest m = io::manifest_from_json(io::read_json_file(dir_ / "simulate.manifest.json"));
  EXPECT_EQ(m.command, "simulate");
  EXPECT_EQ(m.outputs, std::vector<std::string>{"simulate.json"});
  EXPECT_EQ(m.version, io::kVersion);
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run({"simulate", "--seq", "ga4:X,X"}), 2);
  EXPECT_EQ(run({"simulate", "--seq", "xy4", "--tau-p", "0.01"}), 2);
  EXPECT_EQ(run({"simulate", "--seq", "xy4", "--model", "finite-width"}), 2);
  EXPECT_EQ(run({"simulate", "--seq", "xy4", "--precision", "quad", "--model", "finite-width", "--tau-p", "1e-3"}), 2);
  EXPECT_EQ(run({"simulate"}), 2);
  EXPECT_EQ(run({"simulate", "--seq", "xy4", "--bogus"}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"compare"}), 2);
  EXPECT_EQ(run({"compare", "--seq", "xy4", "--epsilon", "0.1"}), 2);
  EXPECT_FALSE(fs::exists(dir_ / "simulate.json"));
}

TEST_F(Cli, NonCyclicSequenceFileIsRejected) {
  const fs::path f = write("bad.seq", "0.1:X 0.1:Y\n");
  testing::internal::CaptureStderr();
  EXPECT_EQ(run({"simulate", "--seq-file", f.string()}), 2);
  const std::string err = testing::internal::GetCapturedStderr();
  EXPECT_NE(err.find("cyclic"), std::string::npos) << err;
  const fs::path good = write("good.seq", "0.1:Y 0.1:X 0.1:Y 0.1:X\n");
  EXPECT_EQ(run({"simulate", "--seq-file", good.string()}), 0);
}

TEST_F(Cli, OptimizeRejectsBadPopulationSize) {
  const fs::path cfg = write("ga.json", R"({"K": 4, "Q": 12})");
  EXPECT_EQ(run({"optimize", cfg.string()}), 2);
  const fs::path unknown = write("ga2.json", R"({"K": 4, "Q": 16, "mutation_rate": 0.1})");
  EXPECT_EQ(run({"optimize", unknown.string()}), 2);
}

TEST_F(Cli, OptimizeIsReproducible) {
  const fs::path cfg = write("ga.json", R"({"K": 4, "Q": 16, "seed": 3, "generations_per_level": 5})");
  ASSERT_EQ(run({"optimize", cfg.string()}, dir_ / "a"), 0);
  ASSERT_EQ(run({"--jobs", "3", "optimize", cfg.string()}, dir_ / "b"), 0);
  for (const char* f : {"optimize_best.seq", "optimize_history.csv", "optimize.json"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  const std::string ledger = slurp(dir_ / "a" / "optimize_best.seq");
  const std::string last = ledger.substr(ledger.rfind("# best"));
  const Sequence best = parse_sequence_text(last.substr(last.find('\n') + 1));
  EXPECT_TRUE(cyclic_ok(best));
  EXPECT_EQ(best.size(), 4u);
}

TEST_F(Cli, HeffFlipAngleRga2KeepsTheXChannel) {
  ASSERT_EQ(run({"heff", "--seq", "rga2", "--model", "flip-angle", "--epsilon", "0.1"}), 0);
  const json h = io::read_json_file(dir_ / "heff.json");
  EXPECT_EQ(h.at("dominant_channel"), "x");
  const double x = h.at("channel_norms").at("x").get<double>();
  const double ref = h.at("h_err_channel_norms").at("x").get<double>();
  EXPECT_NEAR(x / ref, 1.0, 0.05);
}

TEST_F(Cli, BranchAmbiguityExitsWithThree) {
  // H = J sigma_z (x) I with J tau_c = pi makes the cycle propagator -1.
  json sys{{"seed", 0}, {"n_spins", 2}, {"J", 1.0}, {"beta", 0.0}};
  CMatrix err = linalg::kron(linalg::pauli(3), linalg::identity(4));
  sys["err_shape"] = io::matrix_to_json(err);
  sys["bath_shape"] = io::matrix_to_json(CMatrix::Zero(4, 4));
  const fs::path f = write("sys.json", sys.dump());
  const fs::path s = write("free.seq", "3.141592653589793:I\n");
  EXPECT_EQ(run({"heff", "--seq-file", s.string(), "--system", f.string()}), 3);
  EXPECT_EQ(run({"simulate", "--seq-file", s.string(), "--system", f.string()}), 0);
}

TEST_F(Cli, SweepThenFitRecoversXY4Exponent) {
  const fs::path plan = write("plan.json", R"({
    "axes": [{"param": "tau_d", "lo": 0.1, "hi": 10, "per_decade": 4}],
    "fixed": {"J": 1e-3, "beta": 1e-6}, "sequences": ["xy4"], "n_seeds": 10})");
  ASSERT_EQ(run({"sweep", plan.string()}), 0);
  ASSERT_EQ(run({"fit", "--csv", (dir_ / "sweep.csv").string(), "--sequence", "xy4"}), 0);
  const json f = io::read_json_file(dir_ / "fit.json");
  EXPECT_NEAR(f.at("fit").at("slope").get<double>(), 2.0, 0.2);
  EXPECT_EQ(run({"fit", "--csv", (dir_ / "sweep.csv").string(), "--sequence", "nothing"}), 2);
}

TEST_F(Cli, CompareListsDuplicatesIdentically) {
  ASSERT_EQ(run({"compare", "--seq", "xy4", "--seq", "cdd2", "--seq", "xy4", "--n-seeds", "2"}), 0);
  std::istringstream in(slurp(dir_ / "compare.csv"));
  std::string header, l1, l2, l3;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  EXPECT_EQ(l2.substr(l2.find(',')), l3.substr(l3.find(',')));
  EXPECT_EQ(l1.substr(0, 7), "1,cdd2,");
}

TEST_F(Cli, ReplayIsByteIdenticalAtAnyJobCount) {
  const fs::path plan = write("land.json", R"({
    "axes": [{"param": "J", "values": [1e-4, 1e-3]}, {"param": "beta", "values": [1e-6, 1e-4]}],
    "fixed": {"tau_d": 0.1}, "sequences": ["ga8a", "ga8b", "xy4"], "n_seeds": 3})");
  ASSERT_EQ(run({"landscape", plan.string()}, dir_ / "orig"), 0);
  const fs::path manifest = dir_ / "orig" / "landscape.manifest.json";
  for (const char* jobs : {"1", "4"}) {
    const fs::path out = dir_ / (std::string("replay") + jobs);
    ASSERT_EQ(run({"--jobs", jobs, "replay", manifest.string()}, out), 0);
    EXPECT_EQ(slurp(out / "landscape.csv"), slurp(dir_ / "orig" / "landscape.csv")) << jobs;
  }
  EXPECT_EQ(run({"replay", (dir_ / "missing.json").string()}), 2);
}

TEST_F(Cli, OutDirFromEnvironment) {
  EXPECT_EQ(cli::resolve_out_dir("given"), fs::path("given"));
  ::setenv("DDOPT_OUT_DIR", dir_.c_str(), 1);
  EXPECT_EQ(cli::resolve_out_dir(""), dir_);
  ::unsetenv("DDOPT_OUT_DIR");
  EXPECT_EQ(cli::resolve_out_dir(""), fs::path("."));
}

TEST(Io, MatrixAndSystemRoundTrip) {
  BathSpec spec;
  spec.n_spins = 2;
  spec.seed = 77;
  const SystemModel sys = make_system(spec);
  const SystemModel back = io::system_from_json(json::parse(io::system_to_json(sys, true).dump()));
  EXPECT_TRUE(back.h0 == sys.h0);
  const SystemModel regen = io::system_from_json(io::system_to_json(sys, false));
  EXPECT_TRUE(regen.h0 == sys.h0);
}

TEST(Io, ManifestRoundTrip) {
  io::RunManifest m;
  m.command = "sweep";
  m.config = json{{"a", 1}};
  m.seed = 5;
  m.outputs = {"sweep.csv"};
  m.wall_clock_s = 1.5;
  const io::RunManifest back = io::manifest_from_json(io::manifest_to_json(m));
  EXPECT_EQ(back.command, m.command);
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.seed, m.seed);
  EXPECT_EQ(back.outputs, m.outputs);
}

}  // namespace
