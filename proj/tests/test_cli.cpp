#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tmsf/cli.hpp"

using namespace tmsf;
using cli::JobSpec;
using io::Json;

namespace {

std::string data_file(const std::string& name) { return std::string(TMSF_DATA_DIR) + "/" + name; }

struct Outcome {
  int code;
  std::string out, err;
  Json json() const { return Json::parse(out); }
};

Outcome run(JobSpec job) {
  std::ostringstream out, err;
  const int code = cli::run_job(job, out, err);
  return {code, out.str(), err.str()};
}

JobSpec job(const std::string& command, const std::string& shift, std::optional<std::string> pot, Json params = Json::object()) {
  JobSpec j;
  j.command = command;
  j.shift_file = data_file(shift);
  if (pot) j.potential_file = data_file(*pot);
  j.params = std::move(params);
  return j;
}

std::string write_temp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p.string();
}

Outcome shell(const std::string& args) {
  const std::string cmd = std::string(TMSF_BINARY) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, ""};
}

}  // namespace

TEST(Run, PressureOnGoldenMean) {
  auto r = run(job("pressure", "golden_mean.json", "zero.json", {{"n_max", 30}}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.json();
  const double est = j["result"]["estimate"].get<double>();
  EXPECT_LE(std::abs(est - std::log(std::numbers::phi)), 0.02);
  EXPECT_EQ(j["result"]["sequence"].size(), 30u);
  EXPECT_EQ(j["inputs"]["shift"]["sha256"], io::sha256_file(data_file("golden_mean.json")));
  EXPECT_EQ(j["inputs"]["potential"]["sha256"], io::sha256_file(data_file("zero.json")));
}

TEST(Run, ReduceOneSidedIsIdentity) {
  auto r = run(job("reduce", "golden_mean.json", "log_third.json", {{"method", "sinai"}}));
  // log_third is on two letters; golden mean accepts the same table
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = r.json();
  EXPECT_EQ(j["result"]["reduced"]["metadata"]["transfer_bound"].get<double>(), 0.0);
  auto shift = std::make_shared<const MarkovShift>(io::parse_shift(io::read_file(data_file("golden_mean.json"))));
  auto input = io::parse_potential(io::read_file(data_file("log_third.json")), shift);
  auto output = io::parse_reduction(j["result"]["reduced"], shift);
  EXPECT_EQ(output.one_sided, input);
}

TEST(Run, NonMixingIsAPreconditionFailure) {
  auto r = run(job("rpf", "two_cycle.json", "zero.json"));
  EXPECT_EQ(r.code, 2);
  const auto j = r.json();
  EXPECT_EQ(j["error"]["kind"], "not_mixing");
  EXPECT_NE(j["error"]["message"].get<std::string>().find("not topologically mixing"), std::string::npos);
}

TEST(Run, ParseFailures) {
  EXPECT_EQ(run(job("pressure", "golden_mean.json", "zero.json", {{"n_maks", 30}})).code, 3);
  EXPECT_EQ(run(job("pressure", "golden_mean.json", "zero.json", {{"n_max", 0}})).code, 3);
  EXPECT_EQ(run(job("pressure", "golden_mean.json", "zero.json", {{"n_max", "thirty"}})).code, 3);
  EXPECT_EQ(run(job("rpf", "golden_mean.json", "zero.json", {{"tol", 0.5}})).code, 3);
  EXPECT_EQ(run(job("reduce", "golden_mean.json", "zero.json", {{"method", "fourier"}})).code, 3);
  EXPECT_EQ(run(job("frobnicate", "golden_mean.json", "zero.json")).code, 3);
  auto bad = job("pressure", "golden_mean.json", std::nullopt);
  bad.potential_file = write_temp("tmsf_bad.json", "{\"type\": ");
  EXPECT_EQ(run(bad).code, 3);
  auto fmt = job("pressure", "golden_mean.json", "zero.json");
  fmt.format = "xml";
  EXPECT_EQ(run(fmt).code, 3);
}

TEST(Run, PreconditionFailures) {
  EXPECT_EQ(run(job("pressure", "golden_mean.json", std::nullopt)).code, 2);
  EXPECT_EQ(run(job("pressure", "golden_mean.json", "zero.json", {{"state", "7"}})).code, 2);
  // Bernoulli measure on a shift that is not full
  EXPECT_EQ(run(job("mixing", "golden_mean.json", "zero.json", {{"measure_file", data_file("bernoulli_half.json")}})).code, 2);
  auto stranded = job("pressure", "golden_mean.json", "zero.json");
  stranded.shift_file = write_temp("tmsf_stranded.json", R"({"states": ["a", "x"], "transitions": [[1, 1], [0, 0]]})");
  auto r = run(stranded);
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.json()["error"]["kind"], "stranded_state");
}

TEST(Run, ExitCodeMapping) {
  EXPECT_EQ(cli::exit_code_for(ErrorKind::parse), 3);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::invariant), 4);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::non_convergence), 4);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::not_mixing), 2);
  EXPECT_EQ(cli::exit_code_for(ErrorKind::cap_exceeded), 2);
  EXPECT_EQ(cli::error_json(ErrorKind::invariant, "x")["error"]["exit_code"], 4);
}

TEST(Pipeline, SinaiPreservesPressure) {
  for (const char* method : {"sinai", "coelho-quas"}) {
    auto r = run(job("reduce", "golden_mean_two_sided.json", "outer_indicator.json",
                     {{"method", method}, {"pressure_check", true}, {"n_max", 30}}));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = r.json();
  const auto& pc = doc["result"]["pressure_check"];
    EXPECT_LE(pc["difference"].get<double>(), 1e-9);
    EXPECT_EQ(r.json()["result"]["verification"]["max_defect"].get<double>(), 0.0);
  }
}

TEST(Pipeline, ConstantPotential) {
  const auto pot = write_temp("tmsf_const.json",
                              R"({"type": "locally_constant", "left_radius": 1, "right_radius": 1, "entries": [], "default": 0.75})");
  auto j = job("reduce", "golden_mean_two_sided.json", std::nullopt, {{"method", "sinai"}, {"pressure_check", true}, {"n_max", 40}});
  j.potential_file = pot;
  auto r = run(j);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = r.json();
  const auto& pc = doc["result"]["pressure_check"];
  const double target = 0.75 + std::log(std::numbers::phi);
  for (const char* side : {"input", "reduced"}) {
    const auto& rep = pc[side];
    EXPECT_LE(std::abs(rep["estimate"].get<double>() - target), rep["cauchy_gap"].get<double>());
  }
}

TEST(Pipeline, OneSidedInputGivesIdenticalReports) {
  auto r = run(job("reduce", "golden_mean.json", "zero.json", {{"method", "coelho-quas"}, {"pressure_check", true}}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = r.json();
  const auto& pc = doc["result"]["pressure_check"];
  EXPECT_EQ(pc["input"], pc["reduced"]);
  EXPECT_EQ(pc["difference"].get<double>(), 0.0);
}

TEST(Run, Deterministic) {
  for (const auto& j : {job("mixing", "golden_mean.json", "zero.json", {{"k_max", 4}, {"n_max", 1}}),
                        job("reduce", "golden_mean_two_sided.json", "outer_indicator.json", {{"method", "coelho-quas"}}),
                        job("induce", "golden_mean.json", "zero.json", {{"state", "0"}})}) {
    auto a = run(j), b = run(j);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
  }
}

TEST(Commands, ClassifyReportsEverything) {
  auto r = run(job("classify", "golden_mean.json", "zero.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = r.json();
  const auto& res = doc["result"];
  EXPECT_TRUE(res["mixing"].get<bool>());
  EXPECT_EQ(res["period"], 1);
  EXPECT_EQ(res["regularity"]["walters"], "yes");
  EXPECT_EQ(res["recurrence"]["mode"], "positive-recurrent");

  auto c = run(job("classify", "two_cycle.json", std::nullopt));
  ASSERT_EQ(c.code, 0);
  EXPECT_EQ(c.json()["result"]["period"], 2);
  EXPECT_FALSE(c.json()["result"]["mixing"].get<bool>());

  auto bad = job("classify", "golden_mean.json", std::nullopt);
  bad.shift_file = write_temp("tmsf_stranded2.json", R"({"states": ["a", "x"], "transitions": [[1, 1], [0, 0]]})");
  auto v = run(bad);
  ASSERT_EQ(v.code, 0);
  EXPECT_EQ(v.json()["result"]["violations"][0]["state"], "x");
}

TEST(Commands, RpfAndVariational) {
  auto r = run(job("rpf", "full2.json", "log_third.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(r.json()["result"]["lambda"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(r.json()["result"]["nu"][0].get<double>(), 1.0 / 3, 1e-12);

  auto v = run(job("variational", "full2.json", "log_third.json", {{"measure_file", data_file("bernoulli_half.json")}}));
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_GT(v.json()["result"]["gap"].get<double>(), 0.0);
  EXPECT_FALSE(v.json()["result"]["equilibrium"].get<bool>());

  auto g = run(job("variational", "full2.json", "log_third.json", {{"measure_file", data_file("gibbs.json")}}));
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_TRUE(g.json()["result"]["equilibrium"].get<bool>());
  EXPECT_EQ(run(job("variational", "full2.json", "log_third.json")).code, 3);
}

TEST(Commands, MixingAndInduce) {
  auto m = run(job("mixing", "full2.json", std::nullopt,
                   {{"measure_file", data_file("sticky_chain.json")}, {"k_max", 10}, {"n_max", 0}, {"max_len", 1}}));
  ASSERT_EQ(m.code, 0) << m.err;
  const auto doc = m.json();
  const auto& res = doc["result"];
  for (std::size_t k = 1; k <= 10; ++k) EXPECT_NEAR(res["beta"][k - 1]["beta"].get<double>(), std::pow(0.8, double(k)), 1e-12);
  EXPECT_NEAR(res["quasi_independence"]["c_star"].get<double>(), 5.0, 1e-12);

  auto i = run(job("induce", "full2.json", std::nullopt,
                   {{"measure_file", data_file("bernoulli_half.json")}, {"state", "0"}, {"horizon", 50}}));
  ASSERT_EQ(i.code, 0) << i.err;
  EXPECT_EQ(i.json()["result"]["kac"]["rhs"].get<double>(), 2.0);
  EXPECT_TRUE(i.json()["result"]["kac"]["ok"].get<bool>());
  EXPECT_EQ(run(job("induce", "full2.json", "zero.json")).code, 3);  // state is required
}

TEST(Commands, Subsystems) {
  auto r = run(job("subsystems", "geometric_full16.json", "geometric_weights.json",
                   {{"schedule_file", data_file("truncations.json")}, {"n_max", 100}}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = r.json();
  const auto& res = doc["result"];
  EXPECT_TRUE(res["nondecreasing"].get<bool>());
  const int sizes[] = {2, 4, 8, 16};
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_LE(std::abs(res["truncations"][i]["estimate"].get<double>() - std::log1p(-std::ldexp(1.0, -sizes[i]))), 0.01);
}

TEST(Commands, OutputFileAndTable) {
  auto j = job("mixing", "full2.json", std::nullopt, {{"measure_file", data_file("sticky_chain.json")}, {"k_max", 2}, {"n_max", 0}});
  j.format = "table";
  j.output = (std::filesystem::temp_directory_path() / "tmsf_mixing.tsv").string();
  auto r = run(j);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream f(*j.output);
  std::string first;
  std::getline(f, first);
  EXPECT_EQ(first, "k\tn\tbeta");
  std::getline(f, first);
  EXPECT_EQ(first, "1\t0\t0.8");
}

TEST(JobFile, StrictAndRelative) {
  EXPECT_THROW(cli::parse_job(Json::parse(R"({"command": "rpf", "shift_file": "a", "colour": 1})")), Error);
  auto spec = cli::parse_job(Json::parse(R"({"command": "rpf", "shift_file": "a.json", "params": {"measure_file": "m.json"}})"));
  cli::resolve_paths(spec, "/data");
  EXPECT_EQ(spec.shift_file, "/data/a.json");
  EXPECT_EQ(spec.params["measure_file"], "/data/m.json");
}

TEST(Binary, ExitCodes) {
  auto ok = shell("run --job " + data_file("job_pressure.json"));
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("\"estimate\""), std::string::npos);
  EXPECT_EQ(shell("rpf --shift " + data_file("two_cycle.json") + " --potential " + data_file("zero.json")).code, 2);
  EXPECT_EQ(shell("pressure --shift " + data_file("golden_mean.json") + " --potential " + data_file("zero.json") + " --depth 3").code, 3);
  EXPECT_EQ(shell("pressure --bogus").code, 3);
  EXPECT_EQ(shell("--help").code, 0);
  auto m = shell("mixing --shift " + data_file("full2.json") + " --measure-file " + data_file("sticky_chain.json") +
                 " --k-max 2 --n-max 0 --s-star 0,1 --format table");
  EXPECT_EQ(m.code, 0);
  EXPECT_EQ(m.out.substr(0, 10), "k\tn\tbeta\n1");
}
