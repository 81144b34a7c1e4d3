#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "commands.hpp"

namespace fs = std::filesystem;
using jys::cli::run;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("JYS_TEST_TMP");
  fs::path dir = fs::path(env != nullptr ? env : fs::temp_directory_path().string()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int call(std::vector<std::string> args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  if (out_text != nullptr) *out_text = out.str() + err.str();
  return code;
}

std::vector<std::string> lines_without_comments(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

}  // namespace

TEST_CASE("gen-data") {
  const auto dir = scratch("gen");
  REQUIRE(call({"gen-data", "--countdown", "D=16", "V=8", "-n", "1000", "--seed", "7", "--out-dir", dir.string(),
                "-o", "a.txt"}) == 0);
  REQUIRE(call({"gen-data", "--countdown", "D=16", "V=8", "-n", "1000", "--seed", "7", "--out-dir", dir.string(),
                "-o", "b.txt"}) == 0);
  const auto a = slurp(dir / "a.txt");
  CHECK(a == slurp(dir / "b.txt"));
  CHECK(a.rfind("# jys gen-data config_hash=", 0) == 0);
  CHECK(a.find("seed=7") != std::string::npos);
  CHECK(lines_without_comments(a).size() == 1000);
  const auto side = nlohmann::json::parse(slurp(dir / "a.txt.json"));
  CHECK(side["countdown"]["D"] == 16);
  CHECK(side["seed"] == 7);

  REQUIRE(call({"gen-data", "--countdown", "D=6", "V=2", "-n", "3", "--out-dir", dir.string(), "-o", "c.txt"}) == 0);
  for (const auto& line : lines_without_comments(slurp(dir / "c.txt"))) CHECK(line == "1 0 1 0 1 0");

  CHECK(call({"gen-data", "--countdown", "D=6", "V=8", "-n", "3", "--seed", "8", "--out-dir", dir.string(), "-o",
              "d.txt"}) == 0);
  CHECK(slurp(dir / "d.txt") != slurp(dir / "c.txt"));
}

TEST_CASE("seed from the environment") {
  const auto dir = scratch("env");
  ::setenv("JYS_SEED", "11", 1);
  REQUIRE(call({"gen-data", "--countdown", "D=4", "V=4", "-n", "5", "--out-dir", dir.string()}) == 0);
  ::unsetenv("JYS_SEED");
  CHECK(slurp(dir / "countdown.txt").find("seed=11") != std::string::npos);
}

TEST_CASE("optimize writes a schedule and a search trace") {
  const auto dir = scratch("opt");
  const std::vector<std::string> args{"optimize", "--countdown", "D=8",   "V=4", "--jys", "1", "--num-samples",
                                      "128",      "--seed",      "3",     "--out-dir", dir.string()};
  std::string text;
  REQUIRE(call(args, &text) == 0);
  CHECK(text.find("interval widths:") != std::string::npos);
  CHECK(text.find("half") != std::string::npos);
  const auto first = slurp(dir / "schedule.json");
  const auto trace = slurp(dir / "schedule_trace.csv");
  REQUIRE(call(args) == 0);
  CHECK(slurp(dir / "schedule.json") == first);
  CHECK(slurp(dir / "schedule_trace.csv") == trace);

  const auto j = nlohmann::json::parse(first);
  CHECK(j["timesteps"].size() == 3);
  CHECK(j["provenance"]["origin"] == "jys");
  CHECK(j["seed"] == 3);
  const auto rows = lines_without_comments(trace);
  REQUIRE(rows.size() >= 2);
  CHECK(rows[0] == "round,segment,s,u,probe,t,klub");
  CHECK(rows.size() - 1 == 19);  // two initial probes plus one per shrink down to T/2048
}

TEST_CASE("sample and evaluate") {
  const auto dir = scratch("sample");
  const std::vector<std::string> args{"sample", "--countdown", "D=8", "V=4", "--uniform", "2", "--ensemble", "200",
                                      "--seed", "5", "--out-dir", dir.string(), "--dump-paths", "paths.jsonl"};
  REQUIRE(call(args) == 0);
  const auto samples = slurp(dir / "samples.txt");
  const auto metrics = slurp(dir / "samples_metrics.csv");
  const auto paths = slurp(dir / "paths.jsonl");
  REQUIRE(call(args) == 0);
  CHECK(slurp(dir / "samples.txt") == samples);
  CHECK(slurp(dir / "samples_metrics.csv") == metrics);
  CHECK(slurp(dir / "paths.jsonl") == paths);
  const auto rows = lines_without_comments(samples);
  CHECK(rows.size() == 200);
  for (const auto& r : rows) CHECK(r.find('4') == std::string::npos);  // the mask token is 4
  CHECK(metrics.find("violation_rate") != std::string::npos);
  CHECK(lines_without_comments(metrics)[1].rfind("uniform_N2,tau_leap,euler,2,2,", 0) == 0);

  // A small explicit problem is evaluated exactly as well.
  const auto data = dir / "data.json";
  {
    std::ofstream os(data);
    os << R"({"explicit": {"dims": 2, "vocab": 3, "probs": [0.3, 0, 0.1, 0, 0.2, 0.1, 0.05, 0.05, 0.2]}})";
  }
  const std::vector<std::string> ev{"evaluate", "--kernel", "uniform", "--data", data.string(), "--uniform", "2",
                                    "--jys", "1", "--num-samples", "128", "--ensemble", "100", "--out-dir",
                                    dir.string()};
  std::string text;
  REQUIRE(call(ev, &text) == 0);
  const auto report = slurp(dir / "evaluate.csv");
  CHECK(report.find("schedule,nfe,kl,marginal_tv") != std::string::npos);
  REQUIRE(call(ev) == 0);
  CHECK(slurp(dir / "evaluate.csv") == report);

  // Countdown spaces are too large for the exact law; ensemble metrics only.
  REQUIRE(call({"evaluate", "--countdown", "D=6", "V=4", "--uniform", "2", "--ensemble", "50", "--out-dir",
                dir.string(), "-o", "cd.csv"}) == 0);
  CHECK(slurp(dir / "cd.csv").find(",kl") == std::string::npos);
}

TEST_CASE("verify negative control and exit codes") {
  const auto dir = scratch("verify");
  std::string text;
  const int code = call({"verify", "--instances", "2", "--path-kl-paths", "2000", "--count-paths", "2000",
                         "--inject-fault", "rate_sign", "--out-dir", dir.string()},
                        &text);
  CHECK(code == jys::cli::kVerifyFailed);
  const auto j = nlohmann::json::parse(slurp(dir / "verify.json"));
  bool saw = false;
  for (const auto& c : j["checks"]) {
    if (c["name"] == "path_kl_bound") {
      saw = true;
      CHECK(c["passed"] == false);
    }
  }
  CHECK(saw);

  CHECK(call({"nonsense"}) == jys::cli::kUsage);
  CHECK(call({}) == jys::cli::kUsage);
  CHECK(call({"sample", "--kernel", "bogus"}) == jys::cli::kUsage);
  CHECK(call({"verify", "--inject-fault", "bogus", "--out-dir", dir.string()}) == jys::cli::kUsage);
  CHECK(call({"--help"}) == jys::cli::kOk);
}

TEST_CASE("config file keys match the long option names") {
  const auto dir = scratch("config");
  const auto cfg = dir / "run.toml";
  {
    std::ofstream os(cfg);
    os << "countdown = [\"D=5\", \"V=3\"]\ncount = 4\nseed = 9\n";
  }
  REQUIRE(call({"gen-data", "--config", cfg.string(), "--out-dir", dir.string()}) == 0);
  const auto text = slurp(dir / "countdown.txt");
  CHECK(text.find("seed=9") != std::string::npos);
  CHECK(lines_without_comments(text).size() == 4);
}
