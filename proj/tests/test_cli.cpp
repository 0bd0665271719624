#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(CRYOPLAN_CLI) + " " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// report.csv without its wall-clock column (the last one).
std::string without_wall(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("exit codes") {
  TempDir t("cryoplan_cli_codes");
  CHECK(run("--version") == 0);
  CHECK(run("--help") == 0);
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("gen") == 2);                                   // --out missing
  CHECK(run("gen --out " + t / "a.csv" + " --bogus 1") == 2);
  CHECK(run("gen --preset nope --out " + t / "a.csv") == 2);
  CHECK(run("train --data " + t / "missing.csv" + " --out " + t / "p.bin") == 1);
  CHECK(run("train --data x.csv --out p.bin --elim maybe") == 2);
  CHECK(run("train --data x.csv --out p.bin --classifier vgg") == 2);
  CHECK(run("eval --data x.csv --policy oracle --out " + t / "r") == 2);
  CHECK(run("eval --data x.csv --policy dqn --out " + t / "r") == 2);  // no --model
  CHECK(run("compare --data " + t / "missing.csv" + " --policies greedy --out " + t / "r") == 1);
}

TEST_CASE("gen is reproducible and replayable from its manifest") {
  TempDir t("cryoplan_cli_gen");
  REQUIRE(run("gen --seed 3 --out " + t / "a.csv" + " --split 2:1") == 0);
  REQUIRE(run("gen --seed 3 --out " + t / "b.csv") == 0);
  const auto a = slurp(t / "a.csv");
  CHECK(a == slurp(t / "b.csv"));
  CHECK(fs::exists(t / "a.train.csv"));
  CHECK(fs::exists(t / "a.val.csv"));

  const auto manifest = nlohmann::json::parse(slurp(t / "a.csv.manifest.json"));
  CHECK(manifest["command"] == "gen");
  CHECK(manifest["seeds"]["generator"] == 3);
  CHECK(manifest["artifacts"].size() == 3);

  const auto train_part = slurp(t / "a.train.csv");
  fs::remove(t / "a.csv");
  fs::remove(t / "a.train.csv");
  REQUIRE(run("gen --config " + t / "a.csv.manifest.json") == 0);
  CHECK(slurp(t / "a.csv") == a);
  CHECK(slurp(t / "a.train.csv") == train_part);

  // Flags override the manifest.
  REQUIRE(run("gen --config " + t / "a.csv.manifest.json --seed 4 --out " + t / "c.csv") == 0);
  CHECK(slurp(t / "c.csv") != a);
  CHECK(run("train --config " + t / "a.csv.manifest.json") == 2);  // wrong command
}

TEST_CASE("train and eval replay bit-identically") {
  TempDir t("cryoplan_cli_train");
  REQUIRE(run("gen --seed 1 --out " + t / "d.csv" + " --split 2:1") == 0);
  REQUIRE(run("train --data " + t / "d.train.csv" + " --classifier gt --epochs 2 --episodes-per-epoch 3 "
              "--duration 60 --seed 9 --keep-best --lr-final-fraction 0.5 --out " + t / "p.bin") == 0);
  const auto policy = slurp(t / "p.bin");
  REQUIRE_FALSE(policy.empty());
  const auto metrics = slurp(t / "p.bin.metrics.jsonl");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 2);
  const auto tm = nlohmann::json::parse(slurp(t / "p.bin.manifest.json"));
  CHECK(tm["config"]["train"]["keep_best"] == true);
  CHECK(tm["config"]["train"]["lr_final_fraction"] == 0.5);
  CHECK(tm["inputs"][0]["fnv1a64"].get<std::string>().size() == 16);

  fs::rename(t / "p.bin", t / "first.bin");
  REQUIRE(run("train --config " + t / "p.bin.manifest.json") == 0);
  CHECK(slurp(t / "p.bin") == policy);

  const std::string eval_args = "compare --data " + t / "d.val.csv" + " --model " + t / "p.bin" +
                                " --policies dqn,greedy,random,sa --budgets 60,120 --trials 4 --seed 2 --out " + t / "r";
  REQUIRE(run(eval_args) == 0);
  const auto report = without_wall(slurp(t / "r/report.csv"));
  const auto curve = slurp(t / "r/curve.csv");
  const auto visits = slurp(t / "r/visits.csv");
  REQUIRE(run("compare --config " + t / "r/manifest.json --out " + t / "r2 --workers 3") == 0);
  CHECK(without_wall(slurp(t / "r2/report.csv")) == report);
  CHECK(slurp(t / "r2/curve.csv") == curve);
  CHECK(slurp(t / "r2/visits.csv") == visits);

  REQUIRE(run("eval --data " + t / "d.val.csv" + " --policy greedy --classifier r50 --budgets 120 --trials 3 --out " +
              t / "e") == 0);
  const auto rows = slurp(t / "e/report.csv");
  CHECK(rows.rfind("policy,classifier,budget,trials,mean_lctf", 0) == 0);
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 2);
}
