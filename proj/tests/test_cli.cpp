#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(CR_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Scratch {
  std::filesystem::path dir;
  Scratch() {
    dir = std::filesystem::temp_directory_path() / ("costroute-cli-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

const std::string kPool = std::string(CR_SOURCE_DIR) + "/configs/pool9.json";

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run_cli("--help").status == 0);
  CHECK(run_cli("sim-gen --help").status == 0);
  CHECK(run_cli("").status == 2);
  CHECK(run_cli("sim-gen --no-such-flag 3").status == 2);
  CHECK(run_cli("bogus").status == 2);

  Scratch s;
  const auto r = run_cli("route --pool " + s / "missing.json" + " --sim-tasks x --out " + s / "o.jsonl");
  CHECK(r.status == 2);
  const auto err = nlohmann::json::parse(r.out);
  CHECK(err["status"] == "error");
  CHECK(err["kind"] == "Usage");

  const auto no_out = run_cli("sim-gen --n 3");
  CHECK(no_out.status == 2);
}

TEST_CASE("sim-gen is deterministic per seed") {
  Scratch s;
  const auto a = run_cli("sim-gen --n 20 --seed 7 --out " + s / "a.jsonl");
  REQUIRE(a.status == 0);
  const auto summary = nlohmann::json::parse(a.out);
  CHECK(summary["status"] == "ok");
  CHECK(summary["n_tasks"] == 20);
  REQUIRE(run_cli("sim-gen --n 20 --seed 7 --out " + s / "b.jsonl").status == 0);
  REQUIRE(run_cli("sim-gen --n 20 --seed 8 --out " + s / "c.jsonl").status == 0);
  CHECK(slurp(s / "a.jsonl") == slurp(s / "b.jsonl"));
  CHECK(slurp(s / "a.jsonl") != slurp(s / "c.jsonl"));
}

TEST_CASE("config file options with flags taking precedence") {
  Scratch s;
  {
    std::ofstream cfg(s / "cfg.json");
    cfg << nlohmann::json{{"n", 4}, {"seed", 1}, {"out", s / "cfg.jsonl"}}.dump();
  }
  const auto r = run_cli("--config " + s / "cfg.json" + " sim-gen --n 6");
  REQUIRE(r.status == 0);
  CHECK(nlohmann::json::parse(r.out)["n_tasks"] == 6);
  {
    std::ofstream bad(s / "bad.json");
    bad << "[1, 2]";
  }
  CHECK(run_cli("--config " + s / "bad.json" + " sim-gen --n 6").status == 2);
}

TEST_CASE("search and route on simulated tasks") {
  Scratch s;
  REQUIRE(run_cli("sim-gen --n 6 --seed 2 --out " + s / "t.jsonl").status == 0);
  const auto search = run_cli("search --pool " + kPool + " --sim-tasks " + s / "t.jsonl" + " --out " + s / "s.jsonl");
  REQUIRE(search.status == 0);
  CHECK(nlohmann::json::parse(search.out)["status"] == "ok");
  const auto route = run_cli("route --pool " + kPool + " --sim-tasks " + s / "t.jsonl" + " --allocator top --out " +
                             s / "r.jsonl");
  REQUIRE(route.status == 0);
  std::ifstream in(s / "r.jsonl");
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    const auto row = nlohmann::json::parse(line);
    CHECK(row.contains("task_id"));
    ++rows;
  }
  CHECK(rows == 6);
}
