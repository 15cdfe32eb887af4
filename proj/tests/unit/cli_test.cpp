#include "hammer/manifest.hpp"

#include <json.hpp>

#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(HAMMER_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / "hammer_cli_test";
  fs::create_directories(d);
  return d;
}

fs::path tiny_config(const fs::path& dir) {
  const fs::path p = dir / "tiny.toml";
  std::ofstream f(p);
  f << R"([dynmodel]
hidden = [8]
lags = 2
horizon = 4
batch = 8
max_epochs = 2
batches_per_epoch = 2
eval_trajectories = 5
eval_horizon = 10
[ppo]
total_steps = 80
num_envs = 4
batch = 8
unroll = 5
minibatches = 4
actor_hidden = [8]
critic_hidden = [8]
[env]
t_reset = 5
[icem]
horizon = 3
population = 10
elites = 3
iterations = 2
)";
  return p;
}

}  // namespace

TEST_CASE("cli exit codes") {
  CHECK(run("--help").code == 0);
  CHECK(run("").code == 1);
  CHECK(run("no-such-command").code == 1);
  CHECK(run("generate-data --minutes 0 --out /tmp/x.csv").code == 1);
  CHECK(run("generate-data --minutes 0.1").code == 1);  // --out missing
  CHECK(run("eval --controller ppo --backend model --out /tmp/x --model /nonexistent.model").code == 1);
  CHECK(run("--config /nonexistent.toml generate-data --minutes 0.1 --out /tmp/x.csv").code == 1);
  CHECK(run("eval --controller magic --backend plant --out /tmp/x").code == 1);
}

TEST_CASE("generate-data is reproducible and writes a manifest") {
  const fs::path d = scratch();
  const auto a = d / "a.csv", b = d / "b.csv", c = d / "c.csv";
  REQUIRE(run("-q generate-data --minutes 0.5 --seed 3 --out " + a.string()).code == 0);
  REQUIRE(run("-q generate-data --minutes 0.5 --seed 3 --out " + b.string()).code == 0);
  REQUIRE(run("-q generate-data --minutes 0.5 --seed 4 --out " + c.string()).code == 0);
  CHECK(hammer::sha256_file(a) == hammer::sha256_file(b));
  CHECK(hammer::sha256_file(a) != hammer::sha256_file(c));
  std::ifstream f(a);
  std::string header;
  std::getline(f, header);
  int rows = 0;
  for (std::string line; std::getline(f, line);) ++rows;
  CHECK(rows == 600);
  REQUIRE(fs::exists(a.string() + ".manifest.json"));
  std::ifstream mf(a.string() + ".manifest.json");
  const auto m = nlohmann::json::parse(mf);
  CHECK(m["command"] == "generate-data");
  CHECK(m["outputs"][0]["sha256"] == hammer::sha256_file(a));
  CHECK(m.contains("config"));

  const Run j = run("--json -q generate-data --minutes 0.2 --seed 3 --out " + c.string());
  REQUIRE(j.code == 0);
  const auto out = nlohmann::json::parse(j.out);
  CHECK(out["rows"] == 240);
  CHECK(out.contains("coverage"));
}

TEST_CASE("train, evaluate and plan through the cli") {
  const fs::path d = scratch();
  const auto cfg = tiny_config(d).string();
  const auto data = (d / "data.csv").string(), model = (d / "m.model").string(), policy = (d / "p.policy").string();
  REQUIRE(run("-q generate-data --minutes 1 --seed 1 --out " + data).code == 0);
  REQUIRE(run("-q --config " + cfg + " train-dynmodel --dataset " + data + " --holdout-minutes 0.2 --out " + model).code ==
          0);
  CHECK(fs::exists(model));
  CHECK(fs::exists(model + ".history.csv"));

  const Run tp = run("--json -q --config " + cfg + " train-ppo --model " + model + " --out " + policy);
  REQUIRE(tp.code == 0);
  CHECK(fs::exists(policy));

  const auto prefix = (d / "ev").string();
  const Run ev = run("--json -q --config " + cfg + " eval --controller ppo --backend both --episodes 3 --model " + model +
                     " --policy " + policy + " --out " + prefix);
  REQUIRE(ev.code == 0);
  CHECK(fs::exists(prefix + "_model.json"));
  CHECK(fs::exists(prefix + "_plant.json"));
  CHECK(fs::exists(prefix + "_gap.csv"));
  CHECK(fs::exists(prefix + "_episode_list.json"));

  const auto ip = (d / "icem").string();
  REQUIRE(run("-q --config " + cfg + " eval --controller icem --backend model --episodes 2 --model " + model +
              " --diagnostics " + ip + "_diag.csv --out " + ip)
              .code == 0);
  CHECK(fs::exists(ip + "_diag.csv"));

  // Same episode list file gives the same report.
  const auto again = (d / "again").string();
  REQUIRE(run("-q --config " + cfg + " eval --controller ppo --backend plant --model " + model + " --policy " + policy +
              " --episode-list " + prefix + "_episode_list.json --out " + again)
              .code == 0);
  CHECK(hammer::sha256_file(again + "_episodes.csv") == hammer::sha256_file(prefix + "_plant_episodes.csv"));

  // missing policy file
  CHECK(run("-q eval --controller ppo --backend model --episodes 1 --model " + model + " --policy /nonexistent --out " +
            again)
            .code == 1);
}

TEST_CASE("null controller on the plant needs no model") {
  const fs::path d = scratch();
  const auto prefix = (d / "null").string();
  const Run r = run("--json -q --config " + tiny_config(d).string() +
                    " eval --controller null --backend plant --episodes 4 --out " + prefix);
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.contains("sr_0.02_0.02"));
}
