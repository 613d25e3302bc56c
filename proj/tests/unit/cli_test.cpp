#include <doctest.h>

#include <fstream>
#include <sstream>

#include "bprg/cli.hpp"
#include "support.hpp"

using namespace bprg;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kTiny = R"J({
  "seed": 3,
  "data": {"source": "blobs", "train_size": 300, "test_size": 100, "features": 6, "classes": 4},
  "model": {"layers": ["dense(6,12)", "relu", "dense(12,4)"]},
  "optimizer": {"pretrain_epochs": 3},
  "prune": {"s_final": 0.9, "finetune_epochs": 1},
  "regrow": {"s_end": 0.7, "finetune_epochs": 1, "scoring_batch_size": 50}
})J";

}  // namespace

TEST_CASE("usage errors exit 1") {
  auto none = cli({});
  CHECK(none.code == kExitUsage);
  CHECK(none.err.find("Usage") != std::string::npos);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"train", "--config"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("data errors exit 2") {
  const auto dir = testing::scratch_dir("cli-err");
  CHECK(cli({"train", "--config", (dir / "missing.json").string(), "--out", (dir / "x").string()}).code == kExitData);
  write(dir / "bad.csv", "garbage\n");
  CHECK(cli({"report", "--csv", (dir / "bad.csv").string(), "--svg", (dir / "o.svg").string()}).code == kExitData);
  write(dir / "junk.bprg", "XXXXjunk");
  CHECK(cli({"prune", "--ckpt", (dir / "junk.bprg").string(), "--sparsity", "0.5", "--out", (dir / "o").string()})
            .code == kExitData);
}

TEST_CASE("subcommand pipeline") {
  const auto dir = testing::scratch_dir("cli");
  write(dir / "c.json", kTiny);
  const auto cfg = (dir / "c.json").string();
  REQUIRE(cli({"train", "--config", cfg, "--out", (dir / "dense.bprg").string()}).code == kExitOk);
  REQUIRE(cli({"prune", "--ckpt", (dir / "dense.bprg").string(), "--sparsity", "0.9", "--mode", "iterative",
               "--steps", "3", "--config", cfg, "--out", (dir / "p.bprg").string()})
              .code == kExitOk);
  CHECK(cli({"prune", "--ckpt", (dir / "p.bprg").string(), "--sparsity", "0.5", "--out", (dir / "q.bprg").string()})
            .code == kExitUsage);
  CHECK(cli({"regrow", "--ckpt", (dir / "p.bprg").string(), "--to-sparsity", "0.7", "--criterion", "gradient", "--out",
             (dir / "g.bprg").string()})
            .code == kExitUsage);
  CHECK(cli({"regrow", "--ckpt", (dir / "p.bprg").string(), "--to-sparsity", "0.7", "--criterion", "gradient",
             "--config", cfg, "--out", (dir / "g.bprg").string()})
            .code == kExitOk);
  CHECK(cli({"--seed", "9", "regrow", "--ckpt", (dir / "p.bprg").string(), "--to-sparsity", "0.7", "--criterion",
             "random", "--init", "rewind", "--out", (dir / "r.bprg").string()})
            .code == kExitOk);
}

TEST_CASE("run writes artifacts deterministically") {
  const auto dir = testing::scratch_dir("cli-run");
  write(dir / "c.json", kTiny);
  const auto cfg = (dir / "c.json").string();
  REQUIRE(cli({"run", "--config", cfg, "--out-dir", (dir / "a").string()}).code == kExitOk);
  REQUIRE(cli({"run", "--config", cfg, "--out-dir", (dir / "b").string()}).code == kExitOk);
  for (const char* f : {"trajectory.csv", "trajectory.svg", "final.bprg"}) {
    CAPTURE(f);
    CHECK(std::filesystem::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  REQUIRE(cli({"--seed", "4", "run", "--config", cfg, "--out-dir", (dir / "c").string()}).code == kExitOk);
  CHECK(slurp(dir / "a" / "trajectory.csv") != slurp(dir / "c" / "trajectory.csv"));

  REQUIRE(cli({"report", "--csv", (dir / "a" / "trajectory.csv").string(), "--svg", (dir / "r.svg").string()}).code ==
          kExitOk);
  CHECK(slurp(dir / "r.svg") == slurp(dir / "a" / "trajectory.svg"));
}
