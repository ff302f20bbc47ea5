// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mctk/container.hpp"
#include "mctk/formats.hpp"
#include "support.hpp"

using namespace mctk;
using namespace mctk::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

Json last_json(const RunResult& r) {
  const auto end = r.out.find_last_not_of('\n');
  const auto start = r.out.rfind('\n', end);
  return Json::parse(r.out.substr(start == std::string::npos ? 0 : start + 1));
}

struct Pipeline {
  fs::path dir;

  explicit Pipeline(const std::string& tag) : dir(temp_dir(tag)) {
    Rng rng(11);
    for (const char* name : {"a", "b"}) write_json_file(dir / (std::string(name) + ".json"), to_json(random_stream(rng, 4)));
  }
  ~Pipeline() { fs::remove_all(dir); }

  std::string path(const std::string& name) const { return quote(dir / name); }

  int build(const std::string& out_dir, const std::string& env = "") const {
    int s = run(cli() + " gen-asset --seed 5 --subdiv 2 --out " + path("h.mcta")).status;
    if (s != 0) return s;
    s = run(cli() + " fuse --speech " + path("a.json") + " --head " + path("b.json") + " --identity " + path("a.json") +
            " --lighting " + path("b.json") + " --out " + path("p.json"))
            .status;
    if (s != 0) return s;
    return run(cli() + " render --params " + path("p.json") + " --asset " + path("h.mcta") + " --size 64 --out-dir " +
                   path(out_dir),
               env)
        .status;
  }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help exits zero and shows defaults") {
  for (const char* sub : {"gen-asset", "fuse", "render", "route", "audio-window", "keypoints", "lipcrop", "liploss",
                          "gradcheck", "config"}) {
    const auto r = run(cli() + " " + sub + " --help");
    CHECK_MESSAGE(r.status == 0, sub);
  }
  const auto render = run(cli() + " render --help");
  CHECK(render.out.find("512") != std::string::npos);
  CHECK(run(cli() + " --help").status == 0);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run(cli()).status == 2);
  CHECK(run(cli() + " frobnicate").status == 2);
  CHECK(run(cli() + " gradcheck --no-such-flag").status == 2);
  CHECK(run(cli() + " gen-asset --subdiv 9 --out /tmp/x.mcta").status == 2);
  const auto r = run(cli() + " render --params /nonexistent/p.json --asset /nonexistent/a.mcta --out-dir /tmp/mctk_x");
  CHECK(r.status == 2);
  CHECK(last_json(r)["ok"] == false);
  CHECK(last_json(r)["error"] == "io");
}

TEST_CASE("render pipeline is deterministic across runs and thread counts") {
  const Pipeline p("cli_pipe");
  REQUIRE(p.build("r1") == 0);
  REQUIRE(p.build("r2", "MCTK_THREADS=3") == 0);
  const Json manifest = read_json_file(p.dir / "r1" / "manifest.json");
  CHECK(manifest["frame_count"] == 4);
  for (const auto& f : manifest["files"]) {
    const std::string name = f.get<std::string>();
    CHECK(slurp(p.dir / "r1" / name) == slurp(p.dir / "r2" / name));
  }
  CHECK(slurp(p.dir / "r1" / "manifest.json") == slurp(p.dir / "r2" / "manifest.json"));
}

TEST_CASE("malformed asset exits 3 and writes nothing") {
  const Pipeline p("cli_bad");
  REQUIRE(p.build("r1") == 0);
  std::ofstream(p.dir / "bad.mcta", std::ios::binary) << "MCTX\x01";
  const auto r = run(cli() + " render --params " + p.path("p.json") + " --asset " + p.path("bad.mcta") +
                     " --out-dir " + p.path("r3"));
  CHECK(r.status == 3);
  CHECK(last_json(r)["error"] == "format");
  CHECK_FALSE(fs::exists(p.dir / "r3"));
}

TEST_CASE("route with every branch masked returns h") {
  const fs::path dir = temp_dir("cli_route");
  Rng rng(5);
  for (const char* name : {"h", "ref", "shade", "motion", "audio"}) {
    TensorContainer c;
    c.add("x", random_tensor<float>({2, 3, 2, 2}, rng));
    c.write(dir / (std::string(name) + ".mctk"));
  }
  const std::string base = cli() + " route --h " + quote(dir / "h.mctk") + " --ref " + quote(dir / "ref.mctk") +
                           " --shade " + quote(dir / "shade.mctk") + " --motion " + quote(dir / "motion.mctk") +
                           " --audio " + quote(dir / "audio.mctk");
  auto r = run(base + " --mask 0000 --out " + quote(dir / "o.mctk"));
  REQUIRE(r.status == 0);
  const auto h = TensorContainer::read(dir / "h.mctk").get_as<float>("x");
  CHECK(TensorContainer::read(dir / "o.mctk").get_as<float>("fused").bit_equal(h));

  r = run(base + " --mask 1011 --check --gates " + quote(dir / "g.mctk") + " --out " + quote(dir / "o.mctk"));
  REQUIRE(r.status == 0);
  CHECK(last_json(r)["max_gate_sum_error"].get<double>() < 1e-6);
  const auto g = TensorContainer::read(dir / "g.mctk").get_as<float>("gates");
  CHECK(g.shape() == Shape{2, 4, 3});
  for (std::size_t c = 0; c < 3; ++c) CHECK(g(0, 1, c) == 0.0f);

  r = run(base + " --seed 3 --save-router " + quote(dir / "rt") + " --out " + quote(dir / "o1.mctk"));
  REQUIRE(r.status == 0);
  r = run(base + " --seed 3 --router " + quote(dir / "rt") + " --out " + quote(dir / "o2.mctk"));
  REQUIRE(r.status == 0);
  CHECK(slurp(dir / "o1.mctk") == slurp(dir / "o2.mctk"));
  CHECK(run(base + " --mask 10x1 --out " + quote(dir / "o.mctk")).status == 2);
  fs::remove_all(dir);
}

TEST_CASE("liploss of identical directories is near zero") {
  const Pipeline p("cli_lip");
  REQUIRE(p.build("r1") == 0);
  const auto r = run(cli() + " liploss --pred " + p.path("r1") + " --gt " + p.path("r1") + " --tprime 2");
  REQUIRE(r.status == 0);
  CHECK(std::abs(last_json(r)["loss"].get<double>()) < 1e-12);
  CHECK(last_json(r)["frames"].size() == 2);
}

TEST_CASE("gradcheck passes") {
  const auto r = run(cli() + " gradcheck --seed 7");
  CHECK(r.status == 0);
  CHECK(last_json(r)["ok"] == true);
  CHECK(run(cli() + " gradcheck --seed 7 --tol 1e-30").status == 4);
}

TEST_CASE("config file supplies defaults") {
  const fs::path dir = temp_dir("cli_cfg");
  write_json_file(dir / "c.json", Json{{"image_size", 32}, {"seed", 9}});
  const auto r = run(cli() + " --config " + quote(dir / "c.json") + " config");
  REQUIRE(r.status == 0);
  CHECK(last_json(r)["config"]["image_size"] == 32);
  CHECK(run(cli() + " --config " + quote(dir / "c.json") + " render --help").out.find("32") != std::string::npos);
  write_json_file(dir / "bad.json", Json{{"image_sise", 32}});
  CHECK(run(cli() + " --config " + quote(dir / "bad.json") + " config").status == 3);
  fs::remove_all(dir);
}

}
